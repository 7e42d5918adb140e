#include "prpm/event_log.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>

#include "prpm/config.hpp"
#include "prpm/csv.hpp"
#include "prpm/error.hpp"

namespace prpm {

namespace {

using namespace std::chrono;

std::optional<Timestamp> civil_to_ms(int y, unsigned mo, unsigned d, int h, int mi, int s,
                                     int ms) {
  year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60) {
    return std::nullopt;
  }
  auto tp = sys_days{ymd} + hours{h} + minutes{mi} + seconds{s} + milliseconds{ms};
  return duration_cast<milliseconds>(tp.time_since_epoch()).count();
}

bool read_digits(std::string_view text, std::size_t& pos, std::size_t count, int& out) {
  if (pos + count > text.size()) return false;
  int value = 0;
  for (std::size_t i = 0; i < count; ++i) {
    char c = text[pos + i];
    if (c < '0' || c > '9') return false;
    value = value * 10 + (c - '0');
  }
  pos += count;
  out = value;
  return true;
}

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0, ms = 0;
  auto expect = [&](char c) {
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  };
  if (!read_digits(text, pos, 4, y) || !expect('-') || !read_digits(text, pos, 2, mo) ||
      !expect('-') || !read_digits(text, pos, 2, d)) {
    return std::nullopt;
  }
  if (pos < text.size()) {
    if (text[pos] != 'T' && text[pos] != ' ') return std::nullopt;
    ++pos;
    if (!read_digits(text, pos, 2, h) || !expect(':') || !read_digits(text, pos, 2, mi) ||
        !expect(':') || !read_digits(text, pos, 2, s)) {
      return std::nullopt;
    }
    if (expect('.')) {
      int digits = 0;
      while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
        if (digits < 3) ms = ms * 10 + (text[pos] - '0');
        ++digits;
        ++pos;
      }
      if (digits == 0) return std::nullopt;
      for (int i = digits; i < 3; ++i) ms *= 10;
    }
  }
  int offset_minutes = 0;
  if (pos < text.size()) {
    if (text[pos] == 'Z') {
      ++pos;
    } else if (text[pos] == '+' || text[pos] == '-') {
      int sign = text[pos] == '-' ? -1 : 1;
      ++pos;
      int oh = 0, om = 0;
      if (!read_digits(text, pos, 2, oh)) return std::nullopt;
      expect(':');
      if (!read_digits(text, pos, 2, om)) return std::nullopt;
      offset_minutes = sign * (oh * 60 + om);
    }
  }
  if (pos != text.size()) return std::nullopt;
  auto local = civil_to_ms(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s, ms);
  if (!local) return std::nullopt;
  return *local - static_cast<Timestamp>(offset_minutes) * 60'000;
}

std::optional<double> parse_number(std::string_view text) {
  if (text.empty()) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

bool truthy(std::string_view value) {
  if (value == "true" || value == "True" || value == "TRUE" || value == "yes" ||
      value == "Yes") {
    return true;
  }
  auto number = parse_number(value);
  return number && *number != 0.0;
}

bool contains(const std::vector<std::string>& items, const std::string& value) {
  return std::find(items.begin(), items.end(), value) != items.end();
}

}  // namespace

std::string_view to_string(Outcome outcome) {
  return outcome == Outcome::negative ? "negative" : "positive";
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  if (text == "negative") return Outcome::negative;
  if (text == "positive") return Outcome::positive;
  return std::nullopt;
}

std::optional<Timestamp> parse_timestamp(std::string_view text, std::string_view format) {
  if (format == "iso8601") return parse_iso8601(text);
  if (format == "epoch_ms") {
    Timestamp value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
      return std::nullopt;
    }
    return value;
  }
  if (format == "epoch_s") {
    auto seconds_value = parse_number(text);
    if (!seconds_value) return std::nullopt;
    return static_cast<Timestamp>(std::llround(*seconds_value * 1000.0));
  }
  std::tm tm{};
  std::istringstream in{std::string(text)};
  in >> std::get_time(&tm, std::string(format).c_str());
  if (in.fail()) return std::nullopt;
  in >> std::ws;
  if (!in.eof()) return std::nullopt;
  return civil_to_ms(tm.tm_year + 1900, static_cast<unsigned>(tm.tm_mon + 1),
                     static_cast<unsigned>(tm.tm_mday), tm.tm_hour, tm.tm_min, tm.tm_sec, 0);
}

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  sys_time<milliseconds> tp{milliseconds{ts}};
  auto day_point = floor<days>(tp);
  year_month_day ymd{day_point};
  hh_mm_ss<milliseconds> tod{tp - day_point};
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<int>(tod.hours().count()),
                static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()),
                static_cast<int>(tod.subseconds().count()));
  return buf;
}

ParsedLog parse_log(const std::filesystem::path& path, const LogMapping& mapping) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open event log: " + path.string());
  return parse_log(in, mapping);
}

ParsedLog parse_log(std::istream& in, const LogMapping& mapping) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header)) throw ConfigError("event log is empty (no header row)");
  if (!header.empty() && header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0].erase(0, 3);

  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second) {
      throw ConfigError("duplicate column in event log header: " + header[i]);
    }
  }
  auto require = [&](const std::string& name, const char* key) {
    auto it = column.find(name);
    if (it == column.end()) {
      throw ConfigError(std::string("missing mandatory column '") + name + "' (" + key + ")");
    }
    return it->second;
  };
  const std::size_t case_idx = require(mapping.case_col, "case_col");
  const std::size_t activity_idx = require(mapping.activity_col, "activity_col");
  const std::size_t ts_idx = require(mapping.timestamp_col, "timestamp_col");
  std::optional<std::size_t> treatment_idx;
  if (!mapping.treatment_col.empty()) {
    treatment_idx = require(mapping.treatment_col, "treatment_col");
  }

  ParsedLog result;
  std::unordered_map<std::string, std::size_t> trace_of_case;
  std::vector<std::vector<bool>> treated_flags;  // per trace, per event (file order)
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    const std::size_t line = reader.record_line();
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    if (fields.size() != header.size()) {
      result.errors.push_back({line, "expected " + std::to_string(header.size()) +
                                         " fields, found " + std::to_string(fields.size())});
      continue;
    }
    if (fields[case_idx].empty()) {
      result.errors.push_back({line, "empty case id"});
      continue;
    }
    auto ts = parse_timestamp(fields[ts_idx], mapping.timestamp_format);
    if (!ts) {
      result.errors.push_back({line, "unparseable timestamp '" + fields[ts_idx] + "'"});
      continue;
    }
    Event event;
    event.case_id = fields[case_idx];
    event.activity = fields[activity_idx];
    event.timestamp = *ts;
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i == case_idx || i == activity_idx || i == ts_idx ||
          (treatment_idx && i == *treatment_idx) || fields[i].empty()) {
        continue;
      }
      if (auto number = parse_number(fields[i])) {
        event.attributes.emplace(header[i], *number);
      } else {
        event.attributes.emplace(header[i], fields[i]);
      }
    }
    auto [it, inserted] = trace_of_case.emplace(event.case_id, result.traces.size());
    if (inserted) {
      result.traces.push_back(Trace{event.case_id, {}, std::nullopt, false});
      treated_flags.emplace_back();
    }
    treated_flags[it->second].push_back(treatment_idx && truthy(fields[*treatment_idx]));
    result.traces[it->second].events.push_back(std::move(event));
  }

  for (std::size_t t = 0; t < result.traces.size(); ++t) {
    Trace& trace = result.traces[t];
    std::stable_sort(trace.events.begin(), trace.events.end(),
                     [](const Event& a, const Event& b) { return a.timestamp < b.timestamp; });
    int offers = 0;
    for (const Event& event : trace.events) {
      if (event.activity == mapping.offer_activity) ++offers;
      if (contains(mapping.negative_activities, event.activity)) {
        trace.outcome = Outcome::negative;
      } else if (contains(mapping.positive_activities, event.activity)) {
        trace.outcome = Outcome::positive;
      }
    }
    if (treatment_idx) {
      const auto& flags = treated_flags[t];
      trace.treated = std::any_of(flags.begin(), flags.end(), [](bool f) { return f; });
    } else {
      trace.treated = offers >= mapping.treatment_min_offers;
    }
    if (mapping.drop_outcome_events) {
      std::erase_if(trace.events, [&](const Event& e) {
        return contains(mapping.negative_activities, e.activity) ||
               contains(mapping.positive_activities, e.activity);
      });
    }
  }
  return result;
}

CleanResult clean(std::vector<Trace> traces) {
  CleanResult result;
  const std::size_t before = traces.size();
  std::erase_if(traces, [](const Trace& t) { return !t.outcome || t.events.empty(); });
  result.removed = before - traces.size();
  result.traces = std::move(traces);
  return result;
}

std::string_view to_string(Aggregate agg) {
  switch (agg) {
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
    case Aggregate::mean: return "mean";
    case Aggregate::sum: return "sum";
    case Aggregate::last: return "last";
  }
  return "?";
}

std::optional<Aggregate> parse_aggregate(std::string_view text) {
  for (Aggregate agg : {Aggregate::min, Aggregate::max, Aggregate::mean, Aggregate::sum,
                        Aggregate::last}) {
    if (to_string(agg) == text) return agg;
  }
  return std::nullopt;
}

std::vector<std::string> FeatureSchema::feature_names() const {
  std::vector<std::string> names = control_features;
  for (const auto& activity : activity_counts) names.push_back("act:" + activity);
  names.push_back("act:" + std::string(kOtherActivity));
  for (const auto& [attribute, agg] : numeric_aggregates) {
    names.push_back("num:" + attribute + ":" + std::string(to_string(agg)));
  }
  return names;
}

FeatureSchema FeatureSchema::from_feature_names(std::span<const std::string> names,
                                                std::string offer_activity) {
  FeatureSchema schema;
  schema.offer_activity = std::move(offer_activity);
  const auto& controls = schema.control_features;
  if (names.size() < controls.size() + 1 ||
      !std::equal(controls.begin(), controls.end(), names.begin())) {
    throw ConfigError("feature header does not start with the control features");
  }
  const std::string other = "act:" + std::string(kOtherActivity);
  bool seen_other = false;
  for (std::size_t i = controls.size(); i < names.size(); ++i) {
    const std::string& name = names[i];
    if (!seen_other) {
      if (name == other) {
        seen_other = true;
      } else if (name.rfind("act:", 0) == 0) {
        schema.activity_counts.push_back(name.substr(4));
      } else {
        throw ConfigError("unexpected feature name: " + name);
      }
      continue;
    }
    auto colon = name.rfind(':');
    if (name.rfind("num:", 0) != 0 || colon <= 4) {
      throw ConfigError("unexpected feature name: " + name);
    }
    auto agg = parse_aggregate(std::string_view(name).substr(colon + 1));
    if (!agg) throw ConfigError("unknown aggregate in feature name: " + name);
    schema.numeric_aggregates.emplace_back(name.substr(4, colon - 4), *agg);
  }
  if (!seen_other) throw ConfigError("feature header lacks the other-activity slot");
  return schema;
}

void FeatureSchema::save(std::ostream& out) const {
  auto names = feature_names();
  out << "schema " << names.size() << '\n';
  out << std::quoted(offer_activity) << '\n';
  for (const auto& name : names) out << std::quoted(name) << '\n';
}

FeatureSchema FeatureSchema::load(std::istream& in) {
  std::string tag;
  std::size_t count = 0;
  if (!(in >> tag >> count) || tag != "schema") throw ConfigError("malformed schema block");
  std::string offer;
  in >> std::quoted(offer);
  std::vector<std::string> names(count);
  for (auto& name : names) in >> std::quoted(name);
  if (!in) throw ConfigError("truncated schema block");
  return from_feature_names(names, offer);
}

FeatureSchema build_schema(std::span<const Trace> traces, std::string offer_activity) {
  std::set<std::string> activities;
  std::set<std::string> numeric;
  for (const Trace& trace : traces) {
    for (const Event& event : trace.events) {
      activities.insert(event.activity);
      for (const auto& [name, value] : event.attributes) {
        if (std::holds_alternative<double>(value)) numeric.insert(name);
      }
    }
  }
  FeatureSchema schema;
  schema.offer_activity = std::move(offer_activity);
  schema.activity_counts.assign(activities.begin(), activities.end());
  for (const auto& name : numeric) {
    for (Aggregate agg : {Aggregate::min, Aggregate::max, Aggregate::mean, Aggregate::sum,
                          Aggregate::last}) {
      schema.numeric_aggregates.emplace_back(name, agg);
    }
  }
  return schema;
}

std::vector<double> encode(std::span<const Event> prefix, const FeatureSchema& schema) {
  std::vector<double> out(schema.size(), 0.0);
  if (prefix.empty()) return out;

  std::size_t slot = 0;
  double offers = 0;
  for (const Event& e : prefix) {
    if (e.activity == schema.offer_activity) offers += 1;
  }
  for (const auto& control : schema.control_features) {
    if (control == "event_number") {
      out[slot] = static_cast<double>(prefix.size());
    } else if (control == "elapsed_time_seconds") {
      out[slot] = static_cast<double>(prefix.back().timestamp - prefix.front().timestamp) / 1000.0;
    } else if (control == "offer_count") {
      out[slot] = offers;
    }
    ++slot;
  }

  const std::size_t activity_base = slot;
  const std::size_t other_slot = activity_base + schema.activity_counts.size();
  for (const Event& e : prefix) {
    auto it = std::find(schema.activity_counts.begin(), schema.activity_counts.end(), e.activity);
    if (it == schema.activity_counts.end()) {
      out[other_slot] += 1;
    } else {
      out[activity_base + static_cast<std::size_t>(it - schema.activity_counts.begin())] += 1;
    }
  }
  slot = other_slot + 1;

  struct Stats {
    double min = 0, max = 0, sum = 0, last = 0;
    std::size_t count = 0;
  };
  std::map<std::string_view, Stats> stats;
  for (const auto& [attribute, agg] : schema.numeric_aggregates) {
    auto [it, inserted] = stats.try_emplace(attribute);
    if (!inserted) continue;
    Stats& s = it->second;
    for (const Event& e : prefix) {
      auto found = e.attributes.find(attribute);
      if (found == e.attributes.end()) continue;
      const double* value = std::get_if<double>(&found->second);
      if (!value) continue;
      if (s.count == 0) {
        s.min = s.max = *value;
      } else {
        s.min = std::min(s.min, *value);
        s.max = std::max(s.max, *value);
      }
      s.sum += *value;
      s.last = *value;
      ++s.count;
    }
  }
  for (const auto& [attribute, agg] : schema.numeric_aggregates) {
    const Stats& s = stats.find(attribute)->second;
    double value = 0;
    if (s.count > 0) {
      switch (agg) {
        case Aggregate::min: value = s.min; break;
        case Aggregate::max: value = s.max; break;
        case Aggregate::mean: value = s.sum / static_cast<double>(s.count); break;
        case Aggregate::sum: value = s.sum; break;
        case Aggregate::last: value = s.last; break;
      }
    }
    out[slot++] = value;
  }
  return out;
}

std::size_t prefix_length_cap(std::span<const std::size_t> lengths, double fraction) {
  if (lengths.empty()) return 0;
  std::vector<std::size_t> sorted(lengths.begin(), lengths.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  // The epsilon keeps products like 0.9 * 10 from rounding up a full rank.
  auto rank = static_cast<std::size_t>(std::ceil(fraction * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

std::vector<PrefixGroup> extract_prefixes(std::span<const Trace> traces, double max_percentile,
                                          const FeatureSchema& schema) {
  if (!(max_percentile > 0.0 && max_percentile <= 1.0)) {
    throw ConfigError("max_percentile must lie in (0, 1]");
  }
  std::vector<std::size_t> lengths;
  lengths.reserve(traces.size());
  for (const Trace& t : traces) lengths.push_back(t.events.size());
  const std::size_t cap = prefix_length_cap(lengths, max_percentile);

  std::vector<PrefixGroup> groups(cap);
  for (std::size_t k = 0; k < cap; ++k) groups[k].prefix_len = k + 1;
  for (const Trace& trace : traces) {
    if (!trace.outcome) throw DataError("trace '" + trace.case_id + "' has no outcome label");
    const std::size_t limit = std::min(trace.events.size(), cap);
    std::span<const Event> events(trace.events);
    for (std::size_t k = 1; k <= limit; ++k) {
      PrefixInstance instance;
      instance.case_id = trace.case_id;
      instance.prefix_len = k;
      instance.features = encode(events.first(k), schema);
      instance.label = *trace.outcome;
      instance.treated = trace.treated;
      instance.as_of = events[k - 1].timestamp;
      groups[k - 1].instances.push_back(std::move(instance));
    }
  }
  std::erase_if(groups, [](const PrefixGroup& g) { return g.instances.empty(); });
  return groups;
}

std::vector<PrefixInstance> flatten(const std::vector<PrefixGroup>& groups) {
  std::vector<PrefixInstance> out;
  for (const auto& group : groups) {
    out.insert(out.end(), group.instances.begin(), group.instances.end());
  }
  return out;
}

TraceSplit temporal_split(std::vector<Trace> traces, SplitFractions fractions) {
  if (!(fractions.train > 0 && fractions.valid > 0 && fractions.test > 0)) {
    throw ConfigError("split fractions must all be positive");
  }
  if (std::abs(fractions.train + fractions.valid + fractions.test - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
  if (traces.size() < 3) {
    throw DataError("temporal split needs at least 3 traces, got " +
                    std::to_string(traces.size()));
  }
  std::sort(traces.begin(), traces.end(), [](const Trace& a, const Trace& b) {
    if (a.start() != b.start()) return a.start() < b.start();
    return a.case_id < b.case_id;
  });
  const auto n = static_cast<long long>(traces.size());
  long long train_end = std::llround(fractions.train * static_cast<double>(n));
  train_end = std::clamp(train_end, 1LL, n - 2);
  long long valid_end = std::llround((fractions.train + fractions.valid) * static_cast<double>(n));
  valid_end = std::clamp(valid_end, train_end + 1, n - 1);

  TraceSplit split;
  auto begin = std::make_move_iterator(traces.begin());
  split.train.assign(begin, begin + train_end);
  split.valid.assign(begin + train_end, begin + valid_end);
  split.test.assign(begin + valid_end, std::make_move_iterator(traces.end()));
  return split;
}

void write_prefix_log(std::ostream& out, const FeatureSchema& schema,
                      std::span<const PrefixInstance> instances) {
  std::vector<std::string> row{"case_id", "prefix_len", "as_of", "label", "treated"};
  for (auto& name : schema.feature_names()) row.push_back(std::move(name));
  csv::write_row(out, row);
  for (const PrefixInstance& inst : instances) {
    if (inst.features.size() != schema.size()) {
      throw SchemaMismatch("prefix of case '" + inst.case_id + "' has " +
                           std::to_string(inst.features.size()) + " features, schema has " +
                           std::to_string(schema.size()));
    }
    row.clear();
    row.push_back(inst.case_id);
    row.push_back(std::to_string(inst.prefix_len));
    row.push_back(format_timestamp(inst.as_of));
    row.emplace_back(to_string(inst.label));
    row.push_back(inst.treated ? "1" : "0");
    for (double v : inst.features) row.push_back(csv::format_double(v));
    csv::write_row(out, row);
  }
}

PrefixLog read_prefix_log(std::istream& in) {
  csv::Reader reader(in);
  std::vector<std::string> header;
  if (!reader.next(header) || header.size() < 5 || header[0] != "case_id") {
    throw ConfigError("not a prefix log: bad header");
  }
  PrefixLog log;
  log.feature_names.assign(header.begin() + 5, header.end());
  std::vector<std::string> fields;
  while (reader.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != header.size()) {
      throw DataError("prefix log line " + std::to_string(reader.record_line()) +
                      ": wrong field count");
    }
    PrefixInstance inst;
    inst.case_id = fields[0];
    inst.prefix_len = static_cast<std::size_t>(std::stoull(fields[1]));
    auto ts = parse_timestamp(fields[2], "iso8601");
    auto label = parse_outcome(fields[3]);
    if (!ts || !label) {
      throw DataError("prefix log line " + std::to_string(reader.record_line()) +
                      ": bad timestamp or label");
    }
    inst.as_of = *ts;
    inst.label = *label;
    inst.treated = fields[4] == "1";
    for (std::size_t i = 5; i < fields.size(); ++i) {
      auto value = parse_number(fields[i]);
      inst.features.push_back(value ? *value : 0.0);
    }
    log.instances.push_back(std::move(inst));
  }
  return log;
}

}  // namespace prpm
