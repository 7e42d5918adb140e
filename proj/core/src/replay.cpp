#include "prpm/replay.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <set>
#include <thread>
#include <unordered_map>

#include "prpm/csv.hpp"
#include "prpm/error.hpp"

namespace prpm {

namespace {

const std::vector<std::string> kSummaryHeader{"policy",        "resources",
                                              "treated_count", "total_gain",
                                              "gain_per_treated", "outcome_aware_gain"};

const std::vector<std::string> kLedgerHeader{
    "case_id", "treated_at_prefix", "treated_at", "resource_id", "release_at", "avg_pred",
    "total_uncer", "cate", "c_gain", "adj_gain", "decision", "outcome_aware_gain"};

template <typename T>
T parse_number(const std::string& text, const char* what) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw DataError(std::string("bad ") + what + " value '" + text + "'");
  }
  return value;
}

void expect_header(csv::Reader& reader, const std::vector<std::string>& header,
                   const char* what) {
  std::vector<std::string> fields;
  if (!reader.next(fields) || fields != header) {
    throw DataError(std::string("unexpected ") + what + " header");
  }
}

Decision parse_decision(const std::string& text) {
  if (text == "Treat") return Decision::treat;
  if (text == "Wait") return Decision::wait;
  if (text == "Neutral") return Decision::neutral;
  throw DataError("bad decision '" + text + "'");
}

ScoredCase score_case(const Trace& trace, const ModelBundle& bundle, std::size_t knn_k) {
  ScoredCase sc;
  sc.case_id = trace.case_id;
  sc.arrival = trace.events.empty() ? 0 : trace.start();
  sc.label = trace.outcome;
  for (const Event& e : trace.events) sc.event_times.push_back(e.timestamp);
  const std::span<const Event> events(trace.events);
  for (std::size_t len = 1; len < events.size(); ++len) {
    const std::vector<double> features = encode(events.first(len), bundle.schema);
    ScoredPrefix p;
    p.as_of = events[len - 1].timestamp;
    p.current = score_triple(bundle.ensemble, bundle.uplift, features);
    p.future = bundle.index.future_scores(features, len, p.current, knn_k);
    sc.prefixes.push_back(p);
  }
  return sc;
}

}  // namespace

std::vector<ReplayEvent> replay_events(std::span<const Trace> traces) {
  std::vector<ReplayEvent> events;
  for (const Trace& t : traces) {
    for (std::size_t j = 0; j < t.events.size(); ++j) {
      events.push_back(ReplayEvent{t.events[j].timestamp, t.case_id, j + 1});
    }
  }
  std::sort(events.begin(), events.end(), [](const ReplayEvent& a, const ReplayEvent& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.case_id != b.case_id) return a.case_id < b.case_id;
    return a.prefix_len < b.prefix_len;
  });
  return events;
}

std::vector<ScoredCase> score_cases(std::span<const Trace> traces, const ModelBundle& bundle,
                                    std::size_t knn_k) {
  const std::size_t n = bundle.schema.size();
  if (bundle.ensemble.feature_count() != n || bundle.uplift.feature_count() != n) {
    throw SchemaMismatch("models expect a different feature layout than the schema");
  }
  std::vector<ScoredCase> out(traces.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t i = next++; i < traces.size() && !failed; i = next++) {
      try {
        out[i] = score_case(traces[i], bundle, knn_k);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const std::size_t threads =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 16);
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

ReplayReport run(std::span<const ScoredCase> cases, const PolicyConfig& policy,
                 const PoolConfig& pool_config, const CostParams& costs, std::uint64_t seed) {
  struct Step {
    Timestamp time;
    std::size_t case_index;
    std::size_t prefix_len;
  };
  std::vector<Step> steps;
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    if (!by_id.emplace(cases[i].case_id, i).second) {
      throw DataError("duplicate case id '" + cases[i].case_id + "' in replay");
    }
    for (std::size_t j = 0; j < cases[i].event_times.size(); ++j) {
      steps.push_back(Step{cases[i].event_times[j], i, j + 1});
    }
  }
  std::sort(steps.begin(), steps.end(), [&](const Step& a, const Step& b) {
    if (a.time != b.time) return a.time < b.time;
    if (a.case_index != b.case_index) return cases[a.case_index].case_id < cases[b.case_index].case_id;
    return a.prefix_len < b.prefix_len;
  });

  ReplayReport report;
  report.policy_name = policy.name;
  report.resources = pool_config.capacity;

  ResourcePool pool(pool_config.capacity);
  Rng rng(seed);
  std::vector<std::size_t> current_len(cases.size(), 0);
  std::vector<bool> treated(cases.size(), false);
  std::set<std::size_t> active;

  for (std::size_t s = 0; s < steps.size();) {
    const Timestamp now = steps[s].time;
    pool.release_due(now);
    for (; s < steps.size() && steps[s].time == now; ++s) {
      const std::size_t i = steps[s].case_index;
      current_len[i] = steps[s].prefix_len;
      if (!treated[i] && current_len[i] <= cases[i].prefixes.size()) {
        active.insert(i);
      } else {
        active.erase(i);
      }
    }
    if (pool.free_count() == 0 || active.empty()) continue;

    std::vector<Candidate> candidates;
    candidates.reserve(active.size());
    for (std::size_t i : active) {
      const ScoredPrefix& p = cases[i].prefixes[current_len[i] - 1];
      candidates.push_back(
          make_candidate(cases[i].case_id, cases[i].arrival, p.current, p.future, costs));
    }
    candidates = rank(filter(std::move(candidates), policy), policy.mode);

    for (const Candidate& c : candidates) {
      if (pool.free_count() == 0) break;
      const std::size_t i = by_id.at(c.case_id);
      const auto grant = pool.try_acquire(now, pool_config.duration, rng);
      if (!grant) break;
      LedgerEntry e;
      e.case_id = c.case_id;
      e.treated_at_prefix = current_len[i];
      e.treated_at = now;
      e.resource_id = grant->resource_id;
      e.release_at = grant->release_at;
      e.avg_pred = c.current.avg_pred;
      e.total_uncer = c.current.total_uncer;
      e.cate = c.current.cate;
      e.c_gain = c.gains.c_gain;
      e.adj_gain = c.gains.adj_gain;
      e.decision = c.gains.decision;
      const bool negative = cases[i].label == Outcome::negative;
      e.outcome_aware_gain = (negative ? c.current.cate * costs.c_uout : 0.0) - costs.c_t1;
      report.total_gain += e.c_gain;
      report.outcome_aware_gain += e.outcome_aware_gain;
      report.ledger.push_back(std::move(e));
      treated[i] = true;
      active.erase(i);
    }
  }

  report.treated_count = report.ledger.size();
  report.gain_per_treated =
      report.treated_count ? report.total_gain / static_cast<double>(report.treated_count) : 0.0;
  return report;
}

std::vector<ReplayReport> sweep(std::span<const ScoredCase> cases,
                                std::span<const PolicyConfig> policies,
                                std::span<const std::size_t> resource_levels,
                                const DurationDist& duration, const CostParams& costs,
                                std::uint64_t seed) {
  std::vector<ReplayReport> reports;
  reports.reserve(policies.size() * resource_levels.size());
  for (const PolicyConfig& policy : policies) {
    for (std::size_t r : resource_levels) {
      reports.push_back(run(cases, policy, PoolConfig{r, duration}, costs, seed));
    }
  }
  return reports;
}

std::string ledger_file_name(const ReplayReport& report) {
  std::string name = report.policy_name;
  for (char& ch : name) {
    const bool safe = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
    if (!safe) ch = '_';
  }
  return name + "_R" + std::to_string(report.resources) + ".csv";
}

void write_summary(std::ostream& out, std::span<const ReplayReport> reports) {
  csv::write_row(out, kSummaryHeader);
  for (const ReplayReport& r : reports) {
    const std::vector<std::string> row{r.policy_name,
                                       std::to_string(r.resources),
                                       std::to_string(r.treated_count),
                                       csv::format_double(r.total_gain),
                                       csv::format_double(r.gain_per_treated),
                                       csv::format_double(r.outcome_aware_gain)};
    csv::write_row(out, row);
  }
}

void write_ledger(std::ostream& out, std::span<const LedgerEntry> ledger) {
  csv::write_row(out, kLedgerHeader);
  for (const LedgerEntry& e : ledger) {
    const std::vector<std::string> row{e.case_id,
                                       std::to_string(e.treated_at_prefix),
                                       std::to_string(e.treated_at),
                                       std::to_string(e.resource_id),
                                       std::to_string(e.release_at),
                                       csv::format_double(e.avg_pred),
                                       csv::format_double(e.total_uncer),
                                       csv::format_double(e.cate),
                                       csv::format_double(e.c_gain),
                                       csv::format_double(e.adj_gain),
                                       std::string(to_string(e.decision)),
                                       csv::format_double(e.outcome_aware_gain)};
    csv::write_row(out, row);
  }
}

void emit_report(std::span<const ReplayReport> reports, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir / "ledgers", ec);
  if (ec) throw IoError("cannot create " + (dir / "ledgers").string() + ": " + ec.message());
  auto open = [](const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
  };
  {
    auto out = open(dir / "summary.csv");
    write_summary(out, reports);
    if (!out) throw IoError("failed writing " + (dir / "summary.csv").string());
  }
  for (const ReplayReport& r : reports) {
    const auto path = dir / "ledgers" / ledger_file_name(r);
    auto out = open(path);
    write_ledger(out, r.ledger);
    if (!out) throw IoError("failed writing " + path.string());
  }
}

std::vector<ReplayReport> read_summary(std::istream& in) {
  csv::Reader reader(in);
  expect_header(reader, kSummaryHeader, "summary");
  std::vector<ReplayReport> reports;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != kSummaryHeader.size()) throw DataError("summary row has wrong width");
    ReplayReport r;
    r.policy_name = f[0];
    r.resources = parse_number<std::size_t>(f[1], "resources");
    r.treated_count = parse_number<std::size_t>(f[2], "treated_count");
    r.total_gain = parse_number<double>(f[3], "total_gain");
    r.gain_per_treated = parse_number<double>(f[4], "gain_per_treated");
    r.outcome_aware_gain = parse_number<double>(f[5], "outcome_aware_gain");
    reports.push_back(std::move(r));
  }
  return reports;
}

std::vector<LedgerEntry> read_ledger(std::istream& in) {
  csv::Reader reader(in);
  expect_header(reader, kLedgerHeader, "ledger");
  std::vector<LedgerEntry> ledger;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f.size() != kLedgerHeader.size()) throw DataError("ledger row has wrong width");
    LedgerEntry e;
    e.case_id = f[0];
    e.treated_at_prefix = parse_number<std::size_t>(f[1], "treated_at_prefix");
    e.treated_at = parse_number<Timestamp>(f[2], "treated_at");
    e.resource_id = parse_number<std::size_t>(f[3], "resource_id");
    e.release_at = parse_number<Timestamp>(f[4], "release_at");
    e.avg_pred = parse_number<double>(f[5], "avg_pred");
    e.total_uncer = parse_number<double>(f[6], "total_uncer");
    e.cate = parse_number<double>(f[7], "cate");
    e.c_gain = parse_number<double>(f[8], "c_gain");
    e.adj_gain = parse_number<double>(f[9], "adj_gain");
    e.decision = parse_decision(f[10]);
    e.outcome_aware_gain = parse_number<double>(f[11], "outcome_aware_gain");
    ledger.push_back(std::move(e));
  }
  return ledger;
}

}  // namespace prpm
