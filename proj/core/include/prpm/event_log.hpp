#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace prpm {

/// Milliseconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

enum class Outcome { positive, negative };

std::string_view to_string(Outcome outcome);
std::optional<Outcome> parse_outcome(std::string_view text);

/// Parses a timestamp. `format` is "iso8601" (YYYY-MM-DD[T ]hh:mm:ss[.fff][Z|+hh:mm]),
/// "epoch_ms", "epoch_s", or a strftime-style pattern understood by std::get_time.
std::optional<Timestamp> parse_timestamp(std::string_view text, std::string_view format);

/// ISO-8601 UTC text with millisecond precision, e.g. 2016-01-01T09:51:15.304Z.
std::string format_timestamp(Timestamp ts);

using AttributeValue = std::variant<double, std::string>;

struct Event {
  std::string case_id;
  std::string activity;
  Timestamp timestamp = 0;
  std::map<std::string, AttributeValue> attributes;
};

struct Trace {
  std::string case_id;
  std::vector<Event> events;
  /// Unset until an outcome-defining activity has been observed; `clean`
  /// drops traces where it stays unset.
  std::optional<Outcome> outcome;
  bool treated = false;

  Timestamp start() const { return events.front().timestamp; }
};

/// Column mapping and labeling rules for a raw event log.
struct LogMapping {
  std::string case_col = "case_id";
  std::string activity_col = "activity";
  std::string timestamp_col = "timestamp";
  std::string timestamp_format = "iso8601";

  /// Terminal activities that define the case outcome; the last such event
  /// in a trace wins.
  std::vector<std::string> positive_activities{"A_Pending"};
  std::vector<std::string> negative_activities{"A_Cancelled", "A_Denied"};

  /// Activity counted by the offer_count feature and the default treatment rule.
  std::string offer_activity = "O_Create Offer";

  /// When set, a case is treated iff any of its events carries a truthy value
  /// in this column. Otherwise treated iff offer_count >= treatment_min_offers.
  std::string treatment_col;
  int treatment_min_offers = 2;

  /// Remove the outcome-defining events from the trace once the label is
  /// read, so that no prefix contains its own label.
  bool drop_outcome_events = true;
};

struct RecordError {
  std::size_t line = 0;
  std::string message;
};

struct ParsedLog {
  std::vector<Trace> traces;
  std::vector<RecordError> errors;
};

/// Throws ConfigError when a mandatory column is missing and IoError when the
/// file cannot be read. Malformed rows are skipped and reported in `errors`.
ParsedLog parse_log(const std::filesystem::path& path, const LogMapping& mapping);
ParsedLog parse_log(std::istream& in, const LogMapping& mapping);

struct CleanResult {
  std::vector<Trace> traces;
  std::size_t removed = 0;
};

/// Drops traces without an outcome label (incomplete cases) or without events.
CleanResult clean(std::vector<Trace> traces);

enum class Aggregate { min, max, mean, sum, last };

std::string_view to_string(Aggregate agg);
std::optional<Aggregate> parse_aggregate(std::string_view text);

/// Fixed-length layout of the aggregate encoding:
/// control features, one count per known activity plus an "other" slot,
/// then every (numeric attribute, aggregate) pair.
struct FeatureSchema {
  static constexpr std::string_view kOtherActivity = "__other__";

  std::vector<std::string> control_features{"event_number", "elapsed_time_seconds",
                                            "offer_count"};
  std::vector<std::string> activity_counts;
  std::vector<std::pair<std::string, Aggregate>> numeric_aggregates;
  std::string offer_activity = "O_Create Offer";

  std::size_t size() const {
    return control_features.size() + activity_counts.size() + 1 + numeric_aggregates.size();
  }

  std::vector<std::string> feature_names() const;
  static FeatureSchema from_feature_names(std::span<const std::string> names,
                                          std::string offer_activity);

  void save(std::ostream& out) const;
  static FeatureSchema load(std::istream& in);

  bool operator==(const FeatureSchema&) const = default;
};

/// Schema over the activities and numeric attributes observed in `traces`,
/// in lexicographic order.
FeatureSchema build_schema(std::span<const Trace> traces, std::string offer_activity);

/// Encodes the first events of a case. Pure: identical input gives a
/// bit-identical vector.
std::vector<double> encode(std::span<const Event> prefix, const FeatureSchema& schema);

struct PrefixInstance {
  std::string case_id;
  std::size_t prefix_len = 0;
  std::vector<double> features;
  Outcome label = Outcome::positive;
  bool treated = false;
  Timestamp as_of = 0;
};

struct PrefixGroup {
  std::size_t prefix_len = 0;
  std::vector<PrefixInstance> instances;
};

/// Nearest-rank quantile (rank = ceil(fraction * n)) of the trace lengths.
std::size_t prefix_length_cap(std::span<const std::size_t> lengths, double fraction);

/// Prefixes of length 1..min(len, cap) for every trace, grouped by length in
/// ascending order. Traces must be cleaned (outcome set).
std::vector<PrefixGroup> extract_prefixes(std::span<const Trace> traces, double max_percentile,
                                          const FeatureSchema& schema);

std::vector<PrefixInstance> flatten(const std::vector<PrefixGroup>& groups);

struct SplitFractions {
  double train = 0.6;
  double valid = 0.2;
  double test = 0.2;
};

struct TraceSplit {
  std::vector<Trace> train;
  std::vector<Trace> valid;
  std::vector<Trace> test;
};

/// Orders traces by (first timestamp, case_id) and cuts at the cumulative
/// fractions. Throws DataError on fewer than three traces and ConfigError on
/// non-positive fractions or fractions not summing to one.
TraceSplit temporal_split(std::vector<Trace> traces, SplitFractions fractions);

/// Prefix log CSV: case_id,prefix_len,as_of,label,treated,<feature names...>.
void write_prefix_log(std::ostream& out, const FeatureSchema& schema,
                      std::span<const PrefixInstance> instances);

struct PrefixLog {
  std::vector<std::string> feature_names;
  std::vector<PrefixInstance> instances;
};

PrefixLog read_prefix_log(std::istream& in);

}  // namespace prpm
