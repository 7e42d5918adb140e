#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <vector>

#include "prpm/causal.hpp"
#include "prpm/ensemble.hpp"
#include "prpm/event_log.hpp"

namespace prpm {

/// Scores of one prefix: negative-outcome probability, total uncertainty
/// (bits) and estimated treatment effect.
struct ScoreTriple {
  double avg_pred = 0;
  double total_uncer = 0;
  double cate = 0;

  bool operator==(const ScoreTriple&) const = default;
};

/// Current-state scores from the fitted models.
ScoreTriple score_triple(const Ensemble& ensemble, const UpliftModel& uplift,
                         std::span<const double> features);

/// Per-feature min-max scaling to [0, 1]; constant features map to 0.
class MinMaxScaler {
 public:
  MinMaxScaler() = default;
  MinMaxScaler(std::vector<double> lo, std::vector<double> hi);

  static MinMaxScaler fit(const LabeledMatrix& data);
  static MinMaxScaler fit(std::span<const PrefixInstance> instances);
  /// Scaler that leaves `dims` features unchanged.
  static MinMaxScaler identity(std::size_t dims);

  std::vector<double> transform(std::span<const double> features) const;
  std::size_t size() const { return lo_.size(); }

  void save(std::ostream& out) const;
  static MinMaxScaler load(std::istream& in);

  bool operator==(const MinMaxScaler&) const = default;

 private:
  std::vector<double> lo_;
  std::vector<double> hi_;
};

/// Scored historical prefixes bucketed by prefix length. Entries with
/// identical raw feature vectors are merged and carry a multiplicity.
class HistoryIndex {
 public:
  struct Entry {
    std::vector<double> features;
    std::vector<double> scaled;
    ScoreTriple scores;
    std::size_t frequency = 1;
  };

  HistoryIndex() = default;
  explicit HistoryIndex(MinMaxScaler scaler) : scaler_(std::move(scaler)) {}

  /// Adds `frequency` occurrences of a prefix of length k. An exact duplicate
  /// of an existing vector only increases that entry's frequency.
  void add(std::size_t prefix_len, std::span<const double> features, const ScoreTriple& scores,
           std::size_t frequency = 1);

  /// Empty span when no prefix of that length was indexed.
  std::span<const Entry> bucket(std::size_t prefix_len) const;
  std::size_t entry_count() const;
  const MinMaxScaler& scaler() const { return scaler_; }

  /// Projected scores one event ahead: over the `knn_k` entries of bucket k+1
  /// nearest (Euclidean, on scaled features) to `current_features`, the mean
  /// of each score weighted by frequency / (1 + distance). Returns `current`
  /// unchanged when bucket k+1 is empty.
  ScoreTriple future_scores(std::span<const double> current_features, std::size_t prefix_len,
                            const ScoreTriple& current, std::size_t knn_k) const;

  void save(std::ostream& out) const;
  static HistoryIndex load(std::istream& in);

 private:
  MinMaxScaler scaler_;
  std::map<std::size_t, std::vector<Entry>> buckets_;
  std::map<std::size_t, std::map<std::vector<double>, std::size_t>> lookup_;
};

/// Scores every training prefix once and indexes it. The scaler is fitted on
/// the same prefixes.
HistoryIndex build_index(const std::vector<PrefixGroup>& training, const Ensemble& ensemble,
                         const UpliftModel& uplift);

}  // namespace prpm
