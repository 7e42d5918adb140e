#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "prpm/event_log.hpp"
#include "prpm/random.hpp"
#include "prpm/uncertainty.hpp"

namespace prpm {

/// Row-major feature matrix with binary labels (1 = negative outcome).
struct LabeledMatrix {
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> negative;

  std::size_t rows() const { return negative.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values).subspan(i * cols, cols);
  }
  void add_row(std::span<const double> features, bool is_negative);

  static LabeledMatrix from_instances(std::span<const PrefixInstance> instances);
};

struct TreeParams {
  int max_depth = 6;
  std::size_t min_leaf_count = 5;
  double feature_subsample_fraction = 0.7;
  /// Bootstrap sample size as a fraction of the training rows.
  double row_subsample_fraction = 1.0;

  bool operator==(const TreeParams&) const = default;
};

/// Binary CART tree grown on log-loss (entropy) reduction. Leaves hold the
/// Laplace-smoothed fraction of negative rows, (neg + 1) / (n + 2).
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    int left = -1;  // taken when x[feature] <= threshold
    int right = -1;
    double probability = 0.5;

    bool is_leaf() const { return feature < 0; }
    bool operator==(const Node&) const = default;
  };

  DecisionTree() : nodes_{Node{}} {}
  explicit DecisionTree(std::vector<Node> nodes);

  static DecisionTree constant(double probability);

  /// Grows a tree over `rows` (indices into `data`, repeats allowed).
  static DecisionTree fit(const LabeledMatrix& data, std::span<const std::size_t> rows,
                          const TreeParams& params, Rng& rng);

  double predict(std::span<const double> features) const;

  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;

  bool operator==(const DecisionTree&) const = default;

 private:
  std::vector<Node> nodes_;
};

struct MemberModel {
  std::uint64_t seed = 0;
  TreeParams params;
  DecisionTree tree;

  double predict(std::span<const double> features) const { return tree.predict(features); }

  bool operator==(const MemberModel&) const = default;
};

struct ScoredPrediction {
  std::vector<double> member_probs;
  UncertaintyReport report;
};

/// m >= 2 independently seeded members sharing one feature layout.
class Ensemble {
 public:
  Ensemble() = default;
  Ensemble(std::size_t feature_count, std::vector<MemberModel> members);

  /// Member i is fitted on its own bootstrap sample with seed
  /// derive_seed(master_seed, i). Members are trained concurrently; the
  /// result is identical to sequential training.
  static Ensemble train(const LabeledMatrix& data, std::size_t m, const TreeParams& params,
                        std::uint64_t master_seed);

  std::size_t size() const { return members_.size(); }
  std::size_t feature_count() const { return feature_count_; }
  const std::vector<MemberModel>& members() const { return members_; }

  /// Throws SchemaMismatch when `features` has the wrong length.
  std::vector<double> member_probabilities(std::span<const double> features) const;
  double predict(std::span<const double> features) const;

  /// Text format with hexadecimal floats; load(save(e)) predicts bit-identically.
  void save(std::ostream& out) const;
  static Ensemble load(std::istream& in);

  bool operator==(const Ensemble&) const = default;

 private:
  std::size_t feature_count_ = 0;
  std::vector<MemberModel> members_;
};

ScoredPrediction score_prefix(const Ensemble& ensemble, std::span<const double> features);

}  // namespace prpm
