#include "prpm/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

#include "prpm/error.hpp"

namespace prpm {

namespace {

double nat_entropy(std::size_t negative, std::size_t total) {
  if (total == 0 || negative == 0 || negative == total) return 0.0;
  const double p = static_cast<double>(negative) / static_cast<double>(total);
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

double leaf_probability(std::size_t negative, std::size_t total) {
  return (static_cast<double>(negative) + 1.0) / (static_cast<double>(total) + 2.0);
}

class TreeBuilder {
 public:
  TreeBuilder(const LabeledMatrix& data, const TreeParams& params, Rng& rng)
      : data_(data), params_(params), rng_(rng) {
    feature_order_.resize(data.cols);
    std::iota(feature_order_.begin(), feature_order_.end(), 0);
    const auto wanted = static_cast<std::size_t>(
        std::lround(params.feature_subsample_fraction * static_cast<double>(data.cols)));
    features_per_split_ = std::clamp<std::size_t>(wanted, 1, std::max<std::size_t>(data.cols, 1));
  }

  std::vector<DecisionTree::Node> build(std::vector<std::size_t> rows) {
    grow(std::move(rows), 0);
    return std::move(nodes_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0;
    double impurity = 0;
  };

  int grow(std::vector<std::size_t> rows, int depth) {
    std::size_t negative = 0;
    for (std::size_t r : rows) negative += data_.negative[r];
    const std::size_t n = rows.size();

    const int index = static_cast<int>(nodes_.size());
    nodes_.push_back(DecisionTree::Node{});
    nodes_[index].probability = leaf_probability(negative, n);

    if (depth >= params_.max_depth || n < 2 * params_.min_leaf_count || negative == 0 ||
        negative == n || data_.cols == 0) {
      return index;
    }
    Split best = find_split(rows, negative);
    if (best.feature < 0) return index;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    for (std::size_t r : rows) {
      const double x = data_.values[r * data_.cols + static_cast<std::size_t>(best.feature)];
      (x <= best.threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    nodes_[index].feature = best.feature;
    nodes_[index].threshold = best.threshold;
    const int left = grow(std::move(left_rows), depth + 1);
    const int right = grow(std::move(right_rows), depth + 1);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  Split find_split(const std::vector<std::size_t>& rows, std::size_t negative) {
    const std::size_t n = rows.size();
    const double parent = static_cast<double>(n) * nat_entropy(negative, n);
    std::shuffle(feature_order_.begin(), feature_order_.end(), rng_);

    Split best;
    best.impurity = parent - 1e-12;
    std::vector<std::pair<double, std::uint8_t>> column(n);
    for (std::size_t f = 0; f < features_per_split_; ++f) {
      const std::size_t feature = feature_order_[f];
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = {data_.values[rows[i] * data_.cols + feature], data_.negative[rows[i]]};
      }
      std::sort(column.begin(), column.end());
      std::size_t left_neg = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_neg += column[i].second;
        const std::size_t left_n = i + 1;
        if (left_n < params_.min_leaf_count) continue;
        if (n - left_n < params_.min_leaf_count) break;
        if (!(column[i].first < column[i + 1].first)) continue;
        const double impurity =
            static_cast<double>(left_n) * nat_entropy(left_neg, left_n) +
            static_cast<double>(n - left_n) * nat_entropy(negative - left_neg, n - left_n);
        if (impurity < best.impurity) {
          const double lo = column[i].first;
          const double hi = column[i + 1].first;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best = Split{static_cast<int>(feature), mid, impurity};
        }
      }
    }
    return best;
  }

  const LabeledMatrix& data_;
  const TreeParams& params_;
  Rng& rng_;
  std::vector<std::size_t> feature_order_;
  std::size_t features_per_split_ = 1;
  std::vector<DecisionTree::Node> nodes_;
};

std::string hex(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", value);
  return buf;
}

double read_hex(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw ConfigError("truncated ensemble model");
  char* end = nullptr;
  double value = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) throw ConfigError("bad number in model: " + token);
  return value;
}

void expect_tag(std::istream& in, const char* tag) {
  std::string token;
  if (!(in >> token) || token != tag) {
    throw ConfigError(std::string("malformed ensemble model: expected '") + tag + "'");
  }
}

}  // namespace

void LabeledMatrix::add_row(std::span<const double> features, bool is_negative) {
  if (negative.empty() && values.empty()) cols = features.size();
  if (features.size() != cols) {
    throw SchemaMismatch("row has " + std::to_string(features.size()) + " features, expected " +
                         std::to_string(cols));
  }
  values.insert(values.end(), features.begin(), features.end());
  negative.push_back(is_negative ? 1 : 0);
}

LabeledMatrix LabeledMatrix::from_instances(std::span<const PrefixInstance> instances) {
  LabeledMatrix matrix;
  if (!instances.empty()) matrix.cols = instances.front().features.size();
  matrix.values.reserve(instances.size() * matrix.cols);
  matrix.negative.reserve(instances.size());
  for (const auto& inst : instances) {
    matrix.add_row(inst.features, inst.label == Outcome::negative);
  }
  return matrix;
}

DecisionTree::DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw std::invalid_argument("decision tree needs at least one node");
  const int count = static_cast<int>(nodes_.size());
  for (const Node& node : nodes_) {
    if (!(node.probability >= 0.0 && node.probability <= 1.0)) {
      throw std::invalid_argument("leaf probability outside [0, 1]");
    }
    if (!node.is_leaf() && (node.left <= 0 || node.left >= count || node.right <= 0 ||
                            node.right >= count)) {
      throw std::invalid_argument("decision tree child index out of range");
    }
  }
}

DecisionTree DecisionTree::constant(double probability) {
  Node leaf;
  leaf.probability = probability;
  return DecisionTree(std::vector<Node>{leaf});
}

DecisionTree DecisionTree::fit(const LabeledMatrix& data, std::span<const std::size_t> rows,
                               const TreeParams& params, Rng& rng) {
  TreeBuilder builder(data, params, rng);
  return DecisionTree(builder.build(std::vector<std::size_t>(rows.begin(), rows.end())));
}

double DecisionTree::predict(std::span<const double> features) const {
  std::size_t index = 0;
  while (!nodes_[index].is_leaf()) {
    const Node& node = nodes_[index];
    index = static_cast<std::size_t>(
        features[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                            : node.right);
  }
  return nodes_[index].probability;
}

std::size_t DecisionTree::depth() const {
  std::vector<std::size_t> level(nodes_.size(), 0);
  std::size_t deepest = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    deepest = std::max(deepest, level[i]);
    if (!nodes_[i].is_leaf()) {
      level[static_cast<std::size_t>(nodes_[i].left)] = level[i] + 1;
      level[static_cast<std::size_t>(nodes_[i].right)] = level[i] + 1;
    }
  }
  return deepest;
}

Ensemble::Ensemble(std::size_t feature_count, std::vector<MemberModel> members)
    : feature_count_(feature_count), members_(std::move(members)) {
  if (members_.size() < 2) throw std::invalid_argument("an ensemble needs at least 2 members");
  for (const MemberModel& member : members_) {
    for (const auto& node : member.tree.nodes()) {
      if (!node.is_leaf() && static_cast<std::size_t>(node.feature) >= feature_count_) {
        throw SchemaMismatch("tree splits on a feature beyond the schema");
      }
    }
  }
}

Ensemble Ensemble::train(const LabeledMatrix& data, std::size_t m, const TreeParams& params,
                         std::uint64_t master_seed) {
  if (m < 2) throw std::invalid_argument("ensemble size must be at least 2");
  if (data.rows() == 0) throw DataError("cannot train an ensemble on an empty prefix log");
  const auto negatives = std::count(data.negative.begin(), data.negative.end(), 1);
  if (negatives == 0 || static_cast<std::size_t>(negatives) == data.rows()) {
    throw DataError("training data contains a single outcome class");
  }
  if (!(params.row_subsample_fraction > 0.0) || !(params.feature_subsample_fraction > 0.0) ||
      params.max_depth < 0 || params.min_leaf_count == 0) {
    throw ConfigError("invalid tree parameters");
  }

  std::vector<MemberModel> members(m);
  auto fit_member = [&](std::size_t i) {
    MemberModel& member = members[i];
    member.seed = derive_seed(master_seed, i);
    member.params = params;
    Rng rng(member.seed);
    const auto sample_size = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::lround(params.row_subsample_fraction * static_cast<double>(data.rows()))));
    std::uniform_int_distribution<std::size_t> pick(0, data.rows() - 1);
    std::vector<std::size_t> rows(sample_size);
    for (auto& r : rows) r = pick(rng);
    member.tree = DecisionTree::fit(data, rows, params, rng);
  };

  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, m);
  if (workers == 1) {
    for (std::size_t i = 0; i < m; ++i) fit_member(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t i = w; i < m; i += workers) fit_member(i);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
    }
    for (auto& error : errors) {
      if (error) std::rethrow_exception(error);
    }
  }
  return Ensemble(data.cols, std::move(members));
}

std::vector<double> Ensemble::member_probabilities(std::span<const double> features) const {
  if (features.empty() || features.size() != feature_count_) {
    throw SchemaMismatch("feature vector has " + std::to_string(features.size()) +
                         " entries, model expects " + std::to_string(feature_count_));
  }
  std::vector<double> probs;
  probs.reserve(members_.size());
  for (const MemberModel& member : members_) probs.push_back(member.predict(features));
  return probs;
}

double Ensemble::predict(std::span<const double> features) const {
  return avg_pred(member_probabilities(features));
}

void Ensemble::save(std::ostream& out) const {
  out << "ensemble 1\n";
  out << "features " << feature_count_ << '\n';
  out << "members " << members_.size() << '\n';
  for (const MemberModel& member : members_) {
    const auto& p = member.params;
    out << "member " << member.seed << ' ' << p.max_depth << ' ' << p.min_leaf_count << ' '
        << hex(p.feature_subsample_fraction) << ' ' << hex(p.row_subsample_fraction) << ' '
        << member.tree.nodes().size() << '\n';
    for (const auto& node : member.tree.nodes()) {
      out << node.feature << ' ' << hex(node.threshold) << ' ' << node.left << ' '
          << node.right << ' ' << hex(node.probability) << '\n';
    }
  }
}

Ensemble Ensemble::load(std::istream& in) {
  expect_tag(in, "ensemble");
  int version = 0;
  in >> version;
  if (version != 1) throw ConfigError("unsupported ensemble model version");
  std::size_t features = 0;
  std::size_t count = 0;
  expect_tag(in, "features");
  in >> features;
  expect_tag(in, "members");
  in >> count;
  if (!in) throw ConfigError("truncated ensemble header");
  std::vector<MemberModel> members(count);
  for (MemberModel& member : members) {
    expect_tag(in, "member");
    std::size_t node_count = 0;
    in >> member.seed >> member.params.max_depth >> member.params.min_leaf_count;
    member.params.feature_subsample_fraction = read_hex(in);
    member.params.row_subsample_fraction = read_hex(in);
    in >> node_count;
    if (!in) throw ConfigError("truncated ensemble member header");
    std::vector<DecisionTree::Node> nodes(node_count);
    for (auto& node : nodes) {
      in >> node.feature;
      node.threshold = read_hex(in);
      in >> node.left >> node.right;
      node.probability = read_hex(in);
      if (!in) throw ConfigError("truncated tree node");
    }
    member.tree = DecisionTree(std::move(nodes));
  }
  return Ensemble(features, std::move(members));
}

ScoredPrediction score_prefix(const Ensemble& ensemble, std::span<const double> features) {
  ScoredPrediction scored;
  scored.member_probs = ensemble.member_probabilities(features);
  scored.report = decompose(scored.member_probs);
  return scored;
}

}  // namespace prpm
