#include "prpm/future_state.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <stdexcept>
#include <string>

#include "prpm/error.hpp"
#include "prpm/uncertainty.hpp"

namespace prpm {

namespace {

std::string hex(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", value);
  return buf;
}

double read_hex(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw ConfigError("truncated history index");
  char* end = nullptr;
  double value = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) throw ConfigError("bad number in index: " + token);
  return value;
}

}  // namespace

ScoreTriple score_triple(const Ensemble& ensemble, const UpliftModel& uplift,
                         std::span<const double> features) {
  const auto report = decompose(ensemble.member_probabilities(features));
  if (uplift.feature_count() != ensemble.feature_count()) {
    throw SchemaMismatch("uplift model and ensemble disagree on the feature count");
  }
  return ScoreTriple{report.avg_pred, report.total, uplift.cate(features)};
}

MinMaxScaler::MinMaxScaler(std::vector<double> lo, std::vector<double> hi)
    : lo_(std::move(lo)), hi_(std::move(hi)) {
  if (lo_.size() != hi_.size()) throw std::invalid_argument("scaler bounds differ in length");
}

MinMaxScaler MinMaxScaler::fit(const LabeledMatrix& data) {
  std::vector<double> lo(data.cols, 0.0);
  std::vector<double> hi(data.cols, 0.0);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    auto row = data.row(r);
    for (std::size_t c = 0; c < data.cols; ++c) {
      if (r == 0) {
        lo[c] = hi[c] = row[c];
      } else {
        lo[c] = std::min(lo[c], row[c]);
        hi[c] = std::max(hi[c], row[c]);
      }
    }
  }
  return MinMaxScaler(std::move(lo), std::move(hi));
}

MinMaxScaler MinMaxScaler::fit(std::span<const PrefixInstance> instances) {
  return fit(LabeledMatrix::from_instances(instances));
}

MinMaxScaler MinMaxScaler::identity(std::size_t dims) {
  return MinMaxScaler(std::vector<double>(dims, 0.0), std::vector<double>(dims, 1.0));
}

std::vector<double> MinMaxScaler::transform(std::span<const double> features) const {
  if (features.size() != lo_.size()) {
    throw SchemaMismatch("scaler expects " + std::to_string(lo_.size()) + " features, got " +
                         std::to_string(features.size()));
  }
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) {
    const double range = hi_[i] - lo_[i];
    out[i] = range > 0 ? (features[i] - lo_[i]) / range : 0.0;
  }
  return out;
}

void MinMaxScaler::save(std::ostream& out) const {
  out << "scaler " << lo_.size() << '\n';
  for (std::size_t i = 0; i < lo_.size(); ++i) out << hex(lo_[i]) << ' ' << hex(hi_[i]) << '\n';
}

MinMaxScaler MinMaxScaler::load(std::istream& in) {
  std::string tag;
  std::size_t n = 0;
  if (!(in >> tag >> n) || tag != "scaler") throw ConfigError("malformed scaler block");
  std::vector<double> lo(n);
  std::vector<double> hi(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = read_hex(in);
    hi[i] = read_hex(in);
  }
  return MinMaxScaler(std::move(lo), std::move(hi));
}

void HistoryIndex::add(std::size_t prefix_len, std::span<const double> features,
                       const ScoreTriple& scores, std::size_t frequency) {
  if (frequency == 0) throw std::invalid_argument("index frequency must be positive");
  std::vector<double> key(features.begin(), features.end());
  auto& lookup = lookup_[prefix_len];
  auto& bucket = buckets_[prefix_len];
  auto found = lookup.find(key);
  if (found != lookup.end()) {
    bucket[found->second].frequency += frequency;
    return;
  }
  Entry entry;
  entry.scaled = scaler_.transform(features);
  entry.features = key;
  entry.scores = scores;
  entry.frequency = frequency;
  lookup.emplace(std::move(key), bucket.size());
  bucket.push_back(std::move(entry));
}

std::span<const HistoryIndex::Entry> HistoryIndex::bucket(std::size_t prefix_len) const {
  auto it = buckets_.find(prefix_len);
  if (it == buckets_.end()) return {};
  return it->second;
}

std::size_t HistoryIndex::entry_count() const {
  std::size_t n = 0;
  for (const auto& [k, entries] : buckets_) n += entries.size();
  return n;
}

ScoreTriple HistoryIndex::future_scores(std::span<const double> current_features,
                                        std::size_t prefix_len, const ScoreTriple& current,
                                        std::size_t knn_k) const {
  if (knn_k == 0) throw std::invalid_argument("knn_k must be at least 1");
  auto entries = bucket(prefix_len + 1);
  if (entries.empty()) return current;

  const auto query = scaler_.transform(current_features);
  std::vector<std::pair<double, std::size_t>> by_distance(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    double sq = 0;
    const auto& scaled = entries[i].scaled;
    for (std::size_t d = 0; d < query.size(); ++d) {
      const double diff = scaled[d] - query[d];
      sq += diff * diff;
    }
    by_distance[i] = {std::sqrt(sq), i};
  }
  const std::size_t take = std::min(knn_k, by_distance.size());
  std::partial_sort(by_distance.begin(), by_distance.begin() + static_cast<std::ptrdiff_t>(take),
                    by_distance.end());

  double weight_sum = 0;
  ScoreTriple acc;
  for (std::size_t j = 0; j < take; ++j) {
    const auto& [distance, i] = by_distance[j];
    const double w = static_cast<double>(entries[i].frequency) / (1.0 + distance);
    weight_sum += w;
    acc.avg_pred += w * entries[i].scores.avg_pred;
    acc.total_uncer += w * entries[i].scores.total_uncer;
    acc.cate += w * entries[i].scores.cate;
  }
  acc.avg_pred /= weight_sum;
  acc.total_uncer /= weight_sum;
  acc.cate /= weight_sum;
  return acc;
}

void HistoryIndex::save(std::ostream& out) const {
  out << "history_index 1\n";
  scaler_.save(out);
  out << "buckets " << buckets_.size() << '\n';
  for (const auto& [k, entries] : buckets_) {
    out << "bucket " << k << ' ' << entries.size() << '\n';
    for (const Entry& e : entries) {
      out << e.frequency << ' ' << hex(e.scores.avg_pred) << ' ' << hex(e.scores.total_uncer)
          << ' ' << hex(e.scores.cate) << ' ' << e.features.size();
      for (double v : e.features) out << ' ' << hex(v);
      out << '\n';
    }
  }
}

HistoryIndex HistoryIndex::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "history_index" || version != 1) {
    throw ConfigError("malformed history index");
  }
  HistoryIndex index(MinMaxScaler::load(in));
  std::size_t bucket_count = 0;
  if (!(in >> tag >> bucket_count) || tag != "buckets") throw ConfigError("malformed index");
  for (std::size_t b = 0; b < bucket_count; ++b) {
    std::size_t k = 0;
    std::size_t n = 0;
    if (!(in >> tag >> k >> n) || tag != "bucket") throw ConfigError("malformed index bucket");
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t frequency = 0;
      std::size_t dims = 0;
      in >> frequency;
      ScoreTriple scores;
      scores.avg_pred = read_hex(in);
      scores.total_uncer = read_hex(in);
      scores.cate = read_hex(in);
      in >> dims;
      if (!in) throw ConfigError("truncated index entry");
      std::vector<double> features(dims);
      for (double& v : features) v = read_hex(in);
      index.add(k, features, scores, frequency);
    }
  }
  return index;
}

HistoryIndex build_index(const std::vector<PrefixGroup>& training, const Ensemble& ensemble,
                         const UpliftModel& uplift) {
  const auto all = flatten(training);
  HistoryIndex index(MinMaxScaler::fit(all));
  for (const PrefixGroup& group : training) {
    std::map<std::vector<double>, std::size_t> multiplicity;
    std::vector<const std::vector<double>*> order;
    for (const PrefixInstance& inst : group.instances) {
      auto [it, inserted] = multiplicity.try_emplace(inst.features, 0);
      if (inserted) order.push_back(&it->first);
      ++it->second;
    }
    for (const auto* features : order) {
      index.add(group.prefix_len, *features, score_triple(ensemble, uplift, *features),
                multiplicity.at(*features));
    }
  }
  return index;
}

}  // namespace prpm
