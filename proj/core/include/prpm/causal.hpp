#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "prpm/ensemble.hpp"
#include "prpm/event_log.hpp"

namespace prpm {

/// Prefix instances split by treatment arm. Confounders are schema columns
/// that influence both treatment and outcome; they enter both arm models as
/// ordinary features.
class CausalDataset {
 public:
  /// Throws ConfigError when a confounder is not a feature of `schema`.
  CausalDataset(std::span<const PrefixInstance> instances, const FeatureSchema& schema,
                std::vector<std::string> confounders = {});

  const LabeledMatrix& treated() const { return treated_; }
  const LabeledMatrix& control() const { return control_; }
  const std::vector<std::string>& confounders() const { return confounders_; }
  std::size_t feature_count() const { return feature_count_; }

 private:
  LabeledMatrix treated_;
  LabeledMatrix control_;
  std::vector<std::string> confounders_;
  std::size_t feature_count_ = 0;
};

struct UpliftParams {
  std::size_t ensemble_size = 10;
  TreeParams tree;
  /// Minimum number of instances required in each arm.
  std::size_t min_arm_size = 20;
};

/// Two-model (T-learner) uplift estimator.
class UpliftModel {
 public:
  UpliftModel() = default;
  /// Throws SchemaMismatch when the two arm models disagree on feature count.
  UpliftModel(Ensemble treated, Ensemble control);

  /// p_negative(control) - p_negative(treated); positive means the
  /// intervention lowers the chance of a negative outcome.
  double cate(std::span<const double> features) const;

  UpliftModel swapped() const { return UpliftModel(control_, treated_); }

  const Ensemble& treated() const { return treated_; }
  const Ensemble& control() const { return control_; }
  std::size_t feature_count() const { return treated_.feature_count(); }

  void save(std::ostream& out) const;
  static UpliftModel load(std::istream& in);

  bool operator==(const UpliftModel&) const = default;

 private:
  Ensemble treated_;
  Ensemble control_;
};

/// Fits one ensemble per arm. The arms use distinct seeds derived from `seed`.
/// Throws DataError naming the arm when an arm is empty or below the floor.
UpliftModel fit_uplift(const CausalDataset& dataset, const UpliftParams& params,
                       std::uint64_t seed);

}  // namespace prpm
