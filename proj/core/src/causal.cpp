#include "prpm/causal.hpp"

#include <algorithm>

#include "prpm/error.hpp"
#include "prpm/random.hpp"

namespace prpm {

CausalDataset::CausalDataset(std::span<const PrefixInstance> instances,
                             const FeatureSchema& schema, std::vector<std::string> confounders)
    : confounders_(std::move(confounders)), feature_count_(schema.size()) {
  const auto names = schema.feature_names();
  for (const auto& column : confounders_) {
    if (std::find(names.begin(), names.end(), column) == names.end()) {
      throw ConfigError("confounder '" + column + "' is not a feature of the schema");
    }
  }
  treated_.cols = feature_count_;
  control_.cols = feature_count_;
  for (const auto& inst : instances) {
    if (inst.features.size() != feature_count_) {
      throw SchemaMismatch("prefix of case '" + inst.case_id + "' does not match the schema");
    }
    (inst.treated ? treated_ : control_).add_row(inst.features, inst.label == Outcome::negative);
  }
}

UpliftModel::UpliftModel(Ensemble treated, Ensemble control)
    : treated_(std::move(treated)), control_(std::move(control)) {
  if (treated_.feature_count() != control_.feature_count()) {
    throw SchemaMismatch("uplift arm models have different feature counts");
  }
}

double UpliftModel::cate(std::span<const double> features) const {
  return control_.predict(features) - treated_.predict(features);
}

void UpliftModel::save(std::ostream& out) const {
  out << "uplift 1\ntreated\n";
  treated_.save(out);
  out << "control\n";
  control_.save(out);
}

UpliftModel UpliftModel::load(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "uplift" || version != 1) throw ConfigError("malformed uplift model");
  in >> tag;
  if (tag != "treated") throw ConfigError("uplift model lacks treated arm");
  Ensemble treated = Ensemble::load(in);
  in >> tag;
  if (tag != "control") throw ConfigError("uplift model lacks control arm");
  Ensemble control = Ensemble::load(in);
  return UpliftModel(std::move(treated), std::move(control));
}

UpliftModel fit_uplift(const CausalDataset& dataset, const UpliftParams& params,
                       std::uint64_t seed) {
  auto check_arm = [&](const LabeledMatrix& arm, const char* name) {
    if (arm.rows() == 0) throw DataError(std::string(name) + " arm empty");
    if (arm.rows() < params.min_arm_size) {
      throw DataError(std::string(name) + " arm has " + std::to_string(arm.rows()) +
                      " instances, at least " + std::to_string(params.min_arm_size) +
                      " required");
    }
  };
  check_arm(dataset.treated(), "treated");
  check_arm(dataset.control(), "control");
  Ensemble treated = Ensemble::train(dataset.treated(), params.ensemble_size, params.tree,
                                     derive_seed(seed, 1));
  Ensemble control = Ensemble::train(dataset.control(), params.ensemble_size, params.tree,
                                     derive_seed(seed, 0));
  return UpliftModel(std::move(treated), std::move(control));
}

}  // namespace prpm
