#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prpm/allocator.hpp"
#include "prpm/causal.hpp"
#include "prpm/config.hpp"
#include "prpm/ensemble.hpp"
#include "prpm/event_log.hpp"
#include "prpm/future_state.hpp"
#include "prpm/policy.hpp"

namespace prpm {

/// Every tunable of a train/replay run. Keys of the flat config file match
/// the member names (see README for the full list).
struct PipelineConfig {
  LogMapping mapping;
  double max_prefix_percentile = 0.9;
  SplitFractions split;

  std::size_t ensemble_size = 10;
  TreeParams tree;
  std::size_t min_arm_size = 20;
  std::vector<std::string> confounders;
  std::uint64_t seed = 42;
  std::size_t knn_k = 10;

  CostParams costs;
  double proba_threshold = 0.5;
  double cate_threshold = 0.0;
  /// Applied to policies that filter on total uncertainty.
  double uncer_threshold = 0.75;
  /// Applied to policies that filter on the uncertainty change.
  double delta_uncer_threshold = 0.0;
  DeltaOrientation delta_orientation = DeltaOrientation::future_minus_current;
  std::vector<std::string> policies = standard_policy_names();

  DurationDist duration;
  std::vector<std::size_t> resources{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  void validate() const;

  /// Every key understood by from_config.
  static std::vector<std::string> keys();

  /// Unknown keys throw ConfigError; keys starting with "synth_" are left to
  /// the log generator.
  static PipelineConfig from_config(const KeyValueConfig& config);
  KeyValueConfig to_config() const;

  /// The named policies with this config's thresholds applied.
  std::vector<PolicyConfig> policy_configs() const;
};

/// Fitted artifacts. `index` is empty until build_history runs.
struct ModelBundle {
  FeatureSchema schema;
  Ensemble ensemble;
  UpliftModel uplift;
  HistoryIndex index;

  /// Writes schema.txt, ensemble.txt, uplift.txt and, if non-empty, index.txt.
  void save(const std::filesystem::path& dir) const;
  void save_index(const std::filesystem::path& dir) const;
  /// Throws IoError on missing files and SchemaMismatch when the artifacts
  /// disagree on the feature layout. A missing index.txt is an error only
  /// when `require_index` is set.
  static ModelBundle load(const std::filesystem::path& dir, bool require_index = true);
};

struct PreparedLog {
  std::vector<Trace> traces;
  std::vector<RecordError> errors;
  std::size_t removed = 0;
};

/// parse_log followed by clean.
PreparedLog prepare_log(const std::filesystem::path& path, const LogMapping& mapping);

/// Fits the outcome ensemble and the uplift model on prefixes of `train`.
ModelBundle train_models(std::span<const Trace> train, const PipelineConfig& config);

/// Scores the prefixes of `train` with the bundle's models and stores the
/// resulting history index in the bundle.
void build_history(ModelBundle& bundle, std::span<const Trace> train,
                   const PipelineConfig& config);

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_hash(const std::filesystem::path& path);

}  // namespace prpm
