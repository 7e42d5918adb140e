#include "prpm/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <set>
#include <string_view>

#include "prpm/csv.hpp"
#include "prpm/error.hpp"

namespace prpm {

namespace {

constexpr std::array kKnownKeys = {
    "case_col", "activity_col", "timestamp_col", "timestamp_format", "positive_activities",
    "negative_activities", "offer_activity", "treatment_col", "treatment_min_offers",
    "drop_outcome_events", "max_prefix_percentile", "split_train", "split_valid", "split_test",
    "ensemble_size", "max_depth", "min_leaf_count", "feature_subsample_fraction",
    "row_subsample_fraction", "min_arm_size", "confounders", "seed", "knn_k", "c_uout", "c_t1",
    "proba_threshold", "cate_threshold", "uncer_threshold", "delta_uncer_threshold",
    "delta_orientation", "policies", "duration_kind", "duration_fixed", "duration_mean",
    "duration_std", "duration_min", "duration_max", "resources",
};

// Generator settings share config files with the pipeline.
bool is_generator_key(std::string_view key) { return key.starts_with("synth_"); }

std::size_t get_count(const KeyValueConfig& c, const std::string& key, std::size_t fallback) {
  const long long v = c.get_int(key, static_cast<long long>(fallback));
  if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::string fmt(double v) { return csv::format_double(v); }

std::ifstream open_artifact(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model artifact: " + path.string());
  return in;
}

void write_artifact(const std::filesystem::path& path, auto&& writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  writer(out);
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

std::vector<std::string> PipelineConfig::keys() {
  return {kKnownKeys.begin(), kKnownKeys.end()};
}

void PipelineConfig::validate() const {
  if (!(max_prefix_percentile > 0 && max_prefix_percentile <= 1)) {
    throw ConfigError("max_prefix_percentile must lie in (0, 1]");
  }
  if (ensemble_size < 2) throw ConfigError("ensemble_size must be at least 2");
  if (tree.max_depth < 1) throw ConfigError("max_depth must be at least 1");
  if (tree.min_leaf_count < 1) throw ConfigError("min_leaf_count must be at least 1");
  if (!(tree.feature_subsample_fraction > 0 && tree.feature_subsample_fraction <= 1)) {
    throw ConfigError("feature_subsample_fraction must lie in (0, 1]");
  }
  if (!(tree.row_subsample_fraction > 0 && tree.row_subsample_fraction <= 1)) {
    throw ConfigError("row_subsample_fraction must lie in (0, 1]");
  }
  if (knn_k < 1) throw ConfigError("knn_k must be at least 1");
  if (policies.empty()) throw ConfigError("at least one policy is required");
  if (resources.empty()) throw ConfigError("resources must not be empty");
  costs.validate();
  duration.validate();
  for (const PolicyConfig& p : policy_configs()) p.validate();
}

PipelineConfig PipelineConfig::from_config(const KeyValueConfig& c) {
  const std::set<std::string_view> known(kKnownKeys.begin(), kKnownKeys.end());
  for (const auto& [key, value] : c.entries()) {
    if (!known.count(key) && !is_generator_key(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  PipelineConfig p;
  LogMapping& m = p.mapping;
  m.case_col = c.get_string("case_col", m.case_col);
  m.activity_col = c.get_string("activity_col", m.activity_col);
  m.timestamp_col = c.get_string("timestamp_col", m.timestamp_col);
  m.timestamp_format = c.get_string("timestamp_format", m.timestamp_format);
  m.positive_activities = c.get_list("positive_activities", m.positive_activities);
  m.negative_activities = c.get_list("negative_activities", m.negative_activities);
  m.offer_activity = c.get_string("offer_activity", m.offer_activity);
  m.treatment_col = c.get_string("treatment_col", m.treatment_col);
  m.treatment_min_offers =
      static_cast<int>(c.get_int("treatment_min_offers", m.treatment_min_offers));
  m.drop_outcome_events = c.get_bool("drop_outcome_events", m.drop_outcome_events);

  p.max_prefix_percentile = c.get_double("max_prefix_percentile", p.max_prefix_percentile);
  p.split.train = c.get_double("split_train", p.split.train);
  p.split.valid = c.get_double("split_valid", p.split.valid);
  p.split.test = c.get_double("split_test", p.split.test);

  p.ensemble_size = get_count(c, "ensemble_size", p.ensemble_size);
  p.tree.max_depth = static_cast<int>(c.get_int("max_depth", p.tree.max_depth));
  p.tree.min_leaf_count = get_count(c, "min_leaf_count", p.tree.min_leaf_count);
  p.tree.feature_subsample_fraction =
      c.get_double("feature_subsample_fraction", p.tree.feature_subsample_fraction);
  p.tree.row_subsample_fraction =
      c.get_double("row_subsample_fraction", p.tree.row_subsample_fraction);
  p.min_arm_size = get_count(c, "min_arm_size", p.min_arm_size);
  p.confounders = c.get_list("confounders", p.confounders);
  p.seed = static_cast<std::uint64_t>(get_count(c, "seed", p.seed));
  p.knn_k = get_count(c, "knn_k", p.knn_k);

  p.costs.c_uout = c.get_double("c_uout", p.costs.c_uout);
  p.costs.c_t1 = c.get_double("c_t1", p.costs.c_t1);
  p.proba_threshold = c.get_double("proba_threshold", p.proba_threshold);
  p.cate_threshold = c.get_double("cate_threshold", p.cate_threshold);
  p.uncer_threshold = c.get_double("uncer_threshold", p.uncer_threshold);
  p.delta_uncer_threshold = c.get_double("delta_uncer_threshold", p.delta_uncer_threshold);
  if (auto text = c.find("delta_orientation")) {
    auto parsed = parse_delta_orientation(*text);
    if (!parsed) throw ConfigError("unknown delta_orientation '" + *text + "'");
    p.delta_orientation = *parsed;
  }
  p.policies = c.get_list("policies", p.policies);

  if (auto text = c.find("duration_kind")) {
    auto parsed = parse_duration_kind(*text);
    if (!parsed) throw ConfigError("unknown duration_kind '" + *text + "'");
    p.duration.kind = *parsed;
  }
  p.duration.fixed_seconds = c.get_double("duration_fixed", p.duration.fixed_seconds);
  p.duration.mean_seconds = c.get_double("duration_mean", p.duration.mean_seconds);
  p.duration.std_seconds = c.get_double("duration_std", p.duration.std_seconds);
  p.duration.min_seconds = c.get_double("duration_min", p.duration.min_seconds);
  p.duration.max_seconds = c.get_double("duration_max", p.duration.max_seconds);
  if (auto text = c.find("resources")) p.resources = parse_count_range(*text);

  p.validate();
  return p;
}

KeyValueConfig PipelineConfig::to_config() const {
  KeyValueConfig c;
  c.set("case_col", mapping.case_col);
  c.set("activity_col", mapping.activity_col);
  c.set("timestamp_col", mapping.timestamp_col);
  c.set("timestamp_format", mapping.timestamp_format);
  c.set("positive_activities", join_list(mapping.positive_activities));
  c.set("negative_activities", join_list(mapping.negative_activities));
  c.set("offer_activity", mapping.offer_activity);
  c.set("treatment_col", mapping.treatment_col);
  c.set("treatment_min_offers", std::to_string(mapping.treatment_min_offers));
  c.set("drop_outcome_events", mapping.drop_outcome_events ? "true" : "false");
  c.set("max_prefix_percentile", fmt(max_prefix_percentile));
  c.set("split_train", fmt(split.train));
  c.set("split_valid", fmt(split.valid));
  c.set("split_test", fmt(split.test));
  c.set("ensemble_size", std::to_string(ensemble_size));
  c.set("max_depth", std::to_string(tree.max_depth));
  c.set("min_leaf_count", std::to_string(tree.min_leaf_count));
  c.set("feature_subsample_fraction", fmt(tree.feature_subsample_fraction));
  c.set("row_subsample_fraction", fmt(tree.row_subsample_fraction));
  c.set("min_arm_size", std::to_string(min_arm_size));
  c.set("confounders", join_list(confounders));
  c.set("seed", std::to_string(seed));
  c.set("knn_k", std::to_string(knn_k));
  c.set("c_uout", fmt(costs.c_uout));
  c.set("c_t1", fmt(costs.c_t1));
  c.set("proba_threshold", fmt(proba_threshold));
  c.set("cate_threshold", fmt(cate_threshold));
  c.set("uncer_threshold", fmt(uncer_threshold));
  c.set("delta_uncer_threshold", fmt(delta_uncer_threshold));
  c.set("delta_orientation", std::string(to_string(delta_orientation)));
  c.set("policies", join_list(policies));
  c.set("duration_kind", std::string(to_string(duration.kind)));
  c.set("duration_fixed", fmt(duration.fixed_seconds));
  c.set("duration_mean", fmt(duration.mean_seconds));
  c.set("duration_std", fmt(duration.std_seconds));
  c.set("duration_min", fmt(duration.min_seconds));
  c.set("duration_max", fmt(duration.max_seconds));
  std::vector<std::string> r;
  for (std::size_t v : resources) r.push_back(std::to_string(v));
  c.set("resources", join_list(r));
  return c;
}

std::vector<PolicyConfig> PipelineConfig::policy_configs() const {
  std::vector<PolicyConfig> out;
  for (const std::string& name : policies) {
    PolicyConfig p = named_policy(name);
    p.proba_threshold = proba_threshold;
    p.cate_threshold = cate_threshold;
    if (p.uncer_threshold) p.uncer_threshold = uncer_threshold;
    if (p.use_delta_uncer) p.delta_uncer_threshold = delta_uncer_threshold;
    p.delta_orientation = delta_orientation;
    out.push_back(std::move(p));
  }
  return out;
}

void ModelBundle::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_artifact(dir / "schema.txt", [&](std::ostream& o) { schema.save(o); });
  write_artifact(dir / "ensemble.txt", [&](std::ostream& o) { ensemble.save(o); });
  write_artifact(dir / "uplift.txt", [&](std::ostream& o) { uplift.save(o); });
  if (index.entry_count() > 0) save_index(dir);
}

void ModelBundle::save_index(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  write_artifact(dir / "index.txt", [&](std::ostream& o) { index.save(o); });
}

ModelBundle ModelBundle::load(const std::filesystem::path& dir, bool require_index) {
  ModelBundle b;
  {
    auto in = open_artifact(dir / "schema.txt");
    b.schema = FeatureSchema::load(in);
  }
  {
    auto in = open_artifact(dir / "ensemble.txt");
    b.ensemble = Ensemble::load(in);
  }
  {
    auto in = open_artifact(dir / "uplift.txt");
    b.uplift = UpliftModel::load(in);
  }
  const std::filesystem::path index_path = dir / "index.txt";
  if (require_index || std::filesystem::exists(index_path)) {
    auto in = open_artifact(index_path);
    b.index = HistoryIndex::load(in);
  }
  const std::size_t n = b.schema.size();
  if (b.ensemble.feature_count() != n || b.uplift.feature_count() != n ||
      (b.index.entry_count() > 0 && b.index.scaler().size() != n)) {
    throw SchemaMismatch("model artifacts in " + dir.string() +
                         " disagree on the feature layout (schema has " + std::to_string(n) +
                         " features)");
  }
  return b;
}

PreparedLog prepare_log(const std::filesystem::path& path, const LogMapping& mapping) {
  ParsedLog parsed = parse_log(path, mapping);
  CleanResult cleaned = clean(std::move(parsed.traces));
  return PreparedLog{std::move(cleaned.traces), std::move(parsed.errors), cleaned.removed};
}

ModelBundle train_models(std::span<const Trace> train, const PipelineConfig& config) {
  config.validate();
  ModelBundle b;
  b.schema = build_schema(train, config.mapping.offer_activity);
  const auto groups = extract_prefixes(train, config.max_prefix_percentile, b.schema);
  const auto instances = flatten(groups);
  b.ensemble = Ensemble::train(LabeledMatrix::from_instances(instances), config.ensemble_size,
                               config.tree, derive_seed(config.seed, 1));
  const CausalDataset dataset(instances, b.schema, config.confounders);
  const UpliftParams uplift{config.ensemble_size, config.tree, config.min_arm_size};
  b.uplift = fit_uplift(dataset, uplift, derive_seed(config.seed, 2));
  return b;
}

void build_history(ModelBundle& bundle, std::span<const Trace> train,
                   const PipelineConfig& config) {
  const auto groups = extract_prefixes(train, config.max_prefix_percentile, bundle.schema);
  bundle.index = build_index(groups, bundle.ensemble, bundle.uplift);
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::array<char, 65536> buf;
  while (in.read(buf.data(), buf.size()) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[static_cast<std::size_t>(i)]);
      h *= 0x100000001b3ULL;
    }
  }
  char text[17];
  std::snprintf(text, sizeof(text), "%016llx", static_cast<unsigned long long>(h));
  return text;
}

}  // namespace prpm
