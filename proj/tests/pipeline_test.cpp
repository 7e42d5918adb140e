#include <doctest.h>

#include <sstream>

#include "prpm/error.hpp"
#include "prpm/pipeline.hpp"
#include "prpm/replay.hpp"
#include "prpm/synthetic.hpp"
#include "support.hpp"

using namespace prpm;

namespace {

std::vector<Trace> small_log(std::size_t cases, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.cases = cases;
  return strip_outcome_events(generate_synthetic_log(spec, seed), synthetic_log_mapping());
}

PipelineConfig fast_config() {
  PipelineConfig c;
  c.ensemble_size = 3;
  c.tree.max_depth = 4;
  return c;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("config round-trips through the flat key-value form") {
  PipelineConfig c;
  c.seed = 1234;
  c.knn_k = 3;
  c.costs.c_uout = 30;
  c.uncer_threshold = 0.6;
  c.delta_orientation = DeltaOrientation::current_minus_future;
  c.duration.kind = DurationKind::exponential;
  c.resources = {2, 4};
  c.policies = {"avgProba_CATE", "avgProba_CATE_oppCost"};
  c.confounders = {"event_number"};
  c.mapping.treatment_col = "treatment";
  const KeyValueConfig kv = c.to_config();
  for (const auto& key : PipelineConfig::keys()) CHECK(kv.contains(key));
  const PipelineConfig back = PipelineConfig::from_config(kv);
  CHECK(back.to_config().entries() == kv.entries());
  CHECK(back.seed == 1234);
  CHECK(back.resources == std::vector<std::size_t>{2, 4});
  CHECK(back.delta_orientation == DeltaOrientation::current_minus_future);
}

TEST_CASE("unknown keys are rejected, generator keys pass through") {
  KeyValueConfig kv;
  kv.set("synth_cases", "10");
  CHECK_NOTHROW(PipelineConfig::from_config(kv));
  kv.set("ensemble_sise", "5");
  CHECK_THROWS_WITH_AS(PipelineConfig::from_config(kv), "unknown config key 'ensemble_sise'",
                       ConfigError);
  KeyValueConfig bad;
  bad.set("ensemble_size", "1");
  CHECK_THROWS_AS(PipelineConfig::from_config(bad), ConfigError);
  KeyValueConfig orientation;
  orientation.set("delta_orientation", "upward");
  CHECK_THROWS_AS(PipelineConfig::from_config(orientation), ConfigError);
}

TEST_CASE("policy configs inherit the thresholds") {
  PipelineConfig c;
  c.proba_threshold = 0.6;
  c.uncer_threshold = 0.4;
  c.delta_uncer_threshold = 0.1;
  const auto policies = c.policy_configs();
  REQUIRE(policies.size() == 4);
  for (const auto& p : policies) CHECK(p.proba_threshold == 0.6);
  CHECK_FALSE(policies[0].uncer_threshold);  // the baseline has no uncertainty filter
  CHECK(policies[1].uncer_threshold == 0.4);
  CHECK(policies[3].delta_uncer_threshold == 0.1);
  CHECK(policies[2].delta_uncer_threshold == 0.0);
}

TEST_CASE("file hash is FNV-1a 64") {
  test::TempDir dir;
  test::write_file(dir / "empty", "");
  test::write_file(dir / "a", "a");
  CHECK(file_hash(dir / "empty") == "cbf29ce484222325");
  CHECK(file_hash(dir / "a") == "af63dc4c8601ec8c");
  CHECK_THROWS_AS(file_hash(dir / "missing"), IoError);
}

TEST_CASE("bundle save and load preserve every model") {
  const auto train = small_log(300, 1);
  const PipelineConfig config = fast_config();
  ModelBundle bundle = train_models(train, config);
  test::TempDir dir;
  bundle.save(dir.path());
  CHECK_FALSE(std::filesystem::exists(dir / "index.txt"));
  CHECK_THROWS_AS(ModelBundle::load(dir.path()), IoError);
  const ModelBundle partial = ModelBundle::load(dir.path(), false);
  CHECK(partial.ensemble == bundle.ensemble);
  CHECK(partial.uplift == bundle.uplift);

  build_history(bundle, train, config);
  bundle.save_index(dir.path());
  const ModelBundle full = ModelBundle::load(dir.path());
  CHECK(full.index.entry_count() == bundle.index.entry_count());

  const auto test_cases = small_log(40, 2);
  const auto a = score_cases(test_cases, bundle, config.knn_k);
  const auto b = score_cases(test_cases, full, config.knn_k);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].prefixes.size() + 1 == test_cases[i].events.size());
    for (std::size_t j = 0; j < a[i].prefixes.size(); ++j) {
      CHECK(a[i].prefixes[j].current == b[i].prefixes[j].current);
      CHECK(a[i].prefixes[j].future == b[i].prefixes[j].future);
    }
  }
}

TEST_CASE("training is deterministic in the seed") {
  const auto train = small_log(250, 3);
  const ModelBundle a = train_models(train, fast_config());
  const ModelBundle b = train_models(train, fast_config());
  CHECK(a.ensemble == b.ensemble);
  CHECK(a.uplift == b.uplift);
}

TEST_CASE("mismatched artifacts are detected") {
  test::TempDir two;
  ModelBundle different = train_models(small_log(200, 4), fast_config());
  const std::size_t wider = different.schema.size() + 1;
  different.ensemble = Ensemble(wider, {MemberModel{1, TreeParams{}, DecisionTree::constant(0.5)},
                                        MemberModel{2, TreeParams{}, DecisionTree::constant(0.5)}});
  different.save(two.path());
  CHECK_THROWS_AS(ModelBundle::load(two.path(), false), SchemaMismatch);
}

}  // TEST_SUITE
