#include "prpm/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "prpm/config.hpp"
#include "prpm/error.hpp"
#include "prpm/pipeline.hpp"
#include "prpm/replay.hpp"
#include "prpm/synthetic.hpp"

#ifndef PRPM_VERSION
#define PRPM_VERSION "unknown"
#endif

namespace prpm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string flag_for(const std::string& key) {
  std::string flag = "--" + key;
  std::replace(flag.begin(), flag.end(), '_', '-');
  return flag;
}

/// Config keys settable from the command line; each becomes --key-name.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App& app, const std::vector<std::string>& keys, const std::string& prefix = "") {
    for (const std::string& key : keys) {
      const std::string flag_key = key.substr(prefix.size());
      options[key] = app.add_option(flag_for(flag_key), values[key], "config key " + key)
                         ->group("Config keys");
    }
  }

  KeyValueConfig overrides() const {
    KeyValueConfig c;
    for (const auto& [key, option] : options) {
      if (option->count() > 0) c.set(key, values.at(key));
    }
    return c;
  }
};

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  KeyFlags flags;
};

KeyValueConfig merged_config(const Common& common) {
  KeyValueConfig config;
  if (!common.config_path.empty()) config = KeyValueConfig::load(common.config_path);
  for (const std::string& item : common.sets) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + item + "'");
    config.set(trim(item.substr(0, eq)), trim(item.substr(eq + 1)));
  }
  config.overlay(common.flags.overrides());
  return config;
}

void attach_common(CLI::App& app, Common& common, const std::vector<std::string>& keys,
                   const std::string& prefix = "") {
  app.add_option("-c,--config", common.config_path, "key = value config file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", common.sets, "extra key=value config entries");
  common.flags.attach(app, keys, prefix);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string config_text(const KeyValueConfig& config) {
  std::ostringstream out;
  config.write(out);
  return out.str();
}

json input_entry(const fs::path& path) {
  return json{{"path", path.generic_string()}, {"fnv1a64", file_hash(path)}};
}

void write_manifest(const fs::path& path, const std::string& command,
                    const KeyValueConfig& snapshot, std::uint64_t seed, json inputs,
                    const std::vector<std::string>& artifacts) {
  json m;
  m["tool"] = "prpm";
  m["version"] = PRPM_VERSION;
  m["command"] = command;
  m["seed"] = seed;
  m["config"] = snapshot.entries();
  m["inputs"] = std::move(inputs);
  m["artifacts"] = artifacts;
  write_text(path, m.dump(2) + "\n");
}

void require_log(const fs::path& log) {
  if (!fs::exists(log)) throw IoError("input log not found: " + log.string());
}

struct LoadedLog {
  TraceSplit split;
  std::size_t cases = 0;
  std::size_t removed = 0;
  std::size_t bad_rows = 0;
};

LoadedLog load_and_split(const fs::path& log, const PipelineConfig& config) {
  require_log(log);
  PreparedLog prepared = prepare_log(log, config.mapping);
  LoadedLog out;
  out.cases = prepared.traces.size();
  out.removed = prepared.removed;
  out.bad_rows = prepared.errors.size();
  out.split = temporal_split(std::move(prepared.traces), config.split);
  return out;
}

void print_log_summary(std::ostream& out, const LoadedLog& log) {
  out << "cases: " << log.cases << " (train " << log.split.train.size() << ", valid "
      << log.split.valid.size() << ", test " << log.split.test.size() << "; " << log.removed
      << " incomplete dropped, " << log.bad_rows << " bad rows)\n";
}

std::vector<std::string> sorted_keys(const KeyValueConfig& config) {
  std::vector<std::string> keys;
  for (const auto& [k, v] : config.entries()) keys.push_back(k);
  return keys;
}

void print_summary_table(std::ostream& out, const std::vector<ReplayReport>& reports) {
  out << std::left << std::setw(30) << "policy" << std::right << std::setw(4) << "R"
      << std::setw(9) << "treated" << std::setw(13) << "total_gain" << std::setw(12)
      << "per_treated" << "\n";
  out << std::fixed << std::setprecision(3);
  for (const ReplayReport& r : reports) {
    out << std::left << std::setw(30) << r.policy_name << std::right << std::setw(4)
        << r.resources << std::setw(9) << r.treated_count << std::setw(13) << r.total_gain
        << std::setw(12) << r.gain_per_treated << "\n";
  }
  out.unsetf(std::ios::floatfield);
}

std::vector<std::string> report_artifacts(const std::vector<ReplayReport>& reports) {
  std::vector<std::string> files{"summary.csv"};
  for (const ReplayReport& r : reports) files.push_back("ledgers/" + ledger_file_name(r));
  return files;
}

json model_inputs(const fs::path& dir) {
  json inputs = json::object();
  for (const char* name : {"schema.txt", "ensemble.txt", "uplift.txt", "index.txt"}) {
    if (fs::exists(dir / name)) inputs[name] = input_entry(dir / name);
  }
  return inputs;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Prescriptive process monitoring: train, index, replay and sweep intervention "
               "policies over event logs.",
               "prpm"};
  app.set_version_flag("--version", PRPM_VERSION);
  app.require_subcommand(1);

  const std::vector<std::string> pipeline_keys = PipelineConfig::keys();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic loan-application event log");
  Common synth_common;
  std::string synth_out;
  std::uint64_t synth_seed = 7;
  bool acceptance = false;
  synth->add_option("-o,--out", synth_out, "output CSV path")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--acceptance", acceptance, "start from the bundled acceptance-log settings");
  KeyValueConfig synth_defaults;
  SyntheticSpec{}.to_config(synth_defaults);
  attach_common(*synth, synth_common, sorted_keys(synth_defaults), "synth_");

  // train
  auto* train = app.add_subcommand("train", "fit the outcome ensemble and the uplift model");
  Common train_common;
  std::string train_log, train_models_dir;
  train->add_option("-l,--log", train_log, "event log CSV")->required();
  train->add_option("-m,--model-dir", train_models_dir, "output model directory")->required();
  attach_common(*train, train_common, pipeline_keys);

  // index
  auto* index = app.add_subcommand("index", "score historical prefixes into the KNN index");
  Common index_common;
  std::string index_log, index_models_dir;
  index->add_option("-l,--log", index_log, "event log CSV")->required();
  index->add_option("-m,--model-dir", index_models_dir, "model directory from train")
      ->required();
  attach_common(*index, index_common, pipeline_keys);

  // replay
  auto* replay = app.add_subcommand("replay", "replay the test split under one policy");
  Common replay_common;
  std::string replay_log, replay_models_dir, replay_out, replay_policy = "avgProba_CATE";
  std::size_t replay_capacity = 1;
  replay->add_option("-l,--log", replay_log, "event log CSV")->required();
  replay->add_option("-m,--model-dir", replay_models_dir, "model directory with index")
      ->required();
  replay->add_option("-o,--out", replay_out, "output directory")->required();
  replay->add_option("--policy", replay_policy, "policy name");
  replay->add_option("--capacity", replay_capacity, "number of resources");
  attach_common(*replay, replay_common, pipeline_keys);

  // sweep
  auto* sweep_cmd =
      app.add_subcommand("sweep", "replay every (policy, resource level) pair of the config");
  Common sweep_common;
  std::string sweep_log, sweep_models_dir, sweep_out;
  sweep_cmd->add_option("-l,--log", sweep_log, "event log CSV")->required();
  sweep_cmd->add_option("-m,--model-dir", sweep_models_dir,
                        "model directory with index (trained in-process when omitted)");
  sweep_cmd->add_option("-o,--out", sweep_out, "output directory")->required();
  attach_common(*sweep_cmd, sweep_common, pipeline_keys);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "prpm: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (synth->parsed()) {
      KeyValueConfig config;
      if (acceptance) acceptance_log_spec().to_config(config);
      config.overlay(merged_config(synth_common));
      const SyntheticSpec spec = SyntheticSpec::from_config(config);
      const auto traces = generate_synthetic_log(spec, synth_seed);
      const fs::path path(synth_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      {
        std::ofstream file(path, std::ios::binary);
        if (!file) throw IoError("cannot write " + path.string());
        write_event_log(file, traces);
        if (!file) throw IoError("failed writing " + path.string());
      }
      KeyValueConfig snapshot;
      spec.to_config(snapshot);
      fs::path manifest = path;
      manifest += ".manifest.json";
      write_manifest(manifest, "synth", snapshot, synth_seed, json::object(),
                     {path.filename().string()});
      std::size_t negatives = 0, treated = 0, events = 0;
      for (const Trace& t : traces) {
        negatives += t.outcome == Outcome::negative;
        treated += t.treated;
        events += t.events.size();
      }
      out << "wrote " << traces.size() << " cases (" << events << " events, " << treated
          << " treated, " << negatives << " negative) to " << path.string() << "\n";
      return 0;
    }

    if (train->parsed()) {
      const KeyValueConfig raw = merged_config(train_common);
      const PipelineConfig config = PipelineConfig::from_config(raw);
      const LoadedLog log = load_and_split(train_log, config);
      const ModelBundle bundle = train_models(log.split.train, config);
      const fs::path dir(train_models_dir);
      bundle.save(dir);
      const KeyValueConfig snapshot = config.to_config();
      write_text(dir / "config.snapshot", config_text(snapshot));
      write_manifest(dir / "manifest.json", "train", snapshot, config.seed,
                     json{{"log", input_entry(train_log)}},
                     {"schema.txt", "ensemble.txt", "uplift.txt", "config.snapshot"});
      print_log_summary(out, log);
      out << "features: " << bundle.schema.size() << ", ensemble members: "
          << bundle.ensemble.size() << "\nmodels written to " << dir.string() << "\n";
      return 0;
    }

    if (index->parsed()) {
      const PipelineConfig config = PipelineConfig::from_config(merged_config(index_common));
      const fs::path dir(index_models_dir);
      ModelBundle bundle = ModelBundle::load(dir, false);
      const LoadedLog log = load_and_split(index_log, config);
      build_history(bundle, log.split.train, config);
      bundle.save_index(dir);
      json inputs = model_inputs(dir);
      inputs.erase("index.txt");
      inputs["log"] = input_entry(index_log);
      write_manifest(dir / "index.manifest.json", "index", config.to_config(), config.seed,
                     std::move(inputs), {"index.txt"});
      print_log_summary(out, log);
      out << "indexed " << bundle.index.entry_count() << " distinct prefixes into "
          << (dir / "index.txt").string() << "\n";
      return 0;
    }

    if (replay->parsed() || sweep_cmd->parsed()) {
      const bool single = replay->parsed();
      Common& common = single ? replay_common : sweep_common;
      const std::string& log_path = single ? replay_log : sweep_log;
      const std::string& models_dir = single ? replay_models_dir : sweep_models_dir;
      const fs::path out_dir(single ? replay_out : sweep_out);

      KeyValueConfig raw = merged_config(common);
      if (single) {
        raw.set("policies", replay_policy);
        raw.set("resources", std::to_string(replay_capacity));
      }
      const PipelineConfig config = PipelineConfig::from_config(raw);
      const LoadedLog log = load_and_split(log_path, config);

      ModelBundle bundle;
      json inputs = json::object();
      if (models_dir.empty()) {
        bundle = train_models(log.split.train, config);
        build_history(bundle, log.split.train, config);
      } else {
        bundle = ModelBundle::load(models_dir, true);
        inputs = model_inputs(models_dir);
      }
      inputs["log"] = input_entry(log_path);

      const auto cases = score_cases(log.split.test, bundle, config.knn_k);
      const auto policies = config.policy_configs();
      const auto reports = sweep(cases, policies, config.resources, config.duration,
                                 config.costs, derive_seed(config.seed, 3));
      emit_report(reports, out_dir);
      const KeyValueConfig snapshot = config.to_config();
      write_text(out_dir / "config.snapshot", config_text(snapshot));
      auto artifacts = report_artifacts(reports);
      artifacts.push_back("config.snapshot");
      write_manifest(out_dir / "manifest.json", single ? "replay" : "sweep", snapshot,
                     config.seed, std::move(inputs), artifacts);
      print_log_summary(out, log);
      print_summary_table(out, reports);
      out << "reports written to " << out_dir.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    err << "prpm: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace prpm::cli
