// edna: declarative pipeline engine CLI.
//
//   edna validate -c base.yml -c override.yml
//   edna plan -c base.yml --against base.yml --against override.yml
//   edna train -c cfg.yml --seed 7 --storage-root ./store
//   edna deploy -c cfg.yml --checkpoint exp-v1-x-all/model/epoch5.ckpt
//   edna resume -c cfg.yml --checkpoint exp-v1-x-all/model/epoch3.ckpt
//   edna package -c cfg.yml
//   edna chain -m chain.yml
//   edna inspect --storage-root ./store --category model --prefix exp

#include <CLI11.hpp>
#include <iostream>

#include "edna/chain.hpp"
#include "edna/engine.hpp"
#include "edna/version.hpp"

namespace {

using namespace edna;

struct CommonArgs {
  std::vector<std::string> configs;
  std::string storage_root = "./edna_store";
  std::int64_t seed = -1;
  bool has_seed = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.configs,
                  "Config layer (repeatable, merge order)")
      ->required();
  cmd->add_option("--storage-root", args.storage_root,
                  "Root directory of the local storage backend");
  cmd->add_option("--seed", args.seed, "Override EXECUTION.SEED")
      ->each([&args](const std::string&) { args.has_seed = true; });
}

Engine make_engine(const CommonArgs& args) {
  Engine engine;
  engine.set_storage_root(args.storage_root);
  for (const std::string& path : args.configs) {
    engine.add_config_file(path);
  }
  if (args.has_seed) {
    engine.add_literal_layer("cli:--seed", "EXECUTION:\n  SEED: " +
                                               std::to_string(args.seed) +
                                               "\n");
  }
  return engine;
}

config::EffectiveConfig effective_of(const std::vector<std::string>& paths) {
  Engine engine;
  for (const std::string& path : paths) {
    engine.add_config_file(path);
  }
  return engine.effective_config();
}

std::string diff_value(const std::optional<std::string>& v) {
  return v.has_value() ? *v : "(absent)";
}

Category category_from_name(const std::string& name) {
  for (Category c : {Category::CONFIG, Category::LOG, Category::MODEL,
                     Category::ARTIFACT, Category::PLUGIN, Category::METRIC}) {
    if (name == category_name(c)) return c;
  }
  throw Error("unknown category '" + name +
              "' (config, log, model, artifact, plugin, metric)");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"edna: declarative, reproducible pipeline engine"};
  app.set_version_flag("--version", std::string(kEngineVersion));
  app.require_subcommand(1);

  CommonArgs validate_args;
  auto* validate_cmd =
      app.add_subcommand("validate", "Merge, default-fill, and validate the "
                                     "config stack; print the effective form");
  add_common(validate_cmd, validate_args);

  CommonArgs plan_args;
  std::vector<std::string> against;
  auto* plan_cmd = app.add_subcommand(
      "plan", "Diff the effective config against another stack");
  add_common(plan_cmd, plan_args);
  plan_cmd->add_option("--against", against, "Config layers to compare with")
      ->required();

  CommonArgs train_args;
  std::int64_t stop_after = -1;
  auto* train_cmd = app.add_subcommand("train", "Apply and train");
  add_common(train_cmd, train_args);
  train_cmd->add_option("--stop-after", stop_after,
                        "Stop after N epochs (simulates an interruption; the "
                        "config hash is unchanged)");

  CommonArgs deploy_args;
  std::string deploy_checkpoint;
  std::string deploy_out;
  auto* deploy_cmd = app.add_subcommand("deploy", "Apply and deploy");
  add_common(deploy_cmd, deploy_args);
  deploy_cmd->add_option("--checkpoint", deploy_checkpoint,
                         "Checkpoint key (overrides "
                         "DEPLOYMENT.MODEL_CHECKPOINT)");
  deploy_cmd->add_option("--out", deploy_out,
                         "Emit records to this connector directory");

  CommonArgs resume_args;
  std::string resume_checkpoint;
  bool allow_drift = false;
  auto* resume_cmd =
      app.add_subcommand("resume", "Restore a checkpoint and keep training");
  add_common(resume_cmd, resume_args);
  resume_cmd->add_option("--checkpoint", resume_checkpoint, "Checkpoint key")
      ->required();
  resume_cmd->add_flag("--allow-config-drift", allow_drift,
                       "Downgrade a config-hash mismatch to a warning");

  CommonArgs package_args;
  auto* package_cmd = app.add_subcommand(
      "package", "Write the provenance bundle and print its key");
  add_common(package_cmd, package_args);

  std::string manifest_path;
  std::string chain_storage_root = "./edna_store";
  std::string chain_work_dir = "./edna_chain";
  auto* chain_cmd =
      app.add_subcommand("chain", "Run a pipeline-of-pipelines manifest");
  chain_cmd->add_option("-m,--manifest", manifest_path, "Chain manifest file")
      ->required();
  chain_cmd->add_option("--storage-root", chain_storage_root,
                        "Shared storage root for all stages");
  chain_cmd->add_option("--work-dir", chain_work_dir,
                        "Directory for stage connectors");

  std::string inspect_root;
  std::string inspect_category;
  std::string inspect_prefix;
  auto* inspect_cmd =
      app.add_subcommand("inspect", "List keys in a local storage root");
  inspect_cmd->add_option("--storage-root", inspect_root, "Storage root")
      ->required();
  inspect_cmd->add_option("--category", inspect_category,
                          "Restrict to one category");
  inspect_cmd->add_option("--prefix", inspect_prefix, "Key prefix filter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) {
      Engine engine = make_engine(validate_args);
      const config::EffectiveConfig eff = engine.effective_config();
      std::cout << eff.canonical_text;
      std::cout << "# hash: " << to_hex(eff.hash) << "\n";
      return 0;
    }

    if (plan_cmd->parsed()) {
      Engine engine = make_engine(plan_args);
      const config::EffectiveConfig lhs = engine.effective_config();
      const config::EffectiveConfig rhs = effective_of(against);
      const auto changes = config::diff(lhs, rhs);
      if (changes.empty()) {
        std::cout << "no changes\n";
      }
      for (const config::DiffEntry& change : changes) {
        std::cout << change.path << ": " << diff_value(change.old_value)
                  << " -> " << diff_value(change.new_value) << "\n";
      }
      return 0;
    }

    if (train_cmd->parsed()) {
      Engine engine = make_engine(train_args);
      engine.apply(Mode::Train);
      return engine.train(stop_after >= 0
                              ? std::optional<std::int64_t>(stop_after)
                              : std::nullopt);
    }

    if (deploy_cmd->parsed()) {
      Engine engine = make_engine(deploy_args);
      if (!deploy_checkpoint.empty()) {
        engine.add_literal_layer(
            "cli:--checkpoint",
            "DEPLOYMENT:\n  MODEL_CHECKPOINT: \"" + deploy_checkpoint +
                "\"\n");
      }
      if (!deploy_out.empty()) {
        engine.add_literal_layer(
            "cli:--out",
            "DEPLOYMENT:\n  OUTPUT_DIR: \"" + deploy_out + "\"\n");
      }
      engine.apply(Mode::Deploy);
      engine.deploy();
      return 0;
    }

    if (resume_cmd->parsed()) {
      Engine engine = make_engine(resume_args);
      engine.apply(Mode::Train);
      return engine.resume(resume_checkpoint, allow_drift);
    }

    if (package_cmd->parsed()) {
      Engine engine = make_engine(package_args);
      const PipelinePlan& plan = engine.apply(Mode::Train);
      std::cout << plan.provenance_key << "\n";
      return 0;
    }

    if (chain_cmd->parsed()) {
      const ChainManifest manifest = load_chain_manifest(manifest_path);
      ChainOptions options;
      options.storage_root = chain_storage_root;
      options.work_dir = chain_work_dir;
      const ChainResult result = run_chain(manifest, options);
      for (const auto& [name, status] : result.statuses) {
        const char* text = status == StageStatus::Succeeded  ? "succeeded"
                           : status == StageStatus::Failed   ? "failed"
                                                             : "skipped";
        std::cout << name << ": " << text;
        if (result.errors.count(name) != 0) {
          std::cout << " (" << result.errors.at(name) << ")";
        }
        std::cout << "\n";
      }
      return result.all_succeeded() ? 0 : 1;
    }

    if (inspect_cmd->parsed()) {
      LocalFileBackend backend("local", inspect_root);
      std::vector<Category> categories;
      if (!inspect_category.empty()) {
        categories.push_back(category_from_name(inspect_category));
      } else {
        categories = {Category::CONFIG,   Category::LOG,    Category::MODEL,
                      Category::ARTIFACT, Category::PLUGIN, Category::METRIC};
      }
      for (Category c : categories) {
        for (const std::string& key : backend.list(c, inspect_prefix)) {
          std::cout << category_name(c) << "/" << key << "\n";
        }
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
