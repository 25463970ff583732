#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "edna/config.hpp"
#include "edna/connector.hpp"
#include "edna/deploy.hpp"
#include "edna/logging.hpp"
#include "edna/registry.hpp"
#include "edna/storage.hpp"
#include "edna/trainer.hpp"

namespace edna {

enum class Mode { Train, Deploy };

struct PluginPlanEntry {
  std::string name;
  Kwargs args = config::ConfigNode::map();
  std::int64_t epochs = 1;
};

struct MetricPlanEntry {
  std::string registry_name;
  metrics::MetricSpec spec;
};

struct LossGroupPlan {
  std::vector<std::string> loss_names;
  std::vector<double> lambdas;
  std::string label;
};

/// Fully resolved desired state: every component named by the config was
/// found in the registry, the experiment key is derived, and the provenance
/// bundle is written. Immutable after apply.
struct PipelinePlan {
  config::EffectiveConfig effective;
  config::ExperimentKey key;
  Mode mode = Mode::Train;
  std::uint64_t seed = 42;

  std::string crawler_name;
  Kwargs crawler_args = config::ConfigNode::map();
  std::string primary_label = "label";
  double eval_fraction = 0.0;
  bool shuffle = true;

  std::vector<TransformSpec> eval_transforms;
  std::vector<TransformSpec> train_transforms;

  ModelSpec model_spec;
  std::string trainer_name;
  Kwargs trainer_args = config::ConfigNode::map();
  std::string deploy_name;

  std::vector<LossGroupPlan> loss_groups;
  std::string optimizer_name;
  double base_lr = 0.01;
  optim::SchedulerState scheduler;
  optim::LambdaSchedulerState lambda_scheduler;

  std::vector<PluginPlanEntry> plugins;
  std::vector<MetricPlanEntry> metrics_entries;
  std::vector<BackupPolicy> backup_policies;

  std::int64_t epochs = 10;
  std::int64_t batch_size = 32;
  std::int64_t accumulation_steps = 1;
  std::int64_t save_frequency = 5;
  std::string model_storage_name = "local";

  std::string checkpoint_key;      // DEPLOYMENT.MODEL_CHECKPOINT
  std::string plugin_source;       // experiment key prefix for plugin states
  std::string stream_dir;
  double poll_interval = 0.05;
  std::string output_dir;          // deploy sink directory (file handoff)

  std::string provenance_key;
};

/// The facade: compose configs, apply the desired state, then train or
/// deploy. Owns the registry, storage backends, and the run logger.
class Engine {
public:
  Engine();

  Registry& registry() { return registry_; }
  Logger& logger() { return logger_; }

  void add_config_file(const std::string& path);
  /// An in-memory overlay appended after file layers (used by CLI flags).
  void add_literal_layer(const std::string& origin, const std::string& text);

  void set_storage_root(const std::string& root) { storage_root_ = root; }
  const std::string& storage_root() const { return storage_root_; }

  /// Records injected by a chain orchestrator; consumed by the "upstream"
  /// crawler.
  void set_inline_records(std::vector<SampleRecord> records) {
    inline_records_ = std::move(records);
  }

  /// parse -> merge -> defaults -> validate -> freeze -> resolve ->
  /// derive key -> package provenance.
  const PipelinePlan& apply(Mode mode = Mode::Train);

  bool applied() const { return plan_.has_value(); }
  const PipelinePlan& plan() const;

  /// Train plan.epochs epochs (or fewer with stop_after), with plugin
  /// warmup and metric/log persistence at the end.
  int train(std::optional<std::int64_t> stop_after = std::nullopt);

  /// Resume from a checkpoint key, then continue to plan.epochs.
  int resume(const std::string& checkpoint_key, bool allow_config_drift);

  /// Deploy over the configured data (static crawl or stream). sink may be
  /// null: records then go to the ARTIFACT category (and output_dir when
  /// configured). Returns the number of emitted records.
  std::int64_t deploy(Connector* sink = nullptr,
                      std::int64_t sequence_base = 0);

  StorageBackend& storage(const std::string& name);
  const std::map<std::string, std::unique_ptr<StorageBackend>>& backends()
      const {
    return backends_;
  }

  /// Validate-only path: everything apply does before freezing/resolving.
  config::EffectiveConfig effective_config() const;

private:
  SampleSet crawl_data(const PipelinePlan& plan);
  std::unique_ptr<Model> build_plan_model(const PipelinePlan& plan,
                                          const SampleSet& data);
  std::vector<LossGroup> resolve_losses(const PipelinePlan& plan);
  void warm_up_plugins(const PipelinePlan& plan, Model& model,
                       const SampleSet& train_set);
  void attach_deploy_plugins(const PipelinePlan& plan, Model& model);
  void persist_metrics(const PipelinePlan& plan,
                       const std::vector<std::unique_ptr<metrics::Metric>>&
                           metric_instances);

  Registry registry_;
  Logger logger_;
  config::ConfigLayerStack stack_;
  std::string storage_root_ = "./edna_store";
  std::map<std::string, std::unique_ptr<StorageBackend>> backends_;
  std::optional<PipelinePlan> plan_;
  std::vector<SampleRecord> inline_records_;
};

/// Gradient-free warmup: `plugin.epochs()` passes over the training data
/// with the plugin attached, post_epoch after each; the plugin must end
/// activated. Model parameters are untouched.
void warmup(Model& model, ModelPlugin& plugin, const SampleSet& train_data,
            const std::vector<TransformSpec>& transforms,
            std::int64_t batch_size);

} // namespace edna
