#include "edna/engine.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "edna/provenance.hpp"
#include "edna/version.hpp"

namespace edna {

using config::ConfigNode;

// ---------------------------------------------------------------------------
// Built-ins
// ---------------------------------------------------------------------------

void register_builtins(Registry& registry) {
  auto model_factory = [](auto make) {
    return ModelFactory([make](const Kwargs&) -> std::unique_ptr<Model> {
      return make();
    });
  };
  registry.register_component(
      ComponentKind::MODEL, "LinearClassifier",
      model_factory([] { return std::make_unique<LinearClassifier>(); }),
      RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::MODEL, "MLPClassifier",
      model_factory([] { return std::make_unique<MLPClassifier>(); }),
      RegistryTier::BuiltIn);

  const TrainerFactory trainer_factory =
      [](const Kwargs&) { return std::make_unique<BaseTrainer>(); };
  registry.register_component(ComponentKind::TRAINER, "ClassificationTrainer",
                              trainer_factory, RegistryTier::BuiltIn);
  registry.register_component(ComponentKind::TRAINER, "BaseTrainer",
                              trainer_factory, RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::DEPLOYMENT, "BaseDeploy",
      DeployFactory([](const Kwargs&) { return std::make_unique<BaseDeploy>(); }),
      RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::PLUGIN, "LogitConfidence",
      PluginFactory([](const Kwargs& kwargs) {
        auto plugin = std::make_shared<LogitConfidencePlugin>();
        plugin->build(kwargs);
        return plugin;
      }),
      RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::PLUGIN, "ThresholdKeep",
      PluginFactory([](const Kwargs& kwargs) {
        auto plugin = std::make_shared<ThresholdKeepPlugin>();
        plugin->build(kwargs);
        return plugin;
      }),
      RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::METRIC, "Accuracy",
      MetricFactory(&metrics::make_accuracy_metric), RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::METRIC, "WeightedF1",
      MetricFactory(&metrics::make_weighted_f1_metric), RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::METRIC, "KLDivergence",
      MetricFactory(&metrics::make_kl_divergence_metric),
      RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::STORAGE, "local_file",
      StorageFactory([](const std::string& name, const Kwargs& args) {
        const ConfigNode* root = args.find("root");
        if (root == nullptr) {
          throw Error("local_file storage '" + name + "' requires ARGS.root");
        }
        return std::make_unique<LocalFileBackend>(name, root->as_string());
      }),
      RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::STORAGE, "in_memory",
      StorageFactory([](const std::string& name, const Kwargs&) {
        return std::make_unique<InMemoryBackend>(name);
      }),
      RegistryTier::BuiltIn);

  registry.register_component(ComponentKind::CRAWLER, "synthetic_gaussian",
                              CrawlerFactory(&crawl_synthetic_gaussian),
                              RegistryTier::BuiltIn);
  registry.register_component(ComponentKind::CRAWLER, "csv_file",
                              CrawlerFactory(&crawl_csv_file),
                              RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::CRAWLER, "inline",
      CrawlerFactory([](const Kwargs& args) {
        const ConfigNode* records = args.find("records");
        if (records == nullptr || !records->is_list()) {
          throw Error("inline crawler requires a 'records' list");
        }
        std::vector<SampleRecord> parsed;
        for (const ConfigNode& node : records->as_list()) {
          parsed.push_back(record_from_node(node));
        }
        return crawl_inline(std::move(parsed));
      }),
      RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::CRAWLER, "upstream",
      CrawlerFactory([](const Kwargs&) -> SampleSet {
        throw Error("the 'upstream' crawler is only valid inside a chain "
                    "stage with an upstream connector");
      }),
      RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::DATASET, "TabularDataset",
      DatasetFactory([](const Kwargs& args) {
        return std::vector<TransformSpec>{transform_from_args(args)};
      }),
      RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::LOSS, "SoftmaxLogitsLoss",
      LossFactory([](const Kwargs&) {
        optim::LossFn fn;
        fn.name = "SoftmaxLogitsLoss";
        fn.compute = [](const Matrix& logits,
                        const std::vector<std::int64_t>& labels) {
          return optim::cross_entropy(logits, labels);
        };
        return fn;
      }),
      RegistryTier::BuiltIn);

  registry.register_component(
      ComponentKind::OPTIMIZER, "SGD",
      OptimizerFactory([](double base_lr, std::size_t params) {
        return optim::make_optimizer("SGD", base_lr, params);
      }),
      RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::OPTIMIZER, "Adam",
      OptimizerFactory([](double base_lr, std::size_t params) {
        return optim::make_optimizer("Adam", base_lr, params);
      }),
      RegistryTier::BuiltIn);

  auto scheduler_factory = [](optim::SchedulerKind kind) {
    return SchedulerFactory([kind](const Kwargs& args) {
      optim::SchedulerState state;
      state.kind = kind;
      if (const ConfigNode* gamma = args.find("GAMMA")) {
        state.gamma = gamma->as_real();
      }
      if (const ConfigNode* step = args.find("STEP_SIZE")) {
        state.step_size = step->as_int();
      }
      return state;
    });
  };
  registry.register_component(ComponentKind::SCHEDULER, "constant",
                              scheduler_factory(optim::SchedulerKind::Constant),
                              RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::SCHEDULER, "step_decay",
      scheduler_factory(optim::SchedulerKind::StepDecay),
      RegistryTier::BuiltIn);
  registry.register_component(
      ComponentKind::SCHEDULER, "exponential",
      scheduler_factory(optim::SchedulerKind::Exponential),
      RegistryTier::BuiltIn);
}

// ---------------------------------------------------------------------------
// Warmup
// ---------------------------------------------------------------------------

void warmup(Model& model, ModelPlugin& plugin, const SampleSet& train_data,
            const std::vector<TransformSpec>& transforms,
            std::int64_t batch_size) {
  if (train_data.empty()) throw Error("warmup: empty training data");
  if (plugin.activated()) {
    throw Error("warmup: plugin '" + plugin.name() + "' is already activated");
  }
  if (model.find_plugin(plugin.name()) == nullptr) {
    throw Error("warmup: plugin '" + plugin.name() +
                "' is not attached to the model");
  }
  const std::string primary = train_data.class_counts.begin()->first;
  model.set_train_mode(false);
  for (std::int64_t e = 0; e < plugin.epochs(); ++e) {
    const std::vector<Batch> batches =
        batch_iter(train_data, transforms, primary, batch_size,
                   /*shuffle=*/false, 0, 0);
    for (const Batch& batch : batches) {
      model.forward(batch.features);
    }
    plugin.post_epoch(e);
  }
  if (!plugin.activated()) {
    throw Error("warmup: plugin '" + plugin.name() +
                "' did not activate in post_epoch");
  }
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Engine::Engine() { register_builtins(registry_); }

void Engine::add_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  try {
    stack_.layers.push_back(config::parse_config(text));
  } catch (const ParseError& e) {
    throw Error(path + ": " + e.what());
  }
  stack_.sources.push_back(path);
  stack_.texts.push_back(std::move(text));
}

void Engine::add_literal_layer(const std::string& origin,
                               const std::string& text) {
  try {
    stack_.layers.push_back(config::parse_config(text));
  } catch (const ParseError& e) {
    throw Error(origin + ": " + e.what());
  }
  stack_.sources.push_back(origin);
  stack_.texts.push_back(text);
}

config::EffectiveConfig Engine::effective_config() const {
  if (stack_.layers.empty()) {
    throw Error("no config layers given (use --config)");
  }
  const ConfigNode merged = config::merge_layers(stack_);
  const config::SchemaSpec& schema = config::pipeline_schema();
  return config::validate(config::apply_defaults(merged, schema), schema);
}

const PipelinePlan& Engine::plan() const {
  if (!plan_.has_value()) throw Error("apply() has not been called");
  return *plan_;
}

StorageBackend& Engine::storage(const std::string& name) {
  auto it = backends_.find(name);
  if (it == backends_.end()) {
    throw Error("no storage backend named '" + name + "'");
  }
  return *it->second;
}

namespace {

std::int64_t node_int(const ConfigNode& doc, const std::string& path) {
  const ConfigNode* n = doc.at_path(path);
  if (n == nullptr) throw Error("config missing " + path);
  return n->as_int();
}

std::string node_string(const ConfigNode& doc, const std::string& path) {
  const ConfigNode* n = doc.at_path(path);
  if (n == nullptr) throw Error("config missing " + path);
  return n->as_string();
}

} // namespace

const PipelinePlan& Engine::apply(Mode mode) {
  PipelinePlan plan;
  plan.effective = effective_config();
  plan.mode = mode;
  const ConfigNode& doc = plan.effective.doc;

  plan.seed = std::uint64_t(node_int(doc, "EXECUTION.SEED"));
  plan.epochs = node_int(doc, "EXECUTION.EPOCHS");
  plan.batch_size = node_int(doc, "EXECUTION.BATCH_SIZE");
  plan.save_frequency = node_int(doc, "SAVE.SAVE_FREQUENCY");
  plan.model_storage_name = node_string(doc, "SAVE.STORAGE_NAME");

  plan.trainer_name = node_string(doc, "EXECUTION.TRAINER");
  plan.trainer_args = *doc.at_path("EXECUTION.TRAINER_ARGS");
  if (const ConfigNode* acc = plan.trainer_args.find("accumulation_steps")) {
    plan.accumulation_steps = acc->as_int();
  }

  plan.crawler_name = node_string(doc, "DATAREADER.CRAWLER");
  plan.crawler_args = *doc.at_path("DATAREADER.CRAWLER_ARGS");
  const ConfigNode& dataset_args = *doc.at_path("DATAREADER.DATASET_ARGS");
  if (const ConfigNode* label = dataset_args.find("label_name")) {
    plan.primary_label = label->as_string();
  }
  const ConfigNode& generator_args = *doc.at_path("DATAREADER.GENERATOR_ARGS");
  if (const ConfigNode* frac = generator_args.find("eval_fraction")) {
    plan.eval_fraction = frac->as_real();
    if (plan.eval_fraction < 0.0 || plan.eval_fraction >= 1.0) {
      throw Error("eval_fraction must be in [0, 1)");
    }
  }
  if (const ConfigNode* shuffle = generator_args.find("shuffle")) {
    plan.shuffle = shuffle->as_bool();
  }

  plan.model_spec.arch = node_string(doc, "MODEL.MODEL_ARCH");
  plan.model_spec.base = node_string(doc, "MODEL.MODEL_BASE");
  plan.model_spec.kwargs = *doc.at_path("MODEL.MODEL_KWARGS");

  for (const ConfigNode& entry : doc.find("LOSS")->as_list()) {
    LossGroupPlan group;
    for (const ConfigNode& name : entry.find("LOSSES")->as_list()) {
      group.loss_names.push_back(name.as_string());
    }
    for (const ConfigNode& l : entry.find("LAMBDA")->as_list()) {
      group.lambdas.push_back(l.as_real());
    }
    group.label = entry.find("LABEL")->as_string();
    plan.loss_groups.push_back(std::move(group));
  }

  const auto& optimizers = doc.find("OPTIMIZER")->as_list();
  if (optimizers.size() != 1) {
    throw Error("built-in models have one parameter group; OPTIMIZER must "
                "have exactly one entry, got " +
                std::to_string(optimizers.size()));
  }
  plan.optimizer_name = optimizers[0].find("OPTIMIZER")->as_string();
  plan.base_lr = optimizers[0].find("BASE_LR")->as_real();

  const std::string scheduler_name = node_string(doc, "SCHEDULER.LR_SCHEDULER");
  plan.lambda_scheduler.policy = optim::lambda_policy_from_name(
      node_string(doc, "SCHEDULER.LAMBDA_POLICY"));
  plan.lambda_scheduler.gamma = doc.at_path("SCHEDULER.LAMBDA_GAMMA")->as_real();

  for (const ConfigNode& entry : doc.find("PLUGINS")->as_list()) {
    PluginPlanEntry p;
    p.name = entry.find("PLUGIN")->as_string();
    p.args = *entry.find("PLUGIN_ARGS");
    p.epochs = entry.find("EPOCHS")->as_int();
    if (p.epochs < 1) throw Error("plugin EPOCHS must be >= 1");
    if (p.args.find("epochs") == nullptr) {
      p.args.set("epochs", ConfigNode(p.epochs));
    }
    plan.plugins.push_back(std::move(p));
  }

  for (const ConfigNode& entry : doc.find("METRICS")->as_list()) {
    MetricPlanEntry m;
    m.registry_name = entry.find("METRIC")->as_string();
    m.spec.metric_name = entry.find("METRIC_NAME")->as_string();
    if (m.spec.metric_name.empty()) m.spec.metric_name = m.registry_name;
    m.spec.metric_type = entry.find("METRIC_TYPE")->as_string();
    m.spec.args = *entry.find("METRIC_ARGS");
    plan.metrics_entries.push_back(std::move(m));
  }

  {
    BackupPolicy log_policy;
    log_policy.category = Category::LOG;
    log_policy.enabled = doc.at_path("SAVE.LOG_BACKUP.BACKUP")->as_bool();
    log_policy.backend_name =
        node_string(doc, "SAVE.LOG_BACKUP.STORAGE_NAME");
    log_policy.frequency = node_int(doc, "SAVE.LOG_BACKUP.FREQUENCY");
    plan.backup_policies.push_back(log_policy);
  }

  plan.deploy_name = node_string(doc, "DEPLOYMENT.DEPLOYMENT");
  plan.checkpoint_key = node_string(doc, "DEPLOYMENT.MODEL_CHECKPOINT");
  plan.plugin_source = node_string(doc, "DEPLOYMENT.PLUGIN_SOURCE");
  plan.stream_dir = node_string(doc, "DEPLOYMENT.STREAM_DIR");
  plan.poll_interval = doc.at_path("DEPLOYMENT.POLL_INTERVAL")->as_real();
  plan.output_dir = node_string(doc, "DEPLOYMENT.OUTPUT_DIR");

  // Storage backends: the default local root plus configured entries.
  backends_.clear();
  backends_["local"] =
      std::make_unique<LocalFileBackend>("local", storage_root_);
  backends_["memory"] = std::make_unique<InMemoryBackend>("memory");
  for (const ConfigNode& entry : doc.find("STORAGE")->as_list()) {
    const std::string name = entry.find("NAME")->as_string();
    const std::string kind = entry.find("KIND")->as_string();
    const Registration& reg = registry_.resolve(ComponentKind::STORAGE, kind);
    backends_[name] =
        std::get<StorageFactory>(reg.factory)(name, *entry.find("ARGS"));
  }

  // Freeze, then resolve every component the plan names.
  registry_.freeze();
  registry_.resolve(ComponentKind::CRAWLER, plan.crawler_name);
  registry_.resolve(ComponentKind::MODEL, plan.model_spec.arch);
  registry_.resolve(ComponentKind::TRAINER, plan.trainer_name);
  registry_.resolve(ComponentKind::DEPLOYMENT, plan.deploy_name);
  for (const LossGroupPlan& group : plan.loss_groups) {
    for (const std::string& name : group.loss_names) {
      registry_.resolve(ComponentKind::LOSS, name);
    }
  }
  registry_.resolve(ComponentKind::OPTIMIZER, plan.optimizer_name);
  const Registration& sched_reg =
      registry_.resolve(ComponentKind::SCHEDULER, scheduler_name);
  plan.scheduler =
      std::get<SchedulerFactory>(sched_reg.factory)(*doc.find("SCHEDULER"));
  for (const PluginPlanEntry& p : plan.plugins) {
    registry_.resolve(ComponentKind::PLUGIN, p.name);
  }
  for (const MetricPlanEntry& m : plan.metrics_entries) {
    registry_.resolve(ComponentKind::METRIC, m.registry_name);
  }

  // Transforms through the dataset component (user tier may shadow it).
  const Registration& dataset_reg =
      registry_.resolve(ComponentKind::DATASET, "TabularDataset");
  const auto& dataset_factory = std::get<DatasetFactory>(dataset_reg.factory);
  plan.eval_transforms =
      dataset_factory(*doc.at_path("TRANSFORMATION.ARGS"));
  plan.train_transforms = plan.eval_transforms;
  {
    const std::vector<TransformSpec> extra =
        dataset_factory(*doc.at_path("TRAIN_TRANSFORMATION.ARGS"));
    plan.train_transforms.insert(plan.train_transforms.end(), extra.begin(),
                                 extra.end());
  }

  plan.key = config::derive_experiment_key(plan.effective);

  // Package provenance: layers, effective config, custom component sources.
  ProvenanceBundle bundle;
  bundle.effective_config = plan.effective.canonical_text;
  for (std::size_t i = 0; i < stack_.texts.size(); ++i) {
    bundle.layer_files.emplace_back(stack_.sources[i], stack_.texts[i]);
  }
  for (const SourceEntry& entry : registry_.snapshot_sources()) {
    ComponentSource src;
    src.kind = component_kind_name(entry.kind);
    src.name = entry.name;
    src.path = entry.path;
    src.digest = entry.digest;
    src.bytes = registry_.read_source_bytes(entry);
    bundle.component_sources.push_back(std::move(src));
  }
  bundle.engine_version = kEngineVersion;
  bundle.seed = std::int64_t(plan.seed);
  bundle.config_hash = plan.effective.hash;
  plan.provenance_key =
      package_provenance(bundle, plan.key, storage(plan.model_storage_name));

  plan_ = std::move(plan);
  return *plan_;
}

SampleSet Engine::crawl_data(const PipelinePlan& plan) {
  if (plan.crawler_name == "upstream") {
    if (inline_records_.empty()) {
      throw Error("the 'upstream' crawler has no injected records (only "
                  "valid inside a chain stage with an upstream connector)");
    }
    return crawl_inline(inline_records_);
  }
  Kwargs args = plan.crawler_args;
  if (args.find("label_name") == nullptr) {
    args.set("label_name", ConfigNode(plan.primary_label));
  }
  if (args.find("seed") == nullptr) {
    args.set("seed", ConfigNode(std::int64_t(plan.seed)));
  }
  const Registration& reg =
      registry_.resolve(ComponentKind::CRAWLER, plan.crawler_name);
  return std::get<CrawlerFactory>(reg.factory)(args);
}

std::unique_ptr<Model> Engine::build_plan_model(const PipelinePlan& plan,
                                                const SampleSet& data) {
  ModelSpec spec = plan.model_spec;
  if (spec.kwargs.find("in_dim") == nullptr) {
    spec.kwargs.set("in_dim", ConfigNode(std::int64_t(data.feature_dim)));
  }
  if (spec.kwargs.find("classes") == nullptr) {
    auto it = data.class_counts.find(plan.primary_label);
    if (it == data.class_counts.end()) {
      throw Error("label '" + plan.primary_label +
                  "' not present in crawled data");
    }
    spec.kwargs.set("classes", ConfigNode(it->second));
  }
  return build_model(spec, registry_, plan.seed);
}

std::vector<LossGroup> Engine::resolve_losses(const PipelinePlan& plan) {
  std::vector<LossGroup> groups;
  for (const LossGroupPlan& g : plan.loss_groups) {
    LossGroup group;
    for (const std::string& name : g.loss_names) {
      const Registration& reg = registry_.resolve(ComponentKind::LOSS, name);
      group.losses.push_back(
          std::get<LossFactory>(reg.factory)(config::ConfigNode::map()));
    }
    group.lambdas = g.lambdas;
    group.label = g.label;
    groups.push_back(std::move(group));
  }
  return groups;
}

void Engine::warm_up_plugins(const PipelinePlan& plan, Model& model,
                             const SampleSet& train_set) {
  if (plan.plugins.empty()) return;
  StorageBackend& backend = storage(plan.model_storage_name);
  for (const PluginPlanEntry& entry : plan.plugins) {
    const Registration& reg =
        registry_.resolve(ComponentKind::PLUGIN, entry.name);
    std::shared_ptr<ModelPlugin> plugin =
        std::get<PluginFactory>(reg.factory)(entry.args);
    model.attach(plugin);
    warmup(model, *plugin, train_set, plan.eval_transforms, plan.batch_size);
    const std::string key =
        plan.key.canonical() + "/plugin/" + plugin->name() + ".bin";
    backend.put(Category::PLUGIN, key, serialize_plugin_state(*plugin));
    logger_.info("plugin " + plugin->name() + " warmed up, state at " + key);
  }
}

void Engine::attach_deploy_plugins(const PipelinePlan& plan, Model& model) {
  const std::string source_key =
      plan.plugin_source.empty() ? plan.key.canonical() : plan.plugin_source;
  StorageBackend& backend = storage(plan.model_storage_name);
  for (const PluginPlanEntry& entry : plan.plugins) {
    const Registration& reg =
        registry_.resolve(ComponentKind::PLUGIN, entry.name);
    std::shared_ptr<ModelPlugin> plugin =
        std::get<PluginFactory>(reg.factory)(entry.args);
    const std::string key = source_key + "/plugin/" + plugin->name() + ".bin";
    if (backend.exists(Category::PLUGIN, key)) {
      deserialize_plugin_state(*plugin, backend.get(Category::PLUGIN, key));
      logger_.info("plugin " + plugin->name() + " state loaded from " + key);
    }
    model.attach(plugin);
  }
}

void Engine::persist_metrics(
    const PipelinePlan& plan,
    const std::vector<std::unique_ptr<metrics::Metric>>& metric_instances) {
  StorageBackend& backend = storage(plan.model_storage_name);
  for (const auto& metric : metric_instances) {
    if (metric->series().records.empty()) continue;
    const std::string key = plan.key.canonical() + "/metrics/" +
                            metric->spec().metric_name + ".csv";
    backend.put_text(Category::METRIC, key, metric->to_csv());
  }
}

namespace {

/// Deterministic contiguous split: the trailing fraction becomes the
/// evaluation set; at 0 the evaluation split is the full set.
std::pair<SampleSet, SampleSet> split_eval(const SampleSet& all,
                                           double eval_fraction) {
  if (eval_fraction <= 0.0) {
    return {all, all};
  }
  const std::size_t n = all.records.size();
  std::size_t n_eval = std::size_t(std::llround(eval_fraction * double(n)));
  n_eval = std::min(n_eval, n - 1);
  if (n_eval == 0) return {all, all};
  std::vector<SampleRecord> train_records(all.records.begin(),
                                          all.records.end() - n_eval);
  std::vector<SampleRecord> eval_records(all.records.end() - n_eval,
                                         all.records.end());
  return {build_sample_set(std::move(train_records)),
          build_sample_set(std::move(eval_records))};
}

} // namespace

int Engine::train(std::optional<std::int64_t> stop_after) {
  const PipelinePlan& plan = this->plan();
  const SampleSet all = crawl_data(plan);
  const auto [train_set, eval_set] = split_eval(all, plan.eval_fraction);

  std::unique_ptr<Model> model = build_plan_model(plan, train_set);

  const Registration& trainer_reg =
      registry_.resolve(ComponentKind::TRAINER, plan.trainer_name);
  std::unique_ptr<BaseTrainer> trainer =
      std::get<TrainerFactory>(trainer_reg.factory)(plan.trainer_args);
  trainer->setup(plan.trainer_args);

  const Registration& opt_reg =
      registry_.resolve(ComponentKind::OPTIMIZER, plan.optimizer_name);

  TrainerSetup setup;
  setup.model = model.get();
  setup.train_set = &train_set;
  setup.eval_set = &eval_set;
  setup.train_transforms = plan.train_transforms;
  setup.eval_transforms = plan.eval_transforms;
  setup.primary_label = plan.primary_label;
  setup.loss_groups = resolve_losses(plan);
  setup.optimizer = std::get<OptimizerFactory>(opt_reg.factory)(
      plan.base_lr, model->parameters().total_count());
  setup.scheduler = plan.scheduler;
  setup.lambda_scheduler = plan.lambda_scheduler;
  setup.batch_size = plan.batch_size;
  setup.accumulation_steps = plan.accumulation_steps;
  setup.save_frequency = plan.save_frequency;
  setup.shuffle = plan.shuffle;
  setup.seed = plan.seed;
  setup.experiment_key = plan.key;
  setup.config_hash = plan.effective.hash;
  setup.storage = &storage(plan.model_storage_name);
  setup.backup_policies = plan.backup_policies;
  setup.logger = &logger_;
  trainer->configure(std::move(setup));

  const std::int64_t target =
      stop_after.has_value() ? std::min(*stop_after, plan.epochs)
                             : plan.epochs;
  trainer->train(target);

  // A stopped-short run is an interruption: no warmup, no final artifacts.
  if (target < plan.epochs) {
    logger_.info("stopped after " + std::to_string(target) + " of " +
                 std::to_string(plan.epochs) + " epochs");
    return 0;
  }

  // Plugins warm up against the trained model, then persist.
  warm_up_plugins(plan, *model, train_set);

  // Per-epoch metric series from the run's evaluation reports.
  std::vector<std::unique_ptr<metrics::Metric>> metric_instances;
  for (const MetricPlanEntry& m : plan.metrics_entries) {
    const Registration& reg =
        registry_.resolve(ComponentKind::METRIC, m.registry_name);
    metric_instances.push_back(std::get<MetricFactory>(reg.factory)(m.spec));
    metric_instances.back()->build();
  }
  if (!metric_instances.empty()) {
    const EvaluationReport report = trainer->evaluate();
    Kwargs inputs = config::ConfigNode::map();
    // Final-state inputs: preds/labels over the evaluation split.
    {
      const std::vector<Batch> batches =
          batch_iter(eval_set, plan.eval_transforms, plan.primary_label,
                     plan.batch_size, false, plan.seed, 0);
      ConfigNode::List preds, labels;
      for (const Batch& batch : batches) {
        ForwardResult res = model->forward(batch.features);
        for (std::size_t r = 0; r < res.output.logits.rows(); ++r) {
          std::size_t argmax = 0;
          for (std::size_t c = 1; c < res.output.logits.cols(); ++c) {
            if (res.output.logits.at(r, c) > res.output.logits.at(r, argmax)) {
              argmax = c;
            }
          }
          preds.push_back(ConfigNode(std::int64_t(argmax)));
          labels.push_back(ConfigNode(batch.labels[r]));
        }
      }
      inputs.set("preds", ConfigNode(std::move(preds)));
      inputs.set("labels", ConfigNode(std::move(labels)));
      inputs.set("num_classes",
                 ConfigNode(eval_set.class_counts.at(plan.primary_label)));
    }
    for (auto& metric : metric_instances) {
      try {
        metric->update(inputs, trainer->global_epoch(), 0);
      } catch (const std::exception& e) {
        logger_.info("warning: metric '" + metric->spec().metric_name +
                     "' update failed: " + e.what());
      }
    }
    (void)report;
  }
  persist_metrics(plan, metric_instances);

  // Final log persistence when LOG backups are enabled.
  for (const BackupPolicy& policy : plan.backup_policies) {
    if (policy.category == Category::LOG && policy.enabled) {
      storage(policy.backend_name)
          .put_text(Category::LOG, plan.key.canonical() + "/log/train.log",
                    logger_.text());
    }
  }
  return 0;
}

int Engine::resume(const std::string& checkpoint_key,
                   bool allow_config_drift) {
  const PipelinePlan& plan = this->plan();
  const SampleSet all = crawl_data(plan);
  const auto [train_set, eval_set] = split_eval(all, plan.eval_fraction);

  std::unique_ptr<Model> model = build_plan_model(plan, train_set);

  const Registration& trainer_reg =
      registry_.resolve(ComponentKind::TRAINER, plan.trainer_name);
  std::unique_ptr<BaseTrainer> trainer =
      std::get<TrainerFactory>(trainer_reg.factory)(plan.trainer_args);
  trainer->setup(plan.trainer_args);

  const Registration& opt_reg =
      registry_.resolve(ComponentKind::OPTIMIZER, plan.optimizer_name);

  TrainerSetup setup;
  setup.model = model.get();
  setup.train_set = &train_set;
  setup.eval_set = &eval_set;
  setup.train_transforms = plan.train_transforms;
  setup.eval_transforms = plan.eval_transforms;
  setup.primary_label = plan.primary_label;
  setup.loss_groups = resolve_losses(plan);
  setup.optimizer = std::get<OptimizerFactory>(opt_reg.factory)(
      plan.base_lr, model->parameters().total_count());
  setup.scheduler = plan.scheduler;
  setup.lambda_scheduler = plan.lambda_scheduler;
  setup.batch_size = plan.batch_size;
  setup.accumulation_steps = plan.accumulation_steps;
  setup.save_frequency = plan.save_frequency;
  setup.shuffle = plan.shuffle;
  setup.seed = plan.seed;
  setup.experiment_key = plan.key;
  setup.config_hash = plan.effective.hash;
  setup.storage = &storage(plan.model_storage_name);
  setup.backup_policies = plan.backup_policies;
  setup.logger = &logger_;
  trainer->configure(std::move(setup));

  trainer->restore_checkpoint(checkpoint_key, allow_config_drift);
  trainer->train(plan.epochs);

  warm_up_plugins(plan, *model, train_set);
  for (const BackupPolicy& policy : plan.backup_policies) {
    if (policy.category == Category::LOG && policy.enabled) {
      storage(policy.backend_name)
          .put_text(Category::LOG, plan.key.canonical() + "/log/train.log",
                    logger_.text());
    }
  }
  return 0;
}

std::int64_t Engine::deploy(Connector* sink, std::int64_t sequence_base) {
  const PipelinePlan& plan = this->plan();
  if (plan.mode != Mode::Deploy) {
    throw Error("deploy requires a plan applied in deploy mode");
  }

  // Deploys need enough of the data contract to size the model; a static
  // crawl provides records, a stream provides them later.
  std::optional<SampleSet> static_set;
  if (plan.stream_dir.empty()) {
    static_set = crawl_data(plan);
  }

  std::unique_ptr<Model> model;
  if (static_set.has_value()) {
    model = build_plan_model(plan, *static_set);
  } else {
    // Stream mode: kwargs must carry in_dim/classes.
    model = build_model(plan.model_spec, registry_, plan.seed);
  }

  if (!plan.checkpoint_key.empty()) {
    const Checkpoint ckpt =
        read_checkpoint(plan.checkpoint_key, storage(plan.model_storage_name));
    ParameterSet& params = model->parameters();
    for (const auto& tensor : ckpt.param_tensors) {
      ParameterSet::Tensor& target = params.at(tensor.name);
      if (target.shape != tensor.shape) {
        throw Error("checkpoint tensor '" + tensor.name +
                    "' does not fit the configured model");
      }
      target.data = tensor.data;
    }
    logger_.info("deploy: parameters loaded from " + plan.checkpoint_key);
  } else {
    logger_.info("deploy: no MODEL_CHECKPOINT configured; using seed-"
                 "initialized parameters");
  }

  attach_deploy_plugins(plan, *model);

  const Registration& deploy_reg =
      registry_.resolve(ComponentKind::DEPLOYMENT, plan.deploy_name);
  std::unique_ptr<BaseDeploy> deployment =
      std::get<DeployFactory>(deploy_reg.factory)(config::ConfigNode::map());
  deployment->setup(*plan.effective.doc.at_path("DEPLOYMENT"));

  std::unique_ptr<FileHandoffConnector> owned_sink;
  if (sink == nullptr && !plan.output_dir.empty()) {
    owned_sink = std::make_unique<FileHandoffConnector>(plan.output_dir);
    sink = owned_sink.get();
  }

  DeploySetup setup;
  setup.model = model.get();
  setup.transforms = plan.eval_transforms;
  setup.batch_size = plan.batch_size;
  setup.sink = sink;
  setup.sequence_base = sequence_base;
  setup.queue_capacity =
      plan.effective.doc.at_path("DEPLOYMENT.QUEUE_CAPACITY")->as_int();
  setup.logger = &logger_;
  deployment->configure(setup);

  std::int64_t emitted = 0;
  if (static_set.has_value()) {
    emitted = deployment->run_records(static_set->records);
  } else {
    StreamSource src;
    src.directory = plan.stream_dir;
    src.poll_interval_s = plan.poll_interval;
    emitted = deployment->run_stream(src);
  }
  logger_.info("deploy emitted " + std::to_string(emitted) + " records");

  if (sink == nullptr) {
    // Persist collected records as an artifact.
    std::string text;
    for (const ConnectorRecord& record : deployment->collected()) {
      text += FileHandoffConnector::format_line(record);
    }
    storage(plan.model_storage_name)
        .put_text(Category::ARTIFACT,
                  plan.key.canonical() + "/deploy/records.txt", text);
  } else if (owned_sink != nullptr) {
    owned_sink->close();
  }
  return emitted;
}

} // namespace edna
