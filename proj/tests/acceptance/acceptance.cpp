// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Fresh-process criteria shell out to the edna CLI.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "edna/chain.hpp"
#include "edna/engine.hpp"
#include "edna/metrics.hpp"
#include "edna/optim.hpp"
#include "edna/provenance.hpp"
#include "edna/trainer.hpp"

using namespace edna;
using config::ConfigNode;

namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail = "") {
  std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
  if (!detail.empty()) std::cout << " - " << detail;
  std::cout << "\n";
  if (!ok) ++failures;
}

void run_criterion(const std::string& name, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("edna_acceptance_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  f << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream buf;
  buf << f.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(EDNA_CLI_PATH) + " " + args +
                          " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Digest file_digest(const fs::path& path) {
  const std::string bytes = read_file(path);
  return sha256(bytes);
}

// ---------------------------------------------------------------------------
// 1. Config reproduction
// ---------------------------------------------------------------------------
void config_reproduction() {
  const std::string name = "config reproduction (layered save + mnist-style "
                           "overrides)";
  const fs::path configs = fs::path(EDNA_CONFIG_DIR);

  config::ConfigLayerStack save_stack = config::load_layer_files(
      {(configs / "save_base.yml").string(),
       (configs / "save_log_update.yml").string()});
  const ConfigNode save_merged = config::merge_layers(save_stack);

  config::ConfigLayerStack mnist_stack = config::load_layer_files(
      {(configs / "mnist_base.yml").string(),
       (configs / "mnist_lr_update.yml").string()});
  const ConfigNode mnist_merged = config::merge_layers(mnist_stack);

  auto str_at = [](const ConfigNode& doc, const char* path) {
    const ConfigNode* n = doc.at_path(path);
    return n != nullptr && n->is_string() ? n->as_string() : std::string();
  };
  const bool save_ok =
      save_merged.at_path("SAVE.MODEL_VERSION")->as_int() == 2 &&
      str_at(save_merged, "SAVE.LOG_BACKUP.STORAGE_NAME") == "prometheus" &&
      save_merged.at_path("SAVE.LOG_BACKUP.FREQUENCY")->as_int() == 5 &&
      save_merged.at_path("SAVE.LOG_BACKUP.BACKUP")->as_bool() == true &&
      str_at(save_merged, "SAVE.MODEL_CORE_NAME") == "imagenet" &&
      str_at(save_merged, "SAVE.MODEL_BACKBONE") == "resnet18" &&
      str_at(save_merged, "SAVE.MODEL_QUALIFIER") == "all";

  // Merged values plus the base fields that must survive untouched.
  const bool mnist_ok =
      mnist_merged.at_path("EXECUTION.EPOCHS")->as_int() == 10 &&
      mnist_merged.at_path("OPTIMIZER[0].BASE_LR")->as_real() == 1.0e-4 &&
      str_at(mnist_merged, "OPTIMIZER[0].OPTIMIZER") == "Adam" &&
      mnist_merged.at_path("SAVE.MODEL_VERSION")->as_int() == 2 &&
      str_at(mnist_merged, "EXECUTION.TRAINER") == "ClassificationTrainer" &&
      mnist_merged.at_path("EXECUTION.TRAINER_ARGS.accumulation_steps")
              ->as_int() == 2 &&
      str_at(mnist_merged, "DATAREADER.DATASET_ARGS.label_name") ==
          "mnist_digits" &&
      str_at(mnist_merged, "SAVE.MODEL_CORE_NAME") == "mnist_resnet" &&
      mnist_merged.at_path("SAVE.BACKUP")->as_bool() == false &&
      mnist_merged.at_path("SAVE.SAVE_FREQUENCY")->as_int() == 5 &&
      mnist_merged.at_path("TRANSFORMATION.ARGS.normalization[0]")
              ->as_real() == 0.1307 &&
      mnist_merged.at_path("TRANSFORMATION.ARGS.normalization[1]")
              ->as_real() == 0.3081 &&
      mnist_merged.at_path("TRAIN_TRANSFORMATION.ARGS.h_flip")->as_real() ==
          0.5 &&
      str_at(mnist_merged, "MODEL.MODEL_ARCH") == "ClassificationResnet" &&
      str_at(mnist_merged, "MODEL.MODEL_BASE") == "resnet18" &&
      mnist_merged.at_path("MODEL.MODEL_KWARGS.initial_channels")->as_int() ==
          1 &&
      str_at(mnist_merged, "LOSS[0].LOSSES[0]") == "SoftmaxLogitsLoss" &&
      mnist_merged.at_path("LOSS[0].LAMBDA[0]")->as_real() == 1.0 &&
      str_at(mnist_merged, "LOSS[0].LABEL") == "mnist_digits";
  report(name, save_ok && mnist_ok);
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness
// ---------------------------------------------------------------------------
void gradient_correctness() {
  const std::string name =
      "gradient correctness (analytic vs central differences, 10 seeds)";
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const std::size_t batch = 1 + rng.below(6);
    const std::size_t in_dim = 2 + rng.below(4);
    const std::size_t classes = 2 + rng.below(4);

    for (const bool mlp : {false, true}) {
      std::unique_ptr<Model> model;
      if (mlp) {
        model = std::make_unique<MLPClassifier>();
      } else {
        model = std::make_unique<LinearClassifier>();
      }
      setup_model(*model,
                  config::make_map({{"in_dim", ConfigNode(std::int64_t(in_dim))},
                                    {"classes", ConfigNode(std::int64_t(classes))},
                                    {"hidden", ConfigNode(std::int64_t(6))}}),
                  seed);

      Matrix x(batch, in_dim);
      for (double& v : x.data()) v = rng.uniform(-2.0, 2.0);
      std::vector<std::int64_t> labels;
      for (std::size_t i = 0; i < batch; ++i) {
        labels.push_back(std::int64_t(rng.below(classes)));
      }

      const ForwardResult out = model->forward(x);
      const auto loss = optim::cross_entropy(out.output.logits, labels);
      const std::vector<double> analytic = model->backward(x, loss.dlogits);

      std::vector<double> params = model->get_parameters();
      const double h = 1e-5;
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + h;
        model->set_parameters(params);
        const double up =
            optim::cross_entropy(model->forward(x).output.logits, labels).value;
        params[i] = saved - h;
        model->set_parameters(params);
        const double down =
            optim::cross_entropy(model->forward(x).output.logits, labels).value;
        params[i] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-6});
        worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
      }
      model->set_parameters(params);
    }
  }
  report(name, worst < 1e-4, "max relative error " + std::to_string(worst));
}

// ---------------------------------------------------------------------------
// 3. Accumulation equivalence
// ---------------------------------------------------------------------------
void accumulation_equivalence() {
  const std::string name =
      "accumulation equivalence (k micro-batches vs one batch, k in {1,2,4})";
  const auto blob_args = config::make_map({
      {"n_samples", ConfigNode(std::int64_t(32))},
      {"n_features", ConfigNode(std::int64_t(2))},
      {"n_classes", ConfigNode(std::int64_t(2))},
      {"class_sep", ConfigNode(2.0)},
      {"seed", ConfigNode(std::int64_t(5))},
  });
  const SampleSet data = crawl_synthetic_gaussian(blob_args);

  LossGroup group;
  optim::LossFn fn;
  fn.name = "SoftmaxLogitsLoss";
  fn.compute = [](const Matrix& logits,
                  const std::vector<std::int64_t>& labels) {
    return optim::cross_entropy(logits, labels);
  };
  group.losses.push_back(fn);
  group.lambdas = {1.0};

  double worst = 0.0;
  for (const int k : {1, 2, 4}) {
    auto run = [&](std::int64_t batch_size, std::int64_t accum) {
      auto model = std::make_unique<LinearClassifier>();
      setup_model(*model,
                  config::make_map({{"in_dim", ConfigNode(2)},
                                    {"classes", ConfigNode(2)}}),
                  9);
      BaseTrainer trainer;
      TrainerSetup setup;
      setup.model = model.get();
      setup.train_set = &data;
      setup.eval_set = &data;
      setup.primary_label = "label";
      setup.loss_groups = {group};
      setup.optimizer = optim::make_optimizer("SGD", 0.1, 6);
      setup.batch_size = batch_size;
      setup.accumulation_steps = accum;
      setup.shuffle = false;
      trainer.configure(std::move(setup));
      trainer.epoch_step();
      return model->get_parameters();
    };
    const std::vector<double> accumulated = run(32 / k, k);
    const std::vector<double> full = run(32, 1);
    for (std::size_t i = 0; i < accumulated.size(); ++i) {
      worst = std::max(worst, std::abs(accumulated[i] - full[i]));
    }
  }
  report(name, worst < 1e-10, "max parameter delta " + std::to_string(worst));
}

// ---------------------------------------------------------------------------
// 4 + 5. Resume equivalence and determinism, via fresh CLI processes
// ---------------------------------------------------------------------------
const char* kResumeConfig = R"(EXECUTION:
  EPOCHS: 5
  BATCH_SIZE: 8
  SEED: 42
SAVE:
  MODEL_CORE_NAME: accept
  MODEL_BACKBONE: mlp
  SAVE_FREQUENCY: 1
DATAREADER:
  CRAWLER_ARGS:
    n_samples: 200
MODEL:
  MODEL_ARCH: MLPClassifier
  MODEL_KWARGS: {hidden: 8}
OPTIMIZER:
  - OPTIMIZER: Adam
    BASE_LR: 1.0e-3
)";

void resume_equivalence() {
  const std::string name =
      "resume equivalence (straight 5 epochs vs 3 + fresh-process resume)";
  TempDir dir("resume");
  const fs::path cfg = dir.path / "cfg.yml";
  write_file(cfg, kResumeConfig);
  const std::string ck = "accept-v1-mlp-all/model/epoch5.ckpt";

  bool ok = run_cli("train -c " + cfg.string() + " --storage-root " +
                    (dir.path / "a").string()) == 0;
  ok = ok && run_cli("train -c " + cfg.string() + " --storage-root " +
                     (dir.path / "b").string() + " --stop-after 3") == 0;
  ok = ok &&
       run_cli("resume -c " + cfg.string() + " --storage-root " +
               (dir.path / "b").string() +
               " --checkpoint accept-v1-mlp-all/model/epoch3.ckpt") == 0;
  if (!ok) {
    report(name, false, "a CLI run failed");
    return;
  }
  const Digest a = file_digest(dir.path / "a" / "model" / ck);
  const Digest b = file_digest(dir.path / "b" / "model" / ck);
  report(name, a == b,
         a == b ? "final checkpoints bit-identical" : "checkpoints differ");
}

void determinism() {
  const std::string name =
      "determinism (two identical runs, identical checkpoint digests)";
  TempDir dir("determinism");
  const fs::path cfg = dir.path / "cfg.yml";
  write_file(cfg, kResumeConfig);

  bool ok = run_cli("train -c " + cfg.string() + " --storage-root " +
                    (dir.path / "x").string()) == 0;
  ok = ok && run_cli("train -c " + cfg.string() + " --storage-root " +
                     (dir.path / "y").string()) == 0;
  if (!ok) {
    report(name, false, "a CLI run failed");
    return;
  }
  bool equal = true;
  for (int epoch = 1; epoch <= 5; ++epoch) {
    const std::string ck =
        "accept-v1-mlp-all/model/epoch" + std::to_string(epoch) + ".ckpt";
    if (file_digest(dir.path / "x" / "model" / ck) !=
        file_digest(dir.path / "y" / "model" / ck)) {
      equal = false;
    }
  }
  report(name, equal);
}

// ---------------------------------------------------------------------------
// 6. Training sanity
// ---------------------------------------------------------------------------
void training_sanity() {
  const std::string name = "training sanity (>= 95% train accuracy in 5 "
                           "epochs, Adam 1e-3)";
  TempDir dir("sanity");
  Engine engine;
  engine.logger().set_mirror(nullptr);
  engine.set_storage_root((dir.path / "store").string());
  engine.add_literal_layer("acceptance", R"(EXECUTION:
  EPOCHS: 5
  BATCH_SIZE: 8
  SEED: 42
SAVE:
  MODEL_CORE_NAME: sanity
DATAREADER:
  CRAWLER_ARGS:
    n_samples: 1000
    n_features: 2
    n_classes: 2
    class_sep: 2.0
MODEL:
  MODEL_ARCH: MLPClassifier
  MODEL_KWARGS: {hidden: 16}
OPTIMIZER:
  - OPTIMIZER: Adam
    BASE_LR: 1.0e-3
)");
  engine.apply(Mode::Train);
  engine.train();

  // The epoch log lines carry the train-split accuracy.
  double final_acc = -1.0;
  for (const std::string& line : engine.logger().lines()) {
    const std::size_t pos = line.find(" acc=");
    if (pos != std::string::npos && line.rfind("epoch=5 ", 0) == 0) {
      final_acc = std::stod(line.substr(pos + 5));
    }
  }
  report(name, final_acc >= 0.95,
         "epoch-5 accuracy " + std::to_string(final_acc));
}

// ---------------------------------------------------------------------------
// 7. Plugin correctness
// ---------------------------------------------------------------------------
void plugin_correctness() {
  const std::string name = "plugin correctness (warmup thresholds, "
                           "activation, parameter digest)";
  auto model = std::make_unique<MLPClassifier>();
  setup_model(*model,
              config::make_map({{"in_dim", ConfigNode(2)},
                                {"classes", ConfigNode(2)},
                                {"hidden", ConfigNode(8)}}),
              3);
  const std::vector<double> params_before = model->get_parameters();
  const Digest digest_before =
      sha256(params_before.data(), params_before.size() * sizeof(double));

  auto plugin = std::make_shared<LogitConfidencePlugin>();
  plugin->build(config::make_map({{"num_classes", ConfigNode(2)}}));
  model->attach(plugin);

  const SampleSet data = crawl_synthetic_gaussian(config::make_map({
      {"n_samples", ConfigNode(std::int64_t(300))},
      {"n_features", ConfigNode(std::int64_t(2))},
      {"n_classes", ConfigNode(std::int64_t(2))},
      {"class_sep", ConfigNode(2.0)},
      {"seed", ConfigNode(std::int64_t(7))},
  }));

  // Brute-force oracle over exactly the warmup stream: mean of max-softmax
  // per predicted class, batch order as the warmup pass sees it.
  std::vector<double> sums(2, 0.0);
  std::vector<long> counts(2, 0);
  {
    auto twin = std::make_unique<MLPClassifier>();
    setup_model(*twin,
                config::make_map({{"in_dim", ConfigNode(2)},
                                  {"classes", ConfigNode(2)},
                                  {"hidden", ConfigNode(8)}}),
                3);
    const auto batches = batch_iter(data, {}, "label", 8, false, 0, 0);
    for (const Batch& batch : batches) {
      const Matrix probs =
          optim::softmax_rows(twin->forward(batch.features).output.logits);
      for (std::size_t r = 0; r < probs.rows(); ++r) {
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < probs.cols(); ++c) {
          if (probs.at(r, c) > probs.at(r, argmax)) argmax = c;
        }
        sums[argmax] += probs.at(r, argmax);
        counts[argmax] += 1;
      }
    }
  }

  const bool inactive_before = !plugin->activated();
  warmup(*model, *plugin, data, {}, 8);
  const bool active_after = plugin->activated();

  bool thresholds_ok = true;
  for (int c = 0; c < 2; ++c) {
    const double expected = counts[c] == 0 ? 0.0 : sums[c] / double(counts[c]);
    if (std::abs(plugin->running_mean()[c] - expected) > 1e-9) {
      thresholds_ok = false;
    }
  }
  const std::vector<double> params_after = model->get_parameters();
  const Digest digest_after =
      sha256(params_after.data(), params_after.size() * sizeof(double));

  report(name, inactive_before && active_after && thresholds_ok &&
                   digest_before == digest_after);
}

// ---------------------------------------------------------------------------
// 8. Metrics oracles
// ---------------------------------------------------------------------------
void metrics_oracles() {
  const std::string name =
      "metrics oracles (weighted F1 exact on 100 instances, KL within 1e-12)";
  Rng rng(101);
  bool f1_ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const std::int64_t classes = 2 + std::int64_t(rng.below(5));
    const std::size_t n = 1 + rng.below(50);
    std::vector<std::int64_t> preds, labels;
    for (std::size_t i = 0; i < n; ++i) {
      preds.push_back(std::int64_t(rng.below(classes)));
      labels.push_back(std::int64_t(rng.below(classes)));
    }
    // Independent confusion-matrix tally.
    double expected = 0.0;
    for (std::int64_t c = 0; c < classes; ++c) {
      long tp = 0, fp = 0, fn = 0, support = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] == c) ++support;
        if (preds[i] == c && labels[i] == c) ++tp;
        if (preds[i] == c && labels[i] != c) ++fp;
        if (preds[i] != c && labels[i] == c) ++fn;
      }
      const double precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
      const double recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
      const double f1 = precision + recall > 0.0
                            ? 2.0 * precision * recall / (precision + recall)
                            : 0.0;
      expected += (double(support) / double(n)) * f1;
    }
    if (metrics::weighted_f1(preds, labels, classes) != expected) {
      f1_ok = false;
    }
  }

  bool kl_ok = true;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    std::vector<double> p(n), q(n);
    double sp = 0, sq = 0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = 0.01 + rng.next_unit();
      q[i] = 0.01 + rng.next_unit();
      sp += p[i];
      sq += q[i];
    }
    double direct = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p[i] /= sp;
      q[i] /= sq;
    }
    for (std::size_t i = n; i-- > 0;) direct += p[i] * std::log(p[i] / q[i]);
    if (std::abs(metrics::kl_divergence(p, q) - direct) > 1e-12) kl_ok = false;
    if (std::abs(metrics::kl_divergence(p, p)) > 1e-12) kl_ok = false;
  }
  report(name, f1_ok && kl_ok);
}

// ---------------------------------------------------------------------------
// 9. Provenance round-trip
// ---------------------------------------------------------------------------
void provenance_round_trip() {
  const std::string name =
      "provenance round-trip (hash reproduction + tamper detection)";
  TempDir dir("prov");
  const fs::path custom = dir.path / "custom_model.py";
  write_file(custom, "class CustomResnet:\n    pass\n");

  Engine engine;
  engine.set_storage_root((dir.path / "store").string());
  engine.registry().register_component(
      ComponentKind::MODEL, "CustomResnet",
      ModelFactory([](const Kwargs&) {
        return std::make_unique<LinearClassifier>();
      }),
      RegistryTier::User, custom.string());
  engine.add_literal_layer("acceptance", R"(SAVE:
  MODEL_CORE_NAME: provenance
DATAREADER:
  CRAWLER_ARGS:
    n_samples: 16
MODEL:
  MODEL_ARCH: CustomResnet
)");
  const PipelinePlan& plan = engine.apply(Mode::Train);

  const ProvenanceBundle bundle =
      load_provenance(plan.provenance_key, engine.storage("local"));
  bool round_trip_ok = true;
  try {
    verify_provenance(bundle);
  } catch (const std::exception&) {
    round_trip_ok = false;
  }
  round_trip_ok = round_trip_ok && bundle.config_hash == plan.effective.hash &&
                  bundle.component_sources.size() == 1;

  // Tamper with one stored source byte: detection required.
  ProvenanceBundle tampered = bundle;
  tampered.component_sources[0].bytes[0] ^= 1;
  bool tamper_detected = false;
  try {
    verify_provenance(tampered);
  } catch (const CorruptRecordError&) {
    tamper_detected = true;
  }
  report(name, round_trip_ok && tamper_detected);
}

// ---------------------------------------------------------------------------
// 10. Chain integration
// ---------------------------------------------------------------------------
void chain_integration() {
  const std::string name =
      "chain integration (filter -> train -> serve; cyclic manifest rejected)";
  const fs::path manifest_path =
      fs::path(EDNA_CONFIG_DIR) / "chain" / "demo.yml";
  TempDir dir("chain");

  const ChainManifest manifest = load_chain_manifest(manifest_path.string());
  ChainOptions options;
  options.storage_root = (dir.path / "store").string();
  options.work_dir = (dir.path / "work").string();
  options.customize = [](Engine& engine, const StageSpec&) {
    engine.logger().set_mirror(nullptr);
  };
  const ChainResult result = run_chain(manifest, options);

  bool serve_ok = result.all_succeeded();
  std::string detail;
  if (!serve_ok) {
    for (const auto& [stage, error] : result.errors) {
      detail += stage + ": " + error + "; ";
    }
  } else {
    // The serve stage emits one record per input sample (10), each with
    // the confidence plugin's outputs.
    FileHandoffConnector out((dir.path / "work" / "serve.out").string());
    int count = 0;
    bool outputs_ok = true;
    while (true) {
      const auto rec = out.pull();
      if (!rec.has_value()) break;
      ++count;
      const ConfigNode* plugins = rec->payload.find("plugins");
      if (plugins == nullptr ||
          plugins->at_path("LogitConfidence.logit") == nullptr ||
          plugins->at_path("LogitConfidence.threshold") == nullptr) {
        outputs_ok = false;
      }
    }
    serve_ok = count == 10 && outputs_ok;
    detail = "serve emitted " + std::to_string(count) + " records";
  }

  bool cycle_rejected = false;
  try {
    parse_chain_manifest(R"(CHAIN:
  STAGES:
    - NAME: a
      MODE: train
      TRIGGER: once
      UPSTREAM: b
      CONFIG: [a.yml]
    - NAME: b
      MODE: train
      TRIGGER: once
      UPSTREAM: a
      CONFIG: [b.yml]
)",
                         "");
  } catch (const Error&) {
    cycle_rejected = true;
  }
  report(name, serve_ok && cycle_rejected, detail);
}

} // namespace

int main() {
  const auto started = std::chrono::steady_clock::now();

  run_criterion("config reproduction", config_reproduction);
  run_criterion("gradient correctness", gradient_correctness);
  run_criterion("accumulation equivalence", accumulation_equivalence);
  run_criterion("resume equivalence", resume_equivalence);
  run_criterion("determinism", determinism);
  run_criterion("training sanity", training_sanity);
  run_criterion("plugin correctness", plugin_correctness);
  run_criterion("metrics oracles", metrics_oracles);
  run_criterion("provenance round-trip", provenance_round_trip);
  run_criterion("chain integration", chain_integration);

  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  std::cout << (failures == 0 ? "all criteria passed" : "criteria failed")
            << " (" << elapsed.count() << " ms)\n";
  return failures == 0 ? 0 : 1;
}
