#include "edna/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "edna/config.hpp"
#include "edna/metrics.hpp"

namespace edna {

using config::ConfigNode;

namespace {

std::string fmt_real(double v) {
  return config::scalar_text(ConfigNode(v));
}

} // namespace

void BaseTrainer::configure(TrainerSetup setup) {
  if (setup.model == nullptr) throw Error("trainer: no model");
  if (setup.train_set == nullptr || setup.train_set->empty()) {
    throw Error("trainer: no training data");
  }
  if (setup.loss_groups.empty()) throw Error("trainer: no losses configured");
  for (const LossGroup& g : setup.loss_groups) {
    if (g.losses.empty() || g.losses.size() != g.lambdas.size()) {
      throw Error("trainer: LOSSES and LAMBDA must have equal nonzero length");
    }
  }
  if (setup.accumulation_steps < 1) {
    throw Error("trainer: accumulation_steps must be >= 1");
  }
  if (setup.batch_size < 1) throw Error("trainer: batch_size must be >= 1");

  setup_ = std::move(setup);
  lambdas_.clear();
  for (const LossGroup& g : setup_.loss_groups) {
    lambdas_.push_back(g.lambdas);
  }
  accumulated_grads_.assign(setup_.model->parameters().total_count(), 0.0);
  rng_ = Rng(mix64(setup_.seed) ^ 0x7261696e65727371ULL);
  configured_ = true;
}

void BaseTrainer::log_line(const std::string& line) {
  if (setup_.logger != nullptr) setup_.logger->info(line);
}

const std::vector<std::int64_t>& BaseTrainer::labels_for(
    const Batch& batch, const std::string& label) const {
  if (label.empty() || label == setup_.primary_label) {
    return batch.labels;
  }
  auto it = batch.datalabels.find(label);
  if (it == batch.datalabels.end()) {
    throw Error("loss label '" + label + "' not present in batch");
  }
  return it->second;
}

double BaseTrainer::step(const Batch& batch) {
  ForwardResult res = setup_.model->forward(batch.features);
  Matrix dlogits_total(res.output.logits.rows(), res.output.logits.cols());
  double total = 0.0;
  for (std::size_t g = 0; g < setup_.loss_groups.size(); ++g) {
    const LossGroup& group = setup_.loss_groups[g];
    const std::vector<std::int64_t>& labels = labels_for(batch, group.label);
    std::vector<double> values;
    for (std::size_t i = 0; i < group.losses.size(); ++i) {
      const optim::LossFn& fn = group.losses[i];
      optim::LossResult lr = fn.compute(res.output.logits, labels);
      std::string history_key = fn.name;
      if (setup_.loss_groups.size() > 1) {
        history_key += "#" + std::to_string(g);
      }
      loss_history_[history_key].push_back(lr.value);
      values.push_back(lr.value);
      const double lambda = lambdas_[g][i];
      for (std::size_t k = 0; k < dlogits_total.data().size(); ++k) {
        dlogits_total.data()[k] += lambda * lr.dlogits.data()[k];
      }
    }
    total += optim::weighted_total(values, lambdas_[g]);
  }
  set_pending_gradient(setup_.model->backward(batch.features, dlogits_total));
  return total;
}

void BaseTrainer::apply_update() {
  std::vector<double> params = setup_.model->get_parameters();
  optim::optimizer_step(setup_.optimizer, params, accumulated_grads_);
  setup_.model->set_parameters(params);
  std::fill(accumulated_grads_.begin(), accumulated_grads_.end(), 0.0);
  update_count_ += 1;
}

void BaseTrainer::epoch_step() {
  if (!configured_) throw Error("trainer not configured");

  const std::vector<Batch> batches = batch_iter(
      *setup_.train_set, setup_.train_transforms, setup_.primary_label,
      setup_.batch_size, setup_.shuffle, setup_.seed,
      std::uint64_t(global_epoch_));

  const double epoch_lr = setup_.optimizer.current_lr;
  log_line("epoch=" + std::to_string(global_epoch_ + 1) +
           " start lr=" + fmt_real(epoch_lr));

  // Remember history lengths so the epoch log can report per-epoch means.
  std::map<std::string, std::size_t> history_marks;
  for (const auto& [name, values] : loss_history_) {
    history_marks[name] = values.size();
  }

  for (const Batch& raw_batch : batches) {
    setup_.model->set_train_mode(true);
    const Batch batch = move_to_device(raw_batch);
    double loss;
    try {
      loss = step(batch);
    } catch (const std::exception& e) {
      throw Error(std::string(e.what()) + " (epoch " +
                  std::to_string(global_epoch_) + ", batch " +
                  std::to_string(global_batch_) + ")");
    }
    if (!std::isfinite(loss)) {
      throw Error("non-finite loss at epoch " + std::to_string(global_epoch_) +
                  ", batch " + std::to_string(global_batch_));
    }
    // Scaled-loss accumulation: grads of (loss / accumulation_steps).
    const std::vector<double>& grad = pending_gradient();
    if (grad.size() != accumulated_grads_.size()) {
      throw Error("step produced a gradient of length " +
                  std::to_string(grad.size()) + ", expected " +
                  std::to_string(accumulated_grads_.size()));
    }
    const double scale = 1.0 / double(setup_.accumulation_steps);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      accumulated_grads_[i] += grad[i] * scale;
    }
    accumulation_count_ += 1;
    if (accumulation_count_ == setup_.accumulation_steps) {
      apply_update();
      accumulation_count_ = 0;
    }
    global_batch_ += 1;
  }

  // Flush a partial accumulation group so gradients never leak across
  // epochs.
  if (accumulation_count_ > 0) {
    apply_update();
    accumulation_count_ = 0;
  }

  global_batch_ = 0;
  setup_.optimizer.current_lr =
      optim::scheduler_step(setup_.scheduler, setup_.optimizer.base_lr);
  for (std::vector<double>& group : lambdas_) {
    group = optim::lambda_scheduler_step(group, setup_.lambda_scheduler);
  }
  for (const auto& plugin : setup_.model->attached_plugins()) {
    plugin->post_epoch(global_epoch_);
  }
  global_epoch_ += 1;

  const EvaluationReport report = evaluate();

  std::string line = "epoch=" + std::to_string(global_epoch_);
  for (const auto& [name, values] : loss_history_) {
    const std::size_t mark = history_marks.count(name) != 0
                                 ? history_marks[name]
                                 : 0;
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = mark; i < values.size(); ++i) {
      sum += values[i];
      ++n;
    }
    if (n > 0) {
      line += " loss." + name + "=" + fmt_real(sum / double(n));
    }
  }
  line += " lr=" + fmt_real(epoch_lr);
  line += " acc=" + fmt_real(report.accuracy);
  line += " wf1=" + fmt_real(report.weighted_f1);
  log_line(line);

  if (setup_.storage != nullptr && setup_.save_frequency > 0 &&
      global_epoch_ % setup_.save_frequency == 0) {
    save_checkpoint();
  }
  if (setup_.storage != nullptr && setup_.logger != nullptr) {
    for (const BackupPolicy& policy : setup_.backup_policies) {
      if (policy.category == Category::LOG &&
          should_save(policy, global_epoch_)) {
        setup_.storage->put_text(
            Category::LOG,
            setup_.experiment_key.canonical() + "/log/train.log",
            setup_.logger->text());
      }
    }
  }
}

void BaseTrainer::train(std::int64_t target_epochs) {
  if (!configured_) throw Error("trainer not configured");
  while (global_epoch_ < target_epochs) {
    epoch_step();
  }
}

EvaluationReport BaseTrainer::evaluate() { return evaluate_impl(); }

EvaluationReport BaseTrainer::evaluate_impl() {
  if (setup_.eval_set == nullptr || setup_.eval_set->empty()) {
    throw Error("evaluate: empty evaluation split");
  }
  setup_.model->set_train_mode(false);
  const std::vector<Batch> batches = batch_iter(
      *setup_.eval_set, setup_.eval_transforms, setup_.primary_label,
      setup_.batch_size, /*shuffle=*/false, setup_.seed, 0);

  std::vector<std::int64_t> preds;
  std::vector<std::int64_t> labels;
  for (const Batch& batch : batches) {
    ForwardResult res = setup_.model->forward(batch.features);
    const Matrix& logits = res.output.logits;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
      // Ties break toward the lowest class index (strict > scan).
      std::size_t argmax = 0;
      for (std::size_t c = 1; c < logits.cols(); ++c) {
        if (logits.at(r, c) > logits.at(r, argmax)) argmax = c;
      }
      preds.push_back(std::int64_t(argmax));
      labels.push_back(batch.labels[r]);
    }
  }
  EvaluationReport report;
  report.accuracy = metrics::accuracy(preds, labels);
  report.weighted_f1 = metrics::weighted_f1(
      preds, labels, setup_.eval_set->class_counts.at(setup_.primary_label));
  report.per_epoch = global_epoch_;
  return report;
}

std::string BaseTrainer::save_checkpoint() {
  if (setup_.storage == nullptr) {
    throw Error("save_checkpoint: no storage backend configured");
  }
  Checkpoint ckpt;
  ckpt.experiment_key = setup_.experiment_key;
  ckpt.epoch = global_epoch_;
  ckpt.global_epoch = global_epoch_;
  ckpt.global_batch = global_batch_;
  ckpt.accumulation_count = accumulation_count_;
  ckpt.param_tensors = setup_.model->parameters().entries();
  ckpt.optimizer = setup_.optimizer;
  ckpt.scheduler = setup_.scheduler;
  ckpt.lambda_scheduler = setup_.lambda_scheduler;
  ckpt.lambdas = lambdas_;
  ckpt.rng_state = rng_.save_state();
  ckpt.config_hash = setup_.config_hash;
  for (const auto& plugin : setup_.model->attached_plugins()) {
    ckpt.plugin_states[plugin->name()] = serialize_plugin_state(*plugin);
  }
  const std::string key = write_checkpoint(ckpt, *setup_.storage);
  log_line("checkpoint " + key);
  return key;
}

void BaseTrainer::restore_checkpoint(const std::string& key,
                                     bool allow_config_drift) {
  if (setup_.storage == nullptr) {
    throw Error("restore_checkpoint: no storage backend configured");
  }
  const Checkpoint ckpt = read_checkpoint(key, *setup_.storage);
  if (ckpt.config_hash != setup_.config_hash) {
    if (!allow_config_drift) {
      throw Error("checkpoint config hash mismatch: checkpoint was produced "
                  "by a different effective config (use --allow-config-drift "
                  "to override)");
    }
    log_line("warning: resuming across a config drift (hash mismatch)");
  }

  ParameterSet& params = setup_.model->parameters();
  if (ckpt.param_tensors.size() != params.entries().size()) {
    throw Error("checkpoint has " + std::to_string(ckpt.param_tensors.size()) +
                " tensors, model expects " +
                std::to_string(params.entries().size()));
  }
  for (const auto& tensor : ckpt.param_tensors) {
    ParameterSet::Tensor& target = params.at(tensor.name);
    if (target.shape != tensor.shape) {
      throw Error("checkpoint tensor '" + tensor.name + "' shape mismatch");
    }
    target.data = tensor.data;
  }
  setup_.optimizer = ckpt.optimizer;
  setup_.scheduler = ckpt.scheduler;
  setup_.lambda_scheduler = ckpt.lambda_scheduler;
  if (!ckpt.lambdas.empty()) {
    if (ckpt.lambdas.size() != lambdas_.size()) {
      throw Error("checkpoint lambda groups do not match configured losses");
    }
    lambdas_ = ckpt.lambdas;
  }
  if (!ckpt.rng_state.empty()) {
    rng_.load_state(ckpt.rng_state);
  }
  global_epoch_ = ckpt.global_epoch;
  global_batch_ = ckpt.global_batch;
  accumulation_count_ = ckpt.accumulation_count;
  for (const auto& [name, bytes] : ckpt.plugin_states) {
    const auto plugin = setup_.model->find_plugin(name);
    if (plugin != nullptr) {
      deserialize_plugin_state(*plugin, bytes);
    }
  }
  log_line("restored " + key + " at epoch " + std::to_string(global_epoch_));
}

} // namespace edna
