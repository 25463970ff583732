#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edna/checkpoint.hpp"
#include "edna/data.hpp"
#include "edna/logging.hpp"
#include "edna/model.hpp"
#include "edna/optim.hpp"
#include "edna/storage.hpp"

namespace edna {

/// One LOSS config entry: a set of losses with weights over one label.
struct LossGroup {
  std::vector<optim::LossFn> losses;
  std::vector<double> lambdas;
  std::string label; // empty = the primary label
};

struct TrainerSetup {
  Model* model = nullptr;
  const SampleSet* train_set = nullptr;
  const SampleSet* eval_set = nullptr;
  std::vector<TransformSpec> train_transforms;
  std::vector<TransformSpec> eval_transforms;
  std::string primary_label;
  std::vector<LossGroup> loss_groups;
  optim::OptimizerState optimizer;
  optim::SchedulerState scheduler;
  optim::LambdaSchedulerState lambda_scheduler;
  std::int64_t batch_size = 32;
  std::int64_t accumulation_steps = 1;
  std::int64_t save_frequency = 0; // 0 = never checkpoint
  bool shuffle = true;
  std::uint64_t seed = 42;
  config::ExperimentKey experiment_key;
  Digest config_hash{};
  StorageBackend* storage = nullptr; // checkpoints + per-epoch backups
  std::vector<BackupPolicy> backup_policies;
  Logger* logger = nullptr;
};

struct EvaluationReport {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
  std::int64_t per_epoch = 0;
};

/// The training loop: per micro-batch `step`, gradient accumulation with
/// loss scaled by accumulation_steps, per-epoch scheduler steps and plugin
/// post_epoch hooks, evaluation, and frequency-gated checkpoints. Custom
/// trainers override step and evaluate_impl.
class BaseTrainer {
public:
  BaseTrainer() : rng_(0) {}
  virtual ~BaseTrainer() = default;

  /// Hook for custom trainers (runs once, receives TRAINER_ARGS).
  virtual void setup(const Kwargs& trainer_args) { (void)trainer_args; }

  void configure(TrainerSetup setup);

  /// Run epochs until global_epoch reaches target_epochs.
  void train(std::int64_t target_epochs);

  void epoch_step();

  /// Default: forward, weighted losses over configured labels, analytic
  /// gradient through the model. Returns the total loss for this batch and
  /// leaves the flat gradient in pending_gradient().
  virtual double step(const Batch& batch);

  EvaluationReport evaluate();

  /// No-op placement hook kept in the call sequence.
  virtual Batch move_to_device(Batch batch) { return batch; }

  std::string save_checkpoint();
  void restore_checkpoint(const std::string& key, bool allow_config_drift);

  // State access
  std::int64_t global_epoch() const { return global_epoch_; }
  std::int64_t global_batch() const { return global_batch_; }
  std::int64_t accumulation_count() const { return accumulation_count_; }
  std::int64_t update_count() const { return update_count_; }
  const std::map<std::string, std::vector<double>>& loss_history() const {
    return loss_history_;
  }
  const optim::OptimizerState& optimizer() const { return setup_.optimizer; }
  const std::vector<std::vector<double>>& lambdas() const { return lambdas_; }
  Model& model() { return *setup_.model; }

protected:
  virtual EvaluationReport evaluate_impl();

  void set_pending_gradient(std::vector<double> grad) {
    pending_gradient_ = std::move(grad);
  }
  const std::vector<double>& pending_gradient() const {
    return pending_gradient_;
  }

  const TrainerSetup& setup_info() const { return setup_; }

private:
  void apply_update();
  void log_line(const std::string& line);
  const std::vector<std::int64_t>& labels_for(const Batch& batch,
                                              const std::string& label) const;

  TrainerSetup setup_;
  bool configured_ = false;

  std::int64_t global_epoch_ = 0;
  std::int64_t global_batch_ = 0;
  std::int64_t accumulation_count_ = 0;
  std::int64_t update_count_ = 0;
  std::vector<double> accumulated_grads_;
  std::vector<double> pending_gradient_;
  std::map<std::string, std::vector<double>> loss_history_;
  std::vector<std::vector<double>> lambdas_; // per loss group, scheduled
  Rng rng_;
};

} // namespace edna
