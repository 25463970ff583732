#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "edna/matrix.hpp"

namespace edna::optim {

/// Numerically stable softmax of one row (max-shifted).
std::vector<double> softmax(const std::vector<double>& z);

/// Row-wise softmax of a B x C matrix.
Matrix softmax_rows(const Matrix& logits);

struct LossResult {
  double value = 0.0;
  Matrix dlogits; // d(value)/d(logits), same shape as logits
};

/// Mean cross-entropy over the batch with its analytic gradient
/// (softmax(logits) - onehot(labels)) / B.
LossResult cross_entropy(const Matrix& logits,
                         const std::vector<std::int64_t>& labels);

/// A named loss over (logits, labels). SoftmaxLogitsLoss is the built-in.
struct LossFn {
  std::string name;
  std::function<LossResult(const Matrix&, const std::vector<std::int64_t>&)>
      compute;
};

double weighted_total(const std::vector<double>& values,
                      const std::vector<double>& lambdas);

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

enum class OptimizerKind { SGD, Adam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::SGD;
  double base_lr = 0.01;
  double current_lr = 0.01;
  // Adam state
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptimizerState make_optimizer(const std::string& kind_name, double base_lr,
                              std::size_t param_count);

void sgd_step(std::vector<double>& params, const std::vector<double>& grads,
              double lr);

/// One Adam update applied in place; increments state.t and updates moments.
void adam_step(OptimizerState& state, std::vector<double>& params,
               const std::vector<double>& grads);

/// Dispatch on state.kind; uses state.current_lr.
void optimizer_step(OptimizerState& state, std::vector<double>& params,
                    const std::vector<double>& grads);

// ---------------------------------------------------------------------------
// Schedulers
// ---------------------------------------------------------------------------

enum class SchedulerKind { Constant, StepDecay, Exponential };

struct SchedulerState {
  SchedulerKind kind = SchedulerKind::Constant;
  double gamma = 1.0;
  std::int64_t step_size = 1;
  std::int64_t epoch_counter = 0; // completed epochs
};

SchedulerKind scheduler_kind_from_name(const std::string& name);

/// LR for a given completed-epoch count; pure in (kind, gamma, step_size,
/// epoch, base_lr).
double scheduler_lr(const SchedulerState& s, double base_lr,
                    std::int64_t epoch);

/// Advance one epoch and return the new current lr.
double scheduler_step(SchedulerState& s, double base_lr);

enum class LambdaPolicy { Constant, ExponentialDecay };

struct LambdaSchedulerState {
  LambdaPolicy policy = LambdaPolicy::Constant;
  double gamma = 1.0;
};

LambdaPolicy lambda_policy_from_name(const std::string& name);

/// Applied once per epoch end to every loss weight.
std::vector<double> lambda_scheduler_step(const std::vector<double>& lambdas,
                                          const LambdaSchedulerState& policy);

} // namespace edna::optim
