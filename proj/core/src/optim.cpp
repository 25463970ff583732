#include "edna/optim.hpp"

#include <algorithm>
#include <cmath>

namespace edna::optim {

std::vector<double> softmax(const std::vector<double>& z) {
  if (z.empty()) throw Error("softmax: empty input");
  double max_z = z[0];
  for (double v : z) {
    if (!std::isfinite(v)) throw Error("softmax: non-finite input");
    max_z = std::max(max_z, v);
  }
  std::vector<double> out(z.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - max_z);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::vector<double> row(logits.cols());
    for (std::size_t c = 0; c < logits.cols(); ++c) row[c] = logits.at(r, c);
    const std::vector<double> p = softmax(row);
    for (std::size_t c = 0; c < logits.cols(); ++c) out.at(r, c) = p[c];
  }
  return out;
}

LossResult cross_entropy(const Matrix& logits,
                         const std::vector<std::int64_t>& labels) {
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (labels.size() != batch) {
    throw Error("cross_entropy: labels length " +
                std::to_string(labels.size()) + " != batch " +
                std::to_string(batch));
  }
  LossResult res;
  res.dlogits = softmax_rows(logits);
  double total = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const std::int64_t y = labels[r];
    if (y < 0 || std::size_t(y) >= classes) {
      throw Error("cross_entropy: label " + std::to_string(y) +
                  " out of range [0, " + std::to_string(classes) + ")");
    }
    // log softmax computed stably from the raw row
    double max_z = logits.at(r, 0);
    for (std::size_t c = 0; c < classes; ++c) {
      max_z = std::max(max_z, logits.at(r, c));
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
      denom += std::exp(logits.at(r, c) - max_z);
    }
    total += -(logits.at(r, std::size_t(y)) - max_z - std::log(denom));
  }
  res.value = total / double(batch);
  // gradient: (p - onehot) / B
  for (std::size_t r = 0; r < batch; ++r) {
    res.dlogits.at(r, std::size_t(labels[r])) -= 1.0;
  }
  for (double& v : res.dlogits.data()) v /= double(batch);
  return res;
}

double weighted_total(const std::vector<double>& values,
                      const std::vector<double>& lambdas) {
  if (values.empty() || values.size() != lambdas.size()) {
    throw Error("weighted_total: values and lambdas must have equal nonzero "
                "length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    total += lambdas[i] * values[i];
  }
  return total;
}

OptimizerState make_optimizer(const std::string& kind_name, double base_lr,
                              std::size_t param_count) {
  if (base_lr <= 0.0) throw Error("optimizer: BASE_LR must be > 0");
  OptimizerState state;
  state.base_lr = base_lr;
  state.current_lr = base_lr;
  if (kind_name == "SGD") {
    state.kind = OptimizerKind::SGD;
  } else if (kind_name == "Adam") {
    state.kind = OptimizerKind::Adam;
    state.m.assign(param_count, 0.0);
    state.v.assign(param_count, 0.0);
  } else {
    throw Error("unknown optimizer '" + kind_name + "' (SGD, Adam)");
  }
  return state;
}

namespace {

void require_finite(const std::vector<double>& grads) {
  for (double g : grads) {
    if (!std::isfinite(g)) throw Error("non-finite gradient");
  }
}

} // namespace

void sgd_step(std::vector<double>& params, const std::vector<double>& grads,
              double lr) {
  if (params.size() != grads.size()) {
    throw Error("sgd_step: parameter/gradient length mismatch");
  }
  require_finite(grads);
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] -= lr * grads[i];
  }
}

void adam_step(OptimizerState& state, std::vector<double>& params,
               const std::vector<double>& grads) {
  if (state.kind != OptimizerKind::Adam) {
    throw Error("adam_step: state is not Adam");
  }
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw Error("adam_step: length mismatch");
  }
  require_finite(grads);
  state.t += 1;
  const double b1t = 1.0 - std::pow(state.beta1, double(state.t));
  const double b2t = 1.0 - std::pow(state.beta2, double(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] =
        state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / b1t;
    const double v_hat = state.v[i] / b2t;
    params[i] -= state.current_lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

void optimizer_step(OptimizerState& state, std::vector<double>& params,
                    const std::vector<double>& grads) {
  if (state.kind == OptimizerKind::SGD) {
    sgd_step(params, grads, state.current_lr);
  } else {
    adam_step(state, params, grads);
  }
}

SchedulerKind scheduler_kind_from_name(const std::string& name) {
  if (name == "constant") return SchedulerKind::Constant;
  if (name == "step_decay") return SchedulerKind::StepDecay;
  if (name == "exponential") return SchedulerKind::Exponential;
  throw Error("unknown scheduler '" + name +
              "' (constant, step_decay, exponential)");
}

double scheduler_lr(const SchedulerState& s, double base_lr,
                    std::int64_t epoch) {
  switch (s.kind) {
    case SchedulerKind::Constant:
      return base_lr;
    case SchedulerKind::StepDecay:
      return base_lr * std::pow(s.gamma, double(epoch / s.step_size));
    case SchedulerKind::Exponential:
      return base_lr * std::pow(s.gamma, double(epoch));
  }
  return base_lr;
}

double scheduler_step(SchedulerState& s, double base_lr) {
  if (s.gamma <= 0.0 || s.gamma > 1.0) {
    throw Error("scheduler: gamma must be in (0, 1]");
  }
  if (s.step_size < 1) throw Error("scheduler: step_size must be >= 1");
  s.epoch_counter += 1;
  return scheduler_lr(s, base_lr, s.epoch_counter);
}

LambdaPolicy lambda_policy_from_name(const std::string& name) {
  if (name == "constant") return LambdaPolicy::Constant;
  if (name == "exponential_decay") return LambdaPolicy::ExponentialDecay;
  throw Error("unknown lambda policy '" + name +
              "' (constant, exponential_decay)");
}

std::vector<double> lambda_scheduler_step(const std::vector<double>& lambdas,
                                          const LambdaSchedulerState& policy) {
  if (policy.policy == LambdaPolicy::Constant) return lambdas;
  if (policy.gamma < 0.0) throw Error("lambda decay must be >= 0");
  std::vector<double> out = lambdas;
  for (double& l : out) l *= policy.gamma;
  return out;
}

} // namespace edna::optim
