#include <doctest.h>

#include <cmath>

#include "edna/model.hpp"
#include "edna/optim.hpp"
#include "edna/rng.hpp"

using namespace edna;

namespace {

// ---------------------------------------------------------------------------
// Independent reference Adam, written against the textbook update rule
// before the production implementation. Trajectories must agree to 1e-12.
// ---------------------------------------------------------------------------
struct ReferenceAdam {
  double lr, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  explicit ReferenceAdam(double lr, std::size_t n)
      : lr(lr), m(n, 0.0), v(n, 0.0) {}

  void update(std::vector<double>& theta, const std::vector<double>& g) {
    t += 1;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mhat = m[i] / (1 - std::pow(b1, double(t)));
      const double vhat = v[i] / (1 - std::pow(b2, double(t)));
      theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
};

// Central finite differences of a scalar function of the flat parameters.
template <typename F>
std::vector<double> finite_difference_gradient(std::vector<double> params,
                                               F loss_of, double h = 1e-5) {
  std::vector<double> grad(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = params[i];
    params[i] = saved + h;
    const double up = loss_of(params);
    params[i] = saved - h;
    const double down = loss_of(params);
    params[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const std::vector<double>& a,
                          const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

} // namespace

TEST_CASE("softmax basics") {
  const auto p = optim::softmax({0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.5));
  CHECK(p[1] == doctest::Approx(0.5));

  // shift invariance
  const auto a = optim::softmax({0.3, -1.2, 2.0});
  const auto b = optim::softmax({7.3, 5.8, 9.0});
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }

  // large values do not overflow
  const auto c = optim::softmax({1000.0, 0.0});
  CHECK(c[0] == doctest::Approx(1.0));
  CHECK(c[1] == doctest::Approx(0.0));

  CHECK_THROWS_AS(optim::softmax({std::nan(""), 0.0}), Error);
}

TEST_CASE("softmax sums to one within 1e-12 (random draws)") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> z;
    const std::size_t n = 2 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) z.push_back(rng.uniform(-30, 30));
    const auto p = optim::softmax(z);
    double sum = 0.0;
    for (double v : p) sum += v;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("cross_entropy analytic values") {
  // Uniform logits over 10 classes: ln 10.
  Matrix logits(1, 10, 0.0);
  const auto res = optim::cross_entropy(logits, {3});
  CHECK(res.value == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  // A 20-margin one-hot row drives the loss below 1e-8.
  Matrix sharp(1, 2);
  sharp.at(0, 0) = 20.0;
  sharp.at(0, 1) = 0.0;
  CHECK(optim::cross_entropy(sharp, {0}).value < 1e-8);

  Matrix bad(1, 2);
  CHECK_THROWS_AS(optim::cross_entropy(bad, {2}), Error);
  CHECK_THROWS_AS(optim::cross_entropy(bad, {-1}), Error);
}

TEST_CASE("cross_entropy gradient matches central finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t batch = 1 + rng.below(6);
    const std::size_t classes = 2 + rng.below(5);
    Matrix logits = random_matrix(rng, batch, classes, 3.0);
    std::vector<std::int64_t> labels;
    for (std::size_t i = 0; i < batch; ++i) {
      labels.push_back(std::int64_t(rng.below(classes)));
    }
    const auto res = optim::cross_entropy(logits, labels);

    auto loss_of = [&](const std::vector<double>& flat) {
      Matrix l(batch, classes);
      l.data() = flat;
      return optim::cross_entropy(l, labels).value;
    };
    const std::vector<double> fd =
        finite_difference_gradient(logits.data(), loss_of);
    CHECK(max_relative_error(res.dlogits.data(), fd) < 1e-4);
  }
}

TEST_CASE("model gradients match finite differences for both built-ins") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t batch = 1 + rng.below(5);
    const std::size_t in_dim = 2 + rng.below(3);
    const std::size_t classes = 2 + rng.below(3);

    for (const bool mlp : {false, true}) {
      std::unique_ptr<Model> model;
      config::ConfigNode kwargs = config::make_map(
          {{"in_dim", config::ConfigNode(std::int64_t(in_dim))},
           {"classes", config::ConfigNode(std::int64_t(classes))},
           {"hidden", config::ConfigNode(std::int64_t(4))}});
      if (mlp) {
        model = std::make_unique<MLPClassifier>();
      } else {
        model = std::make_unique<LinearClassifier>();
      }
      setup_model(*model, kwargs, 1000 + std::uint64_t(trial));

      Matrix x = random_matrix(rng, batch, in_dim, 2.0);
      std::vector<std::int64_t> labels;
      for (std::size_t i = 0; i < batch; ++i) {
        labels.push_back(std::int64_t(rng.below(classes)));
      }

      const ForwardResult out = model->forward(x);
      const auto loss_res = optim::cross_entropy(out.output.logits, labels);
      const std::vector<double> analytic = model->backward(x, loss_res.dlogits);

      auto loss_of = [&](const std::vector<double>& flat) {
        model->set_parameters(flat);
        const ForwardResult r = model->forward(x);
        return optim::cross_entropy(r.output.logits, labels).value;
      };
      const std::vector<double> saved = model->get_parameters();
      const std::vector<double> fd = finite_difference_gradient(saved, loss_of);
      model->set_parameters(saved);

      CHECK(max_relative_error(analytic, fd) < 1e-4);
    }
  }
}

TEST_CASE("weighted_total") {
  CHECK(optim::weighted_total({2.3}, {1.0}) == doctest::Approx(2.3));
  CHECK(optim::weighted_total({1.0, 3.0}, {0.5, 0.5}) == doctest::Approx(2.0));
  CHECK_THROWS_AS(optim::weighted_total({}, {}), Error);
  CHECK_THROWS_AS(optim::weighted_total({1.0}, {1.0, 2.0}), Error);
}

TEST_CASE("sgd_step") {
  std::vector<double> theta{1.0};
  optim::sgd_step(theta, {0.5}, 0.1);
  CHECK(theta[0] == doctest::Approx(0.95));

  std::vector<double> same{0.7};
  optim::sgd_step(same, {0.0}, 0.1);
  CHECK(same[0] == doctest::Approx(0.7));

  // Two half-lr steps with the same gradient equal one full-lr step.
  std::vector<double> a{1.0}, b{1.0};
  optim::sgd_step(a, {0.3}, 0.2);
  optim::sgd_step(b, {0.3}, 0.1);
  optim::sgd_step(b, {0.3}, 0.1);
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-15));
}

TEST_CASE("adam first step magnitude is ~lr for any constant gradient") {
  for (double g : {0.001, 0.5, 12.0}) {
    auto state = optim::make_optimizer("Adam", 0.1, 1);
    std::vector<double> theta{0.0};
    optim::adam_step(state, theta, {g});
    CHECK(std::abs(theta[0] + 0.1 * g / (g + 1e-8)) < 1e-12);
  }
  // Zero gradient from a fresh state moves nothing.
  auto state = optim::make_optimizer("Adam", 0.1, 2);
  std::vector<double> theta{1.0, -1.0};
  optim::adam_step(state, theta, {0.0, 0.0});
  CHECK(theta[0] == doctest::Approx(1.0));
  CHECK(theta[1] == doctest::Approx(-1.0));
  CHECK(state.t == 1);
}

TEST_CASE("adam trajectory matches the independent reference on a quadratic") {
  // f(theta) = 0.5 * ||theta - target||^2, grad = theta - target
  const std::vector<double> target{1.0, -2.0, 0.5, 3.0};
  std::vector<double> theta_impl{0.0, 0.0, 0.0, 0.0};
  std::vector<double> theta_ref = theta_impl;

  auto state = optim::make_optimizer("Adam", 0.05, 4);
  ReferenceAdam ref(0.05, 4);

  for (int step = 0; step < 10; ++step) {
    std::vector<double> g_impl(4), g_ref(4);
    for (int i = 0; i < 4; ++i) {
      g_impl[i] = theta_impl[i] - target[i];
      g_ref[i] = theta_ref[i] - target[i];
    }
    optim::adam_step(state, theta_impl, g_impl);
    ref.update(theta_ref, g_ref);
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(theta_impl[i] - theta_ref[i]) < 1e-12);
  }
  CHECK(state.t == 10);
}

TEST_CASE("adam rejects non-finite gradients") {
  auto state = optim::make_optimizer("Adam", 0.1, 1);
  std::vector<double> theta{0.0};
  CHECK_THROWS_AS(optim::adam_step(state, theta, {std::nan("")}), Error);
}

TEST_CASE("scheduler_lr formulas") {
  optim::SchedulerState constant;
  CHECK(optim::scheduler_lr(constant, 1e-3, 0) == doctest::Approx(1e-3));
  CHECK(optim::scheduler_lr(constant, 1e-3, 99) == doctest::Approx(1e-3));

  optim::SchedulerState step;
  step.kind = optim::SchedulerKind::StepDecay;
  step.gamma = 0.1;
  step.step_size = 2;
  CHECK(optim::scheduler_lr(step, 1e-3, 0) == doctest::Approx(1e-3));
  CHECK(optim::scheduler_lr(step, 1e-3, 1) == doctest::Approx(1e-3));
  CHECK(optim::scheduler_lr(step, 1e-3, 2) == doctest::Approx(1e-4));

  optim::SchedulerState expo;
  expo.kind = optim::SchedulerKind::Exponential;
  expo.gamma = 1.0;
  CHECK(optim::scheduler_lr(expo, 5e-2, 7) == doctest::Approx(5e-2));
}

TEST_CASE("scheduler_step advances the epoch counter") {
  optim::SchedulerState s;
  s.kind = optim::SchedulerKind::Exponential;
  s.gamma = 0.5;
  CHECK(optim::scheduler_step(s, 1.0) == doctest::Approx(0.5));
  CHECK(optim::scheduler_step(s, 1.0) == doctest::Approx(0.25));
  CHECK(s.epoch_counter == 2);
}

TEST_CASE("lambda scheduler policies") {
  optim::LambdaSchedulerState constant;
  CHECK(optim::lambda_scheduler_step({1.0, 0.5}, constant) ==
        std::vector<double>{1.0, 0.5});

  optim::LambdaSchedulerState decay;
  decay.policy = optim::LambdaPolicy::ExponentialDecay;
  decay.gamma = 0.5;
  const auto out = optim::lambda_scheduler_step({1.0}, decay);
  CHECK(out[0] == doctest::Approx(0.5));
  for (double l : optim::lambda_scheduler_step({0.0, 2.0}, decay)) {
    CHECK(l >= 0.0);
  }
}
