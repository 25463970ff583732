#include <doctest.h>

#include <cmath>

#include "edna/model.hpp"
#include "edna/registry.hpp"

using namespace edna;
using config::ConfigNode;

namespace {

config::ConfigNode model_kwargs(std::int64_t in_dim, std::int64_t classes,
                                std::int64_t hidden = 16) {
  return config::make_map({
      {"in_dim", ConfigNode(in_dim)},
      {"classes", ConfigNode(classes)},
      {"hidden", ConfigNode(hidden)},
  });
}

/// Model instrumented to assert the two-phase construction order.
class PhaseProbeModel final : public Model {
public:
  bool attributes_before_parameters = false;

  std::size_t num_classes() const override { return 2; }

protected:
  void model_attributes_setup(const Kwargs&) override {
    attributes_before_parameters = params_.entries().empty();
  }
  void model_setup(Rng& rng) override {
    REQUIRE(attributes_ready());
    glorot_fill(params_.add("W", {2, 2}), 2, 2, rng);
  }
  ModelOutput forward_impl(const Matrix& x, const Kwargs&) override {
    ModelOutput out;
    out.logits = Matrix(x.rows(), 2);
    out.features = x;
    return out;
  }
};

/// Plugins that tag the logits so hook order is observable.
class AddTagPlugin final : public ModelPlugin {
public:
  AddTagPlugin(std::string name, double tag)
      : ModelPlugin(std::move(name)), tag_(tag) {}

  void pre_forward(Matrix& features, Kwargs& kwargs) override {
    // Record visit order through a kwargs list.
    ConfigNode* seen = kwargs.find("seen");
    if (seen == nullptr) {
      kwargs.set("seen", config::ConfigNode::list());
      seen = kwargs.find("seen");
    }
    seen->as_list().push_back(ConfigNode(name()));
    (void)features;
  }

  Kwargs post_forward(const Matrix&, ModelOutput& out, Kwargs&) override {
    for (double& v : out.logits.data()) v = v * 10.0 + tag_;
    ConfigNode outputs = config::ConfigNode::map();
    outputs.set("tag", ConfigNode(tag_));
    return outputs;
  }

private:
  double tag_;
};

} // namespace

TEST_CASE("built-in parameter shapes") {
  LinearClassifier linear;
  setup_model(linear, model_kwargs(2, 2), 1);
  REQUIRE(linear.parameters().entries().size() == 2);
  CHECK(linear.parameters().at("W").shape == std::vector<std::size_t>{2, 2});
  CHECK(linear.parameters().at("b").shape == std::vector<std::size_t>{2});
  CHECK(linear.parameters().total_count() == 6);

  MLPClassifier mlp;
  setup_model(mlp, model_kwargs(4, 3, 8), 1);
  CHECK(mlp.parameters().at("W1").shape == std::vector<std::size_t>{4, 8});
  CHECK(mlp.parameters().at("b1").shape == std::vector<std::size_t>{8});
  CHECK(mlp.parameters().at("W2").shape == std::vector<std::size_t>{8, 3});
  CHECK(mlp.parameters().at("b2").shape == std::vector<std::size_t>{3});
}

TEST_CASE("same seed gives identical parameter sets") {
  MLPClassifier a, b, c;
  setup_model(a, model_kwargs(3, 2), 42);
  setup_model(b, model_kwargs(3, 2), 42);
  setup_model(c, model_kwargs(3, 2), 43);
  CHECK(a.get_parameters() == b.get_parameters());
  CHECK(a.get_parameters() != c.get_parameters());
}

TEST_CASE("missing required kwargs are reported") {
  LinearClassifier model;
  Rng rng(1);
  CHECK_THROWS_WITH_AS(
      model.setup(config::make_map({{"classes", ConfigNode(2)}}), rng),
      doctest::Contains("in_dim"), Error);
}

TEST_CASE("zero parameters produce zero logits; features echo the input") {
  LinearClassifier model;
  setup_model(model, model_kwargs(3, 2), 5);
  model.set_parameters(std::vector<double>(model.parameters().total_count(), 0.0));

  Matrix x(2, 3);
  x.at(0, 0) = 1.5;
  x.at(1, 2) = -2.0;
  const ForwardResult res = model.forward(x);
  for (double v : res.output.logits.data()) CHECK(v == 0.0);
  CHECK(res.output.features == x);
  CHECK(res.output.secondary.empty());
  CHECK(res.plugin_outputs.empty()); // no plugins attached
}

TEST_CASE("triplet contract holds across batch sizes") {
  MLPClassifier model;
  setup_model(model, model_kwargs(4, 3, 8), 9);
  for (std::size_t batch : {1, 2, 7}) {
    Matrix x(batch, 4, 0.25);
    const ForwardResult res = model.forward(x);
    CHECK(res.output.logits.rows() == batch);
    CHECK(res.output.logits.cols() == 3);
    CHECK(res.output.features.rows() == batch);
    CHECK(res.output.features.cols() == 8);
  }
  Matrix wrong(2, 5);
  CHECK_THROWS_AS(model.forward(wrong), Error);
}

TEST_CASE("get/set parameter round-trip and single-coordinate locality") {
  MLPClassifier model;
  setup_model(model, model_kwargs(3, 2, 4), 21);
  Matrix probe(2, 3, 0.5);
  const ForwardResult before = model.forward(probe);

  std::vector<double> flat = model.get_parameters();
  model.set_parameters(flat);
  const ForwardResult after = model.forward(probe);
  CHECK(before.output.logits == after.output.logits);

  CHECK_THROWS_AS(model.set_parameters(std::vector<double>(3, 0.0)), Error);

  // Perturbing one flat coordinate changes exactly that tensor entry.
  // Flat layout: W1 (3x4 = 12), b1 (4), W2 (4x2 = 8), b2 (2).
  const std::size_t target_index = 12 + 4 + 5; // W2, row 2, col 1
  flat[target_index] += 1.0;
  model.set_parameters(flat);
  const auto& w2 = model.parameters().at("W2");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < w2.data.size(); ++i) {
    if (w2.data[i] != flat[12 + 4 + i] - (i == 5 ? 0.0 : 0.0)) ++changed;
  }
  CHECK(w2.data[5] == doctest::Approx(flat[target_index]));
  CHECK(model.parameters().at("W1").data[0] == doctest::Approx(flat[0]));
}

TEST_CASE("attribute setup completes before any parameter exists") {
  PhaseProbeModel model;
  setup_model(model, config::ConfigNode::map(), 3);
  CHECK(model.attributes_before_parameters);
  CHECK(model.parameters_ready());
}

TEST_CASE("plugin hooks fire in attachment order and compose rewrites") {
  LinearClassifier model;
  setup_model(model, model_kwargs(2, 2), 13);
  model.set_parameters(std::vector<double>(model.parameters().total_count(), 0.0));

  model.attach(std::make_shared<AddTagPlugin>("A", 1.0));
  model.attach(std::make_shared<AddTagPlugin>("B", 2.0));
  CHECK_THROWS_AS(model.attach(std::make_shared<AddTagPlugin>("A", 9.0)),
                  Error); // duplicate name

  Matrix x(1, 2, 0.0);
  Kwargs kwargs = config::ConfigNode::map();
  const ForwardResult res = model.forward(x, kwargs);

  // Zero logits, then A: *10 + 1 = 1, then B: *10 + 2 = 12. Order matters:
  // B applied first would give 21.
  CHECK(res.output.logits.at(0, 0) == doctest::Approx(12.0));
  REQUIRE(res.plugin_outputs.count("A") == 1);
  REQUIRE(res.plugin_outputs.count("B") == 1);
  CHECK(res.plugin_outputs.at("A").find("tag")->as_real() == 1.0);
  CHECK(res.plugin_outputs.at("B").find("tag")->as_real() == 2.0);
}

TEST_CASE("plugin failures carry the plugin name") {
  LinearClassifier model;
  setup_model(model, model_kwargs(2, 2), 13);
  auto confidence = std::make_shared<LogitConfidencePlugin>();
  confidence->build(config::make_map({{"num_classes", ConfigNode(5)}}));
  model.attach(confidence);
  Matrix x(1, 2, 0.0);
  // 2-column logits against a 5-class plugin: error names the plugin.
  CHECK_THROWS_WITH_AS(model.forward(x), doctest::Contains("LogitConfidence"),
                       Error);
}

TEST_CASE("build_model resolves the arch through the registry") {
  Registry registry;
  register_builtins(registry);

  ModelSpec spec;
  spec.arch = "MLPClassifier";
  spec.kwargs = model_kwargs(2, 2, 4);
  const auto model = build_model(spec, registry, 77);
  CHECK(model->parameters().total_count() == 2 * 4 + 4 + 4 * 2 + 2);

  ModelSpec missing;
  missing.arch = "NoSuchArch";
  CHECK_THROWS_WITH_AS(build_model(missing, registry, 1),
                       doctest::Contains("NoSuchArch"), Error);
}
