#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "edna/data.hpp"
#include "edna/model_output.hpp"
#include "edna/plugins.hpp"
#include "edna/rng.hpp"

namespace edna {

struct ModelSpec {
  std::string arch;
  std::string base;
  Kwargs kwargs = config::ConfigNode::map();
};

/// Named tensors in fixed order; the flat vector view concatenates them
/// row-major in entry order.
class ParameterSet {
public:
  struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;
  };

  Tensor& add(std::string name, std::vector<std::size_t> shape);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  const std::vector<Tensor>& entries() const { return entries_; }
  std::size_t total_count() const;

  std::vector<double> flat() const;
  void set_flat(const std::vector<double>& values);

private:
  std::vector<Tensor> entries_;
};

struct ForwardResult {
  ModelOutput output;
  /// plugin name -> that plugin's output map, attachment order preserved
  /// in the vector below.
  std::map<std::string, Kwargs> plugin_outputs;
};

/// Classifier contract: two-phase setup (attributes before parameters), a
/// wrapped forward that runs plugin hooks around forward_impl, and a flat
/// parameter view for optimizers and checkpoints.
class Model {
public:
  virtual ~Model() = default;

  /// attribute setup with kwargs, then parameter setup seeded by rng.
  void setup(const Kwargs& kwargs, Rng& rng);

  ForwardResult forward(const Matrix& features,
                        Kwargs kwargs = config::ConfigNode::map());

  /// Gradient of a loss w.r.t. the flat parameter vector given dL/dlogits.
  /// Built-ins implement this; custom models may instead override the
  /// trainer's step.
  virtual std::vector<double> backward(const Matrix& features,
                                       const Matrix& dlogits);

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  std::vector<double> get_parameters() const { return params_.flat(); }
  void set_parameters(const std::vector<double>& v) { params_.set_flat(v); }

  void attach(std::shared_ptr<ModelPlugin> plugin);
  const std::vector<std::shared_ptr<ModelPlugin>>& attached_plugins() const {
    return plugins_;
  }
  std::shared_ptr<ModelPlugin> find_plugin(const std::string& name) const;

  void set_train_mode(bool on) { train_mode_ = on; }
  bool train_mode() const { return train_mode_; }

  bool attributes_ready() const { return attributes_ready_; }
  bool parameters_ready() const { return parameters_ready_; }

  /// Expected feature width; 0 when the model cannot know statically.
  virtual std::size_t input_dim() const { return 0; }
  virtual std::size_t num_classes() const = 0;

protected:
  virtual void model_attributes_setup(const Kwargs& kwargs) = 0;
  virtual void model_setup(Rng& rng) = 0;
  virtual ModelOutput forward_impl(const Matrix& features,
                                   const Kwargs& kwargs) = 0;

  /// Glorot-uniform fill for a weight tensor; zeros for biases.
  static void glorot_fill(ParameterSet::Tensor& t, std::size_t fan_in,
                          std::size_t fan_out, Rng& rng);

  ParameterSet params_;
  Kwargs attributes_ = config::ConfigNode::map();

private:
  std::vector<std::shared_ptr<ModelPlugin>> plugins_;
  bool train_mode_ = false;
  bool attributes_ready_ = false;
  bool parameters_ready_ = false;
};

/// logits = xW + b; features echo the input.
class LinearClassifier final : public Model {
public:
  std::size_t input_dim() const override { return in_dim_; }
  std::size_t num_classes() const override { return classes_; }

  std::vector<double> backward(const Matrix& features,
                               const Matrix& dlogits) override;

protected:
  void model_attributes_setup(const Kwargs& kwargs) override;
  void model_setup(Rng& rng) override;
  ModelOutput forward_impl(const Matrix& features,
                           const Kwargs& kwargs) override;

private:
  std::size_t in_dim_ = 0;
  std::size_t classes_ = 0;
};

/// One relu hidden layer: h = relu(xW1 + b1), logits = hW2 + b2,
/// features = h.
class MLPClassifier final : public Model {
public:
  std::size_t input_dim() const override { return in_dim_; }
  std::size_t num_classes() const override { return classes_; }

  std::vector<double> backward(const Matrix& features,
                               const Matrix& dlogits) override;

protected:
  void model_attributes_setup(const Kwargs& kwargs) override;
  void model_setup(Rng& rng) override;
  ModelOutput forward_impl(const Matrix& features,
                           const Kwargs& kwargs) override;

private:
  std::size_t in_dim_ = 0;
  std::size_t hidden_ = 16;
  std::size_t classes_ = 0;
};

/// Run two-phase setup with a parameter rng derived from seed.
void setup_model(Model& model, const Kwargs& kwargs, std::uint64_t seed);

} // namespace edna
