#include "edna/model.hpp"

#include <cmath>

#include "edna/config.hpp"

namespace edna {

using config::ConfigNode;

ParameterSet::Tensor& ParameterSet::add(std::string name,
                                        std::vector<std::size_t> shape) {
  for (const Tensor& t : entries_) {
    if (t.name == name) throw Error("duplicate parameter tensor '" + name + "'");
  }
  std::size_t count = 1;
  for (std::size_t d : shape) count *= d;
  entries_.push_back(Tensor{std::move(name), std::move(shape),
                            std::vector<double>(count, 0.0)});
  return entries_.back();
}

ParameterSet::Tensor& ParameterSet::at(const std::string& name) {
  for (Tensor& t : entries_) {
    if (t.name == name) return t;
  }
  throw Error("no parameter tensor '" + name + "'");
}

const ParameterSet::Tensor& ParameterSet::at(const std::string& name) const {
  for (const Tensor& t : entries_) {
    if (t.name == name) return t;
  }
  throw Error("no parameter tensor '" + name + "'");
}

std::size_t ParameterSet::total_count() const {
  std::size_t total = 0;
  for (const Tensor& t : entries_) total += t.data.size();
  return total;
}

std::vector<double> ParameterSet::flat() const {
  std::vector<double> out;
  out.reserve(total_count());
  for (const Tensor& t : entries_) {
    out.insert(out.end(), t.data.begin(), t.data.end());
  }
  return out;
}

void ParameterSet::set_flat(const std::vector<double>& values) {
  if (values.size() != total_count()) {
    throw Error("set_flat: expected " + std::to_string(total_count()) +
                " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for (Tensor& t : entries_) {
    std::copy(values.begin() + offset, values.begin() + offset + t.data.size(),
              t.data.begin());
    offset += t.data.size();
  }
}

void Model::setup(const Kwargs& kwargs, Rng& rng) {
  attributes_ = kwargs;
  model_attributes_setup(kwargs);
  attributes_ready_ = true;
  model_setup(rng);
  parameters_ready_ = true;
}

ForwardResult Model::forward(const Matrix& features, Kwargs kwargs) {
  if (!parameters_ready_) {
    throw Error("model forward before setup");
  }
  if (input_dim() != 0 && features.cols() != input_dim()) {
    throw Error("forward: input width " + std::to_string(features.cols()) +
                " does not match model input dim " +
                std::to_string(input_dim()));
  }
  Matrix x = features;
  for (const auto& plugin : plugins_) {
    try {
      plugin->pre_forward(x, kwargs);
    } catch (const std::exception& e) {
      throw Error("plugin '" + plugin->name() + "' pre_forward: " + e.what());
    }
  }
  ForwardResult result;
  result.output = forward_impl(x, kwargs);
  for (const auto& plugin : plugins_) {
    try {
      result.plugin_outputs[plugin->name()] =
          plugin->post_forward(x, result.output, kwargs);
    } catch (const std::exception& e) {
      throw Error("plugin '" + plugin->name() + "' post_forward: " + e.what());
    }
  }
  return result;
}

std::vector<double> Model::backward(const Matrix&, const Matrix&) {
  throw Error("this model provides no gradient; use a custom trainer step");
}

void Model::attach(std::shared_ptr<ModelPlugin> plugin) {
  for (const auto& p : plugins_) {
    if (p->name() == plugin->name()) {
      throw Error("plugin '" + plugin->name() + "' already attached");
    }
  }
  plugins_.push_back(std::move(plugin));
}

std::shared_ptr<ModelPlugin> Model::find_plugin(const std::string& name) const {
  for (const auto& p : plugins_) {
    if (p->name() == name) return p;
  }
  return nullptr;
}

void Model::glorot_fill(ParameterSet::Tensor& t, std::size_t fan_in,
                        std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
  for (double& v : t.data) {
    v = rng.uniform(-bound, bound);
  }
}

namespace {

std::int64_t require_kw_int(const Kwargs& kwargs, const std::string& key) {
  const ConfigNode* n = kwargs.find(key);
  if (n == nullptr) {
    throw Error("model kwargs missing required key '" + key + "'");
  }
  return n->as_int();
}

std::int64_t kw_int_or(const Kwargs& kwargs, const std::string& key,
                       std::int64_t def) {
  const ConfigNode* n = kwargs.find(key);
  return n == nullptr ? def : n->as_int();
}

} // namespace

void LinearClassifier::model_attributes_setup(const Kwargs& kwargs) {
  in_dim_ = std::size_t(require_kw_int(kwargs, "in_dim"));
  classes_ = std::size_t(require_kw_int(kwargs, "classes"));
  if (classes_ < 2) throw Error("LinearClassifier: classes must be >= 2");
}

void LinearClassifier::model_setup(Rng& rng) {
  glorot_fill(params_.add("W", {in_dim_, classes_}), in_dim_, classes_, rng);
  params_.add("b", {classes_}); // zeros
}

ModelOutput LinearClassifier::forward_impl(const Matrix& x, const Kwargs&) {
  const auto& w = params_.at("W");
  Matrix wm(in_dim_, classes_);
  wm.data() = w.data;
  Matrix logits = matmul(x, wm);
  add_row_inplace(logits, params_.at("b").data);
  ModelOutput out;
  out.logits = std::move(logits);
  out.features = x;
  return out;
}

std::vector<double> LinearClassifier::backward(const Matrix& x,
                                               const Matrix& dlogits) {
  // dW = x^T d, db = column sums of d; flat order [W, b].
  const Matrix dw = matmul_at_b(x, dlogits);
  const std::vector<double> db = column_sums(dlogits);
  std::vector<double> grad = dw.data();
  grad.insert(grad.end(), db.begin(), db.end());
  return grad;
}

void MLPClassifier::model_attributes_setup(const Kwargs& kwargs) {
  in_dim_ = std::size_t(require_kw_int(kwargs, "in_dim"));
  classes_ = std::size_t(require_kw_int(kwargs, "classes"));
  hidden_ = std::size_t(kw_int_or(kwargs, "hidden", 16));
  if (classes_ < 2) throw Error("MLPClassifier: classes must be >= 2");
  if (hidden_ < 1) throw Error("MLPClassifier: hidden must be >= 1");
}

void MLPClassifier::model_setup(Rng& rng) {
  glorot_fill(params_.add("W1", {in_dim_, hidden_}), in_dim_, hidden_, rng);
  params_.add("b1", {hidden_});
  glorot_fill(params_.add("W2", {hidden_, classes_}), hidden_, classes_, rng);
  params_.add("b2", {classes_});
}

ModelOutput MLPClassifier::forward_impl(const Matrix& x, const Kwargs&) {
  Matrix w1(in_dim_, hidden_);
  w1.data() = params_.at("W1").data;
  Matrix w2(hidden_, classes_);
  w2.data() = params_.at("W2").data;

  Matrix z1 = matmul(x, w1);
  add_row_inplace(z1, params_.at("b1").data);
  const Matrix h = relu(z1);
  Matrix logits = matmul(h, w2);
  add_row_inplace(logits, params_.at("b2").data);

  ModelOutput out;
  out.logits = std::move(logits);
  out.features = h;
  return out;
}

std::vector<double> MLPClassifier::backward(const Matrix& x,
                                            const Matrix& dlogits) {
  Matrix w1(in_dim_, hidden_);
  w1.data() = params_.at("W1").data;
  Matrix w2(hidden_, classes_);
  w2.data() = params_.at("W2").data;

  Matrix z1 = matmul(x, w1);
  add_row_inplace(z1, params_.at("b1").data);
  const Matrix h = relu(z1);

  // delta2 = dlogits; delta1 = (delta2 W2^T) .* 1[z1 > 0]
  const Matrix dw2 = matmul_at_b(h, dlogits);
  const std::vector<double> db2 = column_sums(dlogits);
  Matrix delta1 = matmul_a_bt(dlogits, w2);
  for (std::size_t r = 0; r < delta1.rows(); ++r) {
    for (std::size_t c = 0; c < delta1.cols(); ++c) {
      if (z1.at(r, c) <= 0.0) delta1.at(r, c) = 0.0;
    }
  }
  const Matrix dw1 = matmul_at_b(x, delta1);
  const std::vector<double> db1 = column_sums(delta1);

  std::vector<double> grad = dw1.data();
  grad.insert(grad.end(), db1.begin(), db1.end());
  grad.insert(grad.end(), dw2.data().begin(), dw2.data().end());
  grad.insert(grad.end(), db2.begin(), db2.end());
  return grad;
}

void setup_model(Model& model, const Kwargs& kwargs, std::uint64_t seed) {
  Rng rng(mix64(seed));
  model.setup(kwargs, rng);
}

} // namespace edna
