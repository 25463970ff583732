#include "edna/plugins.hpp"

#include <algorithm>

#include "edna/config.hpp"
#include "edna/optim.hpp"
#include "edna/sha256.hpp"

namespace edna {

using config::ConfigNode;

config::ConfigNode ModelPlugin::state_map() const {
  ConfigNode state = ConfigNode::map();
  state.set("activated", ConfigNode(activated_));
  state.set("epochs", ConfigNode(epochs_));
  return state;
}

void ModelPlugin::restore_state(const config::ConfigNode& state) {
  const ConfigNode* act = state.find("activated");
  if (act == nullptr) throw Error("plugin state missing 'activated'");
  if (activated_ && !act->as_bool()) {
    throw Error("plugin '" + name_ + "': activation cannot be cleared");
  }
  activated_ = act->as_bool();
  const ConfigNode* ep = state.find("epochs");
  if (ep != nullptr) epochs_ = ep->as_int();
}

void LogitConfidencePlugin::build_plugin(const Kwargs& kwargs) {
  set_epochs(1);
  const ConfigNode* nc = kwargs.find("num_classes");
  if (nc != nullptr) num_classes_ = nc->as_int();
  const ConfigNode* ep = kwargs.find("epochs");
  if (ep != nullptr) set_epochs(ep->as_int());
  if (num_classes_ < 2) {
    throw Error("LogitConfidence: num_classes must be >= 2");
  }
}

void LogitConfidencePlugin::build_params(const Kwargs&) {
  running_mean_.assign(num_classes_, 0.0);
  counts_.assign(num_classes_, 0);
}

Kwargs LogitConfidencePlugin::post_forward(const Matrix&, ModelOutput& out,
                                           Kwargs&) {
  if (std::int64_t(out.logits.cols()) != num_classes_) {
    throw Error("LogitConfidence: logits have " +
                std::to_string(out.logits.cols()) + " columns, expected " +
                std::to_string(num_classes_));
  }
  const Matrix probs = optim::softmax_rows(out.logits);
  if (!activated()) {
    // Warmup: fold each row's max softmax into its predicted class mean.
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      std::size_t argmax = 0;
      for (std::size_t c = 1; c < probs.cols(); ++c) {
        if (probs.at(r, c) > probs.at(r, argmax)) argmax = c;
      }
      const double s = probs.at(r, argmax);
      auto& n = counts_[argmax];
      running_mean_[argmax] += (s - running_mean_[argmax]) / double(n + 1);
      n += 1;
    }
    return ConfigNode::map();
  }
  ConfigNode::List logit_list;
  ConfigNode::List threshold_list;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t argmax = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c) {
      if (probs.at(r, c) > probs.at(r, argmax)) argmax = c;
    }
    logit_list.push_back(ConfigNode(probs.at(r, argmax)));
    threshold_list.push_back(ConfigNode(running_mean_[argmax]));
  }
  ConfigNode outputs = ConfigNode::map();
  outputs.set("logit", ConfigNode(std::move(logit_list)));
  outputs.set("threshold", ConfigNode(std::move(threshold_list)));
  return outputs;
}

void LogitConfidencePlugin::post_epoch(std::int64_t) {
  if (!activated()) activate();
}

config::ConfigNode LogitConfidencePlugin::state_map() const {
  ConfigNode state = ModelPlugin::state_map();
  state.set("num_classes", ConfigNode(num_classes_));
  ConfigNode::List mean_list, count_list;
  for (double v : running_mean_) mean_list.push_back(ConfigNode(v));
  for (std::int64_t c : counts_) count_list.push_back(ConfigNode(c));
  state.set("running_mean", ConfigNode(std::move(mean_list)));
  state.set("counts", ConfigNode(std::move(count_list)));
  return state;
}

void LogitConfidencePlugin::restore_state(const config::ConfigNode& state) {
  ModelPlugin::restore_state(state);
  const ConfigNode* nc = state.find("num_classes");
  const ConfigNode* mean = state.find("running_mean");
  const ConfigNode* counts = state.find("counts");
  if (nc == nullptr || mean == nullptr || counts == nullptr) {
    throw Error("LogitConfidence state missing fields");
  }
  num_classes_ = nc->as_int();
  running_mean_.clear();
  for (const ConfigNode& v : mean->as_list()) {
    running_mean_.push_back(v.as_real());
  }
  counts_.clear();
  for (const ConfigNode& v : counts->as_list()) {
    counts_.push_back(v.as_int());
  }
  if (std::int64_t(running_mean_.size()) != num_classes_ ||
      std::int64_t(counts_.size()) != num_classes_) {
    throw Error("LogitConfidence state has inconsistent lengths");
  }
}

void ThresholdKeepPlugin::build_plugin(const Kwargs& kwargs) {
  const ConfigNode* dim = kwargs.find("dim");
  if (dim != nullptr) dim_ = dim->as_int();
  const ConfigNode* threshold = kwargs.find("threshold");
  if (threshold != nullptr) threshold_ = threshold->as_real();
  if (dim_ < 0) throw Error("ThresholdKeep: dim must be >= 0");
}

Kwargs ThresholdKeepPlugin::post_forward(const Matrix& features,
                                         ModelOutput&, Kwargs&) {
  if (std::size_t(dim_) >= features.cols()) {
    throw Error("ThresholdKeep: dim " + std::to_string(dim_) +
                " out of range for " + std::to_string(features.cols()) +
                " features");
  }
  ConfigNode::List keep;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    keep.push_back(ConfigNode(features.at(r, std::size_t(dim_)) >= threshold_));
  }
  ConfigNode outputs = ConfigNode::map();
  outputs.set("keep", ConfigNode(std::move(keep)));
  return outputs;
}

std::vector<std::uint8_t> serialize_plugin_state(const ModelPlugin& plugin) {
  const std::string text = config::canonical_flow_text(plugin.state_map());
  std::vector<std::uint8_t> out(text.begin(), text.end());
  const Digest digest = sha256(out.data(), out.size());
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

void deserialize_plugin_state(ModelPlugin& plugin,
                              const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 32) {
    throw CorruptRecordError("plugin state too short");
  }
  const std::size_t body_len = bytes.size() - 32;
  const Digest expected = sha256(bytes.data(), body_len);
  if (!std::equal(expected.begin(), expected.end(), bytes.begin() + body_len)) {
    throw CorruptRecordError("plugin state digest mismatch");
  }
  const std::string text(bytes.begin(), bytes.begin() + body_len);
  plugin.restore_state(config::parse_flow_text(text));
}

} // namespace edna
