#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "edna/data.hpp"
#include "edna/model_output.hpp"

namespace edna {

/// Hook component attached to a model. Hooks fire in attachment order:
/// pre_forward may rewrite (features, kwargs); post_forward may rewrite the
/// output triplet and yields the plugin's own output map; post_epoch fires
/// at epoch boundaries (and ends warmup).
class ModelPlugin {
public:
  explicit ModelPlugin(std::string name) : name_(std::move(name)) {}
  virtual ~ModelPlugin() = default;

  const std::string& name() const { return name_; }
  std::int64_t epochs() const { return epochs_; }
  bool activated() const { return activated_; }

  /// Two-phase construction mirroring models: plugin attributes, then any
  /// learned parameters.
  void build(const Kwargs& kwargs) {
    build_plugin(kwargs);
    build_params(kwargs);
  }

  virtual void pre_forward(Matrix& features, Kwargs& kwargs) {
    (void)features;
    (void)kwargs;
  }

  /// Returns this plugin's output map (empty when it has none).
  virtual Kwargs post_forward(const Matrix& features, ModelOutput& out,
                              Kwargs& kwargs) {
    (void)features;
    (void)out;
    (void)kwargs;
    return config::ConfigNode::map();
  }

  virtual void post_epoch(std::int64_t epoch) { (void)epoch; }

  /// Serializable keyword map including the activated flag.
  virtual config::ConfigNode state_map() const;
  virtual void restore_state(const config::ConfigNode& state);

protected:
  virtual void build_plugin(const Kwargs& kwargs) { (void)kwargs; }
  virtual void build_params(const Kwargs& kwargs) { (void)kwargs; }

  void set_epochs(std::int64_t e) { epochs_ = e; }
  /// Activation is monotonic: once set it never clears.
  void activate() { activated_ = true; }

  friend class PluginStateAccess;

private:
  std::string name_;
  std::int64_t epochs_ = 1;
  bool activated_ = false;
};

/// Confidence plugin: during warmup it accumulates the running mean of the
/// max softmax probability per predicted class; once activated it emits
/// {"logit": per-row max softmax, "threshold": per-row class mean lookup}
/// and passes the triplet through unchanged.
class LogitConfidencePlugin final : public ModelPlugin {
public:
  LogitConfidencePlugin() : ModelPlugin("LogitConfidence") {}

  Kwargs post_forward(const Matrix& features, ModelOutput& out,
                      Kwargs& kwargs) override;
  void post_epoch(std::int64_t epoch) override;

  config::ConfigNode state_map() const override;
  void restore_state(const config::ConfigNode& state) override;

  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t num_classes() const { return num_classes_; }

protected:
  void build_plugin(const Kwargs& kwargs) override;
  void build_params(const Kwargs& kwargs) override;

private:
  std::int64_t num_classes_ = 2;
  std::vector<double> running_mean_;
  std::vector<std::int64_t> counts_;
};

/// Stateless predicate plugin for filter-style deploys: emits
/// {"keep": features[dim] >= threshold} per batch row (as a boolean list).
/// Needs no warmup; it works without activation.
class ThresholdKeepPlugin final : public ModelPlugin {
public:
  ThresholdKeepPlugin() : ModelPlugin("ThresholdKeep") {}

  Kwargs post_forward(const Matrix& features, ModelOutput& out,
                      Kwargs& kwargs) override;

protected:
  void build_plugin(const Kwargs& kwargs) override;

private:
  std::int64_t dim_ = 0;
  double threshold_ = 0.0;
};

/// Plugin state codec: canonical map text with a trailing SHA-256 so that
/// truncation or corruption is detected on read.
std::vector<std::uint8_t> serialize_plugin_state(const ModelPlugin& plugin);
void deserialize_plugin_state(ModelPlugin& plugin,
                              const std::vector<std::uint8_t>& bytes);

} // namespace edna
