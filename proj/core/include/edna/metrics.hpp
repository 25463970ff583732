#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "edna/data.hpp"

namespace edna::metrics {

double accuracy(const std::vector<std::int64_t>& preds,
                const std::vector<std::int64_t>& labels);

/// Support-weighted mean of per-class F1; zero-denominator terms are 0.
double weighted_f1(const std::vector<std::int64_t>& preds,
                   const std::vector<std::int64_t>& labels,
                   std::int64_t num_classes);

/// KL(p || q) in nats, 0*ln(0/q) = 0. A zero q-bin with p > 0 is an error,
/// not infinity.
double kl_divergence(const std::vector<double>& p,
                     const std::vector<double>& q);

struct MetricSpec {
  std::string metric_name;
  std::string metric_type; // free-form category label
  Kwargs args = config::ConfigNode::map();
};

struct MetricRecord {
  std::int64_t epoch = 0;
  std::int64_t step = 0;
  double value = 0.0;
};

struct MetricSeries {
  std::vector<MetricRecord> records; // append-only
};

/// Build/update/series/aggregate lifecycle. Built-ins: Accuracy, WeightedF1,
/// KLDivergence. update() reads what it needs from a keyword map:
///   preds, labels: integer lists; num_classes: int; p, q: real lists.
class Metric {
public:
  explicit Metric(MetricSpec spec) : spec_(std::move(spec)) {}
  virtual ~Metric() = default;

  /// Must be called before the first update.
  void build();
  bool built() const { return built_; }

  double update(const Kwargs& inputs, std::int64_t epoch, std::int64_t step);

  const MetricSeries& series() const { return series_; }
  const MetricSpec& spec() const { return spec_; }

  /// kind: "mean" or "last".
  double aggregate(const std::string& kind) const;

  /// One `epoch,step,value` line per record.
  std::string to_csv() const;

protected:
  virtual void build_impl() {}
  virtual double compute(const Kwargs& inputs) = 0;

private:
  MetricSpec spec_;
  MetricSeries series_;
  bool built_ = false;
};

std::unique_ptr<Metric> make_accuracy_metric(MetricSpec spec);
std::unique_ptr<Metric> make_weighted_f1_metric(MetricSpec spec);
std::unique_ptr<Metric> make_kl_divergence_metric(MetricSpec spec);

} // namespace edna::metrics
