#include "edna/metrics.hpp"

#include <cmath>
#include <sstream>

#include "edna/config.hpp"

namespace edna::metrics {

using config::ConfigNode;

double accuracy(const std::vector<std::int64_t>& preds,
                const std::vector<std::int64_t>& labels) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw Error("accuracy: preds and labels must have equal nonzero length");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == labels[i]) ++hits;
  }
  return double(hits) / double(preds.size());
}

double weighted_f1(const std::vector<std::int64_t>& preds,
                   const std::vector<std::int64_t>& labels,
                   std::int64_t num_classes) {
  if (preds.empty() || preds.size() != labels.size()) {
    throw Error("weighted_f1: preds and labels must have equal nonzero "
                "length");
  }
  if (num_classes < 1) throw Error("weighted_f1: num_classes must be >= 1");
  std::vector<double> tp(num_classes, 0.0), fp(num_classes, 0.0),
      fn(num_classes, 0.0), support(num_classes, 0.0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::int64_t p = preds[i];
    const std::int64_t y = labels[i];
    if (p < 0 || p >= num_classes || y < 0 || y >= num_classes) {
      throw Error("weighted_f1: class id out of range at index " +
                  std::to_string(i));
    }
    support[y] += 1.0;
    if (p == y) {
      tp[y] += 1.0;
    } else {
      fp[p] += 1.0;
      fn[y] += 1.0;
    }
  }
  double total = 0.0;
  const double n = double(preds.size());
  for (std::int64_t c = 0; c < num_classes; ++c) {
    const double prec_den = tp[c] + fp[c];
    const double rec_den = tp[c] + fn[c];
    const double prec = prec_den == 0.0 ? 0.0 : tp[c] / prec_den;
    const double rec = rec_den == 0.0 ? 0.0 : tp[c] / rec_den;
    const double f1 =
        (prec + rec) == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    total += (support[c] / n) * f1;
  }
  return total;
}

double kl_divergence(const std::vector<double>& p,
                     const std::vector<double>& q) {
  if (p.empty() || p.size() != q.size()) {
    throw Error("kl_divergence: distributions must have equal nonzero length");
  }
  double sum_p = 0.0, sum_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) {
      throw Error("kl_divergence: entries must be >= 0");
    }
    sum_p += p[i];
    sum_q += q[i];
  }
  if (std::abs(sum_p - 1.0) > 1e-9 || std::abs(sum_q - 1.0) > 1e-9) {
    throw Error("kl_divergence: distributions must sum to 1 within 1e-9");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw Error("kl_divergence: q[" + std::to_string(i) +
                  "] is 0 where p > 0; divergence undefined");
    }
    total += p[i] * std::log(p[i] / q[i]);
  }
  return total;
}

void Metric::build() {
  build_impl();
  built_ = true;
}

double Metric::update(const Kwargs& inputs, std::int64_t epoch,
                      std::int64_t step) {
  if (!built_) {
    throw Error("metric '" + spec_.metric_name + "' updated before build");
  }
  if (!series_.records.empty()) {
    const MetricRecord& last = series_.records.back();
    if (epoch < last.epoch || (epoch == last.epoch && step < last.step)) {
      throw Error("metric '" + spec_.metric_name +
                  "': (epoch, step) must be non-decreasing");
    }
  }
  const double value = compute(inputs);
  series_.records.push_back(MetricRecord{epoch, step, value});
  return value;
}

double Metric::aggregate(const std::string& kind) const {
  if (series_.records.empty()) {
    throw Error("metric '" + spec_.metric_name + "': no records to aggregate");
  }
  if (kind == "last") {
    return series_.records.back().value;
  }
  if (kind == "mean") {
    double total = 0.0;
    for (const MetricRecord& r : series_.records) total += r.value;
    return total / double(series_.records.size());
  }
  throw Error("unknown aggregate kind '" + kind + "' (mean, last)");
}

std::string Metric::to_csv() const {
  std::string out;
  for (const MetricRecord& r : series_.records) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," +
           config::scalar_text(ConfigNode(r.value)) + "\n";
  }
  return out;
}

namespace {

std::vector<std::int64_t> int_list(const Kwargs& inputs,
                                   const std::string& key) {
  const ConfigNode* n = inputs.find(key);
  if (n == nullptr || !n->is_list()) {
    throw Error("metric input '" + key + "' missing or not a list");
  }
  std::vector<std::int64_t> out;
  for (const ConfigNode& v : n->as_list()) out.push_back(v.as_int());
  return out;
}

std::vector<double> real_list(const Kwargs& inputs, const std::string& key) {
  const ConfigNode* n = inputs.find(key);
  if (n == nullptr || !n->is_list()) {
    throw Error("metric input '" + key + "' missing or not a list");
  }
  std::vector<double> out;
  for (const ConfigNode& v : n->as_list()) out.push_back(v.as_real());
  return out;
}

class AccuracyMetric final : public Metric {
public:
  using Metric::Metric;

protected:
  double compute(const Kwargs& inputs) override {
    return accuracy(int_list(inputs, "preds"), int_list(inputs, "labels"));
  }
};

class WeightedF1Metric final : public Metric {
public:
  using Metric::Metric;

protected:
  double compute(const Kwargs& inputs) override {
    const ConfigNode* nc = inputs.find("num_classes");
    if (nc == nullptr) throw Error("metric input 'num_classes' missing");
    return weighted_f1(int_list(inputs, "preds"), int_list(inputs, "labels"),
                       nc->as_int());
  }
};

class KlDivergenceMetric final : public Metric {
public:
  using Metric::Metric;

protected:
  double compute(const Kwargs& inputs) override {
    return kl_divergence(real_list(inputs, "p"), real_list(inputs, "q"));
  }
};

} // namespace

std::unique_ptr<Metric> make_accuracy_metric(MetricSpec spec) {
  return std::make_unique<AccuracyMetric>(std::move(spec));
}

std::unique_ptr<Metric> make_weighted_f1_metric(MetricSpec spec) {
  return std::make_unique<WeightedF1Metric>(std::move(spec));
}

std::unique_ptr<Metric> make_kl_divergence_metric(MetricSpec spec) {
  return std::make_unique<KlDivergenceMetric>(std::move(spec));
}

} // namespace edna::metrics
