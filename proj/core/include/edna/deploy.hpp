#pragma once

#include <cstdint>
#include <vector>

#include "edna/connector.hpp"
#include "edna/data.hpp"
#include "edna/logging.hpp"
#include "edna/model.hpp"

namespace edna {

struct DeploySetup {
  Model* model = nullptr;
  std::vector<TransformSpec> transforms; // evaluation transforms
  std::int64_t batch_size = 32;
  Connector* sink = nullptr; // null: records collected in memory
  std::int64_t sequence_base = 0; // first sequence number to emit
  std::int64_t queue_capacity = 64; // producer/consumer queue, stream mode
  Logger* logger = nullptr;
};

/// Gradient-free serving loop: batches go through the model (with plugins),
/// and one ConnectorRecord per surviving sample is emitted carrying the
/// predicted class, max softmax, the sample itself, and per-plugin outputs.
/// A plugin output `keep: false` drops the sample.
class BaseDeploy {
public:
  virtual ~BaseDeploy() = default;

  /// Hook for custom deployments (receives DEPLOYMENT args).
  virtual void setup(const Kwargs& args) { (void)args; }

  void configure(DeploySetup setup);

  /// Process a static record list; returns the number of emitted records.
  std::int64_t run_records(const std::vector<SampleRecord>& records);

  /// Poll a stream directory until a STOP sentinel appears (after
  /// draining). The poller runs in its own thread and hands records to the
  /// processing loop through a bounded queue.
  std::int64_t run_stream(StreamSource& src);

  const std::vector<ConnectorRecord>& collected() const { return collected_; }

private:
  void emit(const ConnectorRecord& record);

  DeploySetup setup_;
  bool configured_ = false;
  std::int64_t next_sequence_ = 0;
  std::vector<ConnectorRecord> collected_;
};

} // namespace edna
