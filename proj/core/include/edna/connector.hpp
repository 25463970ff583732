#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "edna/config_node.hpp"

namespace edna {

/// One record crossing a stage boundary. Sequence numbers are strictly
/// increasing per connector.
struct ConnectorRecord {
  std::int64_t sequence = 0;
  config::ConfigNode payload; // sample record or keyword map of outputs
};

/// FIFO, exactly-once, single producer / single consumer. pull() returns
/// nullopt once the producer has closed and everything was consumed, and
/// keeps returning it.
class Connector {
public:
  virtual ~Connector() = default;

  virtual void push(const ConnectorRecord& record) = 0;
  virtual std::optional<ConnectorRecord> pull() = 0;
  virtual void close() = 0;
};

/// Bounded in-process queue with blocking semantics on full/empty.
class QueueConnector final : public Connector {
public:
  explicit QueueConnector(std::size_t capacity = 64);

  void push(const ConnectorRecord& record) override;
  std::optional<ConnectorRecord> pull() override;
  void close() override;

private:
  std::mutex mutex_;
  std::condition_variable not_full_;
  std::condition_variable not_empty_;
  std::deque<ConnectorRecord> queue_;
  std::size_t capacity_;
  std::int64_t last_sequence_ = -1;
  bool closed_ = false;
};

/// File-backed handoff: one `{sequence}\t{payload}\n` line per record,
/// appended to sequenced segment files in a directory. close() writes an
/// END file carrying the total record count; a reader in another process
/// tails the segments in order.
class FileHandoffConnector final : public Connector {
public:
  explicit FileHandoffConnector(std::string directory,
                                std::size_t records_per_segment = 128,
                                double poll_interval_s = 0.02);
  ~FileHandoffConnector() override;

  void push(const ConnectorRecord& record) override;
  std::optional<ConnectorRecord> pull() override;
  void close() override;

  const std::string& directory() const { return directory_; }

  /// Format helpers shared with the stream-file readers.
  static std::string format_line(const ConnectorRecord& record);
  static ConnectorRecord parse_line(const std::string& line);

private:
  std::string segment_name(std::size_t index) const;
  void open_writer_segment();

  std::string directory_;
  std::size_t records_per_segment_;
  double poll_interval_s_;

  // writer side
  std::ofstream writer_;
  std::size_t writer_segment_ = 0;
  std::size_t writer_in_segment_ = 0;
  std::int64_t pushed_ = 0;
  std::int64_t last_sequence_ = -1;
  bool closed_ = false;

  // reader side
  std::ifstream reader_;
  std::size_t reader_segment_ = 0;
  bool reader_open_ = false;
  std::int64_t pulled_ = 0;
  std::int64_t expected_sequence_ = -1;
};

} // namespace edna
