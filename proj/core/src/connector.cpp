#include "edna/connector.hpp"

#include <chrono>
#include <filesystem>
#include <thread>

#include "edna/config.hpp"

namespace fs = std::filesystem;

namespace edna {

QueueConnector::QueueConnector(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error("queue connector capacity must be >= 1");
}

void QueueConnector::push(const ConnectorRecord& record) {
  std::unique_lock<std::mutex> lock(mutex_);
  if (closed_) throw Error("push on a closed connector");
  if (record.sequence <= last_sequence_) {
    throw Error("connector sequence must be strictly increasing");
  }
  not_full_.wait(lock, [&] { return queue_.size() < capacity_ || closed_; });
  if (closed_) throw Error("push on a closed connector");
  last_sequence_ = record.sequence;
  queue_.push_back(record);
  not_empty_.notify_one();
}

std::optional<ConnectorRecord> QueueConnector::pull() {
  std::unique_lock<std::mutex> lock(mutex_);
  not_empty_.wait(lock, [&] { return !queue_.empty() || closed_; });
  if (queue_.empty()) {
    return std::nullopt; // closed and drained; idempotent
  }
  ConnectorRecord record = std::move(queue_.front());
  queue_.pop_front();
  not_full_.notify_one();
  return record;
}

void QueueConnector::close() {
  std::lock_guard<std::mutex> lock(mutex_);
  closed_ = true;
  not_empty_.notify_all();
  not_full_.notify_all();
}

// ---------------------------------------------------------------------------

FileHandoffConnector::FileHandoffConnector(std::string directory,
                                           std::size_t records_per_segment,
                                           double poll_interval_s)
    : directory_(std::move(directory)),
      records_per_segment_(records_per_segment),
      poll_interval_s_(poll_interval_s) {
  if (records_per_segment_ == 0) {
    throw Error("records_per_segment must be >= 1");
  }
  fs::create_directories(directory_);
}

FileHandoffConnector::~FileHandoffConnector() {
  if (writer_.is_open()) writer_.flush();
}

std::string FileHandoffConnector::segment_name(std::size_t index) const {
  std::string n = std::to_string(index);
  while (n.size() < 8) n.insert(n.begin(), '0');
  return (fs::path(directory_) / ("seg" + n + ".rec")).string();
}

std::string FileHandoffConnector::format_line(const ConnectorRecord& record) {
  return std::to_string(record.sequence) + "\t" +
         config::canonical_flow_text(record.payload) + "\n";
}

ConnectorRecord FileHandoffConnector::parse_line(const std::string& line) {
  const std::size_t tab = line.find('\t');
  if (tab == std::string::npos) {
    throw CorruptRecordError("connector line has no tab separator");
  }
  ConnectorRecord record;
  record.sequence = std::stoll(line.substr(0, tab));
  record.payload = config::parse_flow_text(line.substr(tab + 1));
  return record;
}

void FileHandoffConnector::open_writer_segment() {
  writer_.close();
  writer_.open(segment_name(writer_segment_),
               std::ios::binary | std::ios::app);
  if (!writer_) {
    throw Error("cannot open connector segment " +
                segment_name(writer_segment_));
  }
  writer_in_segment_ = 0;
}

void FileHandoffConnector::push(const ConnectorRecord& record) {
  if (closed_) throw Error("push on a closed connector");
  if (record.sequence <= last_sequence_) {
    throw Error("connector sequence must be strictly increasing");
  }
  if (!writer_.is_open()) open_writer_segment();
  if (writer_in_segment_ >= records_per_segment_) {
    ++writer_segment_;
    open_writer_segment();
  }
  writer_ << format_line(record);
  writer_.flush();
  if (!writer_) {
    throw Error("short write to connector segment");
  }
  last_sequence_ = record.sequence;
  ++writer_in_segment_;
  ++pushed_;
}

void FileHandoffConnector::close() {
  if (closed_) return;
  if (writer_.is_open()) writer_.flush();
  closed_ = true;
  std::ofstream end(fs::path(directory_) / "END", std::ios::trunc);
  end << pushed_ << "\n";
}

std::optional<ConnectorRecord> FileHandoffConnector::pull() {
  while (true) {
    if (!reader_open_) {
      const std::string name = segment_name(reader_segment_);
      if (fs::exists(name)) {
        reader_.close();
        reader_.clear();
        reader_.open(name, std::ios::binary);
        reader_open_ = true;
      }
    }
    if (reader_open_) {
      std::string line;
      if (std::getline(reader_, line)) {
        if (!line.empty()) {
          ConnectorRecord record = parse_line(line);
          if (record.sequence <= expected_sequence_) {
            throw CorruptRecordError("connector sequence went backwards");
          }
          expected_sequence_ = record.sequence;
          ++pulled_;
          return record;
        }
        continue;
      }
      reader_.clear(); // reached current EOF; the writer may still append
      if (fs::exists(segment_name(reader_segment_ + 1))) {
        // Next segment exists, so this one is complete.
        reader_.close();
        reader_open_ = false;
        ++reader_segment_;
        continue;
      }
    }
    // No new data; finished when END exists and everything was consumed.
    const fs::path end_path = fs::path(directory_) / "END";
    if (fs::exists(end_path)) {
      std::ifstream end(end_path);
      std::int64_t total = -1;
      end >> total;
      if (total >= 0 && pulled_ >= total) {
        return std::nullopt;
      }
    }
    std::this_thread::sleep_for(
        std::chrono::duration<double>(poll_interval_s_));
  }
}

} // namespace edna
