#include "edna/deploy.hpp"

#include <chrono>
#include <filesystem>
#include <thread>

#include "edna/config.hpp"
#include "edna/optim.hpp"

namespace edna {

using config::ConfigNode;

void BaseDeploy::configure(DeploySetup setup) {
  if (setup.model == nullptr) throw Error("deploy: no model");
  if (setup.batch_size < 1) throw Error("deploy: batch_size must be >= 1");
  setup_ = std::move(setup);
  next_sequence_ = setup_.sequence_base;
  configured_ = true;
}

void BaseDeploy::emit(const ConnectorRecord& record) {
  if (setup_.sink != nullptr) {
    setup_.sink->push(record);
  } else {
    collected_.push_back(record);
  }
}

std::int64_t BaseDeploy::run_records(
    const std::vector<SampleRecord>& records) {
  if (!configured_) throw Error("deploy not configured");
  if (records.empty()) return 0;
  setup_.model->set_train_mode(false);

  std::int64_t emitted = 0;
  const std::size_t bs = std::size_t(setup_.batch_size);
  for (std::size_t start = 0; start < records.size(); start += bs) {
    const std::size_t b = std::min(bs, records.size() - start);

    std::vector<SampleRecord> transformed;
    transformed.reserve(b);
    for (std::size_t i = 0; i < b; ++i) {
      transformed.push_back(
          transform_chain(records[start + i], setup_.transforms));
    }
    const std::size_t dim = transformed.front().features.size();
    Matrix features(b, dim);
    for (std::size_t i = 0; i < b; ++i) {
      if (transformed[i].features.size() != dim) {
        throw Error("deploy: ragged feature widths in input records");
      }
      for (std::size_t d = 0; d < dim; ++d) {
        features.at(i, d) = transformed[i].features[d];
      }
    }

    ForwardResult res = setup_.model->forward(features);
    const Matrix probs = optim::softmax_rows(res.output.logits);

    for (std::size_t r = 0; r < b; ++r) {
      std::size_t argmax = 0;
      for (std::size_t c = 1; c < probs.cols(); ++c) {
        if (probs.at(r, c) > probs.at(r, argmax)) argmax = c;
      }

      // Per-plugin outputs, sliced to this row where they are row lists.
      bool keep = true;
      ConfigNode plugin_map = ConfigNode::map();
      for (const auto& [name, outputs] : res.plugin_outputs) {
        if (!outputs.is_map() || outputs.as_map().empty()) continue;
        ConfigNode row_outputs = ConfigNode::map();
        for (const auto& e : outputs.as_map()) {
          if (e.value.is_list() && e.value.as_list().size() == b) {
            row_outputs.set(e.key, e.value.as_list()[r]);
          } else {
            row_outputs.set(e.key, e.value);
          }
        }
        if (const ConfigNode* keep_flag = row_outputs.find("keep")) {
          if (keep_flag->is_bool() && !keep_flag->as_bool()) keep = false;
        }
        plugin_map.set(name, std::move(row_outputs));
      }
      if (!keep) continue;

      ConfigNode payload = record_to_node(records[start + r]);
      payload.set("pred", ConfigNode(std::int64_t(argmax)));
      payload.set("max_softmax", ConfigNode(probs.at(r, argmax)));
      payload.set("plugins", std::move(plugin_map));

      ConnectorRecord record;
      record.sequence = next_sequence_++;
      record.payload = std::move(payload);
      emit(record);
      ++emitted;
    }
  }
  return emitted;
}

std::int64_t BaseDeploy::run_stream(StreamSource& src) {
  if (!configured_) throw Error("deploy not configured");

  // Producer thread polls the directory; the consumer below pulls from a
  // bounded queue, so a slow consumer applies backpressure to the poller.
  QueueConnector queue(std::size_t(setup_.queue_capacity));
  const auto stop_path = std::filesystem::path(src.directory) / "STOP";

  std::exception_ptr producer_error;
  std::thread producer([&] {
    std::int64_t sequence = 0;
    try {
      while (true) {
        const std::vector<SampleRecord> records = poll_stream(src);
        for (const SampleRecord& rec : records) {
          ConnectorRecord out;
          out.sequence = sequence++;
          out.payload = record_to_node(rec);
          queue.push(out);
        }
        if (records.empty() && std::filesystem::exists(stop_path)) {
          break;
        }
        if (records.empty()) {
          std::this_thread::sleep_for(
              std::chrono::duration<double>(src.poll_interval_s));
        }
      }
    } catch (...) {
      producer_error = std::current_exception();
    }
    queue.close();
  });

  std::int64_t emitted = 0;
  std::vector<SampleRecord> pending;
  bool done = false;
  while (!done) {
    const std::optional<ConnectorRecord> rec = queue.pull();
    if (rec.has_value()) {
      pending.push_back(record_from_node(rec->payload));
    } else {
      done = true;
    }
    if (std::int64_t(pending.size()) >= setup_.batch_size ||
        (done && !pending.empty())) {
      emitted += run_records(pending);
      pending.clear();
    }
  }
  producer.join();
  if (producer_error != nullptr) {
    std::rethrow_exception(producer_error);
  }
  if (setup_.logger != nullptr) {
    setup_.logger->info("stream stop signal received");
  }
  return emitted;
}

} // namespace edna
