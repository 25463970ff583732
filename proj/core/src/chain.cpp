#include "edna/chain.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "edna/config.hpp"

namespace fs = std::filesystem;

namespace edna {

using config::ConfigNode;

bool ChainResult::all_succeeded() const {
  for (const auto& [_, status] : statuses) {
    if (status != StageStatus::Succeeded) return false;
  }
  return true;
}

namespace {

StageTrigger parse_trigger(const ConfigNode& stage) {
  StageTrigger trigger;
  const ConfigNode* kind = stage.find("TRIGGER");
  if (kind == nullptr) return trigger; // default once
  const std::string name = kind->as_string();
  if (name == "once") {
    trigger.kind = TriggerKind::Once;
  } else if (name == "periodic") {
    trigger.kind = TriggerKind::Periodic;
    if (const ConfigNode* args = stage.find("TRIGGER_ARGS")) {
      if (const ConfigNode* s = args->find("SECONDS")) {
        trigger.seconds = s->as_real();
      }
    }
    if (trigger.seconds <= 0.0) {
      throw Error("periodic trigger needs TRIGGER_ARGS.SECONDS > 0");
    }
  } else if (name == "on_upstream_batch") {
    trigger.kind = TriggerKind::OnUpstreamBatch;
    if (const ConfigNode* args = stage.find("TRIGGER_ARGS")) {
      if (const ConfigNode* b = args->find("BATCH")) {
        trigger.batch = b->as_int();
      }
    }
    if (trigger.batch < 1) {
      throw Error("on_upstream_batch trigger needs TRIGGER_ARGS.BATCH >= 1");
    }
  } else {
    throw Error("unknown trigger '" + name +
                "' (once, periodic, on_upstream_batch)");
  }
  return trigger;
}

void check_dag(const ChainManifest& manifest) {
  std::map<std::string, std::optional<std::string>> upstream_of;
  for (const StageSpec& stage : manifest.stages) {
    if (upstream_of.count(stage.name) != 0) {
      throw Error("duplicate stage name '" + stage.name + "'");
    }
    upstream_of[stage.name] = stage.upstream;
  }
  for (const StageSpec& stage : manifest.stages) {
    if (stage.upstream.has_value() &&
        upstream_of.count(*stage.upstream) == 0) {
      throw Error("stage '" + stage.name + "' references unknown upstream '" +
                  *stage.upstream + "'");
    }
  }
  // Each stage has at most one upstream, so cycle detection is pointer
  // chasing with a visited set.
  for (const StageSpec& stage : manifest.stages) {
    std::set<std::string> seen;
    std::optional<std::string> cur = stage.upstream;
    seen.insert(stage.name);
    while (cur.has_value()) {
      if (seen.count(*cur) != 0) {
        throw Error("chain manifest has a cycle through stage '" + *cur + "'");
      }
      seen.insert(*cur);
      cur = upstream_of[*cur];
    }
  }
}

} // namespace

ChainManifest parse_chain_manifest(const std::string& text,
                                   const std::string& base_dir) {
  const ConfigNode doc = config::parse_config(text);
  const ConfigNode* chain = doc.find("CHAIN");
  if (chain == nullptr) throw Error("chain manifest must have a CHAIN section");
  const ConfigNode* stages = chain->find("STAGES");
  if (stages == nullptr || !stages->is_list() || stages->as_list().empty()) {
    throw Error("CHAIN.STAGES must be a non-empty list");
  }

  ChainManifest manifest;
  for (const ConfigNode& node : stages->as_list()) {
    StageSpec stage;
    const ConfigNode* name = node.find("NAME");
    if (name == nullptr) throw Error("chain stage missing NAME");
    stage.name = name->as_string();

    const ConfigNode* configs = node.find("CONFIG");
    if (configs == nullptr || !configs->is_list() ||
        configs->as_list().empty()) {
      throw Error("stage '" + stage.name + "' needs a CONFIG list");
    }
    for (const ConfigNode& path : configs->as_list()) {
      fs::path p = path.as_string();
      if (p.is_relative() && !base_dir.empty()) {
        p = fs::path(base_dir) / p;
      }
      stage.config_layers.push_back(p.string());
    }

    const ConfigNode* mode = node.find("MODE");
    if (mode == nullptr) throw Error("stage '" + stage.name + "' needs MODE");
    if (mode->as_string() == "train") {
      stage.mode = Mode::Train;
    } else if (mode->as_string() == "deploy") {
      stage.mode = Mode::Deploy;
    } else {
      throw Error("stage '" + stage.name + "': MODE must be train or deploy");
    }

    stage.trigger = parse_trigger(node);
    if (const ConfigNode* upstream = node.find("UPSTREAM")) {
      stage.upstream = upstream->as_string();
    }
    manifest.stages.push_back(std::move(stage));
  }
  check_dag(manifest);
  return manifest;
}

ChainManifest load_chain_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open chain manifest: " + path);
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  return parse_chain_manifest(text,
                              fs::path(path).parent_path().string());
}

namespace {

std::vector<const StageSpec*> topological_order(const ChainManifest& manifest) {
  // Kahn over the single-upstream DAG, stable w.r.t. manifest order.
  std::vector<const StageSpec*> order;
  std::set<std::string> placed;
  while (order.size() < manifest.stages.size()) {
    bool progressed = false;
    for (const StageSpec& stage : manifest.stages) {
      if (placed.count(stage.name) != 0) continue;
      if (!stage.upstream.has_value() ||
          placed.count(*stage.upstream) != 0) {
        order.push_back(&stage);
        placed.insert(stage.name);
        progressed = true;
      }
    }
    if (!progressed) {
      throw Error("chain manifest has a cycle"); // check_dag should catch
    }
  }
  return order;
}

std::vector<SampleRecord> records_from_connector(Connector& connector,
                                                 std::int64_t at_most = -1) {
  std::vector<SampleRecord> records;
  while (at_most < 0 || std::int64_t(records.size()) < at_most) {
    std::optional<ConnectorRecord> rec = connector.pull();
    if (!rec.has_value()) break;
    records.push_back(record_from_node(rec->payload));
  }
  return records;
}

/// One stage execution over optionally injected upstream records. Deploy
/// stages emit into `sink` (owned by the trigger loop so repeated firings
/// share one output sequence); returns the number of records emitted.
std::int64_t run_stage_once(const StageSpec& stage,
                            const ChainOptions& options, Connector* sink,
                            std::int64_t sequence_base,
                            std::vector<SampleRecord> upstream_records) {
  Engine engine;
  engine.set_storage_root(options.storage_root);
  if (options.customize) {
    options.customize(engine, stage);
  }
  for (const std::string& path : stage.config_layers) {
    engine.add_config_file(path);
  }
  if (options.has_seed_override) {
    engine.add_literal_layer(
        "chain:seed", "EXECUTION:\n  SEED: " +
                          std::to_string(options.seed_override) + "\n");
  }
  if (!upstream_records.empty()) {
    engine.set_inline_records(std::move(upstream_records));
  }
  engine.apply(stage.mode);
  if (stage.mode == Mode::Train) {
    engine.train();
    return 0;
  }
  return engine.deploy(sink, sequence_base);
}

} // namespace

ChainResult run_chain(const ChainManifest& manifest,
                      const ChainOptions& options) {
  check_dag(manifest);
  fs::create_directories(options.work_dir);

  ChainResult result;
  std::set<std::string> failed_or_skipped;

  const std::vector<const StageSpec*> order = topological_order(manifest);
  auto out_dir_of = [&](const std::string& stage_name) {
    return (fs::path(options.work_dir) / (stage_name + ".out")).string();
  };
  // Only deploy stages emit records; an edge from a train stage is an
  // ordering dependency with no data flow.
  auto upstream_emits = [&](const StageSpec& stage) {
    if (!stage.upstream.has_value()) return false;
    for (const StageSpec& other : manifest.stages) {
      if (other.name == *stage.upstream) return other.mode == Mode::Deploy;
    }
    return false;
  };

  for (const StageSpec* stage : order) {
    if (stage->upstream.has_value() &&
        failed_or_skipped.count(*stage->upstream) != 0) {
      result.statuses[stage->name] = StageStatus::Skipped;
      failed_or_skipped.insert(stage->name);
      continue;
    }
    try {
      switch (stage->trigger.kind) {
        case TriggerKind::Once: {
          std::vector<SampleRecord> upstream_records;
          if (upstream_emits(*stage)) {
            FileHandoffConnector upstream(out_dir_of(*stage->upstream));
            upstream_records = records_from_connector(upstream);
          }
          if (stage->mode == Mode::Deploy) {
            FileHandoffConnector sink(out_dir_of(stage->name));
            run_stage_once(*stage, options, &sink, 0,
                           std::move(upstream_records));
            sink.close();
          } else {
            run_stage_once(*stage, options, nullptr, 0,
                           std::move(upstream_records));
          }
          break;
        }
        case TriggerKind::Periodic: {
          if (!upstream_emits(*stage)) {
            throw Error("periodic stage '" + stage->name +
                        "' needs a deploy-mode upstream to consume");
          }
          FileHandoffConnector upstream(out_dir_of(*stage->upstream));
          std::unique_ptr<FileHandoffConnector> sink;
          if (stage->mode == Mode::Deploy) {
            sink = std::make_unique<FileHandoffConnector>(
                out_dir_of(stage->name));
          }
          std::int64_t emitted_total = 0;
          bool done = false;
          while (!done) {
            std::this_thread::sleep_for(
                std::chrono::duration<double>(stage->trigger.seconds));
            std::vector<SampleRecord> collected;
            while (true) {
              std::optional<ConnectorRecord> rec = upstream.pull();
              if (!rec.has_value()) {
                done = true;
                break;
              }
              collected.push_back(record_from_node(rec->payload));
              if (collected.size() >= 4096) break;
            }
            if (!collected.empty()) {
              emitted_total +=
                  run_stage_once(*stage, options, sink.get(), emitted_total,
                                 std::move(collected));
            }
          }
          if (sink != nullptr) sink->close();
          break;
        }
        case TriggerKind::OnUpstreamBatch: {
          if (!upstream_emits(*stage)) {
            throw Error("on_upstream_batch stage '" + stage->name +
                        "' needs a deploy-mode upstream to consume");
          }
          FileHandoffConnector upstream(out_dir_of(*stage->upstream));
          std::unique_ptr<FileHandoffConnector> sink;
          if (stage->mode == Mode::Deploy) {
            sink = std::make_unique<FileHandoffConnector>(
                out_dir_of(stage->name));
          }
          std::int64_t emitted_total = 0;
          while (true) {
            std::vector<SampleRecord> group =
                records_from_connector(upstream, stage->trigger.batch);
            const std::int64_t group_size = std::int64_t(group.size());
            if (group.empty()) break;
            emitted_total += run_stage_once(
                *stage, options, sink.get(), emitted_total, std::move(group));
            if (group_size < stage->trigger.batch) break;
          }
          if (sink != nullptr) sink->close();
          break;
        }
      }
      result.statuses[stage->name] = StageStatus::Succeeded;
    } catch (const std::exception& e) {
      result.statuses[stage->name] = StageStatus::Failed;
      result.errors[stage->name] = e.what();
      failed_or_skipped.insert(stage->name);
    }
  }
  return result;
}

} // namespace edna
