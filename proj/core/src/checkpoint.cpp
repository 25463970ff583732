#include "edna/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace edna {

using config::ConfigNode;

namespace {

constexpr char kMagic[4] = {'E', 'D', 'N', 'A'};
constexpr std::uint16_t kFormatVersion = 1;

void append_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(std::uint8_t(v & 0xff));
  out.push_back(std::uint8_t(v >> 8));
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

void append_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(bits >> (8 * i)));
}

double read_f64(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string hex_of_bytes(const std::vector<std::uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> bytes_of_hex(const std::string& hex) {
  if (hex.size() % 2 != 0) throw Error("hex string has odd length");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw Error("invalid hex character");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::uint8_t((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return out;
}

ConfigNode real_vector_node(const std::vector<double>& v) {
  ConfigNode::List l;
  for (double x : v) l.push_back(ConfigNode(x));
  return ConfigNode(std::move(l));
}

std::vector<double> real_vector_of(const ConfigNode& node) {
  std::vector<double> out;
  for (const ConfigNode& v : node.as_list()) out.push_back(v.as_real());
  return out;
}

const ConfigNode& field(const ConfigNode& map, const std::string& key) {
  const ConfigNode* n = map.find(key);
  if (n == nullptr) {
    throw CorruptRecordError("checkpoint manifest missing '" + key + "'");
  }
  return *n;
}

} // namespace

std::string checkpoint_key(const config::ExperimentKey& key,
                           std::int64_t epoch) {
  return key.canonical() + "/model/epoch" + std::to_string(epoch) + ".ckpt";
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  // Tensor payload order: parameters first, then Adam moments when present.
  struct PayloadTensor {
    std::string name;
    std::vector<std::size_t> shape;
    const std::vector<double>* data;
  };
  std::vector<PayloadTensor> payload;
  for (const auto& t : ckpt.param_tensors) {
    payload.push_back({"params." + t.name, t.shape, &t.data});
  }
  if (ckpt.optimizer.kind == optim::OptimizerKind::Adam) {
    payload.push_back({"optim.m", {ckpt.optimizer.m.size()}, &ckpt.optimizer.m});
    payload.push_back({"optim.v", {ckpt.optimizer.v.size()}, &ckpt.optimizer.v});
  }

  ConfigNode manifest = ConfigNode::map();
  manifest.set("config_hash", ConfigNode(to_hex(ckpt.config_hash)));
  manifest.set("epoch", ConfigNode(ckpt.epoch));
  {
    ConfigNode counters = ConfigNode::map();
    counters.set("global_epoch", ConfigNode(ckpt.global_epoch));
    counters.set("global_batch", ConfigNode(ckpt.global_batch));
    counters.set("accumulation_count", ConfigNode(ckpt.accumulation_count));
    manifest.set("counters", std::move(counters));
  }
  {
    ConfigNode key = ConfigNode::map();
    key.set("core_name", ConfigNode(ckpt.experiment_key.core_name));
    key.set("version", ConfigNode(ckpt.experiment_key.version));
    key.set("backbone", ConfigNode(ckpt.experiment_key.backbone));
    key.set("qualifier", ConfigNode(ckpt.experiment_key.qualifier));
    manifest.set("experiment_key", std::move(key));
  }
  {
    ConfigNode opt = ConfigNode::map();
    opt.set("kind", ConfigNode(ckpt.optimizer.kind == optim::OptimizerKind::Adam
                                   ? "Adam"
                                   : "SGD"));
    opt.set("base_lr", ConfigNode(ckpt.optimizer.base_lr));
    opt.set("current_lr", ConfigNode(ckpt.optimizer.current_lr));
    opt.set("t", ConfigNode(ckpt.optimizer.t));
    opt.set("beta1", ConfigNode(ckpt.optimizer.beta1));
    opt.set("beta2", ConfigNode(ckpt.optimizer.beta2));
    opt.set("epsilon", ConfigNode(ckpt.optimizer.epsilon));
    manifest.set("optimizer", std::move(opt));
  }
  {
    ConfigNode sched = ConfigNode::map();
    const char* kind = "constant";
    if (ckpt.scheduler.kind == optim::SchedulerKind::StepDecay) {
      kind = "step_decay";
    } else if (ckpt.scheduler.kind == optim::SchedulerKind::Exponential) {
      kind = "exponential";
    }
    sched.set("kind", ConfigNode(kind));
    sched.set("gamma", ConfigNode(ckpt.scheduler.gamma));
    sched.set("step_size", ConfigNode(ckpt.scheduler.step_size));
    sched.set("epoch_counter", ConfigNode(ckpt.scheduler.epoch_counter));
    manifest.set("scheduler", std::move(sched));
  }
  {
    ConfigNode lsched = ConfigNode::map();
    lsched.set("policy",
               ConfigNode(ckpt.lambda_scheduler.policy ==
                               optim::LambdaPolicy::ExponentialDecay
                           ? "exponential_decay"
                           : "constant"));
    lsched.set("gamma", ConfigNode(ckpt.lambda_scheduler.gamma));
    manifest.set("lambda_scheduler", std::move(lsched));
    ConfigNode::List groups;
    for (const auto& group : ckpt.lambdas) {
      groups.push_back(real_vector_node(group));
    }
    manifest.set("lambdas", ConfigNode(std::move(groups)));
  }
  manifest.set("rng_state", ConfigNode(ckpt.rng_state));
  {
    ConfigNode states = ConfigNode::map();
    for (const auto& [name, bytes] : ckpt.plugin_states) {
      states.set(name, ConfigNode(hex_of_bytes(bytes)));
    }
    manifest.set("plugin_states", std::move(states));
  }
  {
    ConfigNode::List toc;
    std::size_t offset = 0;
    for (const PayloadTensor& t : payload) {
      ConfigNode entry = ConfigNode::map();
      entry.set("name", ConfigNode(t.name));
      ConfigNode::List shape;
      for (std::size_t d : t.shape) {
        shape.push_back(ConfigNode(std::int64_t(d)));
      }
      entry.set("shape", ConfigNode(std::move(shape)));
      entry.set("offset", ConfigNode(std::int64_t(offset)));
      toc.push_back(std::move(entry));
      offset += t.data->size() * 8;
    }
    manifest.set("tensors", ConfigNode(std::move(toc)));
  }

  const std::string manifest_text = config::canonical_flow_text(manifest);

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  append_u16(out, kFormatVersion);
  append_u32(out, std::uint32_t(manifest_text.size()));
  out.insert(out.end(), manifest_text.begin(), manifest_text.end());
  for (const PayloadTensor& t : payload) {
    for (double v : *t.data) append_f64(out, v);
  }
  const Digest digest = sha256(out.data(), out.size());
  out.insert(out.end(), digest.begin(), digest.end());
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 + 2 + 4 + 32) {
    throw CorruptRecordError("checkpoint too short");
  }
  const std::size_t body = bytes.size() - 32;
  const Digest expected = sha256(bytes.data(), body);
  if (!std::equal(expected.begin(), expected.end(), bytes.begin() + body)) {
    throw CorruptRecordError("checkpoint digest mismatch");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CorruptRecordError("checkpoint magic mismatch");
  }
  const std::uint16_t version =
      std::uint16_t(bytes[4]) | (std::uint16_t(bytes[5]) << 8);
  if (version != kFormatVersion) {
    throw CorruptRecordError("unsupported checkpoint format version " +
                             std::to_string(version));
  }
  std::uint32_t manifest_len = 0;
  for (int i = 0; i < 4; ++i) {
    manifest_len |= std::uint32_t(bytes[6 + i]) << (8 * i);
  }
  const std::size_t manifest_start = 10;
  if (manifest_start + manifest_len > body) {
    throw CorruptRecordError("checkpoint manifest overruns payload");
  }
  const std::string manifest_text(bytes.begin() + manifest_start,
                                  bytes.begin() + manifest_start + manifest_len);
  const ConfigNode manifest = config::parse_flow_text(manifest_text);
  const std::size_t payload_start = manifest_start + manifest_len;
  const std::size_t payload_len = body - payload_start;

  Checkpoint ckpt;
  ckpt.config_hash = digest_from_hex(field(manifest, "config_hash").as_string());
  ckpt.epoch = field(manifest, "epoch").as_int();
  {
    const ConfigNode& counters = field(manifest, "counters");
    ckpt.global_epoch = field(counters, "global_epoch").as_int();
    ckpt.global_batch = field(counters, "global_batch").as_int();
    ckpt.accumulation_count = field(counters, "accumulation_count").as_int();
  }
  {
    const ConfigNode& key = field(manifest, "experiment_key");
    ckpt.experiment_key.core_name = field(key, "core_name").as_string();
    ckpt.experiment_key.version = field(key, "version").as_int();
    ckpt.experiment_key.backbone = field(key, "backbone").as_string();
    ckpt.experiment_key.qualifier = field(key, "qualifier").as_string();
  }
  {
    const ConfigNode& opt = field(manifest, "optimizer");
    ckpt.optimizer.kind = field(opt, "kind").as_string() == "Adam"
                              ? optim::OptimizerKind::Adam
                              : optim::OptimizerKind::SGD;
    ckpt.optimizer.base_lr = field(opt, "base_lr").as_real();
    ckpt.optimizer.current_lr = field(opt, "current_lr").as_real();
    ckpt.optimizer.t = field(opt, "t").as_int();
    ckpt.optimizer.beta1 = field(opt, "beta1").as_real();
    ckpt.optimizer.beta2 = field(opt, "beta2").as_real();
    ckpt.optimizer.epsilon = field(opt, "epsilon").as_real();
  }
  {
    const ConfigNode& sched = field(manifest, "scheduler");
    const std::string kind = field(sched, "kind").as_string();
    ckpt.scheduler.kind = optim::scheduler_kind_from_name(kind);
    ckpt.scheduler.gamma = field(sched, "gamma").as_real();
    ckpt.scheduler.step_size = field(sched, "step_size").as_int();
    ckpt.scheduler.epoch_counter = field(sched, "epoch_counter").as_int();
  }
  {
    const ConfigNode& lsched = field(manifest, "lambda_scheduler");
    ckpt.lambda_scheduler.policy =
        optim::lambda_policy_from_name(field(lsched, "policy").as_string());
    ckpt.lambda_scheduler.gamma = field(lsched, "gamma").as_real();
    for (const ConfigNode& group : field(manifest, "lambdas").as_list()) {
      ckpt.lambdas.push_back(real_vector_of(group));
    }
  }
  ckpt.rng_state = field(manifest, "rng_state").as_string();
  {
    const ConfigNode& states = field(manifest, "plugin_states");
    for (const auto& e : states.as_map()) {
      ckpt.plugin_states[e.key] = bytes_of_hex(e.value.as_string());
    }
  }

  // Tensor payloads in TOC order; parameters reconstruct param_tensors,
  // "optim.m"/"optim.v" land in the optimizer state.
  for (const ConfigNode& entry : field(manifest, "tensors").as_list()) {
    const std::string name = field(entry, "name").as_string();
    std::vector<std::size_t> shape;
    std::size_t count = 1;
    for (const ConfigNode& d : field(entry, "shape").as_list()) {
      shape.push_back(std::size_t(d.as_int()));
      count *= std::size_t(d.as_int());
    }
    const std::size_t offset = std::size_t(field(entry, "offset").as_int());
    if (offset + count * 8 > payload_len) {
      throw CorruptRecordError("checkpoint tensor '" + name +
                               "' overruns payload");
    }
    std::vector<double> data(count);
    const std::uint8_t* p = bytes.data() + payload_start + offset;
    for (std::size_t i = 0; i < count; ++i) {
      data[i] = read_f64(p + i * 8);
    }
    if (name == "optim.m") {
      ckpt.optimizer.m = std::move(data);
    } else if (name == "optim.v") {
      ckpt.optimizer.v = std::move(data);
    } else if (name.rfind("params.", 0) == 0) {
      ckpt.param_tensors.push_back(ParameterSet::Tensor{
          name.substr(7), std::move(shape), std::move(data)});
    } else {
      throw CorruptRecordError("unknown checkpoint tensor '" + name + "'");
    }
  }
  return ckpt;
}

std::string write_checkpoint(const Checkpoint& ckpt, StorageBackend& backend) {
  const std::string key = checkpoint_key(ckpt.experiment_key, ckpt.epoch);
  const std::vector<std::uint8_t> bytes = encode_checkpoint(ckpt);
  backend.put(Category::MODEL, key, bytes);
  return key;
}

Checkpoint read_checkpoint(const std::string& key,
                           const StorageBackend& backend) {
  return decode_checkpoint(backend.get(Category::MODEL, key));
}

} // namespace edna
