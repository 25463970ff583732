#include "edna/registry.hpp"

#include <algorithm>
#include <fstream>

namespace edna {

const char* component_kind_name(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::MODEL: return "MODEL";
    case ComponentKind::TRAINER: return "TRAINER";
    case ComponentKind::DEPLOYMENT: return "DEPLOYMENT";
    case ComponentKind::PLUGIN: return "PLUGIN";
    case ComponentKind::METRIC: return "METRIC";
    case ComponentKind::STORAGE: return "STORAGE";
    case ComponentKind::CRAWLER: return "CRAWLER";
    case ComponentKind::DATASET: return "DATASET";
    case ComponentKind::LOSS: return "LOSS";
    case ComponentKind::OPTIMIZER: return "OPTIMIZER";
    case ComponentKind::SCHEDULER: return "SCHEDULER";
  }
  return "UNKNOWN";
}

namespace {

std::size_t factory_index_for(ComponentKind kind) {
  switch (kind) {
    case ComponentKind::MODEL: return 0;
    case ComponentKind::TRAINER: return 1;
    case ComponentKind::DEPLOYMENT: return 2;
    case ComponentKind::PLUGIN: return 3;
    case ComponentKind::METRIC: return 4;
    case ComponentKind::STORAGE: return 5;
    case ComponentKind::CRAWLER: return 6;
    case ComponentKind::DATASET: return 7;
    case ComponentKind::LOSS: return 8;
    case ComponentKind::OPTIMIZER: return 9;
    case ComponentKind::SCHEDULER: return 10;
  }
  return SIZE_MAX;
}

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot read component source file: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

} // namespace

void Registry::register_component(
    ComponentKind kind, const std::string& name, ComponentFactory factory,
    RegistryTier tier, const std::optional<std::string>& source_path) {
  if (frozen_) {
    throw Error("registry is frozen; cannot register " +
                std::string(component_kind_name(kind)) + " '" + name + "'");
  }
  if (name.empty()) throw Error("registration name must be non-empty");
  if (factory.index() != factory_index_for(kind)) {
    throw Error("factory type does not match component kind " +
                std::string(component_kind_name(kind)) + " for '" + name +
                "'");
  }
  std::vector<Registration>& target =
      tier == RegistryTier::User ? user_ : built_in_;
  if (find_in(target, kind, name) != nullptr) {
    throw Error("duplicate registration: " +
                std::string(component_kind_name(kind)) + " '" + name + "'");
  }
  Registration reg;
  reg.kind = kind;
  reg.name = name;
  reg.factory = std::move(factory);
  if (source_path.has_value()) {
    const std::vector<std::uint8_t> bytes = read_file_bytes(*source_path);
    reg.source = SourceDescriptor{*source_path, sha256(bytes)};
  }
  target.push_back(std::move(reg));
}

const Registration* Registry::find_in(const std::vector<Registration>& tier,
                                      ComponentKind kind,
                                      const std::string& name) const {
  for (const Registration& reg : tier) {
    if (reg.kind == kind && reg.name == name) return &reg;
  }
  return nullptr;
}

const Registration& Registry::resolve(ComponentKind kind,
                                      const std::string& name) const {
  if (const Registration* reg = find_in(user_, kind, name)) return *reg;
  if (const Registration* reg = find_in(built_in_, kind, name)) return *reg;
  std::string available;
  for (const std::string& n : names_for(kind)) {
    if (!available.empty()) available += ", ";
    available += n;
  }
  throw Error("no " + std::string(component_kind_name(kind)) + " named '" +
              name + "' (available: " + (available.empty() ? "none" : available) +
              ")");
}

bool Registry::contains(ComponentKind kind, const std::string& name) const {
  return find_in(user_, kind, name) != nullptr ||
         find_in(built_in_, kind, name) != nullptr;
}

void Registry::freeze() { frozen_ = true; }

std::vector<SourceEntry> Registry::snapshot_sources() const {
  std::vector<SourceEntry> out;
  auto collect = [&](const std::vector<Registration>& tier) {
    for (const Registration& reg : tier) {
      if (!reg.source.has_value()) continue;
      const std::vector<std::uint8_t> bytes = read_file_bytes(reg.source->path);
      if (sha256(bytes) != reg.source->digest) {
        throw Error("component source changed since registration: " +
                    std::string(component_kind_name(reg.kind)) + " '" +
                    reg.name + "' (" + reg.source->path + ")");
      }
      out.push_back(
          SourceEntry{reg.kind, reg.name, reg.source->path, reg.source->digest});
    }
  };
  collect(built_in_);
  collect(user_);
  std::sort(out.begin(), out.end(), [](const SourceEntry& a,
                                       const SourceEntry& b) {
    if (a.kind != b.kind) {
      return factory_index_for(a.kind) < factory_index_for(b.kind);
    }
    return a.name < b.name;
  });
  return out;
}

std::vector<std::uint8_t> Registry::read_source_bytes(
    const SourceEntry& entry) const {
  const std::vector<std::uint8_t> bytes = read_file_bytes(entry.path);
  if (sha256(bytes) != entry.digest) {
    throw Error("component source changed since registration: " + entry.path);
  }
  return bytes;
}

std::vector<std::string> Registry::names_for(ComponentKind kind) const {
  std::vector<std::string> names;
  for (const Registration& reg : user_) {
    if (reg.kind == kind) names.push_back(reg.name);
  }
  for (const Registration& reg : built_in_) {
    if (reg.kind == kind &&
        std::find(names.begin(), names.end(), reg.name) == names.end()) {
      names.push_back(reg.name);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::unique_ptr<Model> build_model(const ModelSpec& spec,
                                   const Registry& registry,
                                   std::uint64_t seed) {
  if (spec.arch.empty()) throw Error("model spec has an empty arch");
  const Registration& reg = registry.resolve(ComponentKind::MODEL, spec.arch);
  std::unique_ptr<Model> model =
      std::get<ModelFactory>(reg.factory)(spec.kwargs);
  setup_model(*model, spec.kwargs, seed);
  return model;
}

} // namespace edna
