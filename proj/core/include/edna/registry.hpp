#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "edna/data.hpp"
#include "edna/metrics.hpp"
#include "edna/model.hpp"
#include "edna/optim.hpp"
#include "edna/plugins.hpp"
#include "edna/sha256.hpp"
#include "edna/storage.hpp"

namespace edna {

class BaseTrainer; // trainer.hpp
class BaseDeploy;  // deploy.hpp

enum class ComponentKind {
  MODEL,
  TRAINER,
  DEPLOYMENT,
  PLUGIN,
  METRIC,
  STORAGE,
  CRAWLER,
  DATASET,
  LOSS,
  OPTIMIZER,
  SCHEDULER,
};

const char* component_kind_name(ComponentKind kind);

// Typed factories, one alternative per component kind.
using ModelFactory = std::function<std::unique_ptr<Model>(const Kwargs&)>;
using TrainerFactory =
    std::function<std::unique_ptr<BaseTrainer>(const Kwargs&)>;
using DeployFactory = std::function<std::unique_ptr<BaseDeploy>(const Kwargs&)>;
using PluginFactory = std::function<std::shared_ptr<ModelPlugin>(const Kwargs&)>;
using MetricFactory =
    std::function<std::unique_ptr<metrics::Metric>(const metrics::MetricSpec&)>;
using StorageFactory =
    std::function<std::unique_ptr<StorageBackend>(const std::string& name,
                                                  const Kwargs&)>;
using CrawlerFactory = std::function<SampleSet(const Kwargs&)>;
using DatasetFactory = std::function<std::vector<TransformSpec>(const Kwargs&)>;
using LossFactory = std::function<optim::LossFn(const Kwargs&)>;
using OptimizerFactory =
    std::function<optim::OptimizerState(double base_lr, std::size_t params)>;
using SchedulerFactory = std::function<optim::SchedulerState(const Kwargs&)>;

using ComponentFactory =
    std::variant<ModelFactory, TrainerFactory, DeployFactory, PluginFactory,
                 MetricFactory, StorageFactory, CrawlerFactory, DatasetFactory,
                 LossFactory, OptimizerFactory, SchedulerFactory>;

/// Optional pointer to the file a user component came from; captured for
/// provenance (path + content digest at registration time).
struct SourceDescriptor {
  std::string path;
  Digest digest{};
};

struct Registration {
  ComponentKind kind = ComponentKind::MODEL;
  std::string name;
  ComponentFactory factory;
  std::optional<SourceDescriptor> source;
};

enum class RegistryTier { BuiltIn, User };

struct SourceEntry {
  ComponentKind kind;
  std::string name;
  std::string path;
  Digest digest{};
};

/// Two-tier component registry: user registrations shadow built-ins of the
/// same (kind, name). Once frozen, contents never change.
class Registry {
public:
  /// The factory's variant alternative must match `kind`. When source_path
  /// is given the file is read and its digest recorded.
  void register_component(ComponentKind kind, const std::string& name,
                          ComponentFactory factory, RegistryTier tier,
                          const std::optional<std::string>& source_path =
                              std::nullopt);

  const Registration& resolve(ComponentKind kind,
                              const std::string& name) const;
  bool contains(ComponentKind kind, const std::string& name) const;

  /// Idempotent; all register calls fail afterwards.
  void freeze();
  bool frozen() const { return frozen_; }

  /// One entry per registration carrying a source descriptor, ordered by
  /// (kind, name). Re-reads each file and errors on digest mismatch.
  std::vector<SourceEntry> snapshot_sources() const;

  /// Source bytes re-read and re-verified at package time.
  std::vector<std::uint8_t> read_source_bytes(const SourceEntry& entry) const;

  std::vector<std::string> names_for(ComponentKind kind) const;

private:
  const Registration* find_in(const std::vector<Registration>& tier,
                              ComponentKind kind,
                              const std::string& name) const;

  std::vector<Registration> built_in_;
  std::vector<Registration> user_;
  bool frozen_ = false;
};

/// Resolve the arch, construct, and run two-phase setup seeded by `seed`.
std::unique_ptr<Model> build_model(const ModelSpec& spec,
                                   const Registry& registry,
                                   std::uint64_t seed);

/// Register every built-in component (models, trainer, deploy, plugins,
/// metrics, storage kinds, crawlers, losses, optimizers, schedulers).
void register_builtins(Registry& registry);

} // namespace edna
