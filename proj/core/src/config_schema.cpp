#include <cmath>
#include <sstream>

#include "edna/config.hpp"

namespace edna::config {

namespace {

FieldSpec scalar_field(FieldKind kind, std::optional<ConfigNode> def) {
  FieldSpec f;
  f.kind = kind;
  f.default_value = std::move(def);
  return f;
}

FieldSpec string_field(const char* def) {
  return scalar_field(FieldKind::String, ConfigNode(def));
}

FieldSpec required_string_field() {
  FieldSpec f;
  f.kind = FieldKind::String;
  f.required = true;
  return f;
}

FieldSpec int_field(std::int64_t def) {
  return scalar_field(FieldKind::Integer, ConfigNode(def));
}

FieldSpec real_field(double def) {
  return scalar_field(FieldKind::Real, ConfigNode(def));
}

FieldSpec bool_field(bool def) {
  return scalar_field(FieldKind::Boolean, ConfigNode(def));
}

FieldSpec open_map() {
  FieldSpec f;
  f.kind = FieldKind::Map;
  f.open = true;
  f.default_value = ConfigNode::map();
  return f;
}

FieldSpec closed_map(std::vector<std::pair<std::string, FieldSpec>> children) {
  FieldSpec f;
  f.kind = FieldKind::Map;
  f.children = std::move(children);
  return f;
}

FieldSpec list_of(FieldSpec item, std::optional<ConfigNode> def) {
  FieldSpec f;
  f.kind = FieldKind::List;
  f.item.push_back(std::move(item));
  f.default_value = std::move(def);
  return f;
}

FieldSpec scalar_list(FieldKind elem_kind) {
  FieldSpec f;
  f.kind = FieldKind::List;
  FieldSpec item;
  item.kind = elem_kind;
  f.item.push_back(std::move(item));
  return f;
}

SchemaSpec build_pipeline_schema() {
  SchemaSpec schema;
  schema.root.kind = FieldKind::Map;

  schema.root.children.emplace_back(
      "EXECUTION",
      closed_map({
          {"EPOCHS", int_field(10)},
          {"BATCH_SIZE", int_field(32)},
          {"SEED", int_field(42)},
          {"TRAINER", string_field("ClassificationTrainer")},
          {"TRAINER_ARGS", open_map()},
      }));

  schema.root.children.emplace_back(
      "SAVE",
      closed_map({
          {"MODEL_VERSION", int_field(1)},
          {"MODEL_CORE_NAME", string_field("edna")},
          {"MODEL_BACKBONE", string_field("base")},
          {"MODEL_QUALIFIER", string_field("all")},
          {"SAVE_FREQUENCY", int_field(5)},
          {"BACKUP", bool_field(false)},
          {"STORAGE_NAME", string_field("local")},
          {"LOG_BACKUP", closed_map({
                             {"BACKUP", bool_field(false)},
                             {"STORAGE_NAME", string_field("local")},
                             {"FREQUENCY", int_field(1)},
                         })},
      }));

  schema.root.children.emplace_back(
      "DATAREADER",
      closed_map({
          {"DATAREADER", string_field("TabularDatareader")},
          {"CRAWLER", string_field("synthetic_gaussian")},
          {"CRAWLER_ARGS", open_map()},
          {"GENERATOR_ARGS", open_map()},
          {"DATASET_ARGS", open_map()},
      }));

  schema.root.children.emplace_back("TRANSFORMATION",
                                    closed_map({{"ARGS", open_map()}}));
  schema.root.children.emplace_back("TRAIN_TRANSFORMATION",
                                    closed_map({{"ARGS", open_map()}}));

  schema.root.children.emplace_back(
      "MODEL",
      closed_map({
          {"BUILDER", string_field("ednaml_model_builder")},
          {"MODEL_ARCH", required_string_field()},
          {"MODEL_BASE", string_field("")},
          {"MODEL_KWARGS", open_map()},
      }));

  {
    FieldSpec losses_field = scalar_list(FieldKind::String);
    losses_field.default_value =
        make_list({ConfigNode("SoftmaxLogitsLoss")});
    FieldSpec lambda_field = scalar_list(FieldKind::Real);
    lambda_field.default_value = make_list({ConfigNode(1.0)});
    FieldSpec loss_item = closed_map({
        {"LOSSES", std::move(losses_field)},
        {"LAMBDA", std::move(lambda_field)},
        {"LABEL", string_field("")},
    });
    ConfigNode def = make_list({make_map({
        {"LOSSES", make_list({ConfigNode("SoftmaxLogitsLoss")})},
        {"LAMBDA", make_list({ConfigNode(1.0)})},
        {"LABEL", ConfigNode("")},
    })});
    schema.root.children.emplace_back("LOSS",
                                      list_of(std::move(loss_item), def));
  }

  {
    FieldSpec opt_item = closed_map({
        {"OPTIMIZER", string_field("SGD")},
        {"BASE_LR", real_field(0.01)},
    });
    ConfigNode def = make_list({make_map({
        {"OPTIMIZER", ConfigNode("SGD")},
        {"BASE_LR", ConfigNode(0.01)},
    })});
    schema.root.children.emplace_back("OPTIMIZER",
                                      list_of(std::move(opt_item), def));
  }

  schema.root.children.emplace_back(
      "SCHEDULER",
      closed_map({
          {"LR_SCHEDULER", string_field("constant")},
          {"GAMMA", real_field(1.0)},
          {"STEP_SIZE", int_field(1)},
          {"LAMBDA_POLICY", string_field("constant")},
          {"LAMBDA_GAMMA", real_field(1.0)},
      }));

  schema.root.children.emplace_back(
      "DEPLOYMENT",
      closed_map({
          {"DEPLOYMENT", string_field("BaseDeploy")},
          {"MODEL_CHECKPOINT", string_field("")},
          {"PLUGIN_SOURCE", string_field("")},
          {"STREAM_DIR", string_field("")},
          {"POLL_INTERVAL", real_field(0.05)},
          {"QUEUE_CAPACITY", int_field(64)},
          {"OUTPUT_DIR", string_field("")},
      }));

  {
    FieldSpec storage_item = closed_map({
        {"NAME", required_string_field()},
        {"KIND", string_field("local_file")},
        {"ARGS", open_map()},
    });
    schema.root.children.emplace_back(
        "STORAGE", list_of(std::move(storage_item), ConfigNode::list()));
  }

  {
    FieldSpec plugin_item = closed_map({
        {"PLUGIN", required_string_field()},
        {"PLUGIN_ARGS", open_map()},
        {"EPOCHS", int_field(1)},
    });
    schema.root.children.emplace_back(
        "PLUGINS", list_of(std::move(plugin_item), ConfigNode::list()));
  }

  {
    FieldSpec metric_item = closed_map({
        {"METRIC", required_string_field()},
        {"METRIC_NAME", string_field("")},
        {"METRIC_TYPE", string_field("")},
        {"METRIC_ARGS", open_map()},
    });
    schema.root.children.emplace_back(
        "METRICS", list_of(std::move(metric_item), ConfigNode::list()));
  }

  return schema;
}

std::optional<ConfigNode> default_of(const FieldSpec& spec) {
  if (spec.default_value.has_value()) return spec.default_value;
  if (spec.kind == FieldKind::Map && !spec.children.empty()) {
    ConfigNode out = ConfigNode::map();
    for (const auto& [name, child] : spec.children) {
      auto d = default_of(child);
      if (d.has_value()) out.set(name, std::move(*d));
    }
    return out;
  }
  return std::nullopt;
}

void fill_defaults(ConfigNode& doc, const FieldSpec& spec) {
  if (spec.kind == FieldKind::Map && !spec.children.empty() && doc.is_map()) {
    for (const auto& [name, child] : spec.children) {
      ConfigNode* present = doc.find(name);
      if (present == nullptr) {
        auto d = default_of(child);
        if (d.has_value()) doc.set(name, std::move(*d));
      } else {
        fill_defaults(*present, child);
      }
    }
    return;
  }
  if (spec.kind == FieldKind::List && !spec.item.empty() && doc.is_list()) {
    for (ConfigNode& item : doc.as_list()) {
      fill_defaults(item, spec.item.front());
    }
  }
}

struct ValidationContext {
  std::vector<std::string> errors;

  void add(const std::string& path, const std::string& message) {
    errors.push_back(path.empty() ? message : path + ": " + message);
  }
};

void check_no_nulls(const std::string& path, const ConfigNode& node,
                    ValidationContext& ctx) {
  if (node.is_null()) {
    ctx.add(path, "null value is not allowed in an effective config");
    return;
  }
  if (node.is_map()) {
    for (const auto& e : node.as_map()) {
      check_no_nulls(path.empty() ? e.key : path + "." + e.key, e.value, ctx);
    }
  } else if (node.is_list()) {
    const auto& l = node.as_list();
    for (std::size_t i = 0; i < l.size(); ++i) {
      check_no_nulls(path + "[" + std::to_string(i) + "]", l[i], ctx);
    }
  }
}

/// Validates and returns the normalized copy (ints promoted in real fields).
ConfigNode check_node(const std::string& path, const ConfigNode& node,
                      const FieldSpec& spec, ValidationContext& ctx) {
  switch (spec.kind) {
    case FieldKind::Any:
      check_no_nulls(path, node, ctx);
      return node;
    case FieldKind::String:
      if (!node.is_string()) {
        ctx.add(path, "expected string, got " + node.type_name());
      }
      return node;
    case FieldKind::Integer:
      if (!node.is_int()) {
        ctx.add(path, "expected integer, got " + node.type_name());
      }
      return node;
    case FieldKind::Boolean:
      if (!node.is_bool()) {
        ctx.add(path, "expected boolean, got " + node.type_name());
      }
      return node;
    case FieldKind::Real: {
      if (node.is_int()) {
        return ConfigNode(double(node.as_int()));
      }
      if (!node.is_real()) {
        ctx.add(path, "expected real, got " + node.type_name());
        return node;
      }
      if (!std::isfinite(std::get<double>(node.value))) {
        ctx.add(path, "real value must be finite");
      }
      return node;
    }
    case FieldKind::List: {
      if (!node.is_list()) {
        ctx.add(path, "expected list, got " + node.type_name());
        return node;
      }
      if (spec.item.empty()) {
        check_no_nulls(path, node, ctx);
        return node;
      }
      ConfigNode::List out;
      const auto& l = node.as_list();
      for (std::size_t i = 0; i < l.size(); ++i) {
        out.push_back(check_node(path + "[" + std::to_string(i) + "]", l[i],
                                 spec.item.front(), ctx));
      }
      return ConfigNode(std::move(out));
    }
    case FieldKind::Map: {
      if (!node.is_map()) {
        ctx.add(path, "expected map, got " + node.type_name());
        return node;
      }
      if (spec.open || spec.children.empty()) {
        check_no_nulls(path, node, ctx);
        return node;
      }
      ConfigNode out = ConfigNode::map();
      for (const auto& e : node.as_map()) {
        const std::string child_path =
            path.empty() ? e.key : path + "." + e.key;
        const FieldSpec* child = spec.child(e.key);
        if (child == nullptr) {
          ctx.add(child_path, "unknown field");
          continue;
        }
        if (e.value.is_null()) {
          ctx.add(child_path, "null value is not allowed");
          continue;
        }
        out.set(e.key, check_node(child_path, e.value, *child, ctx));
      }
      for (const auto& [name, child] : spec.children) {
        if (child.required && node.find(name) == nullptr) {
          ctx.add(path.empty() ? name : path + "." + name,
                  "missing required field");
        }
      }
      return out;
    }
  }
  return node;
}

bool key_field_ok(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c == '/' || c == '\\' || c == ' ' || c == '\t' || c == '\n' ||
        c == '\r') {
      return false;
    }
  }
  return true;
}

} // namespace

const FieldSpec* FieldSpec::child(const std::string& key) const {
  for (const auto& [name, spec] : children) {
    if (name == key) return &spec;
  }
  return nullptr;
}

ConfigNode SchemaSpec::default_document() const {
  auto d = default_of(root);
  return d.has_value() ? *d : ConfigNode::map();
}

const SchemaSpec& pipeline_schema() {
  static const SchemaSpec schema = build_pipeline_schema();
  return schema;
}

ConfigNode apply_defaults(const ConfigNode& doc, const SchemaSpec& schema) {
  ConfigNode out = doc;
  if (!out.is_map()) {
    throw Error("apply_defaults requires a map document");
  }
  fill_defaults(out, schema.root);
  return out;
}

EffectiveConfig validate(const ConfigNode& doc, const SchemaSpec& schema) {
  if (!doc.is_map()) {
    throw Error("validate requires a map document, got " + doc.type_name());
  }
  ValidationContext ctx;
  ConfigNode normalized = check_node("", doc, schema.root, ctx);
  if (!ctx.errors.empty()) {
    std::ostringstream msg;
    msg << "config validation failed:";
    for (const std::string& e : ctx.errors) {
      msg << "\n  - " << e;
    }
    throw Error(msg.str());
  }
  EffectiveConfig out;
  out.doc = std::move(normalized);
  out.canonical_text = canonical_text(out.doc);
  out.hash = sha256(out.canonical_text);
  return out;
}

std::string ExperimentKey::canonical() const {
  return core_name + "-v" + std::to_string(version) + "-" + backbone + "-" +
         qualifier;
}

ExperimentKey derive_experiment_key(const EffectiveConfig& cfg) {
  const ConfigNode* save = cfg.doc.find("SAVE");
  if (save == nullptr || !save->is_map()) {
    throw Error("derive_experiment_key: SAVE section missing");
  }
  auto read_string = [&](const char* field) -> std::string {
    const ConfigNode* n = save->find(field);
    if (n == nullptr || !n->is_string()) {
      throw Error(std::string("derive_experiment_key: SAVE.") + field +
                  " missing or not a string");
    }
    if (!key_field_ok(n->as_string())) {
      throw Error(std::string("derive_experiment_key: SAVE.") + field +
                  " must be non-empty without path separators or whitespace" +
                  " (got \"" + n->as_string() + "\")");
    }
    return n->as_string();
  };
  ExperimentKey key;
  key.core_name = read_string("MODEL_CORE_NAME");
  key.backbone = read_string("MODEL_BACKBONE");
  key.qualifier = read_string("MODEL_QUALIFIER");
  const ConfigNode* version = save->find("MODEL_VERSION");
  if (version == nullptr || !version->is_int()) {
    throw Error("derive_experiment_key: SAVE.MODEL_VERSION missing or not an "
                "integer");
  }
  if (version->as_int() < 1) {
    throw Error("derive_experiment_key: SAVE.MODEL_VERSION must be >= 1");
  }
  key.version = version->as_int();
  return key;
}

} // namespace edna::config
