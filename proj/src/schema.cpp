#include "tfw/schema.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "resources.hpp"
#include "tfw/error.hpp"
#include "tfw/text.hpp"

namespace tfw {

namespace {

constexpr std::array<std::string_view, 6> kTaskNames = {"SCNM",      "SCPOS_RW",    "SCPOS_N",
                                                        "SCPOS_ADJ", "SCPOS_N_ADJ", "TCREE"};

// ASCII delimiters plus their full-width forms, which the parser also accepts.
constexpr std::array<std::string_view, 4> kDelimiters = {":", ";", "\xEF\xBC\x9A", "\xEF\xBC\x9B"};

std::optional<std::string> find_label(const std::vector<std::string>& labels, std::string_view label) {
  const std::string normalized = text::normalize(label);
  for (const auto& candidate : labels) {
    if (candidate == normalized) return candidate;
  }
  for (const auto& candidate : labels) {
    if (text::labels_equal(candidate, normalized)) return candidate;
  }
  return std::nullopt;
}

std::vector<std::string> read_labels(const YAML::Node& node, std::string_view field, std::string_view task) {
  if (!node || !node.IsSequence()) {
    throw ConfigError("schema " + std::string(task) + ": '" + std::string(field) + "' must be a list");
  }
  std::vector<std::string> labels;
  for (const auto& item : node) labels.push_back(text::normalize(item.as<std::string>()));
  return labels;
}

}  // namespace

bool is_valid_pair_field(std::string_view field) {
  if (field.empty() || text::trim(field).size() != field.size()) return false;
  for (auto delimiter : kDelimiters) {
    if (field.find(delimiter) != std::string_view::npos) return false;
  }
  return field.find_first_of("\r\n") == std::string_view::npos;
}

std::string_view to_string(TaskId task) { return kTaskNames[static_cast<std::size_t>(task)]; }

TaskId parse_task_id(std::string_view name) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (text::iequals(kTaskNames[i], name)) return static_cast<TaskId>(i);
  }
  throw ConfigError("unknown task id '" + std::string(name) + "'");
}

std::optional<std::string> TaskSchema::canonical_text_label(std::string_view label) const {
  return find_label(text_labels, label);
}

std::optional<std::string> TaskSchema::canonical_word_label(std::string_view label) const {
  return find_label(word_labels, label);
}

void TaskSchema::validate() const {
  const std::string name(to_string(task));
  auto check_set = [&](const std::vector<std::string>& labels, std::string_view field) {
    if (labels.empty()) throw ConfigError("schema " + name + ": " + std::string(field) + " is empty");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (!is_valid_pair_field(labels[i])) {
        throw ConfigError("schema " + name + ": invalid label '" + labels[i] + "'");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (text::labels_equal(labels[i], labels[j])) {
          throw ConfigError("schema " + name + ": duplicate label '" + labels[i] + "' in " + std::string(field));
        }
      }
    }
  };
  check_set(text_labels, "text_labels");
  check_set(word_labels, "word_labels");
  const int expected_shots = task == TaskId::kTcree ? 2 : 1;
  if (icl_shots != expected_shots) {
    throw ConfigError("schema " + name + ": icl_shots must be " + std::to_string(expected_shots));
  }
  if (!canonical_word_label(example_pair.label) || !is_valid_pair_field(example_pair.span)) {
    throw ConfigError("schema " + name + ": invalid example_pair");
  }
}

const SchemaRegistry& SchemaRegistry::builtin() {
  static const SchemaRegistry registry = from_yaml(resources::schemas_yaml());
  return registry;
}

SchemaRegistry SchemaRegistry::from_yaml(std::string_view yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ParseError("schema registry: " + std::string(e.what()), e.mark.line + 1);
  }
  const YAML::Node tasks = root["tasks"];
  if (!tasks || !tasks.IsSequence()) throw ConfigError("schema registry: missing 'tasks' list");

  SchemaRegistry registry;
  std::set<TaskId> seen;
  try {
    for (const auto& node : tasks) {
      TaskSchema schema;
      schema.task = parse_task_id(node["id"].as<std::string>());
      const std::string name(to_string(schema.task));
      schema.display_name = node["display_name"] ? node["display_name"].as<std::string>() : name;
      schema.text_labels = read_labels(node["text_labels"], "text_labels", name);
      schema.word_labels = read_labels(node["word_labels"], "word_labels", name);
      schema.icl_shots = node["icl_shots"] ? node["icl_shots"].as<int>() : 1;
      if (const YAML::Node example = node["example_pair"]) {
        schema.example_pair = {text::normalize(example["label"].as<std::string>()),
                               text::normalize(example["span"].as<std::string>())};
      } else {
        schema.example_pair = {schema.word_labels.front(), "example"};
      }
      schema.validate();
      if (!seen.insert(schema.task).second) throw ConfigError("schema registry: duplicate task " + name);
      registry.schemas_.push_back(std::move(schema));
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError("schema registry: " + std::string(e.what()));
  }
  return registry;
}

SchemaRegistry SchemaRegistry::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open schema registry " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_yaml(buffer.str());
}

const TaskSchema& SchemaRegistry::get(TaskId task) const {
  const auto it = std::find_if(schemas_.begin(), schemas_.end(), [&](const auto& s) { return s.task == task; });
  if (it == schemas_.end()) throw ConfigError("schema registry has no task " + std::string(to_string(task)));
  return *it;
}

}  // namespace tfw
