#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tfw {

/// Word-level annotation, written `:<label>;<span>` on the wire.
struct LabelSpanPair {
  std::string label;
  std::string span;

  auto operator<=>(const LabelSpanPair&) const = default;
};

/// True when `field` can appear as a pair label or span: non-empty, no
/// delimiter (`:` `;` and their full-width forms), no line break, and no
/// surrounding whitespace.
bool is_valid_pair_field(std::string_view field);

enum class TaskId { kScnm, kScposRw, kScposN, kScposAdj, kScposNAdj, kTcree };

std::string_view to_string(TaskId task);

/// Accepts the registry ids (SCNM, SCPOS_RW, ...) case-insensitively.
TaskId parse_task_id(std::string_view name);

struct TaskSchema {
  TaskId task = TaskId::kScnm;
  std::string display_name;
  std::vector<std::string> text_labels;
  std::vector<std::string> word_labels;
  int icl_shots = 1;
  LabelSpanPair example_pair;

  /// Schema spelling of a text label, matched under the label policy.
  std::optional<std::string> canonical_text_label(std::string_view label) const;
  std::optional<std::string> canonical_word_label(std::string_view label) const;

  /// Throws ConfigError if the schema breaks its invariants.
  void validate() const;
};

class SchemaRegistry {
public:
  /// The registry compiled into the library from config/schemas.yaml.
  static const SchemaRegistry& builtin();

  static SchemaRegistry from_yaml(std::string_view yaml);
  static SchemaRegistry from_file(const std::filesystem::path& path);

  const TaskSchema& get(TaskId task) const;
  const std::vector<TaskSchema>& all() const noexcept { return schemas_; }

private:
  std::vector<TaskSchema> schemas_;
};

}  // namespace tfw
