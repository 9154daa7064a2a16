#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfw/corpus.hpp"
#include "tfw/schema.hpp"

namespace tfw {

enum class Strategy { kBaselineIclIl, kTfw, kTfwExtra };

/// "BASELINE_ICL_IL", "TFW", "TFW_EXTRA".
std::string_view to_string(Strategy strategy);

/// Row label used in reports: "ICL+IL", "TFW", "TFW Extra".
std::string_view display_name(Strategy strategy);

/// Accepts the enum spelling, the display name, or lowercase/kebab variants.
Strategy parse_strategy(std::string_view name);

/// Only TFW asks the model for pairs, so only TFW has LS and Total scores.
inline bool scores_pairs(Strategy strategy) { return strategy == Strategy::kTfw; }

/// Prompt wording. Fields a strategy does not use may be left empty.
///
///   question_stage1  {word_label_list} {pair_example}   (TFW)
///   question_stage2  {text_label_list}                  (all)
///   answer_format    {pairs_line} {text_label}          (TFW)
///   extra_injection  {gold_pairs}                       (TFW Extra)
struct PromptTemplate {
  std::string question_stage1;
  std::string question_stage2;
  std::string answer_format;
  std::string extra_injection;
  std::string list_separator = ", ";
  /// Overrides the schema's example pair in {pair_example}.
  std::optional<std::string> pair_example;

  /// Checks that every field the strategy needs is present and holds each of
  /// its placeholders exactly once. Throws ConfigError.
  void validate(Strategy strategy) const;

  std::string hash() const;

  static PromptTemplate from_yaml(std::string_view yaml);
};

/// Resolves templates by language, task and strategy. Lookup order:
/// `<root>/<lang>/<task>/<strategy>.yaml`, then `<root>/<lang>/<strategy>.yaml`,
/// where task and strategy are lowercase ids. Without a root the built-in set
/// (templates/ embedded at build time) is used.
class TemplateLibrary {
public:
  TemplateLibrary() = default;
  explicit TemplateLibrary(std::filesystem::path root) : root_(std::move(root)) {}

  PromptTemplate load(std::string_view language, TaskId task, Strategy strategy) const;

private:
  std::optional<std::filesystem::path> root_;
};

/// Replaces `{name}` occurrences with values. A `{identifier}` without a value
/// throws RenderError naming it; braces not enclosing an identifier are kept.
std::string fill_placeholders(std::string_view tmpl, const std::map<std::string, std::string>& values,
                              std::string_view where = {});

/// `:<label>;<span>` for each pair, concatenated in order.
std::string render_pairs(std::span<const LabelSpanPair> pairs);

enum class BlockKind { kExemplarText, kQuestion, kExemplarAnswer, kTargetText };

struct PromptBlock {
  BlockKind kind;
  std::string text;

  bool operator==(const PromptBlock&) const = default;
};

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

enum class ChatLayout {
  kSingleUser,  ///< whole rendered prompt as one user message
  kTurns,       ///< exemplars as prior user/assistant turns
};

ChatLayout parse_chat_layout(std::string_view name);

struct PromptOptions {
  std::string separator = "\n\n";
};

struct PromptBundle {
  std::vector<PromptBlock> parts;
  Strategy strategy = Strategy::kTfw;
  std::string sample_id;
  std::string separator;
  std::string rendered;

  std::vector<ChatMessage> messages(ChatLayout layout) const;
};

/// The question block for one sample. Under TFW Extra the sample's own gold
/// pairs are injected, so exemplar and target questions differ only there.
std::string render_question(Strategy strategy, const PromptTemplate& tmpl, const TaskSchema& schema,
                            const MixedSample& sample);

/// Gold answer used in exemplar answer blocks: pairs line then label for TFW,
/// the label alone otherwise.
std::string expected_answer(Strategy strategy, const PromptTemplate& tmpl, const MixedSample& sample);

/// Assembles (text, question, answer) x icl_shots, then target text and
/// question: 3 * icl_shots + 2 blocks.
PromptBundle build_prompt(Strategy strategy, const PromptTemplate& tmpl, const TaskSchema& schema,
                          std::span<const MixedSample> exemplars, const MixedSample& target,
                          const PromptOptions& options = {});

}  // namespace tfw
