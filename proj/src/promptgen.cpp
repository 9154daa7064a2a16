#include "tfw/promptgen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "resources.hpp"
#include "tfw/error.hpp"
#include "tfw/hash.hpp"
#include "tfw/text.hpp"

namespace tfw {

namespace {

constexpr std::array<std::string_view, 3> kStrategyIds = {"BASELINE_ICL_IL", "TFW", "TFW_EXTRA"};
constexpr std::array<std::string_view, 3> kStrategyNames = {"ICL+IL", "TFW", "TFW Extra"};

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_identifier_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_identifier_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) {
    ++count;
  }
  return count;
}

std::string join(const std::vector<std::string>& items, std::string_view separator) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += separator;
    out += items[i];
  }
  return out;
}

std::string fill_stage2(const PromptTemplate& tmpl, const TaskSchema& schema) {
  return fill_placeholders(tmpl.question_stage2,
                           {{"text_label_list", join(schema.text_labels, tmpl.list_separator)}},
                           "question_stage2");
}

}  // namespace

std::string_view to_string(Strategy strategy) { return kStrategyIds[static_cast<std::size_t>(strategy)]; }

std::string_view display_name(Strategy strategy) { return kStrategyNames[static_cast<std::size_t>(strategy)]; }

Strategy parse_strategy(std::string_view name) {
  std::string key = lowercase(name);
  std::replace(key.begin(), key.end(), '-', '_');
  std::replace(key.begin(), key.end(), ' ', '_');
  if (key == "baseline_icl_il" || key == "baseline" || key == "icl+il" || key == "icl_il") {
    return Strategy::kBaselineIclIl;
  }
  if (key == "tfw") return Strategy::kTfw;
  if (key == "tfw_extra") return Strategy::kTfwExtra;
  throw ConfigError("unknown strategy '" + std::string(name) + "'");
}

ChatLayout parse_chat_layout(std::string_view name) {
  const std::string key = lowercase(name);
  if (key == "single" || key == "single_user") return ChatLayout::kSingleUser;
  if (key == "turns") return ChatLayout::kTurns;
  throw ConfigError("unknown chat layout '" + std::string(name) + "'");
}

std::string fill_placeholders(std::string_view tmpl, const std::map<std::string, std::string>& values,
                              std::string_view where) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{' && i + 1 < tmpl.size() && is_identifier_start(tmpl[i + 1])) {
      std::size_t end = i + 2;
      while (end < tmpl.size() && is_identifier_char(tmpl[end])) ++end;
      if (end < tmpl.size() && tmpl[end] == '}') {
        const std::string name(tmpl.substr(i + 1, end - i - 1));
        const auto it = values.find(name);
        if (it == values.end()) throw RenderError(name, std::string(where));
        out += it->second;
        i = end + 1;
        continue;
      }
    }
    out += tmpl[i++];
  }
  return out;
}

std::string render_pairs(std::span<const LabelSpanPair> pairs) {
  std::string out;
  for (const auto& pair : pairs) {
    out += ':';
    out += pair.label;
    out += ';';
    out += pair.span;
  }
  return out;
}

void PromptTemplate::validate(Strategy strategy) const {
  auto require = [](const std::string& field, std::string_view field_name,
                    std::initializer_list<std::string_view> placeholders) {
    if (text::trim(field).empty()) {
      throw ConfigError("template field '" + std::string(field_name) + "' is required");
    }
    for (auto placeholder : placeholders) {
      const std::string token = "{" + std::string(placeholder) + "}";
      const std::size_t count = count_occurrences(field, token);
      if (count != 1) {
        throw ConfigError("template field '" + std::string(field_name) + "' must contain " + token +
                          " exactly once (found " + std::to_string(count) + ")");
      }
    }
  };
  require(question_stage2, "question_stage2", {"text_label_list"});
  switch (strategy) {
    case Strategy::kBaselineIclIl:
      break;
    case Strategy::kTfw:
      require(question_stage1, "question_stage1", {"word_label_list", "pair_example"});
      require(answer_format, "answer_format", {"pairs_line", "text_label"});
      break;
    case Strategy::kTfwExtra:
      require(extra_injection, "extra_injection", {"gold_pairs"});
      break;
  }
}

std::string PromptTemplate::hash() const {
  const nlohmann::json object = {{"question_stage1", question_stage1},
                                 {"question_stage2", question_stage2},
                                 {"answer_format", answer_format},
                                 {"extra_injection", extra_injection},
                                 {"list_separator", list_separator},
                                 {"pair_example", pair_example ? nlohmann::json(*pair_example) : nlohmann::json()}};
  return sha256_hex(object.dump());
}

PromptTemplate PromptTemplate::from_yaml(std::string_view yaml) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(yaml));
  } catch (const YAML::Exception& e) {
    throw ParseError("template: " + std::string(e.what()), e.mark.line + 1);
  }
  if (!root.IsMap()) throw ConfigError("template must be a key/value document");
  PromptTemplate tmpl;
  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    const auto value = entry.second.as<std::string>();
    if (key == "question_stage1") {
      tmpl.question_stage1 = value;
    } else if (key == "question_stage2") {
      tmpl.question_stage2 = value;
    } else if (key == "answer_format") {
      tmpl.answer_format = value;
    } else if (key == "extra_injection") {
      tmpl.extra_injection = value;
    } else if (key == "list_separator") {
      tmpl.list_separator = value;
    } else if (key == "pair_example") {
      tmpl.pair_example = value;
    } else {
      throw ConfigError("template: unknown key '" + key + "'");
    }
  }
  return tmpl;
}

PromptTemplate TemplateLibrary::load(std::string_view language, TaskId task, Strategy strategy) const {
  const std::string lang(language);
  const std::string file = lowercase(to_string(strategy)) + ".yaml";
  const std::vector<std::string> candidates = {lang + "/" + lowercase(to_string(task)) + "/" + file,
                                               lang + "/" + file};
  for (const auto& relative : candidates) {
    std::optional<std::string> body;
    if (root_) {
      std::ifstream in(*root_ / relative);
      if (in) {
        std::stringstream buffer;
        buffer << in.rdbuf();
        body = buffer.str();
      }
    } else if (auto embedded = resources::template_file(relative)) {
      body = std::string(*embedded);
    }
    if (!body) continue;
    PromptTemplate tmpl;
    try {
      tmpl = PromptTemplate::from_yaml(*body);
      tmpl.validate(strategy);
    } catch (const Error& e) {
      throw ConfigError(relative + ": " + e.what());
    }
    return tmpl;
  }
  throw ConfigError("no template for language '" + lang + "', task " + std::string(to_string(task)) +
                    ", strategy " + std::string(to_string(strategy)));
}

std::string render_question(Strategy strategy, const PromptTemplate& tmpl, const TaskSchema& schema,
                            const MixedSample& sample) {
  switch (strategy) {
    case Strategy::kBaselineIclIl:
      return fill_stage2(tmpl, schema);
    case Strategy::kTfw: {
      const LabelSpanPair example[] = {schema.example_pair};
      const std::string stage1 = fill_placeholders(
          tmpl.question_stage1,
          {{"word_label_list", join(schema.word_labels, tmpl.list_separator)},
           {"pair_example", tmpl.pair_example ? *tmpl.pair_example : render_pairs(example)}},
          "question_stage1");
      return stage1 + "\n" + fill_stage2(tmpl, schema);
    }
    case Strategy::kTfwExtra: {
      const std::string injection =
          fill_placeholders(tmpl.extra_injection, {{"gold_pairs", render_pairs(sample.gold_pairs)}}, "extra_injection");
      return injection + "\n" + fill_stage2(tmpl, schema);
    }
  }
  return {};
}

std::string expected_answer(Strategy strategy, const PromptTemplate& tmpl, const MixedSample& sample) {
  if (strategy != Strategy::kTfw) return sample.text_label;
  return fill_placeholders(tmpl.answer_format,
                           {{"pairs_line", render_pairs(sample.gold_pairs)}, {"text_label", sample.text_label}},
                           "answer_format");
}

PromptBundle build_prompt(Strategy strategy, const PromptTemplate& tmpl, const TaskSchema& schema,
                          std::span<const MixedSample> exemplars, const MixedSample& target,
                          const PromptOptions& options) {
  if (exemplars.size() != static_cast<std::size_t>(schema.icl_shots)) {
    throw Error("build_prompt: " + std::string(to_string(schema.task)) + " needs " +
                std::to_string(schema.icl_shots) + " exemplar(s), got " + std::to_string(exemplars.size()));
  }
  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.sample_id = target.id;
  bundle.separator = options.separator;
  for (const auto& exemplar : exemplars) {
    if (exemplar.id == target.id) throw Error("build_prompt: target '" + target.id + "' is also an exemplar");
    bundle.parts.push_back({BlockKind::kExemplarText, exemplar.text});
    bundle.parts.push_back({BlockKind::kQuestion, render_question(strategy, tmpl, schema, exemplar)});
    bundle.parts.push_back({BlockKind::kExemplarAnswer, expected_answer(strategy, tmpl, exemplar)});
  }
  bundle.parts.push_back({BlockKind::kTargetText, target.text});
  bundle.parts.push_back({BlockKind::kQuestion, render_question(strategy, tmpl, schema, target)});

  for (std::size_t i = 0; i < bundle.parts.size(); ++i) {
    if (i) bundle.rendered += bundle.separator;
    bundle.rendered += bundle.parts[i].text;
  }
  return bundle;
}

std::vector<ChatMessage> PromptBundle::messages(ChatLayout layout) const {
  if (layout == ChatLayout::kSingleUser) return {{"user", rendered}};
  std::vector<ChatMessage> out;
  std::string pending;
  for (const auto& part : parts) {
    if (part.kind == BlockKind::kExemplarAnswer) {
      out.push_back({"user", pending});
      out.push_back({"assistant", part.text});
      pending.clear();
      continue;
    }
    if (!pending.empty()) pending += separator;
    pending += part.text;
  }
  out.push_back({"user", pending});
  return out;
}

}  // namespace tfw
