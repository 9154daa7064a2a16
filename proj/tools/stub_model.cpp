#include "stub_model.hpp"

#include <string_view>

#include <json.hpp>

#include "tfw/hash.hpp"
#include "tfw/prng.hpp"
#include "tfw/promptgen.hpp"

namespace tfw::stub {

namespace {

struct Located {
  const TaskSchema* schema = nullptr;
  const MixedSample* target = nullptr;
  std::vector<const MixedSample*> exemplars;
};

std::vector<std::string_view> split_blocks(std::string_view prompt) {
  std::vector<std::string_view> blocks;
  std::size_t start = 0;
  while (start <= prompt.size()) {
    const auto end = prompt.find("\n\n", start);
    blocks.push_back(prompt.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (end == std::string_view::npos) break;
    start = end + 2;
  }
  return blocks;
}

// Sample texts are matched against whole blocks; fixture texts are often
// substrings of one another.
Located locate(const std::vector<std::pair<TaskSchema, std::vector<MixedSample>>>& corpora, const std::string& prompt) {
  const auto blocks = split_blocks(prompt);
  Located best;
  std::size_t best_block = 0;
  for (const auto& [schema, samples] : corpora) {
    std::vector<std::pair<std::size_t, const MixedSample*>> found;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (const auto& sample : samples) {
        if (blocks[b] == sample.text) {
          found.emplace_back(b, &sample);
          break;
        }
      }
    }
    if (found.empty()) continue;
    if (!best.target || found.back().first > best_block) {
      best = {};
      best.schema = &schema;
      best.target = found.back().second;
      best_block = found.back().first;
      for (std::size_t i = 0; i + 1 < found.size(); ++i) best.exemplars.push_back(found[i].second);
    }
  }
  return best;
}

}  // namespace

SimulatedModel::SimulatedModel(std::vector<std::pair<TaskSchema, std::vector<MixedSample>>> corpora, Options options)
    : corpora_(std::move(corpora)), options_(options) {}

std::string SimulatedModel::answer(const ChatRequest& request) const {
  std::string prompt;
  for (const auto& message : request.messages) prompt += message.content + "\n\n";
  const Located located = locate(corpora_, prompt);
  if (!located.target) return "I am not sure what you are asking.";

  const std::string digest = sha256_hex(prompt + "#" + std::to_string(request.seed.value_or(0)));
  SplitMix64 rng(std::stoull(digest.substr(0, 16), nullptr, 16));
  auto chance = [&](double p) { return static_cast<double>(rng.below(1'000'000)) < p * 1'000'000.0; };

  bool tfw_layout = false;
  for (const auto* exemplar : located.exemplars) {
    if (prompt.find(render_pairs(exemplar->gold_pairs) + "\n" + exemplar->text_label) != std::string::npos) {
      tfw_layout = true;
    }
  }

  const TaskSchema& schema = *located.schema;
  const MixedSample& target = *located.target;
  std::string label = target.text_label;
  if (chance(options_.error_rate) && schema.text_labels.size() > 1) {
    std::vector<std::string> others;
    for (const auto& candidate : schema.text_labels) {
      if (candidate != label) others.push_back(candidate);
    }
    label = others[rng.below(others.size())];
  }

  std::string out;
  if (options_.chatter && chance(0.25)) out += "Sure, here is my answer.\n";
  if (tfw_layout) {
    std::vector<LabelSpanPair> pairs;
    for (const auto& pair : target.gold_pairs) {
      if (!chance(options_.error_rate)) pairs.push_back(pair);
    }
    if (chance(options_.error_rate / 2)) {
      pairs.push_back({schema.word_labels[rng.below(schema.word_labels.size())], "something"});
    }
    out += render_pairs(pairs) + "\n";
  }
  out += label;
  if (options_.chatter && chance(0.1)) out += "\nI hope this helps.";
  return out;
}

std::string chat_response_body(const std::string& content) {
  const nlohmann::json body = {
      {"id", "chatcmpl-stub"},
      {"object", "chat.completion"},
      {"choices",
       {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}, {"finish_reason", "stop"}}}}};
  return body.dump();
}

}  // namespace tfw::stub
