#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unordered_map>

#include "tfw/backend.hpp"
#include "tfw/corpus.hpp"
#include "tfw/prng.hpp"
#include "tfw/promptgen.hpp"
#include "tfw/schema.hpp"

namespace tfw::testing {

inline std::filesystem::path data_dir() { return TFW_TEST_DATA; }

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tfw-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Span alphabet for generated pairs: ASCII words, Japanese, digits and
/// punctuation other than the pair delimiters.
inline std::string random_span(SplitMix64& rng) {
  static const std::vector<std::string> pieces = {
      "Tanaka", "delicious", "router", "見", "美味しい", "東京", "7", "34", "news", "a",
      "-",      "'",         "(x)",    ",", ".",         "!",    "é", "ü",  "IT",   "neutral"};
  std::string span;
  const auto parts = 1 + rng.below(4);
  for (std::uint64_t i = 0; i < parts; ++i) {
    if (i && rng.below(2)) span += rng.below(3) ? " " : "　";
    span += pieces[rng.below(pieces.size())];
  }
  // Keep the field free of surrounding whitespace.
  while (!span.empty() && span.back() == ' ') span.pop_back();
  return span;
}

inline std::vector<LabelSpanPair> random_pairs(SplitMix64& rng, const TaskSchema& schema, std::size_t max_pairs = 6) {
  std::vector<LabelSpanPair> pairs;
  const auto n = 1 + rng.below(max_pairs);
  for (std::uint64_t i = 0; i < n; ++i) {
    pairs.push_back({schema.word_labels[rng.below(schema.word_labels.size())], random_span(rng)});
  }
  return pairs;
}

/// Answers each request with expected_answer() for the target sample, found as
/// the last prompt block equal to a corpus text.
class ExpectedAnswerModel {
public:
  ExpectedAnswerModel(Strategy strategy, PromptTemplate tmpl, std::vector<MixedSample> samples, std::string separator = "\n\n")
      : strategy_(strategy), tmpl_(std::move(tmpl)), samples_(std::move(samples)), separator_(std::move(separator)) {
    for (const auto& sample : samples_) by_text_.emplace(sample.text, &sample);
  }

  std::string operator()(const ChatRequest& request) const {
    std::string prompt;
    for (const auto& message : request.messages) prompt += message.content + separator_;
    const MixedSample* target = nullptr;
    std::size_t start = 0;
    while (start < prompt.size()) {
      auto end = prompt.find(separator_, start);
      if (end == std::string::npos) end = prompt.size();
      if (auto it = by_text_.find(prompt.substr(start, end - start)); it != by_text_.end()) target = it->second;
      start = end + separator_.size();
    }
    if (!target) return "unknown";
    return expected_answer(strategy_, tmpl_, *target);
  }

private:
  Strategy strategy_;
  PromptTemplate tmpl_;
  std::vector<MixedSample> samples_;
  std::string separator_;
  std::unordered_map<std::string, const MixedSample*> by_text_;
};

}  // namespace tfw::testing
