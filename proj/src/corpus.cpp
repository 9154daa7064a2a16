#include "tfw/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "tfw/error.hpp"
#include "tfw/hash.hpp"
#include "tfw/prng.hpp"
#include "tfw/text.hpp"

namespace tfw {

using nlohmann::json;

void warn_to_stderr(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

namespace {

const std::set<std::string, std::less<>> kKnownFields = {"id", "text", "text_label", "pairs"};

std::string require_string(const json& object, const char* field, std::size_t line) {
  const auto it = object.find(field);
  if (it == object.end()) throw ParseError(std::string("missing field '") + field + "'", line);
  if (!it->is_string()) throw ParseError(std::string("field '") + field + "' must be a string", line);
  return it->get<std::string>();
}

MixedSample sample_from_json(const json& object, const TaskSchema& schema, std::size_t line) {
  if (!object.is_object()) throw ParseError("expected a JSON object", line);
  MixedSample sample;
  sample.id = require_string(object, "id", line);
  sample.text = text::nfc(require_string(object, "text", line));
  sample.text_label = text::normalize(require_string(object, "text_label", line));
  sample.task = schema.task;

  const auto pairs = object.find("pairs");
  if (pairs == object.end()) throw ParseError("missing field 'pairs'", line);
  if (!pairs->is_array()) throw ParseError("field 'pairs' must be an array", line);
  for (const auto& pair : *pairs) {
    if (!pair.is_object() || !pair.contains("label") || !pair.contains("span") || !pair["label"].is_string() ||
        !pair["span"].is_string()) {
      throw ParseError("each pair must be an object with string 'label' and 'span'", line);
    }
    sample.gold_pairs.push_back(
        {text::normalize(pair["label"].get<std::string>()), text::normalize(pair["span"].get<std::string>())});
  }

  if (auto canonical = schema.canonical_text_label(sample.text_label)) sample.text_label = *canonical;
  for (auto& pair : sample.gold_pairs) {
    if (auto canonical = schema.canonical_word_label(pair.label)) pair.label = *canonical;
  }
  validate_sample(sample, schema);
  return sample;
}

}  // namespace

void validate_sample(const MixedSample& sample, const TaskSchema& schema) {
  const std::string task(to_string(schema.task));
  if (sample.id.empty()) throw ValidationError(sample.id, "empty id");
  if (text::trim(sample.text).empty()) throw ValidationError(sample.id, "empty text");
  if (std::find(schema.text_labels.begin(), schema.text_labels.end(), sample.text_label) ==
      schema.text_labels.end()) {
    throw ValidationError(sample.id, "text_label '" + sample.text_label + "' is not a " + task + " text label");
  }
  for (const auto& pair : sample.gold_pairs) {
    if (std::find(schema.word_labels.begin(), schema.word_labels.end(), pair.label) == schema.word_labels.end()) {
      throw ValidationError(sample.id, "pair label '" + pair.label + "' is not a " + task + " word label");
    }
    if (!is_valid_pair_field(pair.span)) {
      throw ValidationError(sample.id, "invalid span '" + pair.span + "'");
    }
  }
}

std::vector<MixedSample> read_corpus(std::istream& in, const TaskSchema& schema, const WarningSink& warn) {
  std::vector<MixedSample> samples;
  std::unordered_set<std::string> ids;
  std::set<std::string> warned;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;

    json object;
    try {
      object = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line_number);
    }
    MixedSample sample = sample_from_json(object, schema, line_number);
    if (warn) {
      for (const auto& [key, value] : object.items()) {
        if (!kKnownFields.contains(key) && warned.insert(key).second) {
          warn("line " + std::to_string(line_number) + ": ignoring unknown field '" + key + "'");
        }
      }
    }
    if (!ids.insert(sample.id).second) throw ValidationError(sample.id, "duplicate id");
    samples.push_back(std::move(sample));
  }
  return samples;
}

std::vector<MixedSample> load_corpus(const std::filesystem::path& path, const TaskSchema& schema,
                                     const WarningSink& warn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open corpus " + path.string());
  return read_corpus(in, schema, warn);
}

std::string to_jsonl_line(const MixedSample& sample) {
  json pairs = json::array();
  for (const auto& pair : sample.gold_pairs) pairs.push_back({{"label", pair.label}, {"span", pair.span}});
  const json object = {{"id", sample.id}, {"text", sample.text}, {"text_label", sample.text_label}, {"pairs", pairs}};
  return object.dump();
}

void write_corpus(std::ostream& out, std::span<const MixedSample> samples) {
  for (const auto& sample : samples) out << to_jsonl_line(sample) << '\n';
}

std::string SamplePlan::to_json() const {
  const json object = {{"seed", seed},
                       {"sample_count", sample_count},
                       {"exemplar_ids", exemplar_ids},
                       {"drawn_ids", drawn_ids}};
  return object.dump();
}

std::string SamplePlan::fingerprint() const { return sha256_hex(to_json()); }

SamplePlan draw_plan(std::span<const MixedSample> corpus, const TaskSchema& schema, std::uint64_t seed,
                     std::size_t count, std::span<const std::string> exemplar_override) {
  if (count == 0) throw Error("draw_plan: sample count must be positive");
  const auto shots = static_cast<std::size_t>(schema.icl_shots);
  if (corpus.size() <= shots) {
    throw Error("draw_plan: corpus of " + std::to_string(corpus.size()) + " samples is too small for " +
                std::to_string(shots) + " exemplar(s) plus a test sample");
  }

  std::unordered_map<std::string_view, std::size_t> index_of;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!index_of.emplace(corpus[i].id, i).second) throw ValidationError(corpus[i].id, "duplicate id");
  }

  SamplePlan plan;
  plan.seed = seed;
  SplitMix64 rng(seed);
  std::vector<std::size_t> pool;

  if (!exemplar_override.empty()) {
    if (exemplar_override.size() != shots) {
      throw Error("draw_plan: expected " + std::to_string(shots) + " exemplar id(s), got " +
                  std::to_string(exemplar_override.size()));
    }
    std::set<std::size_t> excluded;
    for (const auto& id : exemplar_override) {
      const auto it = index_of.find(id);
      if (it == index_of.end()) throw Error("draw_plan: unknown exemplar id '" + id + "'");
      if (!excluded.insert(it->second).second) throw Error("draw_plan: exemplar id '" + id + "' repeated");
      plan.exemplar_ids.push_back(id);
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      if (!excluded.contains(i)) pool.push_back(i);
    }
  } else {
    pool.resize(corpus.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < shots; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
      std::swap(pool[i], pool[j]);
      plan.exemplar_ids.push_back(corpus[pool[i]].id);
    }
    pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(shots));
  }

  const std::size_t take = std::min(count, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
    plan.drawn_ids.push_back(corpus[pool[i]].id);
  }
  plan.sample_count = take;
  return plan;
}

namespace {

// Span vocabulary for fixture generation, keyed by word label.
const std::map<std::string, std::vector<std::string>, std::less<>>& fixture_vocabulary() {
  static const std::map<std::string, std::vector<std::string>, std::less<>> vocabulary = {
      {"positive", {"delicious", "wonderful", "cheerful", "elegant", "fresh", "generous", "brilliant", "cozy"}},
      {"negative", {"bland", "rude", "noisy", "stale", "gloomy", "clumsy", "greasy", "cramped"}},
      {"neutral", {"table", "station", "menu", "morning", "window", "street", "notebook", "umbrella"}},
      {"people", {"Tanaka", "Suzuki", "Yamamoto", "Watanabe", "Nakamura", "Kobayashi"}},
      {"corporations", {"Toyota", "Panasonic", "Hitachi", "Nintendo", "Rakuten", "Fujitsu"}},
      {"political organizations", {"Cabinet Office", "Ministry of Finance", "Osaka Assembly", "Komeito"}},
      {"other organizations", {"Red Cross", "Tokyo University", "Kyoto Museum", "Rotary Club"}},
      {"places", {"Osaka", "Kyoto", "Sapporo", "Okinawa", "Nagoya", "Fukuoka"}},
      {"facilities", {"Narita Airport", "Tokyo Dome", "Skytree", "Budokan"}},
      {"products", {"PlayStation", "Walkman", "Prius", "Cup Noodle"}},
      {"events", {"Gion Matsuri", "Tanabata", "Expo", "Snow Festival"}},
      {"affiliation", {"Yomiuri Giants", "Gamba Osaka", "Toho Studio"}},
      {"occupation", {"pitcher", "engineer", "actress", "announcer"}},
      {"starring", {"Ken Watanabe", "Rinko Kikuchi", "Sakura Ando"}},
      {"director", {"Kurosawa", "Kitano", "Koreeda"}},
      {"age", {"34 years old", "27 years old", "61 years old"}},
      {"product", {"smartphone", "tablet", "router"}},
      {"goods", {"towel", "mug", "calendar"}},
      {"performances", {"concert", "stage play", "recital"}},
      {"wins", {"championship", "gold medal", "title match"}},
      {"broadcasts", {"evening news", "NHK special", "radio hour"}},
      {"public appearances", {"press conference", "talk show", "fan meeting"}},
      {"launches", {"release event", "product launch", "grand opening"}},
      {"retirements", {"retirement ceremony", "farewell match", "last bow"}},
  };
  return vocabulary;
}

const std::vector<std::string> kFrames = {
    "They mentioned {} more than once.", "Everyone talked about {} that day.", "The report focused on {}.",
    "I still remember {} clearly.",      "There was a short note about {}.",   "Later the topic turned to {}.",
};

const std::vector<std::string> kFillers = {
    "Nothing else happened.", "The rest was routine.", "We went home after that.", "It rained a little.",
};

std::string span_for(const std::string& label, SplitMix64& rng) {
  const auto& vocabulary = fixture_vocabulary();
  const auto it = vocabulary.find(label);
  if (it == vocabulary.end()) return label + " item " + std::to_string(rng.below(100));
  return it->second[rng.below(it->second.size())];
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string fixture_text_label(std::span<const LabelSpanPair> pairs, const TaskSchema& schema) {
  const bool overlapping = std::any_of(schema.word_labels.begin(), schema.word_labels.end(),
                                       [&](const auto& label) { return schema.canonical_text_label(label); });
  std::vector<std::size_t> votes(schema.text_labels.size(), 0);
  for (const auto& pair : pairs) {
    if (overlapping) {
      if (auto label = schema.canonical_text_label(pair.label)) {
        const auto it = std::find(schema.text_labels.begin(), schema.text_labels.end(), *label);
        ++votes[static_cast<std::size_t>(it - schema.text_labels.begin())];
      }
      continue;
    }
    const auto it = std::find(schema.word_labels.begin(), schema.word_labels.end(), pair.label);
    if (it == schema.word_labels.end()) continue;
    ++votes[static_cast<std::size_t>(it - schema.word_labels.begin()) % votes.size()];
  }
  // max_element returns the first maximum, i.e. the earlier text label on ties.
  const auto best = std::max_element(votes.begin(), votes.end());
  return schema.text_labels[static_cast<std::size_t>(best - votes.begin())];
}

std::vector<MixedSample> gen_fixtures(const TaskSchema& schema, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error("gen_fixtures: n must be positive");
  SplitMix64 rng(seed);
  const std::string prefix = lowercase(to_string(schema.task));
  std::vector<MixedSample> samples;
  samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    MixedSample sample;
    sample.task = schema.task;
    sample.id = prefix + "-" + std::to_string(seed) + "-" + std::to_string(i);

    const std::size_t pair_count = 1 + rng.below(4);
    std::string body;
    for (std::size_t p = 0; p < pair_count; ++p) {
      const std::string& label = schema.word_labels[rng.below(schema.word_labels.size())];
      std::string span = span_for(label, rng);
      std::string sentence = kFrames[rng.below(kFrames.size())];
      sentence.replace(sentence.find("{}"), 2, span);
      if (!body.empty()) body += ' ';
      body += sentence;
      sample.gold_pairs.push_back({label, std::move(span)});
    }
    if (rng.below(2) == 0) body += " " + kFillers[rng.below(kFillers.size())];
    sample.text = std::move(body);
    sample.text_label = fixture_text_label(sample.gold_pairs, schema);
    samples.push_back(std::move(sample));
  }
  return samples;
}

}  // namespace tfw
