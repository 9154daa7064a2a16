#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tfw/schema.hpp"

namespace tfw {

struct MixedSample {
  std::string id;
  std::string text;
  std::string text_label;
  std::vector<LabelSpanPair> gold_pairs;
  TaskId task = TaskId::kScnm;

  bool operator==(const MixedSample&) const = default;
};

using WarningSink = std::function<void(std::string_view)>;

/// Writes "warning: <message>" to stderr.
void warn_to_stderr(std::string_view message);

/// Reads corpus JSONL: one {"id", "text", "text_label", "pairs": [{"label", "span"}]}
/// object per line. Strings are NFC-normalized and labels mapped to their schema
/// spelling. Blank lines are skipped; unknown fields produce a warning.
///
/// Throws ParseError (with line number) on malformed JSON or missing fields and
/// ValidationError (with sample id) on schema violations or duplicate ids.
std::vector<MixedSample> read_corpus(std::istream& in, const TaskSchema& schema,
                                     const WarningSink& warn = warn_to_stderr);

std::vector<MixedSample> load_corpus(const std::filesystem::path& path, const TaskSchema& schema,
                                     const WarningSink& warn = warn_to_stderr);

std::string to_jsonl_line(const MixedSample& sample);
void write_corpus(std::ostream& out, std::span<const MixedSample> samples);

/// Checks one sample against the schema; throws ValidationError.
void validate_sample(const MixedSample& sample, const TaskSchema& schema);

inline constexpr std::size_t kAllSamples = std::numeric_limits<std::size_t>::max();

struct SamplePlan {
  std::uint64_t seed = 0;
  std::size_t sample_count = 0;
  std::vector<std::string> drawn_ids;
  std::vector<std::string> exemplar_ids;

  /// SHA-256 over the canonical JSON of the plan.
  std::string fingerprint() const;
  std::string to_json() const;

  bool operator==(const SamplePlan&) const = default;
};

/// Seeded test-set draw.
///
/// Runs a partial Fisher-Yates shuffle over corpus indices with SplitMix64(seed):
/// for i = 0, 1, ...: j = i + below(n - i), swap(idx[i], idx[j]). The first
/// icl_shots positions become the exemplars, the next min(count, n - icl_shots)
/// positions the test samples. With `exemplar_override` the exemplars are taken
/// as given, removed from the pool, and only the test draw is shuffled.
/// count == kAllSamples (or any count >= n - icl_shots) draws every
/// non-exemplar sample.
SamplePlan draw_plan(std::span<const MixedSample> corpus, const TaskSchema& schema, std::uint64_t seed,
                     std::size_t count, std::span<const std::string> exemplar_override = {});

/// Synthetic corpus standing in for the real datasets. Every gold span occurs
/// verbatim in its text, every sample has at least one pair, and the text label
/// is fixture_text_label(pairs).
std::vector<MixedSample> gen_fixtures(const TaskSchema& schema, std::size_t n, std::uint64_t seed);

/// Fixture convention (not a property of the real datasets): each pair votes
/// for a text label. When the word and text inventories overlap (the SCPOS
/// tasks) a word label votes for its namesake and other labels ("neutral")
/// abstain. Otherwise word label i votes for text_labels[i % size]. The most
/// voted label wins, ties go to the earlier text label, and no votes at all
/// yields text_labels[0].
std::string fixture_text_label(std::span<const LabelSpanPair> pairs, const TaskSchema& schema);

}  // namespace tfw
