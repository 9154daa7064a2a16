#include "tfw/response_parser.hpp"

#include <algorithm>
#include <cctype>
#include <utility>

#include "tfw/promptgen.hpp"
#include "tfw/text.hpp"

namespace tfw {

namespace {

constexpr std::string_view kWideColon = "\xEF\xBC\x9A";
constexpr std::string_view kWideSemicolon = "\xEF\xBC\x9B";

struct Delimiter {
  std::size_t pos = std::string_view::npos;
  std::size_t length = 0;

  explicit operator bool() const { return pos != std::string_view::npos; }
};

Delimiter find_either(std::string_view line, std::size_t from, char ascii, std::string_view wide) {
  const std::size_t a = line.find(ascii, from);
  const std::size_t w = line.find(wide, from);
  if (a == std::string_view::npos && w == std::string_view::npos) return {};
  if (w == std::string_view::npos || (a != std::string_view::npos && a < w)) return {a, 1};
  return {w, wide.size()};
}

Delimiter find_open(std::string_view line, std::size_t from) { return find_either(line, from, ':', kWideColon); }
Delimiter find_sep(std::string_view line, std::size_t from) { return find_either(line, from, ';', kWideSemicolon); }

struct ScanResult {
  std::vector<LabelSpanPair> pairs;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // [begin, end) of accepted pairs
};

void scan_line(std::string_view line, std::size_t base, const TaskSchema& schema, ScanResult& result,
               std::vector<std::string>* diagnostics) {
  std::size_t pos = 0;
  while (pos < line.size()) {
    const Delimiter open = find_open(line, pos);
    if (!open) return;
    const std::size_t label_begin = open.pos + open.length;
    const Delimiter sep = find_sep(line, label_begin);
    if (!sep) return;
    const Delimiter next_open = find_open(line, label_begin);
    if (next_open && next_open.pos < sep.pos) {
      pos = next_open.pos;
      continue;
    }

    const std::size_t span_begin = sep.pos + sep.length;
    const Delimiter span_stop = find_open(line, span_begin);
    const std::size_t span_end = span_stop ? span_stop.pos : line.size();
    pos = span_end;

    const std::string_view label = text::trim(line.substr(label_begin, sep.pos - label_begin));
    const std::string_view span = text::trim(line.substr(span_begin, span_end - span_begin));
    auto note = [&](std::string message) {
      if (diagnostics) diagnostics->push_back(std::move(message));
    };
    if (label.empty()) {
      note("dropped pair with empty label at offset " + std::to_string(base + open.pos));
      continue;
    }
    const auto canonical = schema.canonical_word_label(label);
    if (!canonical) {
      note("dropped pair: label '" + std::string(label) + "' is not a word label");
      continue;
    }
    if (span.empty()) {
      note("dropped pair: empty span for label '" + *canonical + "'");
      continue;
    }
    if (find_sep(span, 0)) {
      note("dropped pair: span '" + std::string(span) + "' contains a ';'");
      continue;
    }
    result.pairs.push_back({*canonical, std::string(span)});
    result.ranges.emplace_back(base + open.pos, base + span_end);
  }
}

ScanResult scan(std::string_view normalized, const TaskSchema& schema, std::vector<std::string>* diagnostics) {
  ScanResult result;
  std::size_t begin = 0;
  while (begin <= normalized.size()) {
    std::size_t end = normalized.find_first_of("\r\n", begin);
    if (end == std::string_view::npos) end = normalized.size();
    scan_line(normalized.substr(begin, end - begin), begin, schema, result, diagnostics);
    begin = end + 1;
  }
  return result;
}

bool is_ascii_alnum(char c) {
  return static_cast<unsigned char>(c) < 0x80 && std::isalnum(static_cast<unsigned char>(c));
}

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (static_cast<unsigned char>(c) < 0x80) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

struct Match {
  std::size_t pos = 0;
  std::size_t length = 0;
  const std::string* label = nullptr;
};

std::optional<Match> last_match(std::string_view haystack, const TaskSchema& schema,
                                const std::vector<std::pair<std::size_t, std::size_t>>& masked, bool fold_case) {
  std::optional<Match> best;
  for (const auto& label : schema.text_labels) {
    const bool ascii = text::is_ascii(label);
    if (fold_case && !ascii) continue;
    const std::string needle = fold_case ? ascii_lower(label) : label;
    for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) {
      const std::size_t end = pos + needle.size();
      if (ascii && ((pos > 0 && is_ascii_alnum(haystack[pos - 1])) ||
                    (end < haystack.size() && is_ascii_alnum(haystack[end])))) {
        continue;
      }
      const bool inside_pair = std::any_of(masked.begin(), masked.end(),
                                           [&](const auto& range) { return pos < range.second && end > range.first; });
      if (inside_pair) continue;
      if (!best || pos > best->pos || (pos == best->pos && needle.size() > best->length)) {
        best = Match{pos, needle.size(), &label};
      }
    }
  }
  return best;
}

std::optional<std::string> extract_from_normalized(std::string_view normalized, const TaskSchema& schema,
                                                   const ScanResult& scanned) {
  if (auto exact = last_match(normalized, schema, scanned.ranges, false)) return *exact->label;
  const std::string folded = ascii_lower(normalized);
  if (auto loose = last_match(folded, schema, scanned.ranges, true)) return *loose->label;
  return std::nullopt;
}

}  // namespace

std::vector<LabelSpanPair> parse_pairs(std::string_view text, const TaskSchema& schema,
                                       std::vector<std::string>* diagnostics) {
  const std::string normalized = text::nfc(text);
  return scan(normalized, schema, diagnostics).pairs;
}

std::optional<std::string> extract_text_label(std::string_view text, const TaskSchema& schema) {
  const std::string normalized = text::nfc(text);
  return extract_from_normalized(normalized, schema, scan(normalized, schema, nullptr));
}

ParsedAnswer parse_answer(std::string_view text, const TaskSchema& schema) {
  ParsedAnswer answer;
  answer.raw = std::string(text);
  if (!text::is_valid_utf8(text)) answer.diagnostics.emplace_back("response is not valid UTF-8; replaced bad bytes");
  const std::string normalized = text::nfc(text);
  ScanResult scanned = scan(normalized, schema, &answer.diagnostics);
  answer.text_label = extract_from_normalized(normalized, schema, scanned);
  answer.pairs = std::move(scanned.pairs);
  if (answer.pairs.empty()) answer.diagnostics.emplace_back("no label-span pairs found");
  if (!answer.text_label) answer.diagnostics.emplace_back("no text label found");
  return answer;
}

std::string serialize(const ParsedAnswer& answer) {
  return render_pairs(answer.pairs) + "\n" + answer.text_label.value_or("");
}

}  // namespace tfw
