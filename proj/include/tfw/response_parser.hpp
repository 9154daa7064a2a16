#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tfw/schema.hpp"

namespace tfw {

// Extraction grammar for model responses.
//
// The response is NFC-normalized (ill-formed UTF-8 becomes U+FFFD) and split
// into lines at '\n' and '\r'. Within a line a pair is
//
//     OPEN label SEP span
//
// where OPEN is ':' or '：', SEP is ';' or '；', the label is the text between
// OPEN and the first SEP (an OPEN before that SEP restarts the candidate), and
// the span runs from SEP to the next OPEN or the end of the line. Label and
// span are trimmed. A pair is kept only when its label matches a schema word
// label (returned in schema spelling) and its span is non-empty and free of
// SEP; anything else is dropped with a diagnostic. Text outside pairs is
// ignored, duplicates are kept, order is preserved.

struct ParsedAnswer {
  std::optional<std::string> text_label;
  std::vector<LabelSpanPair> pairs;
  std::string raw;
  std::vector<std::string> diagnostics;
};

std::vector<LabelSpanPair> parse_pairs(std::string_view text, const TaskSchema& schema,
                                       std::vector<std::string>* diagnostics = nullptr);

/// Last text-label mention outside accepted pairs. Exact-case matches take
/// precedence over ASCII case-insensitive ones; ASCII labels must not touch
/// ASCII letters or digits on either side.
std::optional<std::string> extract_text_label(std::string_view text, const TaskSchema& schema);

/// Never throws for any input bytes.
ParsedAnswer parse_answer(std::string_view text, const TaskSchema& schema);

/// Pairs line, newline, text label (empty when absent).
std::string serialize(const ParsedAnswer& answer);

}  // namespace tfw
