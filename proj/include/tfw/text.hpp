#pragma once

#include <string>
#include <string_view>

// UTF-8 helpers shared by the corpus loader, the response parser and scoring.
// All text is kept as UTF-8; comparisons happen on NFC-normalized strings.

namespace tfw::text {

/// NFC-normalizes UTF-8 input. Ill-formed sequences are replaced by U+FFFD,
/// so the function is total over arbitrary bytes.
std::string nfc(std::string_view utf8);

bool is_valid_utf8(std::string_view bytes);

/// Strips ASCII whitespace and U+3000 (ideographic space) from both ends.
std::string_view trim(std::string_view s);

bool is_ascii(std::string_view s);

/// ASCII case-insensitive equality.
bool iequals(std::string_view a, std::string_view b);

/// trim(nfc(s)).
std::string normalize(std::string_view s);

/// Label comparison policy: exact match, except that two pure-ASCII labels
/// compare case-insensitively. Inputs are expected to be normalized already.
bool labels_equal(std::string_view a, std::string_view b);

}  // namespace tfw::text
