#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mt {

// Strict UTF-8 validation and codepoint segmentation.
//
// Returns true iff `s` is well-formed UTF-8 (rejects overlong encodings,
// surrogates, values above U+10FFFF, and truncated sequences). On success,
// if `offsets` is non-null it is filled with the byte offset of each
// codepoint plus a final entry equal to s.size(), so codepoint i spans
// bytes [offsets[i], offsets[i+1]). On failure, if `bad_offset` is non-null
// it receives the byte offset of the first invalid byte.
bool utf8_decompose(std::string_view s, std::vector<size_t>* offsets,
                    size_t* bad_offset);

// Number of codepoints in a valid UTF-8 string. Throws mt::data_error with
// the byte offset if the string is malformed.
size_t utf8_length(std::string_view s);

// Splits a valid UTF-8 string into one std::string per codepoint.
// Throws mt::data_error with the byte offset if the string is malformed.
std::vector<std::string> utf8_codepoints(std::string_view s);

// Decodes the codepoint starting at byte `pos` of a valid UTF-8 string.
uint32_t utf8_decode_at(std::string_view s, size_t pos);

}  // namespace mt
