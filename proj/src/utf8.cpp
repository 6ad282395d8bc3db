#include "mt/utf8.hpp"

#include <sstream>

#include "mt/error.hpp"

namespace mt {

namespace {

// Decodes one codepoint at s[pos]. Returns its byte length, or 0 if the
// sequence is invalid. Strict: overlong forms, surrogates, and values
// above U+10FFFF are rejected.
size_t decode_one(std::string_view s, size_t pos, uint32_t* cp_out) {
  const unsigned char b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    if (cp_out) *cp_out = b0;
    return 1;
  }
  size_t len;
  uint32_t cp;
  uint32_t min_cp;
  if ((b0 & 0xe0) == 0xc0) {
    len = 2;
    cp = b0 & 0x1f;
    min_cp = 0x80;
  } else if ((b0 & 0xf0) == 0xe0) {
    len = 3;
    cp = b0 & 0x0f;
    min_cp = 0x800;
  } else if ((b0 & 0xf8) == 0xf0) {
    len = 4;
    cp = b0 & 0x07;
    min_cp = 0x10000;
  } else {
    return 0;
  }
  if (pos + len > s.size()) return 0;
  for (size_t i = 1; i < len; ++i) {
    const unsigned char b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xc0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3f);
  }
  if (cp < min_cp) return 0;
  if (cp >= 0xd800 && cp <= 0xdfff) return 0;
  if (cp > 0x10ffff) return 0;
  if (cp_out) *cp_out = cp;
  return len;
}

[[noreturn]] void throw_malformed(size_t offset) {
  std::ostringstream os;
  os << "malformed UTF-8 at byte offset " << offset;
  throw data_error(os.str());
}

}  // namespace

bool utf8_decompose(std::string_view s, std::vector<size_t>* offsets,
                    size_t* bad_offset) {
  if (offsets) {
    offsets->clear();
    offsets->reserve(s.size() + 1);
  }
  size_t pos = 0;
  while (pos < s.size()) {
    const size_t len = decode_one(s, pos, nullptr);
    if (len == 0) {
      if (bad_offset) *bad_offset = pos;
      return false;
    }
    if (offsets) offsets->push_back(pos);
    pos += len;
  }
  if (offsets) offsets->push_back(s.size());
  return true;
}

size_t utf8_length(std::string_view s) {
  std::vector<size_t> offsets;
  size_t bad = 0;
  if (!utf8_decompose(s, &offsets, &bad)) throw_malformed(bad);
  return offsets.size() - 1;
}

std::vector<std::string> utf8_codepoints(std::string_view s) {
  std::vector<size_t> offsets;
  size_t bad = 0;
  if (!utf8_decompose(s, &offsets, &bad)) throw_malformed(bad);
  std::vector<std::string> out;
  out.reserve(offsets.size() - 1);
  for (size_t i = 0; i + 1 < offsets.size(); ++i) {
    out.emplace_back(s.substr(offsets[i], offsets[i + 1] - offsets[i]));
  }
  return out;
}

uint32_t utf8_decode_at(std::string_view s, size_t pos) {
  uint32_t cp = 0;
  if (decode_one(s, pos, &cp) == 0) throw_malformed(pos);
  return cp;
}

}  // namespace mt
