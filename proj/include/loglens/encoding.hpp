#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "loglens/numerics.hpp"

namespace loglens {

using TokenId = std::uint32_t;

/// Byte-to-token table. Ids are dense in [0, size); 0 is padding and 1 is
/// the unknown token.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;

  Vocabulary();

  /// Registers `c` under the next free id. Existing characters keep their id.
  TokenId add(unsigned char c);

  TokenId lookup(unsigned char c) const { return table_[c]; }
  bool contains(unsigned char c) const { return table_[c] != kUnk; }

  /// Inverse mapping; returns '\0' for pad/unk or an unused id.
  char character(TokenId id) const;

  std::size_t size() const { return id_to_char_.size(); }

  /// FNV-1a 64 over the (byte, id) table in byte order, as 16 hex digits.
  std::string digest() const;

 private:
  std::array<TokenId, 256> table_{};
  std::vector<char> id_to_char_;
};

/// The 95 printable ASCII characters (0x20-0x7E) after PAD and UNK.
/// Ids are assigned in byte order, so ' ' is 2 and '~' is 96.
const Vocabulary& fixed_vocab();
Vocabulary build_fixed_vocab();

struct TokenSequence {
  std::vector<TokenId> ids;  // length max_len
  std::size_t true_len = 0;

  std::size_t max_len() const { return ids.size(); }
};

/// Per-character lookup, truncated on the right to max_len and padded
/// with kPad. Total on any byte content.
TokenSequence encode_line(std::string_view line, const Vocabulary& vocab, std::size_t max_len);

/// Maps ids back to characters, skipping pad and unk.
std::string decode(const TokenSequence& seq, const Vocabulary& vocab);

/// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(...).
/// Throws Errc::config for odd d_model.
Matrix sinusoidal_pe(std::size_t max_len, std::size_t d_model);

}  // namespace loglens
