#include "loglens/encoding.hpp"

#include <cmath>
#include <cstdio>

#include "loglens/error.hpp"

namespace loglens {

Vocabulary::Vocabulary() : id_to_char_{'\0', '\0'} { table_.fill(kUnk); }

TokenId Vocabulary::add(unsigned char c) {
  if (table_[c] != kUnk) return table_[c];
  const auto id = static_cast<TokenId>(id_to_char_.size());
  table_[c] = id;
  id_to_char_.push_back(static_cast<char>(c));
  return id;
}

char Vocabulary::character(TokenId id) const {
  if (id < 2 || id >= id_to_char_.size()) return '\0';
  return id_to_char_[id];
}

std::string Vocabulary::digest() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t byte) {
    h ^= byte;
    h *= 0x100000001b3ULL;
  };
  for (std::size_t c = 0; c < table_.size(); ++c) {
    mix(c);
    for (int shift = 0; shift < 32; shift += 8) mix((table_[c] >> shift) & 0xff);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vocabulary build_fixed_vocab() {
  Vocabulary v;
  for (int c = 0x20; c <= 0x7e; ++c) v.add(static_cast<unsigned char>(c));
  return v;
}

const Vocabulary& fixed_vocab() {
  static const Vocabulary vocab = build_fixed_vocab();
  return vocab;
}

TokenSequence encode_line(std::string_view line, const Vocabulary& vocab, std::size_t max_len) {
  TokenSequence seq;
  seq.ids.assign(max_len, Vocabulary::kPad);
  seq.true_len = std::min(line.size(), max_len);
  for (std::size_t i = 0; i < seq.true_len; ++i) {
    seq.ids[i] = vocab.lookup(static_cast<unsigned char>(line[i]));
  }
  return seq;
}

std::string decode(const TokenSequence& seq, const Vocabulary& vocab) {
  std::string out;
  for (std::size_t i = 0; i < seq.true_len; ++i) {
    if (const char c = vocab.character(seq.ids[i]); c != '\0') out += c;
  }
  return out;
}

Matrix sinusoidal_pe(std::size_t max_len, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw Error(Errc::config, "positional encoding needs an even d_model, got " +
                                  std::to_string(d_model));
  }
  Matrix pe(static_cast<Eigen::Index>(max_len), static_cast<Eigen::Index>(d_model));
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(2 * i)) = std::sin(angle);
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(2 * i + 1)) = std::cos(angle);
    }
  }
  return pe;
}

}  // namespace loglens
