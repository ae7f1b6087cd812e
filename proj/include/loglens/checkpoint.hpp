#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "loglens/encoding.hpp"
#include "loglens/model.hpp"

namespace loglens {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class StorageType { float64, float32 };

/// A saved model. Layout on disk:
///
///   "LGLN"                       magic
///   u32 LE                       format_version
///   u32 LE + bytes               JSON header: config, vocab_digest (hex),
///                                provenance, dtype, tensor list
///   tensors                      row-major little-endian float64 or float32
///                                in the header's order
struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  ModelParams params;
  std::string vocab_digest;
  std::string provenance;
};

/// float64 storage round-trips bit-exactly; float32 rounds each value once.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path,
                     StorageType storage = StorageType::float64);

/// Throws Errc::io when the file cannot be opened, Errc::corrupt_checkpoint
/// on bad magic or truncation, Errc::incompatible_checkpoint on a version
/// mismatch and Errc::vocabulary_mismatch when the digest differs from
/// `vocab`.
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           const Vocabulary& vocab = fixed_vocab());

}  // namespace loglens
