#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace loglens {

/// Failure categories. Every exception thrown by the library carries one.
enum class Errc {
  shape,
  numeric,
  io,
  empty_corpus,
  precondition,
  config,
  contamination,
  corrupt_input,
  empty_input,
  incompatible_checkpoint,
  vocabulary_mismatch,
  corrupt_checkpoint,
  divergence,
  label_missing,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace loglens
