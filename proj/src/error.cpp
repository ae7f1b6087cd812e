#include "loglens/error.hpp"

namespace loglens {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::shape: return "shape";
    case Errc::numeric: return "numeric";
    case Errc::io: return "io";
    case Errc::empty_corpus: return "empty-corpus";
    case Errc::precondition: return "precondition";
    case Errc::config: return "config";
    case Errc::contamination: return "contamination";
    case Errc::corrupt_input: return "corrupt-input";
    case Errc::empty_input: return "empty-input";
    case Errc::incompatible_checkpoint: return "incompatible-checkpoint";
    case Errc::vocabulary_mismatch: return "vocabulary-mismatch";
    case Errc::corrupt_checkpoint: return "corrupt-checkpoint";
    case Errc::divergence: return "divergence";
    case Errc::label_missing: return "label-missing";
  }
  return "unknown";
}

}  // namespace loglens
