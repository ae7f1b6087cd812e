#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loglens/corpus.hpp"
#include "loglens/rng.hpp"

namespace loglens {

enum class EditOp : std::uint8_t { insert = 0, substitute = 1, swap = 2, remove = 3 };
enum class Granularity : std::uint8_t { character = 0, word = 1 };

inline constexpr std::size_t kEditOpCount = 4;
inline constexpr double kMinPerturbationRate = 0.005;
inline constexpr double kMaxPerturbationRate = 0.20;

std::string_view to_string(EditOp op);
std::string_view to_string(Granularity g);
std::optional<EditOp> parse_edit_op(std::string_view text);
std::optional<Granularity> parse_granularity(std::string_view text);

/// Which edits to apply, at which granularity, at what rate. When
/// rate_max > rate_min the rate is drawn uniformly per line; equal bounds
/// give a fixed rate.
struct PerturbationSpec {
  std::vector<EditOp> operations{EditOp::insert, EditOp::substitute, EditOp::swap,
                                 EditOp::remove};
  std::vector<Granularity> granularities{Granularity::character, Granularity::word};
  double rate_min = kMinPerturbationRate;
  double rate_max = kMaxPerturbationRate;
  std::uint64_t seed = 0;

  static PerturbationSpec fixed(double rate, std::vector<EditOp> ops,
                                std::vector<Granularity> grans, std::uint64_t seed);

  /// Throws Errc::config on empty or duplicated sets, or rates outside
  /// [0.005, 0.20].
  void validate() const;
};

/// max(1, round(rate * unit_count)).
std::size_t edit_count(std::size_t unit_count, double rate);

/// Result of one perturbation with bookkeeping for statistics.
struct Perturbation {
  std::string text;
  Granularity granularity = Granularity::character;
  double rate = 0.0;
  std::size_t edits = 0;
  /// Operations drawn on the accepted attempt, indexed by EditOp.
  std::array<std::size_t, kEditOpCount> op_counts{};
  /// Set when every attempt reproduced the input and a single character
  /// substitution was forced.
  bool forced = false;
};

/// Applies edit_count(units, rate) random edits to `line`. The result always
/// differs from the input. Throws Errc::precondition on an empty line.
Perturbation perturb_line_traced(std::string_view line, const PerturbationSpec& spec, Rng& rng);

std::string perturb_line(std::string_view line, const PerturbationSpec& spec, Rng& rng);

/// RNG stream for the line at `line_index`, independent of processing order.
Rng line_rng(std::uint64_t seed, std::size_t line_index);

struct LabeledLine {
  std::string line;
  int cls = 0;  // 0 normal, 1 perturbed or anomalous

  bool operator==(const LabeledLine&) const = default;
};

/// Every normal line once as class 0 plus one perturbation of it as class 1,
/// shuffled by spec.seed. Throws Errc::contamination if any input is
/// labeled anomalous.
std::vector<LabeledLine> build_balanced_pairs(const std::vector<LogRecord>& normals,
                                              const PerturbationSpec& spec);

}  // namespace loglens
