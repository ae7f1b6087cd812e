#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "loglens/augment.hpp"
#include "loglens/checkpoint.hpp"
#include "loglens/corpus.hpp"
#include "loglens/evaluation.hpp"
#include "loglens/model.hpp"
#include "loglens/training.hpp"

namespace loglens::cli {

struct DataOptions {
  LogFormat format = LogFormat::automatic;
  /// Drop the leading alert-tag field before lines reach the model; the tag
  /// is the label itself.
  bool strip_alert_tag = true;
};

struct UpdateOptions {
  TrainConfig train = TrainConfig::stage2_defaults();
  /// Use at most this many labeled anomalies (0 = all), taken in file order.
  std::size_t max_labels = 0;
};

struct EvalOptions {
  bool balance = true;
  std::optional<double> threshold;
  ReportFormat format = ReportFormat::csv;
};

enum class AnomalyFamily { standard, novel };

struct SynthOptions {
  std::size_t count = 1000;
  double anomaly_rate = 0.0;
  AnomalyFamily anomaly_family = AnomalyFamily::standard;
  std::int64_t start_time = 1117838570;
};

struct OutputOptions {
  StorageType checkpoint_dtype = StorageType::float64;
  std::string run_id = "run";
};

/// Everything a subcommand can be configured with. Loaded from one JSON
/// file; command-line flags override individual fields.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;
  TrainConfig train = TrainConfig::stage1_defaults();
  UpdateOptions update;
  PerturbationSpec perturbation;
  SplitSpec split;
  DataOptions data;
  EvalOptions eval;
  SynthOptions synth;
  OutputOptions output;

  /// Throws Errc::config when any nested section is invalid.
  void validate() const;
};

/// Parses a JSON config. Missing keys keep their defaults; unknown keys
/// and wrongly typed values throw Errc::config naming the key path.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON of every field, defaults included.
std::string dump_run_config(const RunConfig& config);

/// 16 hex digits identifying the canonical JSON.
std::string config_digest(const RunConfig& config);

/// Runs one command line (without the program name). Returns 0 on success,
/// 1 on usage or validation errors and 2 on runtime errors.
int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err);

}  // namespace loglens::cli
