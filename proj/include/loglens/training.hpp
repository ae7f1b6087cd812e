#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loglens/augment.hpp"
#include "loglens/corpus.hpp"
#include "loglens/model.hpp"

namespace loglens {

enum class OptimizerKind { sgd, adam };

std::string_view to_string(OptimizerKind kind);
std::optional<OptimizerKind> parse_optimizer(std::string_view text);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  PerturbationSpec perturbation;
  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  /// Self-supervised stage: lr 1e-3, 5 epochs.
  static TrainConfig stage1_defaults();
  /// Label-driven head update: lr 1e-4, 3 epochs.
  static TrainConfig stage2_defaults();

  void validate() const;
};

/// SGD or Adam over a fixed list of parameters. State is keyed by position
/// in that list, so the same list (in the same order) must be passed to
/// every step.
class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t n_params);

  void step(std::span<Param* const> params);

  std::size_t steps_taken() const { return t_; }

 private:
  OptimizerKind kind_;
  double lr_, beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Matrix> m_, v_;
};

struct TrainHistory {
  std::vector<double> mean_loss;
  std::vector<double> accuracy;
  /// -mean_loss; the feedback signal of the label-driven update.
  std::vector<double> mean_reward;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Stage 1. Each epoch pairs every normal line with a fresh perturbation,
/// shuffles, and minimizes mean cross-entropy over minibatches with all
/// parameters trainable. Throws Errc::contamination if any record is
/// anomalous and Errc::divergence on a non-finite loss.
TrainResult train_selfsup(ModelParams params, const std::vector<LogRecord>& normals,
                          const TrainConfig& config);

enum class UpdateCategory { normal, labeled_anomalous, perturbed_normal };

std::string_view to_string(UpdateCategory c);

struct UpdateItem {
  std::string line;
  int cls = 0;
  UpdateCategory category = UpdateCategory::normal;
};

struct UpdateSet {
  std::vector<UpdateItem> items;

  std::size_t count(UpdateCategory c) const;
  /// Throws Errc::precondition unless the three categories have equal counts
  /// and classes follow normal -> 0, others -> 1.
  void validate() const;
};

/// Three equal categories of N = |normals| items: the normals, the labeled
/// anomalies (repeated cyclically or subsampled by spec.seed to N) and one
/// perturbation per normal.
UpdateSet build_update_set(const std::vector<LogRecord>& normals,
                           const std::vector<LogRecord>& labeled_anomalies,
                           const PerturbationSpec& spec);

/// Stage 2. Trains only the classifier head against the labels; the
/// embedding, encoder layers and layer norms are left untouched. The encoder
/// runs in inference mode, so pooled features are computed once per line.
TrainResult update_with_labels(ModelParams params, const UpdateSet& update_set,
                               const TrainConfig& config);

/// "epoch,mean_loss,accuracy" with 6-decimal reals.
void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace loglens
