#include "loglens/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "loglens/encoding.hpp"
#include "loglens/error.hpp"

namespace loglens {

std::string_view to_string(OptimizerKind kind) {
  return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

std::optional<OptimizerKind> parse_optimizer(std::string_view text) {
  if (text == "sgd") return OptimizerKind::sgd;
  if (text == "adam") return OptimizerKind::adam;
  return std::nullopt;
}

TrainConfig TrainConfig::stage1_defaults() { return TrainConfig{}; }

TrainConfig TrainConfig::stage2_defaults() {
  TrainConfig c;
  c.learning_rate = 1e-4;
  c.epochs = 3;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(Errc::config, "learning_rate must be positive");
  }
  if (batch_size < 1) throw Error(Errc::config, "batch_size must be at least 1");
  if (epochs < 1) throw Error(Errc::config, "epochs must be at least 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error(Errc::config, "adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw Error(Errc::config, "adam eps must be positive");
  perturbation.validate();
}

Optimizer::Optimizer(const TrainConfig& config, std::size_t n_params)
    : kind_(config.optimizer),
      lr_(config.learning_rate),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.adam_eps),
      m_(n_params),
      v_(n_params) {}

void Optimizer::step(std::span<Param* const> params) {
  if (params.size() != m_.size()) {
    throw Error(Errc::shape, "optimizer was built for " + std::to_string(m_.size()) +
                                 " parameters, got " + std::to_string(params.size()));
  }
  ++t_;
  if (kind_ == OptimizerKind::sgd) {
    for (Param* p : params) p->value -= lr_ * p->grad;
    return;
  }
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (m_[i].size() == 0) {
      m_[i] = Matrix::Zero(p.value.rows(), p.value.cols());
      v_[i] = Matrix::Zero(p.value.rows(), p.value.cols());
    }
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -=
        lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
  }
}

namespace {

void check_finite(double loss, std::string_view stage, std::size_t epoch, std::size_t batch) {
  if (!std::isfinite(loss)) {
    throw Error(Errc::divergence, std::string(stage) + ": non-finite loss at epoch " +
                                      std::to_string(epoch + 1) + ", batch " +
                                      std::to_string(batch + 1));
  }
}

}  // namespace

TrainResult train_selfsup(ModelParams params, const std::vector<LogRecord>& normals,
                          const TrainConfig& config) {
  config.validate();
  for (const auto& r : normals) {
    if (r.label == Label::anomalous) {
      throw Error(Errc::contamination,
                  "self-supervised training input contains an anomalous record at index " +
                      std::to_string(r.index));
    }
  }
  if (normals.empty()) throw Error(Errc::empty_corpus, "no normal lines to train on");

  const Vocabulary& vocab = fixed_vocab();
  const std::size_t max_len = params.config.max_len;
  std::vector<Param*> trainable = params.all();
  Optimizer optimizer(config, trainable.size());
  TrainResult result;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    PerturbationSpec spec = config.perturbation;
    spec.seed = derive_seed(config.seed, {0xe90cULL, epoch});
    const std::vector<LabeledLine> pairs = build_balanced_pairs(normals, spec);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t n_batches = (pairs.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(pairs.size(), begin + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        Rng dropout(derive_seed(config.seed, {0xd80ULL, epoch, i}));
        Probabilities probs;
        const TokenSequence seq = encode_line(pairs[i].line, vocab, max_len);
        batch_loss += loss_and_backward(params, seq, pairs[i].cls, weight, &dropout, &probs);
        if (probs.argmax() == pairs[i].cls) ++correct;
      }
      check_finite(batch_loss, "self-supervised training", epoch, b);
      optimizer.step(trainable);
      loss_sum += batch_loss;
    }
    const double mean = loss_sum / static_cast<double>(pairs.size());
    result.history.mean_loss.push_back(mean);
    result.history.mean_reward.push_back(-mean);
    result.history.accuracy.push_back(static_cast<double>(correct) /
                                      static_cast<double>(pairs.size()));
  }
  params.zero_grad();
  result.params = std::move(params);
  return result;
}

std::string_view to_string(UpdateCategory c) {
  switch (c) {
    case UpdateCategory::normal: return "normal";
    case UpdateCategory::labeled_anomalous: return "labeled_anomalous";
    case UpdateCategory::perturbed_normal: return "perturbed_normal";
  }
  return "?";
}

std::size_t UpdateSet::count(UpdateCategory c) const {
  return static_cast<std::size_t>(std::count_if(
      items.begin(), items.end(), [c](const UpdateItem& it) { return it.category == c; }));
}

void UpdateSet::validate() const {
  const std::size_t n = count(UpdateCategory::normal);
  if (n == 0 || count(UpdateCategory::labeled_anomalous) != n ||
      count(UpdateCategory::perturbed_normal) != n) {
    throw Error(Errc::precondition, "update set categories are not balanced");
  }
  for (const auto& it : items) {
    const int expected = it.category == UpdateCategory::normal ? 0 : 1;
    if (it.cls != expected) {
      throw Error(Errc::precondition, std::string("update item of category ") +
                                          std::string(to_string(it.category)) +
                                          " has the wrong class");
    }
  }
}

UpdateSet build_update_set(const std::vector<LogRecord>& normals,
                           const std::vector<LogRecord>& labeled_anomalies,
                           const PerturbationSpec& spec) {
  spec.validate();
  if (normals.empty()) throw Error(Errc::precondition, "build_update_set: no normal lines");
  if (labeled_anomalies.empty()) {
    throw Error(Errc::precondition, "build_update_set: stage 2 needs at least one labeled anomaly");
  }
  const std::size_t n = normals.size();
  UpdateSet set;
  set.items.reserve(3 * n);
  for (const auto& r : normals) set.items.push_back({r.line, 0, UpdateCategory::normal});

  if (labeled_anomalies.size() <= n) {
    for (std::size_t i = 0; i < n; ++i) {
      set.items.push_back({labeled_anomalies[i % labeled_anomalies.size()].line, 1,
                           UpdateCategory::labeled_anomalous});
    }
  } else {
    Rng rng(derive_seed(spec.seed, {0xa70aULL}));
    for (std::size_t i : sample_without_replacement(labeled_anomalies.size(), n, rng)) {
      set.items.push_back({labeled_anomalies[i].line, 1, UpdateCategory::labeled_anomalous});
    }
  }

  const std::uint64_t perturb_seed = derive_seed(spec.seed, {0x9e27ULL});
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = line_rng(perturb_seed, i);
    set.items.push_back(
        {perturb_line(normals[i].line, spec, rng), 1, UpdateCategory::perturbed_normal});
  }
  set.validate();
  return set;
}

TrainResult update_with_labels(ModelParams params, const UpdateSet& update_set,
                               const TrainConfig& config) {
  config.validate();
  update_set.validate();

  const Vocabulary& vocab = fixed_vocab();
  std::unordered_map<std::string, Matrix> cache;
  std::vector<const Matrix*> features;
  features.reserve(update_set.items.size());
  for (const auto& it : update_set.items) {
    auto [pos, inserted] = cache.try_emplace(it.line);
    if (inserted) {
      pos->second = pooled_features(params, encode_line(it.line, vocab, params.config.max_len));
    }
    features.push_back(&pos->second);
  }

  std::vector<Param*> head_params = params.classifier();
  Optimizer optimizer(config, head_params.size());
  TrainResult result;
  std::vector<std::size_t> order(update_set.items.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffler(derive_seed(config.seed, {0x0bd7ULL, epoch}));
    shuffler.shuffle(order);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    const std::size_t n_batches = (order.size() + config.batch_size - 1) / config.batch_size;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      const double weight = 1.0 / static_cast<double>(end - begin);
      for (Param* p : head_params) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = begin; i < end; ++i) {
        const auto& item = update_set.items[order[i]];
        Probabilities probs;
        batch_loss += head_loss_and_backward(params.head, *features[order[i]], item.cls, weight,
                                             &probs);
        if (probs.argmax() == item.cls) ++correct;
      }
      check_finite(batch_loss, "label update", epoch, b);
      optimizer.step(head_params);
      loss_sum += batch_loss;
    }
    const double mean = loss_sum / static_cast<double>(order.size());
    result.history.mean_loss.push_back(mean);
    result.history.mean_reward.push_back(-mean);
    result.history.accuracy.push_back(static_cast<double>(correct) /
                                      static_cast<double>(order.size()));
  }
  for (Param* p : head_params) p->zero_grad();
  result.params = std::move(params);
  return result;
}

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << "epoch,mean_loss,accuracy\n";
  char buf[128];
  for (std::size_t e = 0; e < history.mean_loss.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%zu,%.6f,%.6f\n", e + 1, history.mean_loss[e],
                  history.accuracy[e]);
    out << buf;
  }
  if (!out) throw Error(Errc::io, "error while writing " + path.string());
}

}  // namespace loglens
