#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "loglens/encoding.hpp"
#include "loglens/numerics.hpp"
#include "loglens/rng.hpp"

namespace loglens {

/// Architecture hyper-parameters.
struct ModelConfig {
  std::size_t vocab_size = 97;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t n_layers = 2;
  std::size_t max_len = 256;
  std::size_t n_classes = 2;
  std::size_t classifier_hidden = 64;
  double dropout_rate = 0.1;

  /// Throws Errc::config on inconsistent values.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct EncoderLayer {
  Param wq, wk, wv, wo;
  Param w1, b1, w2, b2;
  Param ln1_gamma, ln1_beta;
  Param ln2_gamma, ln2_beta;
};

struct ClassifierHead {
  Param w1, b1, w2, b2;
};

struct NamedParam {
  std::string name;
  Param* param;
};

struct NamedConstParam {
  std::string name;
  const Param* param;
};

/// All learnable arrays of the encoder-classifier.
struct ModelParams {
  ModelConfig config;
  Param embedding;
  std::vector<EncoderLayer> layers;
  ClassifierHead head;
  /// Sinusoidal table for config.max_len rows; derived, not learned.
  Matrix positional;

  /// Every parameter in serialization order: embedding, layers, head.
  std::vector<NamedParam> named();
  std::vector<NamedConstParam> named() const;

  std::vector<Param*> all();
  /// Embedding and encoder layers (everything frozen during label updates).
  std::vector<Param*> encoder();
  std::vector<Param*> classifier();

  void zero_grad();
};

/// Allocates correctly shaped, zero-valued parameters.
ModelParams make_params(const ModelConfig& config);

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases and layer-norm
/// beta zero; gamma one. Deterministic in (config, seed).
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

/// softmax(Q K^T / sqrt(d_k)) V. Keys whose `valid` entry is false are
/// excluded; a query with no valid key yields a zero row.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<bool>& valid);

/// Concat(head_1..head_h) Wo with head_i = attention(x Wq_i, x Wk_i, x Wv_i).
Matrix multi_head_attention(const Matrix& x, const EncoderLayer& layer, std::size_t n_heads,
                            const std::vector<bool>& valid);

/// max(0, x W1 + b1) W2 + b2 row by row.
Matrix feed_forward(const Matrix& x, const EncoderLayer& layer);

/// Embedding * sqrt(d_model) + positional encoding, then post-norm encoder
/// layers over all max_len rows with pad keys masked. Dropout is applied
/// only when `training` is set and `rng` is non-null.
/// Throws Errc::corrupt_input for ids >= vocab_size and Errc::shape when
/// seq.max_len() != config.max_len.
Matrix encoder_forward(const ModelParams& params, const TokenSequence& seq, bool training,
                       Rng* rng = nullptr);

struct Probabilities {
  double normal = 0.5;
  double anomalous = 0.5;

  int argmax() const { return anomalous > 0.5 ? 1 : 0; }
};

/// Mean-pooled encoder output over non-pad rows through the MLP head.
/// Throws Errc::empty_input when seq.true_len == 0.
Probabilities classify(const ModelParams& params, const TokenSequence& seq, bool training = false,
                       Rng* rng = nullptr);

/// -ln(max(p_class, 1e-12)).
double cross_entropy(const Probabilities& probs, int cls);

/// Mean-pooled encoder output (1 x d_model) in inference mode.
Matrix pooled_features(const ModelParams& params, const TokenSequence& seq);

Probabilities head_forward(const ClassifierHead& head, const Matrix& pooled);

/// Cross-entropy of one example; accumulates weight * dloss/dparam into
/// every parameter's grad.
double loss_and_backward(ModelParams& params, const TokenSequence& seq, int cls, double weight,
                         Rng* dropout_rng = nullptr, Probabilities* probs_out = nullptr);

/// Same as loss_and_backward but for the classifier head on precomputed
/// pooled features; only head grads are touched.
double head_loss_and_backward(ClassifierHead& head, const Matrix& pooled, int cls, double weight,
                              Probabilities* probs_out = nullptr);

}  // namespace loglens
