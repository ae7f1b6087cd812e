#include "loglens/model.hpp"

#include <cmath>
#include <limits>

#include "loglens/error.hpp"

namespace loglens {

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(Errc::config, "model config: " + msg); };
  if (vocab_size < 2) fail("vocab_size must be at least 2");
  if (d_model == 0 || d_model % 2 != 0) fail("d_model must be positive and even");
  if (n_heads == 0 || d_model % n_heads != 0) fail("n_heads must divide d_model");
  if (d_ff == 0) fail("d_ff must be positive");
  if (n_layers == 0) fail("n_layers must be at least 1");
  if (max_len == 0) fail("max_len must be positive");
  if (n_classes != 2) fail("n_classes must be 2");
  if (classifier_hidden == 0) fail("classifier_hidden must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) fail("dropout_rate must lie in [0, 1)");
}

std::vector<NamedParam> ModelParams::named() {
  std::vector<NamedParam> out;
  out.push_back({"embedding", &embedding});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = layers[i];
    const std::string p = "layer" + std::to_string(i) + ".";
    out.push_back({p + "wq", &l.wq});
    out.push_back({p + "wk", &l.wk});
    out.push_back({p + "wv", &l.wv});
    out.push_back({p + "wo", &l.wo});
    out.push_back({p + "ffn.w1", &l.w1});
    out.push_back({p + "ffn.b1", &l.b1});
    out.push_back({p + "ffn.w2", &l.w2});
    out.push_back({p + "ffn.b2", &l.b2});
    out.push_back({p + "ln1.gamma", &l.ln1_gamma});
    out.push_back({p + "ln1.beta", &l.ln1_beta});
    out.push_back({p + "ln2.gamma", &l.ln2_gamma});
    out.push_back({p + "ln2.beta", &l.ln2_beta});
  }
  out.push_back({"head.w1", &head.w1});
  out.push_back({"head.b1", &head.b1});
  out.push_back({"head.w2", &head.w2});
  out.push_back({"head.b2", &head.b2});
  return out;
}

std::vector<NamedConstParam> ModelParams::named() const {
  std::vector<NamedConstParam> out;
  for (const auto& np : const_cast<ModelParams*>(this)->named()) out.push_back({np.name, np.param});
  return out;
}

std::vector<Param*> ModelParams::all() {
  std::vector<Param*> out;
  for (const auto& np : named()) out.push_back(np.param);
  return out;
}

std::vector<Param*> ModelParams::encoder() {
  std::vector<Param*> out;
  for (const auto& np : named()) {
    if (np.name.rfind("head.", 0) != 0) out.push_back(np.param);
  }
  return out;
}

std::vector<Param*> ModelParams::classifier() {
  return {&head.w1, &head.b1, &head.w2, &head.b2};
}

void ModelParams::zero_grad() {
  for (Param* p : all()) p->zero_grad();
}

namespace {

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

bool is_bias_or_norm(const std::string& name) {
  return name.ends_with(".b1") || name.ends_with(".b2") || name.ends_with("beta") ||
         name.ends_with("gamma");
}

}  // namespace

ModelParams make_params(const ModelConfig& config) {
  config.validate();
  const auto d = idx(config.d_model);
  const auto ff = idx(config.d_ff);
  ModelParams p;
  p.config = config;
  p.embedding = Param(idx(config.vocab_size), d);
  p.layers.resize(config.n_layers);
  for (auto& l : p.layers) {
    l.wq = Param(d, d);
    l.wk = Param(d, d);
    l.wv = Param(d, d);
    l.wo = Param(d, d);
    l.w1 = Param(d, ff);
    l.b1 = Param(1, ff);
    l.w2 = Param(ff, d);
    l.b2 = Param(1, d);
    l.ln1_gamma = Param(Matrix::Ones(1, d));
    l.ln1_beta = Param(1, d);
    l.ln2_gamma = Param(Matrix::Ones(1, d));
    l.ln2_beta = Param(1, d);
  }
  const auto hidden = idx(config.classifier_hidden);
  p.head.w1 = Param(d, hidden);
  p.head.b1 = Param(1, hidden);
  p.head.w2 = Param(hidden, idx(config.n_classes));
  p.head.b2 = Param(1, idx(config.n_classes));
  p.positional = sinusoidal_pe(config.max_len, config.d_model);
  return p;
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  ModelParams p = make_params(config);
  Rng rng(derive_seed(seed, {0x1417ULL}));
  for (const auto& np : p.named()) {
    if (is_bias_or_norm(np.name)) continue;
    Matrix& w = np.param->value;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    }
  }
  return p;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix attention_impl(const Matrix& q, const Matrix& k, const Matrix& v,
                      const std::vector<bool>& valid, Matrix* probs_out) {
  if (q.rows() != k.rows() || k.rows() != v.rows() || q.cols() != k.cols() ||
      valid.size() != static_cast<std::size_t>(k.rows())) {
    throw Error(Errc::shape, "attention: Q " + shape_string(q) + ", K " + shape_string(k) +
                                 ", V " + shape_string(v) + ", mask of " +
                                 std::to_string(valid.size()));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  Matrix scores(q.rows(), k.rows());
  scores.noalias() = (q * k.transpose()) * scale;
  for (std::size_t j = 0; j < valid.size(); ++j) {
    if (!valid[j]) scores.col(idx(j)).setConstant(kNegInf);
  }
  Matrix probs = softmax_rows(scores);
  Matrix out(q.rows(), v.cols());
  out.noalias() = probs * v;
  if (probs_out) *probs_out = std::move(probs);
  return out;
}

Matrix add_row(Matrix m, const Matrix& row) {
  m.rowwise() += row.row(0);
  return m;
}

Matrix dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  Matrix mask(rows, cols);
  const double keep = 1.0 / (1.0 - rate);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) mask(r, c) = rng.uniform() >= rate ? keep : 0.0;
  }
  return mask;
}

struct LayerTrace {
  Matrix x;
  Matrix q, k, v;
  std::vector<Matrix> probs;  // per head
  Matrix ctx;
  Matrix attn_mask;  // empty when dropout is off
  LayerNormCache ln1;
  Matrix y1;
  Matrix ff_pre;
  Matrix ff_act;
  Matrix ffn_mask;
  LayerNormCache ln2;
};

struct Trace {
  std::vector<TokenId> ids;
  std::vector<LayerTrace> layers;
  Matrix out;
  Matrix pooled;
  Matrix h1;
  Matrix a1;
  Probabilities probs;
};

Matrix layer_forward(const EncoderLayer& l, std::size_t n_heads, const Matrix& x,
                     const std::vector<bool>& valid, double dropout, Rng* rng, LayerTrace* t) {
  const Eigen::Index d = x.cols();
  const Eigen::Index dk = d / idx(n_heads);
  Matrix q = matmul(x, l.wq.value);
  Matrix k = matmul(x, l.wk.value);
  Matrix v = matmul(x, l.wv.value);
  Matrix ctx(x.rows(), d);
  if (t) t->probs.resize(n_heads);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = idx(h) * dk;
    ctx.middleCols(c0, dk) =
        attention_impl(q.middleCols(c0, dk), k.middleCols(c0, dk), v.middleCols(c0, dk), valid,
                       t ? &t->probs[h] : nullptr);
  }
  Matrix attn = matmul(ctx, l.wo.value);
  Matrix attn_mask;
  if (rng && dropout > 0.0) {
    attn_mask = dropout_mask(attn.rows(), attn.cols(), dropout, *rng);
    attn = attn.cwiseProduct(attn_mask);
  }

  LayerNormCache ln1;
  Matrix y1 = layer_norm_forward(x + attn, l.ln1_gamma.value, l.ln1_beta.value, kLayerNormEps, ln1);

  Matrix ff_pre = add_row(matmul(y1, l.w1.value), l.b1.value);
  Matrix ff_act = relu(ff_pre);
  Matrix ff = add_row(matmul(ff_act, l.w2.value), l.b2.value);
  Matrix ffn_mask;
  if (rng && dropout > 0.0) {
    ffn_mask = dropout_mask(ff.rows(), ff.cols(), dropout, *rng);
    ff = ff.cwiseProduct(ffn_mask);
  }

  LayerNormCache ln2;
  Matrix y2 = layer_norm_forward(y1 + ff, l.ln2_gamma.value, l.ln2_beta.value, kLayerNormEps, ln2);

  if (t) {
    t->x = x;
    t->q = std::move(q);
    t->k = std::move(k);
    t->v = std::move(v);
    t->ctx = std::move(ctx);
    t->attn_mask = std::move(attn_mask);
    t->ln1 = std::move(ln1);
    t->y1 = std::move(y1);
    t->ff_pre = std::move(ff_pre);
    t->ff_act = std::move(ff_act);
    t->ffn_mask = std::move(ffn_mask);
    t->ln2 = std::move(ln2);
  }
  return y2;
}

// dL/dx for one layer given dL/dy2; accumulates parameter grads.
Matrix layer_backward(EncoderLayer& l, std::size_t n_heads, const LayerTrace& t, const Matrix& dy2) {
  Matrix dr2 = layer_norm_backward(t.ln2, dy2, l.ln2_gamma, l.ln2_beta);
  Matrix dy1 = dr2;
  Matrix dff = t.ffn_mask.size() ? Matrix(dr2.cwiseProduct(t.ffn_mask)) : dr2;

  l.w2.grad.noalias() += t.ff_act.transpose() * dff;
  l.b2.grad += dff.colwise().sum();
  Matrix dact = dff * l.w2.value.transpose();
  Matrix dpre = relu_backward(t.ff_pre, dact);
  l.w1.grad.noalias() += t.y1.transpose() * dpre;
  l.b1.grad += dpre.colwise().sum();
  dy1.noalias() += dpre * l.w1.value.transpose();

  Matrix dr1 = layer_norm_backward(t.ln1, dy1, l.ln1_gamma, l.ln1_beta);
  Matrix dx = dr1;
  Matrix dattn = t.attn_mask.size() ? Matrix(dr1.cwiseProduct(t.attn_mask)) : dr1;

  l.wo.grad.noalias() += t.ctx.transpose() * dattn;
  Matrix dctx = dattn * l.wo.value.transpose();

  const Eigen::Index d = t.x.cols();
  const Eigen::Index dk = d / idx(n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  Matrix dq(t.q.rows(), d), dk_all(t.k.rows(), d), dv(t.v.rows(), d);
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = idx(h) * dk;
    const Matrix& p = t.probs[h];
    const Matrix dctx_h = dctx.middleCols(c0, dk);
    Matrix dp = dctx_h * t.v.middleCols(c0, dk).transpose();
    dv.middleCols(c0, dk).noalias() = p.transpose() * dctx_h;
    Matrix ds = softmax_rows_backward(p, dp) * scale;
    dq.middleCols(c0, dk).noalias() = ds * t.k.middleCols(c0, dk);
    dk_all.middleCols(c0, dk).noalias() = ds.transpose() * t.q.middleCols(c0, dk);
  }
  l.wq.grad.noalias() += t.x.transpose() * dq;
  l.wk.grad.noalias() += t.x.transpose() * dk_all;
  l.wv.grad.noalias() += t.x.transpose() * dv;
  dx.noalias() += dq * l.wq.value.transpose();
  dx.noalias() += dk_all * l.wk.value.transpose();
  dx.noalias() += dv * l.wv.value.transpose();
  return dx;
}

Matrix embed(const ModelParams& params, const std::vector<TokenId>& ids) {
  const auto& cfg = params.config;
  const double scale = std::sqrt(static_cast<double>(cfg.d_model));
  Matrix x(idx(ids.size()), idx(cfg.d_model));
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] >= cfg.vocab_size) {
      throw Error(Errc::corrupt_input, "token id " + std::to_string(ids[r]) +
                                           " is outside the vocabulary of " +
                                           std::to_string(cfg.vocab_size));
    }
    x.row(idx(r)) = params.embedding.value.row(idx(ids[r])) * scale +
                    params.positional.row(idx(r));
  }
  return x;
}

Matrix encode_rows(const ModelParams& params, const std::vector<TokenId>& ids,
                   const std::vector<bool>& valid, bool training, Rng* rng, Trace* trace) {
  const auto& cfg = params.config;
  if (ids.size() > cfg.max_len) {
    throw Error(Errc::shape, "sequence longer than max_len " + std::to_string(cfg.max_len));
  }
  Rng* dropout_rng = training ? rng : nullptr;
  Matrix x = embed(params, ids);
  if (trace) trace->layers.resize(params.layers.size());
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    x = layer_forward(params.layers[i], cfg.n_heads, x, valid, cfg.dropout_rate, dropout_rng,
                      trace ? &trace->layers[i] : nullptr);
  }
  return x;
}

std::vector<TokenId> prefix_ids(const ModelParams& params, const TokenSequence& seq) {
  if (seq.max_len() != params.config.max_len) {
    throw Error(Errc::shape, "sequence max_len " + std::to_string(seq.max_len()) +
                                 " does not match model max_len " +
                                 std::to_string(params.config.max_len));
  }
  if (seq.true_len == 0) throw Error(Errc::empty_input, "cannot classify an empty line");
  return {seq.ids.begin(), seq.ids.begin() + static_cast<std::ptrdiff_t>(seq.true_len)};
}

// Pad rows never influence non-pad rows (their keys are masked and pooling
// ignores them), so classification runs on the true_len prefix only.
Matrix pooled_prefix(const ModelParams& params, const TokenSequence& seq, bool training, Rng* rng,
                     Trace* trace) {
  std::vector<TokenId> ids = prefix_ids(params, seq);
  std::vector<bool> valid(ids.size(), true);
  Matrix out = encode_rows(params, ids, valid, training, rng, trace);
  Matrix pooled = out.colwise().mean();
  if (trace) {
    trace->ids = std::move(ids);
    trace->out = std::move(out);
  }
  return pooled;
}

Probabilities head_impl(const ClassifierHead& head, const Matrix& pooled, Matrix* h1_out,
                        Matrix* a1_out) {
  Matrix h1 = add_row(matmul(pooled, head.w1.value), head.b1.value);
  Matrix a1 = relu(h1);
  Matrix probs = softmax_rows(add_row(matmul(a1, head.w2.value), head.b2.value));
  if (h1_out) *h1_out = std::move(h1);
  if (a1_out) *a1_out = std::move(a1);
  return {probs(0, 0), probs(0, 1)};
}

constexpr double kProbFloor = 1e-12;

// dL/dpooled; accumulates head grads.
Matrix head_backward(ClassifierHead& head, const Matrix& pooled, const Matrix& h1,
                     const Matrix& a1, const Probabilities& probs, int cls, double weight) {
  const double p_cls = cls == 1 ? probs.anomalous : probs.normal;
  Matrix dlogits(1, 2);
  if (p_cls > kProbFloor) {
    dlogits << probs.normal - (cls == 0 ? 1.0 : 0.0), probs.anomalous - (cls == 1 ? 1.0 : 0.0);
    dlogits *= weight;
  } else {
    dlogits.setZero();  // clamped region: loss is constant
  }
  head.w2.grad.noalias() += a1.transpose() * dlogits;
  head.b2.grad += dlogits;
  Matrix da1 = dlogits * head.w2.value.transpose();
  Matrix dh1 = relu_backward(h1, da1);
  head.w1.grad.noalias() += pooled.transpose() * dh1;
  head.b1.grad += dh1;
  return dh1 * head.w1.value.transpose();
}

}  // namespace

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, const std::vector<bool>& valid) {
  return attention_impl(q, k, v, valid, nullptr);
}

Matrix multi_head_attention(const Matrix& x, const EncoderLayer& layer, std::size_t n_heads,
                            const std::vector<bool>& valid) {
  if (n_heads == 0 || x.cols() % idx(n_heads) != 0) {
    throw Error(Errc::config, "d_model " + std::to_string(x.cols()) +
                                  " is not divisible by n_heads " + std::to_string(n_heads));
  }
  const Eigen::Index dk = x.cols() / idx(n_heads);
  const Matrix q = matmul(x, layer.wq.value);
  const Matrix k = matmul(x, layer.wk.value);
  const Matrix v = matmul(x, layer.wv.value);
  Matrix ctx(x.rows(), x.cols());
  for (std::size_t h = 0; h < n_heads; ++h) {
    const Eigen::Index c0 = idx(h) * dk;
    ctx.middleCols(c0, dk) = attention_impl(q.middleCols(c0, dk), k.middleCols(c0, dk),
                                            v.middleCols(c0, dk), valid, nullptr);
  }
  return matmul(ctx, layer.wo.value);
}

Matrix feed_forward(const Matrix& x, const EncoderLayer& layer) {
  if (layer.b1.value.cols() != layer.w1.value.cols() ||
      layer.b2.value.cols() != layer.w2.value.cols()) {
    throw Error(Errc::shape, "feed_forward: bias shapes do not match weights");
  }
  return add_row(matmul(relu(add_row(matmul(x, layer.w1.value), layer.b1.value)), layer.w2.value),
                 layer.b2.value);
}

Matrix encoder_forward(const ModelParams& params, const TokenSequence& seq, bool training,
                       Rng* rng) {
  if (seq.max_len() != params.config.max_len) {
    throw Error(Errc::shape, "sequence max_len " + std::to_string(seq.max_len()) +
                                 " does not match model max_len " +
                                 std::to_string(params.config.max_len));
  }
  std::vector<bool> valid(seq.max_len(), false);
  for (std::size_t i = 0; i < seq.true_len; ++i) valid[i] = true;
  return encode_rows(params, seq.ids, valid, training, rng, nullptr);
}

Probabilities classify(const ModelParams& params, const TokenSequence& seq, bool training,
                       Rng* rng) {
  return head_impl(params.head, pooled_prefix(params, seq, training, rng, nullptr), nullptr,
                   nullptr);
}

double cross_entropy(const Probabilities& probs, int cls) {
  const double p = cls == 1 ? probs.anomalous : probs.normal;
  return -std::log(std::max(p, kProbFloor));
}

Matrix pooled_features(const ModelParams& params, const TokenSequence& seq) {
  return pooled_prefix(params, seq, false, nullptr, nullptr);
}

Probabilities head_forward(const ClassifierHead& head, const Matrix& pooled) {
  return head_impl(head, pooled, nullptr, nullptr);
}

double head_loss_and_backward(ClassifierHead& head, const Matrix& pooled, int cls, double weight,
                              Probabilities* probs_out) {
  Matrix h1, a1;
  const Probabilities probs = head_impl(head, pooled, &h1, &a1);
  head_backward(head, pooled, h1, a1, probs, cls, weight);
  if (probs_out) *probs_out = probs;
  return cross_entropy(probs, cls);
}

double loss_and_backward(ModelParams& params, const TokenSequence& seq, int cls, double weight,
                         Rng* dropout_rng, Probabilities* probs_out) {
  Trace trace;
  const Matrix pooled = pooled_prefix(params, seq, dropout_rng != nullptr, dropout_rng, &trace);
  Matrix h1, a1;
  const Probabilities probs = head_impl(params.head, pooled, &h1, &a1);
  const Matrix dpooled = head_backward(params.head, pooled, h1, a1, probs, cls, weight);

  const auto rows = trace.out.rows();
  Matrix dx = dpooled.replicate(rows, 1) / static_cast<double>(rows);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    dx = layer_backward(params.layers[i], params.config.n_heads, trace.layers[i], dx);
  }
  const double scale = std::sqrt(static_cast<double>(params.config.d_model));
  for (std::size_t r = 0; r < trace.ids.size(); ++r) {
    params.embedding.grad.row(idx(trace.ids[r])) += scale * dx.row(idx(r));
  }
  if (probs_out) *probs_out = probs;
  return cross_entropy(probs, cls);
}

}  // namespace loglens
