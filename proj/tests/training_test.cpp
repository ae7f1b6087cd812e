#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "loglens/error.hpp"
#include "loglens/training.hpp"

using namespace loglens;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.n_heads = 2;
  c.d_ff = 32;
  c.max_len = 48;
  c.classifier_hidden = 16;
  return c;
}

std::vector<LogRecord> records(std::size_t n, const std::string& stem, Label label) {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({stem + " " + std::to_string(i * 37 % 1000), label, i, "t"});
  }
  return out;
}

bool bit_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return Errc::io;
}

}  // namespace

TEST_CASE("config defaults and validation") {
  const auto s1 = TrainConfig::stage1_defaults();
  CHECK(s1.learning_rate == 1e-3);
  CHECK(s1.batch_size == 32);
  CHECK(s1.epochs == 5);
  CHECK(s1.optimizer == OptimizerKind::adam);
  const auto s2 = TrainConfig::stage2_defaults();
  CHECK(s2.learning_rate == 1e-4);
  CHECK(s2.epochs == 3);

  TrainConfig bad;
  bad.learning_rate = 0.0;
  CHECK(code_of([&] { bad.validate(); }) == Errc::config);
  bad = TrainConfig{};
  bad.batch_size = 0;
  CHECK(code_of([&] { bad.validate(); }) == Errc::config);
  bad = TrainConfig{};
  bad.beta2 = 1.0;
  CHECK(code_of([&] { bad.validate(); }) == Errc::config);

  CHECK(parse_optimizer("sgd") == OptimizerKind::sgd);
  CHECK(parse_optimizer("adam") == OptimizerKind::adam);
  CHECK_FALSE(parse_optimizer("rmsprop").has_value());
}

TEST_CASE("one SGD step moves each weight by -lr * grad") {
  TrainConfig c;
  c.optimizer = OptimizerKind::sgd;
  c.learning_rate = 0.1;
  Param p(Matrix::Constant(2, 2, 1.0));
  p.grad << 0.5, -1.0, 0.0, 2.0;
  std::vector<Param*> list{&p};
  Optimizer opt(c, 1);
  opt.step(list);
  CHECK(p.value(0, 0) == doctest::Approx(0.95));
  CHECK(p.value(0, 1) == doctest::Approx(1.1));
  CHECK(p.value(1, 0) == 1.0);
  CHECK(p.value(1, 1) == doctest::Approx(0.8));
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("first Adam step has magnitude lr in every coordinate") {
  // With bias correction, m_hat = g and v_hat = g^2 after one step.
  TrainConfig c;
  c.learning_rate = 0.01;
  Param p(Matrix::Zero(1, 3));
  p.grad << 3.0, -0.2, 1e3;
  std::vector<Param*> list{&p};
  Optimizer opt(c, 1);
  opt.step(list);
  CHECK(p.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(p.value(0, 2) == doctest::Approx(-0.01).epsilon(1e-6));

  std::vector<Param*> wrong{&p, &p};
  CHECK(code_of([&] { opt.step(wrong); }) == Errc::shape);
}

TEST_CASE("build_update_set balances three categories") {
  PerturbationSpec spec;
  spec.seed = 3;
  const auto normals = records(10, "RAS KERNEL INFO ok", Label::normal);

  const auto few = records(4, "KERNEL FATAL", Label::anomalous);
  const UpdateSet a = build_update_set(normals, few, spec);
  CHECK(a.items.size() == 30);
  CHECK(a.count(UpdateCategory::normal) == 10);
  CHECK(a.count(UpdateCategory::labeled_anomalous) == 10);
  CHECK(a.count(UpdateCategory::perturbed_normal) == 10);
  std::vector<std::string> cyc;
  for (const auto& it : a.items) {
    if (it.category == UpdateCategory::labeled_anomalous) cyc.push_back(it.line);
  }
  for (std::size_t i = 0; i < cyc.size(); ++i) CHECK(cyc[i] == few[i % 4].line);

  const auto many = records(25, "KERNEL FATAL", Label::anomalous);
  const UpdateSet b = build_update_set(normals, many, spec);
  std::set<std::string> distinct;
  for (const auto& it : b.items) {
    if (it.category == UpdateCategory::labeled_anomalous) distinct.insert(it.line);
  }
  CHECK(distinct.size() == 10);
  CHECK(b.count(UpdateCategory::labeled_anomalous) == 10);

  for (const auto& it : b.items) {
    CHECK(it.cls == (it.category == UpdateCategory::normal ? 0 : 1));
  }
  CHECK(code_of([&] { build_update_set(normals, {}, spec); }) == Errc::precondition);

  UpdateSet broken = a;
  broken.items.pop_back();
  CHECK(code_of([&] { broken.validate(); }) == Errc::precondition);
}

TEST_CASE("label update leaves the encoder bit-identical") {
  const ModelParams start = init_params(tiny_config(), 4);
  PerturbationSpec spec;
  spec.seed = 1;
  const auto set = build_update_set(records(12, "RAS KERNEL INFO ok", Label::normal),
                                    records(3, "KERNEL FATAL data TLB", Label::anomalous), spec);
  TrainConfig c = TrainConfig::stage2_defaults();
  c.learning_rate = 1e-2;
  c.batch_size = 8;
  const TrainResult r = update_with_labels(start, set, c);

  auto before = start.named();
  auto after = r.params.named();
  REQUIRE(before.size() == after.size());
  bool head_changed = false;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const bool same = bit_equal(before[i].param->value, after[i].param->value);
    if (before[i].name.rfind("head.", 0) == 0) {
      head_changed = head_changed || !same;
    } else {
      INFO(before[i].name);
      CHECK(same);
    }
  }
  CHECK(head_changed);
  CHECK(r.history.mean_loss.size() == 3);
}

TEST_CASE("self-supervised training is deterministic and learns") {
  const auto normals = records(48, "R02 RAS KERNEL INFO generating core", Label::normal);
  TrainConfig c;
  c.seed = 11;
  c.epochs = 4;
  c.batch_size = 8;
  c.learning_rate = 3e-3;
  const ModelParams init = init_params(tiny_config(), 2);
  const TrainResult a = train_selfsup(init, normals, c);
  const TrainResult b = train_selfsup(init, normals, c);
  for (std::size_t i = 0; i < a.params.named().size(); ++i) {
    CHECK(bit_equal(a.params.named()[i].param->value, b.params.named()[i].param->value));
  }
  CHECK(a.history.mean_loss == b.history.mean_loss);
  REQUIRE(a.history.mean_loss.size() == 4);
  CHECK(a.history.mean_loss.back() < a.history.mean_loss.front());
  CHECK(a.history.mean_reward.front() == -a.history.mean_loss.front());

  TrainConfig other = c;
  other.seed = 12;
  CHECK(train_selfsup(init, normals, other).history.mean_loss != a.history.mean_loss);

  auto dirty = normals;
  dirty[5].label = Label::anomalous;
  CHECK(code_of([&] { train_selfsup(init, dirty, c); }) == Errc::contamination);
  CHECK(code_of([&] { train_selfsup(init, {}, c); }) == Errc::empty_corpus);
}

TEST_CASE("divergence is reported") {
  ModelParams p = init_params(tiny_config(), 2);
  p.head.w2.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig c;
  c.epochs = 1;
  try {
    train_selfsup(p, records(4, "x y z", Label::normal), c);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::divergence);
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
}

TEST_CASE("history csv") {
  TrainHistory h;
  h.mean_loss = {0.5, 0.25};
  h.accuracy = {0.75, 1.0};
  const auto path = std::filesystem::temp_directory_path() / "loglens_history.csv";
  write_history_csv(h, path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "epoch,mean_loss,accuracy\n1,0.500000,0.750000\n2,0.250000,1.000000\n");
  std::filesystem::remove(path);
}
