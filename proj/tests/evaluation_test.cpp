#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "loglens/error.hpp"
#include "loglens/evaluation.hpp"
#include "loglens/rng.hpp"

using namespace loglens;

namespace {

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

TEST_CASE("confusion and prf1 example") {
  const std::vector<int> pred{1, 1, 0, 0, 1};
  const std::vector<int> gold{1, 0, 1, 0, 1};
  const ConfusionCounts c = confusion(pred, gold);
  CHECK(c == ConfusionCounts{2, 1, 1, 1});
  const auto m = prf1(c);
  CHECK(m.precision == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0));

  const auto n = prf1({3, 1, 2, 0});
  CHECK(n.precision == doctest::Approx(0.75));
  CHECK(n.recall == doctest::Approx(0.6));
  CHECK(n.f1 == doctest::Approx(0.666667).epsilon(1e-6));

  const std::vector<int> shorter{1};
  CHECK(code_of([&] { confusion(shorter, gold); }) == Errc::shape);
}

TEST_CASE("degenerate predictors") {
  const auto none = prf1({0, 0, 5, 5});
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
  // Always predicting anomalous on a balanced set: precision 0.5, recall 1.
  const auto all = prf1({5, 5, 0, 0});
  CHECK(all.precision == doctest::Approx(0.5));
  CHECK(all.recall == 1.0);
  CHECK(all.f1 == doctest::Approx(2.0 / 3.0));
  const auto perfect = prf1({4, 0, 0, 4});
  CHECK(perfect.f1 == 1.0);
}

TEST_CASE("metrics stay in the unit interval and match the harmonic mean") {
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    std::vector<int> pred, gold;
    const std::size_t n = 1 + rng.below(50);
    for (std::size_t k = 0; k < n; ++k) {
      pred.push_back(static_cast<int>(rng.below(2)));
      gold.push_back(static_cast<int>(rng.below(2)));
    }
    const auto c = confusion(pred, gold);
    CHECK(c.total() == n);
    const auto m = prf1(c);
    for (double v : {m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (m.precision + m.recall > 0) {
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
    }
  }
}

TEST_CASE("evaluate") {
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.d_ff = 16;
  cfg.max_len = 16;
  cfg.classifier_hidden = 4;
  ModelParams p = init_params(cfg, 1);
  // A head that always says anomalous.
  for (Param* q : p.classifier()) q->value.setZero();
  p.head.b2.value(0, 1) = 5.0;

  const std::vector<LogRecord> test = {{"a", Label::anomalous, 0, "d"},
                                       {"b", Label::normal, 1, "d"},
                                       {"c", Label::anomalous, 2, "d"},
                                       {"d", Label::normal, 3, "d"}};
  const auto r = evaluate(p, test, fixed_vocab(), 16);
  CHECK(r.counts == ConfusionCounts{2, 2, 0, 0});
  CHECK(r.precision == doctest::Approx(0.5));
  CHECK(r.recall == 1.0);
  CHECK(r.dataset == "d");

  const auto strict = evaluate(p, test, fixed_vocab(), 16, 0.9999);
  CHECK(strict.counts == ConfusionCounts{0, 0, 2, 2});

  auto unlabeled = test;
  unlabeled[2].label = Label::unlabeled;
  CHECK(code_of([&] { evaluate(p, unlabeled, fixed_vocab(), 16); }) == Errc::label_missing);
  CHECK(code_of([&] { evaluate(p, test, fixed_vocab(), 32); }) == Errc::shape);
}

TEST_CASE("report rendering") {
  MetricsReport r;
  r.run_id = "run1";
  r.dataset = "synth";
  r.split = "test";
  r.seed = 7;
  r.counts = {200, 0, 0, 200};
  r.precision = 1.0;
  r.recall = 1.0;
  r.f1 = 1.0;
  r.config_digest = "abc";
  CHECK(render_report_csv({r}) ==
        "run_id,dataset,split,precision,recall,f1,tp,fp,fn,tn,seed\n"
        "run1,synth,test,1.000000,1.000000,1.000000,200,0,0,200,7\n");

  MetricsReport s = r;
  s.run_id = "a,b";
  s.precision = 2.0 / 3.0;
  const std::string csv = render_report_csv({s});
  CHECK(csv.find("\"a,b\"") != std::string::npos);
  CHECK(csv.find("0.666667") != std::string::npos);

  const auto back = parse_report_json(render_report_json({r, s}));
  REQUIRE(back.size() == 2);
  CHECK(back[0].run_id == "run1");
  CHECK(back[0].counts == r.counts);
  CHECK(back[0].config_digest == "abc");
  CHECK(back[1].precision == doctest::Approx(0.666667).epsilon(1e-9));
  CHECK(code_of([] { parse_report_json("{"); }) == Errc::corrupt_input);

  const auto path = std::filesystem::temp_directory_path() / "loglens_report.csv";
  emit_report({r}, path, ReportFormat::csv);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == render_report_csv({r}));
  std::filesystem::remove(path);

  CHECK(code_of([&] { emit_report({}, path, ReportFormat::csv); }) == Errc::precondition);
  CHECK(code_of([&] { emit_report({r}, "/nonexistent-dir/x.csv", ReportFormat::json); }) ==
        Errc::io);
}
