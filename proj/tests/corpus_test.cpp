#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "loglens/corpus.hpp"
#include "loglens/error.hpp"
#include "loglens/rng.hpp"

using namespace loglens;

namespace {

const std::filesystem::path kData = LOGLENS_TEST_DATA;

std::vector<LogRecord> make_records(std::size_t n_normal, std::size_t n_anomalous) {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < n_normal + n_anomalous; ++i) {
    // Anomalies spread through the sequence.
    const bool anomalous = n_anomalous > 0 && i % ((n_normal + n_anomalous) / n_anomalous) == 0 &&
                           i / ((n_normal + n_anomalous) / n_anomalous) < n_anomalous;
    out.push_back({"line " + std::to_string(i), anomalous ? Label::anomalous : Label::normal, i,
                   "test"});
  }
  return out;
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

TEST_CASE("alert-tag labels on BGL lines") {
  const auto records = load_labeled_log(kData / "bgl_sample.log", "bgl");
  REQUIRE(records.size() == 8);  // blank line skipped
  CHECK(records[0].label == Label::normal);
  CHECK(records[0].line.rfind("- 1117838570 ", 0) == 0);
  CHECK(records[4].label == Label::anomalous);
  CHECK(records[4].line.rfind("APPREAD 1117869872 ", 0) == 0);
  CHECK(records[6].label == Label::anomalous);
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].index == i);
    CHECK(records[i].source == "bgl");
  }
}

TEST_CASE("CRLF input keeps bytes except the terminator") {
  const auto records = load_labeled_log(kData / "crlf.log", "t");
  REQUIRE(records.size() == 2);
  CHECK(records[0].line.back() == 'e');
  CHECK(records[1].label == Label::anomalous);
  for (const auto& r : records) CHECK(r.line.find('\r') == std::string::npos);
}

TEST_CASE("load errors") {
  CHECK(code_of([] { load_labeled_log(kData / "empty.log", "x"); }) == Errc::empty_corpus);
  CHECK(code_of([] { load_labeled_log(kData / "does-not-exist.log", "x"); }) == Errc::io);
}

TEST_CASE("strip_alert_tag") {
  CHECK(strip_alert_tag("- 1117838570 2005.06.03 R02") == "1117838570 2005.06.03 R02");
  CHECK(strip_alert_tag("KERNDTLB  x y") == "x y");
  CHECK(strip_alert_tag("-") == "");
}

TEST_CASE("tsv round trip") {
  const auto path = std::filesystem::temp_directory_path() / "loglens_corpus_roundtrip.tsv";
  std::vector<LogRecord> records = {{"first line", Label::normal, 0, "s"},
                                    {"second\tline", Label::anomalous, 1, "s"},
                                    {"third", Label::unlabeled, 2, "s"}};
  write_tsv(records, path);
  const auto back = load_labeled_log(path, "s", LogFormat::automatic);
  CHECK(back == records);

  std::ofstream(path) << "bogus\tline\n";
  CHECK(code_of([&] { load_labeled_log(path, "s", LogFormat::tsv); }) == Errc::corrupt_input);
  std::filesystem::remove(path);
}

TEST_CASE("chronological_split examples") {
  const auto records = make_records(10, 0);
  auto s = chronological_split(records, {0.6, 0.0, 0.4});
  CHECK(s.train.size() == 6);
  CHECK(s.update.empty());
  CHECK(s.test.size() == 4);
  CHECK(s.train.front().index == 0);
  CHECK(s.test.front().index == 6);

  s = chronological_split(records, {0.6, 0.2, 0.2});
  CHECK(s.train.size() == 6);
  CHECK(s.update.size() == 2);
  CHECK(s.test.size() == 2);

  s = chronological_split(records, {0.8, 0.0, 0.2});
  CHECK(s.train.size() == 8);
  CHECK(s.update.empty());
  CHECK(s.test.size() == 2);

  CHECK(code_of([] { chronological_split({}, {0.8, 0.0, 0.2}); }) == Errc::empty_corpus);
  CHECK(code_of([&] { chronological_split(records, {0.8, 0.1, 0.2}); }) == Errc::config);
}

TEST_CASE("chronological_split partitions any input") {
  for (std::size_t n = 1; n < 60; n += 7) {
    for (const SplitSpec spec : {SplitSpec{0.6, 0.2, 0.2}, SplitSpec{0.8, 0.0, 0.2},
                                 SplitSpec{0.33, 0.33, 0.34}, SplitSpec{1.0, 0.0, 0.0}}) {
      const auto records = make_records(n, 0);
      const auto s = chronological_split(records, spec);
      CHECK(s.train.size() == static_cast<std::size_t>(n * spec.train_fraction + 1e-9));
      std::vector<std::size_t> seen;
      for (const auto* part : {&s.train, &s.update, &s.test}) {
        for (std::size_t i = 1; i < part->size(); ++i) {
          CHECK((*part)[i - 1].index < (*part)[i].index);
        }
        for (const auto& r : *part) seen.push_back(r.index);
      }
      REQUIRE(seen.size() == n);
      for (std::size_t i = 0; i < n; ++i) CHECK(seen[i] == i);
    }
  }
}

TEST_CASE("balance_test_set") {
  const auto records = make_records(100, 10);
  const auto b = balance_test_set(records, 9);
  CHECK(b.anomalous == 10);
  CHECK(b.normal == 10);
  CHECK(b.records.size() == 20);
  CHECK_FALSE(b.imbalanced);
  for (std::size_t i = 1; i < b.records.size(); ++i) {
    CHECK(b.records[i - 1].index < b.records[i].index);
  }
  const auto again = balance_test_set(records, 9);
  CHECK(again.records == b.records);
  const auto other = balance_test_set(records, 10);
  CHECK(other.records.size() == 20);

  const auto balanced = make_records(5, 5);
  CHECK(balance_test_set(balanced, 1).records == balanced);

  const auto short_normals = make_records(2, 4);
  const auto s = balance_test_set(short_normals, 1);
  CHECK(s.imbalanced);
  CHECK(s.normal == 2);
  CHECK(s.anomalous == 4);

  CHECK(code_of([] { balance_test_set(make_records(5, 0), 1); }) == Errc::precondition);
}

TEST_CASE("synth_generate") {
  SynthConfig cfg;
  cfg.normal_templates = default_normal_templates();
  cfg.anomaly_templates = default_anomaly_templates();
  cfg.count = 200;
  cfg.seed = 4;
  for (const auto& r : synth_generate(cfg)) CHECK(r.label == Label::normal);

  cfg.count = 4;
  const auto a = synth_generate(cfg);
  const auto b = synth_generate(cfg);
  CHECK(a == b);
  CHECK(a[0].line != a[1].line);

  // Binomial(1000, 0.5) stays within +-50 of 500 with probability > 0.998.
  cfg.count = 1000;
  cfg.anomaly_rate = 0.5;
  const auto mixed = synth_generate(cfg);
  const auto stats = corpus_stats(mixed);
  CHECK(stats.anomalous >= 450);
  CHECK(stats.anomalous <= 550);
  for (std::size_t i = 0; i < mixed.size(); ++i) CHECK(mixed[i].index == i);

  SynthConfig empty;
  CHECK(code_of([&] { synth_generate(empty); }) == Errc::config);
  SynthConfig no_anomaly_templates;
  no_anomaly_templates.normal_templates = {"x"};
  no_anomaly_templates.anomaly_rate = 0.1;
  CHECK(code_of([&] { synth_generate(no_anomaly_templates); }) == Errc::config);
}

TEST_CASE("render_template placeholders") {
  Rng rng(1);
  CHECK(render_template("at {ts} on {date}", 1117838570, rng) == "at 1117838570 on 2005.06.03");
  const auto stamp = render_template("{stamp}", 1117838570, rng);
  CHECK(stamp.rfind("2005-06-03-22.42.50.", 0) == 0);
  CHECK(stamp.size() == 26);
  for (int i = 0; i < 50; ++i) {
    const auto v = std::stoi(render_template("{int:3:5}", 0, rng));
    CHECK(v >= 3);
    CHECK(v <= 5);
    const auto c = render_template("{choice:a|b}", 0, rng);
    CHECK((c == "a" || c == "b"));
  }
  CHECK(render_template("{hex:6}", 0, rng).size() == 6);
  CHECK(code_of([&] { render_template("{nope}", 0, rng); }) == Errc::config);
  CHECK(code_of([&] { render_template("{int:5:1}", 0, rng); }) == Errc::config);
  CHECK(code_of([&] { render_template("open {ts", 0, rng); }) == Errc::config);
}

TEST_CASE("corpus_stats") {
  CHECK(corpus_stats({}) == CorpusStats{});
  std::vector<LogRecord> r = {{"aaa", Label::normal, 0, ""},
                              {"a", Label::normal, 1, ""},
                              {"aaaaa", Label::normal, 2, ""},
                              {"aa", Label::anomalous, 3, ""},
                              {"aaaa", Label::anomalous, 4, ""}};
  const auto s = corpus_stats(r);
  CHECK(s.total == 5);
  CHECK(s.normal == 3);
  CHECK(s.anomalous == 2);
  CHECK(s.unlabeled == 0);
  CHECK(s.min_length == 1);
  CHECK(s.max_length == 5);
  CHECK(s.mean_length == doctest::Approx(3.0));
}

TEST_CASE("corpus_stats matches an independent recount of a file") {
  const auto records = load_labeled_log(kData / "bgl_sample.log", "bgl");
  const auto stats = corpus_stats(records);

  std::ifstream in(kData / "bgl_sample.log");
  std::string line;
  std::size_t total = 0, normal = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++total;
    if (line.substr(0, 2) == "- ") ++normal;
  }
  CHECK(stats.total == total);
  CHECK(stats.normal == normal);
  CHECK(stats.anomalous == total - normal);
}
