#include <algorithm>
#include <array>
#include <set>
#include <string>

#include "doctest.h"
#include "loglens/augment.hpp"
#include "loglens/error.hpp"

using namespace loglens;

namespace {

const std::string kLine =
    "1117838570 2005.06.03 R02-M1-N0-C:J12-U11 RAS KERNEL INFO instruction cache parity error "
    "corrected";

std::string sorted(std::string s) {
  std::sort(s.begin(), s.end());
  return s;
}

std::vector<LogRecord> normals(std::size_t n) {
  std::vector<LogRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({"node " + std::to_string(i) + " RAS KERNEL INFO ok", Label::normal, i, "t"});
  }
  return out;
}

}  // namespace

TEST_CASE("edit_count examples") {
  CHECK(edit_count(10, 0.005) == 1);
  CHECK(edit_count(100, 0.20) == 20);
  CHECK(edit_count(1, 0.2) == 1);
  CHECK(edit_count(1, 0.005) == 1);
  CHECK(edit_count(25, 0.1) == 3);  // round(2.5) rounds half away from zero
}

TEST_CASE("PerturbationSpec validation") {
  PerturbationSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.rate_min = 0.001;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = PerturbationSpec::fixed(0.25, {EditOp::swap}, {Granularity::character}, 0);
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = PerturbationSpec::fixed(0.1, {}, {Granularity::character}, 0);
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = PerturbationSpec::fixed(0.1, {EditOp::swap}, {}, 0);
  CHECK_THROWS_AS(spec.validate(), Error);
  spec = PerturbationSpec::fixed(0.1, {EditOp::swap, EditOp::swap}, {Granularity::word}, 0);
  CHECK_THROWS_AS(spec.validate(), Error);
  CHECK_NOTHROW(PerturbationSpec::fixed(0.005, {EditOp::insert}, {Granularity::word}, 0).validate());
  CHECK_NOTHROW(PerturbationSpec::fixed(0.20, {EditOp::insert}, {Granularity::word}, 0).validate());
}

TEST_CASE("delete-only on a short line removes one character") {
  const auto spec = PerturbationSpec::fixed(0.2, {EditOp::remove}, {Granularity::character}, 1);
  Rng rng(1);
  CHECK(perturb_line("abcd", spec, rng).size() == 3);
}

TEST_CASE("character length deltas are exact") {
  for (const double rate : {0.005, 0.05, 0.2}) {
    const auto del = PerturbationSpec::fixed(rate, {EditOp::remove}, {Granularity::character}, 0);
    const auto ins = PerturbationSpec::fixed(rate, {EditOp::insert}, {Granularity::character}, 0);
    Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      const auto k = edit_count(kLine.size(), rate);
      const auto d = perturb_line_traced(kLine, del, rng);
      CHECK(d.text.size() == kLine.size() - k);
      const auto n = perturb_line_traced(kLine, ins, rng);
      if (!n.forced) CHECK(n.text.size() == kLine.size() + k);
    }
  }
}

TEST_CASE("swap preserves the character multiset") {
  const auto spec = PerturbationSpec::fixed(0.1, {EditOp::swap}, {Granularity::character}, 0);
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const auto p = perturb_line_traced(kLine, spec, rng);
    CHECK(p.text != kLine);
    if (!p.forced) CHECK(sorted(p.text) == sorted(kLine));
  }
  const auto word_spec = PerturbationSpec::fixed(0.2, {EditOp::swap}, {Granularity::word}, 0);
  for (int i = 0; i < 200; ++i) {
    const auto p = perturb_line_traced(kLine, word_spec, rng);
    if (!p.forced) CHECK(sorted(p.text) == sorted(kLine));
  }
}

TEST_CASE("word edits use words of the same line") {
  const auto spec =
      PerturbationSpec::fixed(0.2, {EditOp::insert, EditOp::substitute}, {Granularity::word}, 0);
  Rng rng(5);
  std::set<std::string> vocabulary;
  {
    std::string w;
    for (char c : kLine + " ") {
      if (c == ' ') {
        if (!w.empty()) vocabulary.insert(w);
        w.clear();
      } else {
        w += c;
      }
    }
  }
  for (int i = 0; i < 100; ++i) {
    const auto p = perturb_line_traced(kLine, spec, rng);
    if (p.forced) continue;
    std::string w;
    for (char c : p.text + " ") {
      if (c == ' ') {
        if (!w.empty()) CHECK(vocabulary.count(w) == 1);
        w.clear();
      } else {
        w += c;
      }
    }
  }

  const auto del = PerturbationSpec::fixed(0.2, {EditOp::remove}, {Granularity::word}, 0);
  const auto p = perturb_line_traced("a b c d e f g h i j", del, rng);
  CHECK(p.text.size() == std::string("a b c d e f g h i j").size() - 2 * p.edits);
}

TEST_CASE("output always differs and is deterministic") {
  PerturbationSpec spec;
  for (const std::string line : {std::string("a"), std::string("aa"), std::string(" "),
                                 std::string("x y"), kLine}) {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      Rng r1(seed), r2(seed);
      const auto a = perturb_line(line, spec, r1);
      CHECK(a != line);
      CHECK(a == perturb_line(line, spec, r2));
    }
  }
  const auto swap_only = PerturbationSpec::fixed(0.2, {EditOp::swap}, {Granularity::character}, 0);
  Rng rng(1);
  CHECK(perturb_line("zz", swap_only, rng) != "zz");

  Rng e(0);
  CHECK_THROWS_AS(perturb_line("", spec, e), Error);
}

TEST_CASE("operation frequencies are uniform") {
  PerturbationSpec spec;
  std::array<std::size_t, kEditOpCount> counts{};
  std::size_t total = 0;
  for (std::size_t i = 0; i < 10000; ++i) {
    Rng rng = line_rng(99, i);
    const auto p = perturb_line_traced(kLine, spec, rng);
    for (std::size_t op = 0; op < kEditOpCount; ++op) {
      counts[op] += p.op_counts[op];
      total += p.op_counts[op];
    }
  }
  for (std::size_t op = 0; op < kEditOpCount; ++op) {
    const double freq = static_cast<double>(counts[op]) / static_cast<double>(total);
    CHECK(freq == doctest::Approx(0.25).epsilon(0.02 / 0.25));
  }
}

TEST_CASE("balanced pairs") {
  PerturbationSpec spec;
  spec.seed = 12;
  const auto input = normals(10);
  const auto pairs = build_balanced_pairs(input, spec);
  CHECK(pairs.size() == 20);
  CHECK(std::count_if(pairs.begin(), pairs.end(), [](auto& p) { return p.cls == 1; }) == 10);

  std::set<std::string> originals;
  for (const auto& r : input) originals.insert(r.line);
  for (const auto& p : pairs) {
    if (p.cls == 0) CHECK(originals.count(p.line) == 1);
  }
  CHECK(build_balanced_pairs(input, spec) == pairs);

  // Each perturbed item differs from its own source line.
  for (std::size_t i = 0; i < input.size(); ++i) {
    Rng rng = line_rng(spec.seed, i);
    const auto pert = perturb_line(input[i].line, spec, rng);
    CHECK(pert != input[i].line);
    CHECK(std::find(pairs.begin(), pairs.end(), LabeledLine{pert, 1}) != pairs.end());
  }

  auto dirty = input;
  dirty[3].label = Label::anomalous;
  try {
    build_balanced_pairs(dirty, spec);
    FAIL("expected contamination error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::contamination);
  }
}
