#include "loglens/augment.hpp"

#include <algorithm>
#include <cmath>

#include "loglens/error.hpp"

namespace loglens {

std::string_view to_string(EditOp op) {
  switch (op) {
    case EditOp::insert: return "insert";
    case EditOp::substitute: return "substitute";
    case EditOp::swap: return "swap";
    case EditOp::remove: return "delete";
  }
  return "?";
}

std::string_view to_string(Granularity g) {
  return g == Granularity::character ? "character" : "word";
}

std::optional<EditOp> parse_edit_op(std::string_view text) {
  if (text == "insert") return EditOp::insert;
  if (text == "substitute") return EditOp::substitute;
  if (text == "swap") return EditOp::swap;
  if (text == "delete") return EditOp::remove;
  return std::nullopt;
}

std::optional<Granularity> parse_granularity(std::string_view text) {
  if (text == "character" || text == "char") return Granularity::character;
  if (text == "word") return Granularity::word;
  return std::nullopt;
}

PerturbationSpec PerturbationSpec::fixed(double rate, std::vector<EditOp> ops,
                                         std::vector<Granularity> grans, std::uint64_t seed) {
  PerturbationSpec spec;
  spec.operations = std::move(ops);
  spec.granularities = std::move(grans);
  spec.rate_min = rate;
  spec.rate_max = rate;
  spec.seed = seed;
  return spec;
}

void PerturbationSpec::validate() const {
  if (operations.empty()) throw Error(Errc::config, "perturbation: no operations enabled");
  if (granularities.empty()) throw Error(Errc::config, "perturbation: no granularities enabled");
  auto has_duplicates = [](auto v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) != v.end();
  };
  if (has_duplicates(operations)) throw Error(Errc::config, "perturbation: duplicate operation");
  if (has_duplicates(granularities)) {
    throw Error(Errc::config, "perturbation: duplicate granularity");
  }
  if (!(rate_min >= kMinPerturbationRate && rate_max <= kMaxPerturbationRate &&
        rate_min <= rate_max)) {
    throw Error(Errc::config, "perturbation: rate must lie in [0.005, 0.20] with min <= max");
  }
}

std::size_t edit_count(std::size_t unit_count, double rate) {
  const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(unit_count)));
  return std::max<std::size_t>(1, k);
}

namespace {

constexpr char kFirstPrintable = 0x20;
constexpr std::size_t kPrintableCount = 95;

char random_printable(Rng& rng) {
  return static_cast<char>(kFirstPrintable + static_cast<int>(rng.below(kPrintableCount)));
}

void edit_characters(std::string& s, EditOp op, Rng& rng) {
  switch (op) {
    case EditOp::insert:
      s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.below(s.size() + 1)),
               random_printable(rng));
      break;
    case EditOp::substitute:
      s[rng.below(s.size())] = random_printable(rng);
      break;
    case EditOp::swap:
      if (s.size() >= 2) {
        const std::size_t i = rng.below(s.size() - 1);
        std::swap(s[i], s[i + 1]);
      }
      break;
    case EditOp::remove:
      if (s.size() >= 2) s.erase(rng.below(s.size()), 1);
      break;
  }
}

bool is_space(char c) { return c == ' ' || c == '\t'; }

// A line as separator, word, separator, word, ..., separator.
struct WordLine {
  std::vector<std::string> words;
  std::vector<std::string> seps;  // words.size() + 1 entries

  explicit WordLine(std::string_view line) {
    std::size_t i = 0;
    std::string sep;
    while (i < line.size()) {
      if (is_space(line[i])) {
        sep += line[i++];
        continue;
      }
      seps.push_back(std::move(sep));
      sep.clear();
      const std::size_t start = i;
      while (i < line.size() && !is_space(line[i])) ++i;
      words.emplace_back(line.substr(start, i - start));
    }
    seps.push_back(std::move(sep));
  }

  std::string join() const {
    std::string out = seps[0];
    for (std::size_t i = 0; i < words.size(); ++i) out += words[i] + seps[i + 1];
    return out;
  }
};

void edit_words(WordLine& wl, const std::vector<std::string>& source_words, EditOp op, Rng& rng) {
  auto& words = wl.words;
  auto& seps = wl.seps;
  const std::size_t n = words.size();
  switch (op) {
    case EditOp::insert: {
      const std::size_t pos = rng.below(n + 1);
      const std::string& word = source_words[rng.below(source_words.size())];
      words.insert(words.begin() + static_cast<std::ptrdiff_t>(pos), word);
      seps.insert(seps.begin() + static_cast<std::ptrdiff_t>(pos < n ? pos + 1 : n), " ");
      break;
    }
    case EditOp::substitute:
      words[rng.below(n)] = source_words[rng.below(source_words.size())];
      break;
    case EditOp::swap:
      if (n >= 2) {
        const std::size_t i = rng.below(n - 1);
        std::swap(words[i], words[i + 1]);
      }
      break;
    case EditOp::remove:
      if (n >= 2) {
        const std::size_t i = rng.below(n);
        words.erase(words.begin() + static_cast<std::ptrdiff_t>(i));
        seps.erase(seps.begin() + static_cast<std::ptrdiff_t>(i + 1 < n ? i + 1 : i));
      }
      break;
  }
}

Perturbation attempt(std::string_view line, const PerturbationSpec& spec,
                     const std::vector<std::string>& words, Rng& rng) {
  Perturbation p;
  p.granularity = spec.granularities[rng.below(spec.granularities.size())];
  if (words.empty()) p.granularity = Granularity::character;
  p.rate = spec.rate_max > spec.rate_min ? rng.uniform(spec.rate_min, spec.rate_max)
                                         : spec.rate_min;

  if (p.granularity == Granularity::character) {
    p.edits = edit_count(line.size(), p.rate);
    std::string s(line);
    for (std::size_t e = 0; e < p.edits; ++e) {
      const EditOp op = spec.operations[rng.below(spec.operations.size())];
      ++p.op_counts[static_cast<std::size_t>(op)];
      edit_characters(s, op, rng);
    }
    p.text = std::move(s);
  } else {
    p.edits = edit_count(words.size(), p.rate);
    WordLine wl(line);
    for (std::size_t e = 0; e < p.edits; ++e) {
      const EditOp op = spec.operations[rng.below(spec.operations.size())];
      ++p.op_counts[static_cast<std::size_t>(op)];
      edit_words(wl, words, op, rng);
    }
    p.text = wl.join();
  }
  return p;
}

}  // namespace

Perturbation perturb_line_traced(std::string_view line, const PerturbationSpec& spec, Rng& rng) {
  if (line.empty()) throw Error(Errc::precondition, "perturb_line: empty line");
  const std::vector<std::string> words = WordLine(line).words;

  constexpr int kResamples = 8;
  Perturbation p = attempt(line, spec, words, rng);
  for (int i = 0; i < kResamples && p.text == line; ++i) p = attempt(line, spec, words, rng);
  if (p.text == line) {
    p.text = std::string(line);
    const std::size_t pos = rng.below(line.size());
    char c;
    do {
      c = random_printable(rng);
    } while (c == line[pos]);
    p.text[pos] = c;
    p.forced = true;
  }
  return p;
}

std::string perturb_line(std::string_view line, const PerturbationSpec& spec, Rng& rng) {
  return perturb_line_traced(line, spec, rng).text;
}

Rng line_rng(std::uint64_t seed, std::size_t line_index) {
  return Rng(derive_seed(seed, {0x11e5ULL, line_index}));
}

std::vector<LabeledLine> build_balanced_pairs(const std::vector<LogRecord>& normals,
                                              const PerturbationSpec& spec) {
  spec.validate();
  if (normals.empty()) throw Error(Errc::precondition, "build_balanced_pairs: no normal lines");
  for (const auto& r : normals) {
    if (r.label == Label::anomalous) {
      throw Error(Errc::contamination,
                  "self-supervised training input contains an anomalous record at index " +
                      std::to_string(r.index));
    }
  }

  std::vector<LabeledLine> items;
  items.reserve(2 * normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    Rng rng = line_rng(spec.seed, i);
    items.push_back({normals[i].line, 0});
    items.push_back({perturb_line(normals[i].line, spec, rng), 1});
  }
  Rng shuffler(derive_seed(spec.seed, {0x5aff1eULL}));
  shuffler.shuffle(items);
  return items;
}

}  // namespace loglens
