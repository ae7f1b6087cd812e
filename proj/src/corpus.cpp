#include "loglens/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "loglens/error.hpp"
#include "loglens/rng.hpp"

namespace loglens {

std::string_view to_string(Label label) {
  switch (label) {
    case Label::normal: return "normal";
    case Label::anomalous: return "anomalous";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

std::optional<Label> parse_label(std::string_view text) {
  if (text == "normal") return Label::normal;
  if (text == "anomalous") return Label::anomalous;
  if (text == "unlabeled") return Label::unlabeled;
  return std::nullopt;
}

std::optional<LogFormat> parse_log_format(std::string_view text) {
  if (text == "alert_tag" || text == "bgl") return LogFormat::alert_tag;
  if (text == "tsv") return LogFormat::tsv;
  if (text == "auto") return LogFormat::automatic;
  return std::nullopt;
}

Label alert_tag_label(std::string_view line) {
  const auto begin = line.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return Label::normal;
  const auto end = line.find_first_of(" \t", begin);
  const auto field = line.substr(begin, end == std::string_view::npos ? line.size() - begin
                                                                       : end - begin);
  return field == "-" ? Label::normal : Label::anomalous;
}

std::string strip_alert_tag(std::string_view line) {
  const auto begin = line.find_first_not_of(" \t");
  if (begin == std::string_view::npos) return {};
  const auto end = line.find_first_of(" \t", begin);
  if (end == std::string_view::npos) return {};
  const auto rest = line.find_first_not_of(" \t", end);
  return rest == std::string_view::npos ? std::string{} : std::string(line.substr(rest));
}

std::vector<LogRecord> load_labeled_log(const std::filesystem::path& path,
                                        std::string_view source_id, LogFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open log file " + path.string());
  if (format == LogFormat::automatic) {
    format = path.extension() == ".tsv" ? LogFormat::tsv : LogFormat::alert_tag;
  }

  std::vector<LogRecord> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    if (raw.empty()) continue;

    LogRecord rec;
    rec.index = records.size();
    rec.source = std::string(source_id);
    if (format == LogFormat::tsv) {
      const auto tab = raw.find('\t');
      if (tab == std::string::npos) {
        throw Error(Errc::corrupt_input, path.string() + ":" + std::to_string(line_no) +
                                             ": expected label<TAB>line");
      }
      const auto label = parse_label(std::string_view(raw).substr(0, tab));
      if (!label) {
        throw Error(Errc::corrupt_input, path.string() + ":" + std::to_string(line_no) +
                                             ": unknown label '" + raw.substr(0, tab) + "'");
      }
      rec.label = *label;
      rec.line = raw.substr(tab + 1);
    } else {
      rec.label = alert_tag_label(raw);
      rec.line = std::move(raw);
    }
    records.push_back(std::move(rec));
  }
  if (in.bad()) throw Error(Errc::io, "error while reading " + path.string());
  if (records.empty()) throw Error(Errc::empty_corpus, "no log records in " + path.string());
  return records;
}

void write_tsv(const std::vector<LogRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  for (const auto& r : records) out << to_string(r.label) << '\t' << r.line << '\n';
  if (!out) throw Error(Errc::io, "error while writing " + path.string());
}

void SplitSpec::validate() const {
  for (double f : {train_fraction, update_fraction, test_fraction}) {
    if (!(f >= 0.0 && f <= 1.0)) throw Error(Errc::config, "split fractions must lie in [0, 1]");
  }
  if (std::abs(train_fraction + update_fraction + test_fraction - 1.0) > 1e-9) {
    throw Error(Errc::config, "split fractions must sum to 1");
  }
}

namespace {

// floor(n * f), tolerant of representation error such as 0.29 * 100.
std::size_t part_size(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

}  // namespace

CorpusSplit chronological_split(const std::vector<LogRecord>& records, const SplitSpec& spec) {
  spec.validate();
  if (records.empty()) throw Error(Errc::empty_corpus, "cannot split an empty corpus");

  std::vector<LogRecord> ordered = records;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const LogRecord& a, const LogRecord& b) { return a.index < b.index; });

  const std::size_t n = ordered.size();
  const std::size_t n_train = part_size(n, spec.train_fraction);
  const std::size_t n_update = std::min(part_size(n, spec.update_fraction), n - n_train);

  CorpusSplit split;
  const auto first = ordered.begin();
  split.train.assign(first, first + static_cast<std::ptrdiff_t>(n_train));
  split.update.assign(first + static_cast<std::ptrdiff_t>(n_train),
                      first + static_cast<std::ptrdiff_t>(n_train + n_update));
  split.test.assign(first + static_cast<std::ptrdiff_t>(n_train + n_update), ordered.end());
  return split;
}

BalancedTestSet balance_test_set(const std::vector<LogRecord>& records, std::uint64_t seed) {
  std::vector<std::size_t> normal_pos;
  std::size_t anomalous = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::anomalous) ++anomalous;
    if (records[i].label == Label::normal) normal_pos.push_back(i);
  }
  if (anomalous == 0) {
    throw Error(Errc::precondition, "balance_test_set: no anomalous records to balance against");
  }

  BalancedTestSet out;
  std::vector<bool> keep(records.size(), false);
  if (normal_pos.size() <= anomalous) {
    out.imbalanced = normal_pos.size() < anomalous;
    for (std::size_t i : normal_pos) keep[i] = true;
  } else {
    Rng rng(seed);
    for (std::size_t k : sample_without_replacement(normal_pos.size(), anomalous, rng)) {
      keep[normal_pos[k]] = true;
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label == Label::anomalous || keep[i]) {
      out.records.push_back(records[i]);
      if (records[i].label == Label::anomalous) {
        ++out.anomalous;
      } else {
        ++out.normal;
      }
    }
  }
  return out;
}

std::vector<std::string> default_normal_templates() {
  const std::string head = "{ts} {date} {node} {stamp} {node} RAS ";
  return {
      head + "KERNEL INFO instruction cache parity error corrected",
      head + "KERNEL INFO generating core.{int:1:4095}",
      head + "KERNEL INFO {int:1:64} double-hummer alignment exceptions",
      head + "KERNEL INFO CE sym {int:0:31}, at 0x{hex:8}, mask 0x{hex:2}",
      head + "KERNEL INFO total of {int:1:30} ddr error(s) detected and corrected",
      head + "APP INFO ciod: generated {int:1:128} core files for program /bgl/apps/{choice:sweep3d|linpack|smg2000|amg}",
      head + "MMCS INFO idoproxydb hit ASSERT condition count {int:1:9} on block {choice:R00-M0|R01-M1|R02-M0}",
  };
}

std::vector<std::string> default_anomaly_templates() {
  const std::string head = "{ts} {date} {node} {stamp} {node} RAS ";
  return {
      head + "KERNEL FATAL data TLB error interrupt",
      head + "KERNEL FATAL machine check interrupt (bit=0x{hex:2}): L2 dcache unit data parity error",
      head + "KERNEL FATAL rts: kernel terminated for reason {int:1001:1010}",
      head + "APP FATAL ciod: failed to read message prefix on control stream (CioStream socket to {ip}:{int:1024:65535}",
      head + "LINKCARD FATAL MidplaneSwitchController::receiveTrain() iCard bit error on port {int:0:15}",
  };
}

std::vector<std::string> novel_anomaly_templates() {
  const std::string head = "{ts} {date} {node} {stamp} {node} RAS ";
  return {
      head + "KERNEL INFO instruction cache parity error uncorrectable",
      head + "KERNEL INFO machine check interrupt",
      head + "KERNEL INFO data storage interrupt",
  };
}

namespace {

std::string two_digits(int v) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%02d", v);
  return buf;
}

std::string format_date(std::int64_t ts, bool with_time, Rng& rng) {
  using namespace std::chrono;
  const sys_seconds tp{seconds{ts}};
  const auto day = floor<days>(tp);
  const year_month_day ymd{day};
  const hh_mm_ss hms{tp - day};
  char buf[64];
  if (!with_time) {
    std::snprintf(buf, sizeof buf, "%04d.%02u.%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  } else {
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u-%02d.%02d.%02d.%06d",
                  static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()), static_cast<int>(rng.below(1000000)));
  }
  return buf;
}

std::int64_t parse_int(std::string_view text, std::string_view tmpl) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(Errc::config, "bad integer '" + std::string(text) + "' in template: " +
                                  std::string(tmpl));
  }
  return v;
}

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? s.size() - start
                                                                  : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

}  // namespace

std::string render_template(std::string_view tmpl, std::int64_t timestamp, Rng& rng) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const auto close = tmpl.find('}', open);
    if (close == std::string_view::npos) {
      throw Error(Errc::config, "unterminated placeholder in template: " + std::string(tmpl));
    }
    const auto body = tmpl.substr(open + 1, close - open - 1);
    const auto colon = body.find(':');
    const auto name = body.substr(0, colon);
    const auto args = colon == std::string_view::npos ? std::string_view{} : body.substr(colon + 1);

    if (name == "ts") {
      out += std::to_string(timestamp);
    } else if (name == "date") {
      out += format_date(timestamp, false, rng);
    } else if (name == "stamp") {
      out += format_date(timestamp, true, rng);
    } else if (name == "node") {
      out += "R" + two_digits(static_cast<int>(rng.below(64))) + "-M" +
             std::to_string(rng.below(2)) + "-N" + kHex[rng.below(16)] + "-C:J" +
             two_digits(static_cast<int>(2 + rng.below(17))) + "-U" +
             (rng.below(2) == 0 ? "01" : "11");
    } else if (name == "int") {
      const auto bounds = split_on(args, ':');
      if (bounds.size() != 2) throw Error(Errc::config, "{int:lo:hi} expected in " + std::string(tmpl));
      const auto lo = parse_int(bounds[0], tmpl);
      const auto hi = parse_int(bounds[1], tmpl);
      if (hi < lo) throw Error(Errc::config, "empty {int} range in " + std::string(tmpl));
      out += std::to_string(lo + static_cast<std::int64_t>(rng.below(static_cast<std::size_t>(hi - lo + 1))));
    } else if (name == "hex") {
      const auto n = parse_int(args, tmpl);
      if (n < 1 || n > 64) throw Error(Errc::config, "{hex:n} needs 1 <= n <= 64");
      for (std::int64_t i = 0; i < n; ++i) out += kHex[rng.below(16)];
    } else if (name == "ip") {
      out += "172.16." + std::to_string(rng.below(256)) + "." + std::to_string(rng.below(256));
    } else if (name == "choice") {
      const auto options = split_on(args, '|');
      out += options[rng.below(options.size())];
    } else {
      throw Error(Errc::config, "unknown placeholder {" + std::string(body) + "} in template");
    }
    pos = close + 1;
  }
  return out;
}

std::vector<LogRecord> synth_generate(const SynthConfig& config) {
  if (config.normal_templates.empty()) {
    throw Error(Errc::config, "synth: at least one normal template is required");
  }
  if (!(config.anomaly_rate >= 0.0 && config.anomaly_rate <= 1.0)) {
    throw Error(Errc::config, "synth: anomaly_rate must lie in [0, 1]");
  }
  if (config.anomaly_rate > 0.0 && config.anomaly_templates.empty()) {
    throw Error(Errc::config, "synth: anomaly_rate > 0 requires anomaly templates");
  }

  Rng rng(config.seed);
  std::vector<LogRecord> records;
  records.reserve(config.count);
  std::int64_t ts = config.start_time;
  for (std::size_t i = 0; i < config.count; ++i) {
    ts += static_cast<std::int64_t>(rng.below(3));
    const bool anomalous = config.anomaly_rate > 0.0 && rng.bernoulli(config.anomaly_rate);
    const auto& family = anomalous ? config.anomaly_templates : config.normal_templates;
    const auto& tmpl = family[rng.below(family.size())];
    LogRecord rec;
    rec.line = render_template(tmpl, ts, rng);
    rec.label = anomalous ? Label::anomalous : Label::normal;
    rec.index = i;
    rec.source = config.source;
    records.push_back(std::move(rec));
  }
  return records;
}

CorpusStats corpus_stats(const std::vector<LogRecord>& records) {
  CorpusStats s;
  if (records.empty()) return s;
  s.total = records.size();
  s.min_length = records.front().line.size();
  std::size_t total_length = 0;
  for (const auto& r : records) {
    switch (r.label) {
      case Label::normal: ++s.normal; break;
      case Label::anomalous: ++s.anomalous; break;
      case Label::unlabeled: ++s.unlabeled; break;
    }
    s.min_length = std::min(s.min_length, r.line.size());
    s.max_length = std::max(s.max_length, r.line.size());
    total_length += r.line.size();
  }
  s.mean_length = static_cast<double>(total_length) / static_cast<double>(s.total);
  return s;
}

std::vector<LogRecord> filter_label(const std::vector<LogRecord>& records, Label label) {
  std::vector<LogRecord> out;
  std::copy_if(records.begin(), records.end(), std::back_inserter(out),
               [label](const LogRecord& r) { return r.label == label; });
  return out;
}

}  // namespace loglens
