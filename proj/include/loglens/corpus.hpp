#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace loglens {

class Rng;

enum class Label { normal, anomalous, unlabeled };

std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);

/// One raw log line. `index` is the zero-based chronological position
/// within its corpus.
struct LogRecord {
  std::string line;
  Label label = Label::unlabeled;
  std::size_t index = 0;
  std::string source;

  bool operator==(const LogRecord&) const = default;
};

enum class LogFormat {
  alert_tag,  // BGL/Thunderbird: first field "-" is normal, anything else anomalous
  tsv,        // "label<TAB>line"
  automatic,  // tsv for *.tsv paths, alert_tag otherwise
};

std::optional<LogFormat> parse_log_format(std::string_view text);

/// Reads a labeled log file. Blank lines are skipped; CR before LF is
/// stripped. Throws Errc::io if unreadable and Errc::empty_corpus when no
/// records result.
std::vector<LogRecord> load_labeled_log(const std::filesystem::path& path,
                                        std::string_view source_id,
                                        LogFormat format = LogFormat::alert_tag);

/// Alert-tag label of a single line.
Label alert_tag_label(std::string_view line);

/// Drops the leading alert-tag field and the whitespace after it, so a
/// model fed BGL/Thunderbird lines never sees the label column.
std::string strip_alert_tag(std::string_view line);

/// Writes records as "label<TAB>line", one per line.
void write_tsv(const std::vector<LogRecord>& records, const std::filesystem::path& path);

struct SplitSpec {
  double train_fraction = 0.8;
  double update_fraction = 0.0;
  double test_fraction = 0.2;

  /// Throws Errc::config unless fractions are in [0,1] and sum to 1.
  void validate() const;
};

struct CorpusSplit {
  std::vector<LogRecord> train;
  std::vector<LogRecord> update;
  std::vector<LogRecord> test;
};

/// Contiguous prefix / middle / suffix in index order. Part sizes are
/// floor(n * fraction); the remainder goes to test.
CorpusSplit chronological_split(const std::vector<LogRecord>& records, const SplitSpec& spec);

struct BalancedTestSet {
  std::vector<LogRecord> records;
  std::size_t anomalous = 0;
  std::size_t normal = 0;
  /// True when there were fewer normals than anomalies.
  bool imbalanced = false;
};

/// Keeps every anomalous record plus an equal number of normals sampled
/// without replacement, in original order. Unlabeled records are dropped.
BalancedTestSet balance_test_set(const std::vector<LogRecord>& records, std::uint64_t seed);

/// Template language for synthetic lines. Placeholders:
///   {ts}            epoch seconds, nondecreasing over the corpus
///   {date}          yyyy.mm.dd of {ts}
///   {stamp}         yyyy-mm-dd-hh.mm.ss.uuuuuu of {ts}
///   {node}          BGL-style location, e.g. R12-M0-N3-C:J07-U01
///   {int:lo:hi}     uniform integer
///   {hex:n}         n hex digits
///   {ip}            dotted quad
///   {choice:a|b|c}  one of the alternatives
struct SynthConfig {
  std::vector<std::string> normal_templates;
  std::vector<std::string> anomaly_templates;
  std::size_t count = 1000;
  double anomaly_rate = 0.0;
  std::uint64_t seed = 0;
  std::string source = "synth";
  /// First timestamp emitted.
  std::int64_t start_time = 1117838570;
};

/// Built-in BGL-flavoured families.
std::vector<std::string> default_normal_templates();
std::vector<std::string> default_anomaly_templates();
/// Anomalies phrased like the normal INFO lines and disjoint from both
/// families above; used to check label-driven updates.
std::vector<std::string> novel_anomaly_templates();

/// Instantiates one template. Throws Errc::config on a malformed placeholder.
std::string render_template(std::string_view tmpl, std::int64_t timestamp, Rng& rng);

/// Each line is anomalous with probability anomaly_rate, drawn from the
/// matching family. Throws Errc::config without normal templates, with
/// anomaly_rate > 0 and no anomaly templates, or with rate outside [0,1].
std::vector<LogRecord> synth_generate(const SynthConfig& config);

struct CorpusStats {
  std::size_t total = 0;
  std::size_t normal = 0;
  std::size_t anomalous = 0;
  std::size_t unlabeled = 0;
  std::size_t min_length = 0;
  double mean_length = 0.0;
  std::size_t max_length = 0;

  bool operator==(const CorpusStats&) const = default;
};

CorpusStats corpus_stats(const std::vector<LogRecord>& records);

/// Records with the given label, in order.
std::vector<LogRecord> filter_label(const std::vector<LogRecord>& records, Label label);

}  // namespace loglens
