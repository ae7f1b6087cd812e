#include "loglens/cli.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "loglens/error.hpp"
#include "loglens/rng.hpp"

namespace loglens::cli {

using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config parsing

// One JSON object being read. Every key must be consumed before finish();
// whatever is left over is an unknown key.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(Errc::config, where() + " must be a JSON object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    const json* v = take(key);
    if (!v) return;
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v->is_number()) throw Error(Errc::config, "");
      } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
        if (!v->is_number_integer()) throw Error(Errc::config, "");
        if (std::is_unsigned_v<T> && v->get<std::int64_t>() < 0 && !v->is_number_unsigned()) {
          throw Error(Errc::config, "");
        }
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) throw Error(Errc::config, "");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) throw Error(Errc::config, "");
      }
      out = v->get<T>();
    } catch (const std::exception&) {
      throw Error(Errc::config, "config key " + where(key) + " has the wrong type");
    }
  }

  template <typename T, typename Parse>
  void read_enum(const char* key, T& out, Parse parse, const char* choices) {
    std::string text;
    if (!has(key)) return;
    read(key, text);
    const auto parsed = parse(text);
    if (!parsed) {
      throw Error(Errc::config,
                  "config key " + where(key) + ": '" + text + "' is not one of " + choices);
    }
    out = *parsed;
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    const json* v = take(key);
    static const json kEmpty = json::object();
    return Section(v ? *v : kEmpty, where(key));
  }

  const json* take(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "top level" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw Error(Errc::config, "unknown config key: " + where(key));
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::optional<AnomalyFamily> parse_family(std::string_view s) {
  if (s == "standard") return AnomalyFamily::standard;
  if (s == "novel") return AnomalyFamily::novel;
  return std::nullopt;
}

std::string_view to_string(AnomalyFamily f) {
  return f == AnomalyFamily::standard ? "standard" : "novel";
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "json") return ReportFormat::json;
  return std::nullopt;
}

std::optional<StorageType> parse_dtype(std::string_view s) {
  if (s == "float64") return StorageType::float64;
  if (s == "float32") return StorageType::float32;
  return std::nullopt;
}

std::string_view format_name(LogFormat f) {
  switch (f) {
    case LogFormat::alert_tag: return "alert_tag";
    case LogFormat::tsv: return "tsv";
    case LogFormat::automatic: return "auto";
  }
  return "auto";
}

void read_train(Section s, TrainConfig& t) {
  s.read("learning_rate", t.learning_rate);
  s.read("batch_size", t.batch_size);
  s.read("epochs", t.epochs);
  s.read_enum("optimizer", t.optimizer, parse_optimizer, "sgd, adam");
  s.read("beta1", t.beta1);
  s.read("beta2", t.beta2);
  s.read("adam_eps", t.adam_eps);
  s.finish();
}

template <typename T, typename Parse>
void read_enum_list(Section& s, const char* key, std::vector<T>& out, Parse parse,
                    const char* choices) {
  const json* v = s.take(key);
  if (!v) return;
  if (!v->is_array()) throw Error(Errc::config, "config key " + s.where(key) + " must be a list");
  out.clear();
  for (const auto& item : *v) {
    const auto parsed = item.is_string() ? parse(item.get<std::string>()) : std::nullopt;
    if (!parsed) {
      throw Error(Errc::config, "config key " + s.where(key) + ": " + item.dump() +
                                    " is not one of " + choices);
    }
    out.push_back(*parsed);
  }
}

json train_json(const TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"batch_size", t.batch_size},
          {"epochs", t.epochs},               {"optimizer", to_string(t.optimizer)},
          {"beta1", t.beta1},                 {"beta2", t.beta2},
          {"adam_eps", t.adam_eps}};
}

json config_json(const RunConfig& c) {
  json ops = json::array(), grans = json::array();
  for (EditOp op : c.perturbation.operations) ops.push_back(to_string(op));
  for (Granularity g : c.perturbation.granularities) grans.push_back(to_string(g));
  json update = train_json(c.update.train);
  update["max_labels"] = c.update.max_labels;
  return {
      {"seed", c.seed},
      {"model",
       {{"d_model", c.model.d_model},
        {"n_heads", c.model.n_heads},
        {"d_ff", c.model.d_ff},
        {"n_layers", c.model.n_layers},
        {"max_len", c.model.max_len},
        {"classifier_hidden", c.model.classifier_hidden},
        {"dropout", c.model.dropout_rate}}},
      {"train", train_json(c.train)},
      {"update", update},
      {"perturbation",
       {{"operations", ops},
        {"granularities", grans},
        {"rate_min", c.perturbation.rate_min},
        {"rate_max", c.perturbation.rate_max}}},
      {"split",
       {{"train", c.split.train_fraction},
        {"update", c.split.update_fraction},
        {"test", c.split.test_fraction}}},
      {"data", {{"format", format_name(c.data.format)}, {"strip_alert_tag", c.data.strip_alert_tag}}},
      {"eval",
       {{"balance", c.eval.balance},
        {"threshold", c.eval.threshold ? json(*c.eval.threshold) : json(nullptr)},
        {"format", c.eval.format == ReportFormat::csv ? "csv" : "json"}}},
      {"synth",
       {{"count", c.synth.count},
        {"anomaly_rate", c.synth.anomaly_rate},
        {"anomaly_family", to_string(c.synth.anomaly_family)},
        {"start_time", c.synth.start_time}}},
      {"output",
       {{"checkpoint_dtype",
         c.output.checkpoint_dtype == StorageType::float64 ? "float64" : "float32"},
        {"run_id", c.output.run_id}}},
  };
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  update.train.validate();
  perturbation.validate();
  split.validate();
  if (eval.threshold && !(*eval.threshold >= 0.0 && *eval.threshold <= 1.0)) {
    throw Error(Errc::config, "eval.threshold must lie in [0, 1]");
  }
  if (!(synth.anomaly_rate >= 0.0 && synth.anomaly_rate <= 1.0)) {
    throw Error(Errc::config, "synth.anomaly_rate must lie in [0, 1]");
  }
  if (synth.count == 0) throw Error(Errc::config, "synth.count must be positive");
  if (model.vocab_size != fixed_vocab().size()) {
    throw Error(Errc::config, "model vocabulary size must match the fixed vocabulary");
  }
}

RunConfig parse_run_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::config, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section top(root, "");
  top.read("seed", c.seed);
  {
    Section m = top.sub("model");
    m.read("d_model", c.model.d_model);
    m.read("n_heads", c.model.n_heads);
    m.read("d_ff", c.model.d_ff);
    m.read("n_layers", c.model.n_layers);
    m.read("max_len", c.model.max_len);
    m.read("classifier_hidden", c.model.classifier_hidden);
    m.read("dropout", c.model.dropout_rate);
    m.finish();
  }
  read_train(top.sub("train"), c.train);
  {
    Section u = top.sub("update");
    u.read("max_labels", c.update.max_labels);
    read_train(std::move(u), c.update.train);
  }
  {
    Section p = top.sub("perturbation");
    read_enum_list(p, "operations", c.perturbation.operations, parse_edit_op,
                   "insert, substitute, swap, delete");
    read_enum_list(p, "granularities", c.perturbation.granularities, parse_granularity,
                   "character, word");
    p.read("rate_min", c.perturbation.rate_min);
    p.read("rate_max", c.perturbation.rate_max);
    p.finish();
  }
  {
    Section s = top.sub("split");
    s.read("train", c.split.train_fraction);
    s.read("update", c.split.update_fraction);
    s.read("test", c.split.test_fraction);
    s.finish();
  }
  {
    Section d = top.sub("data");
    d.read_enum("format", c.data.format, parse_log_format, "auto, alert_tag, tsv");
    d.read("strip_alert_tag", c.data.strip_alert_tag);
    d.finish();
  }
  {
    Section e = top.sub("eval");
    e.read("balance", c.eval.balance);
    if (const json* t = e.take("threshold"); t && !t->is_null()) {
      if (!t->is_number()) throw Error(Errc::config, "config key eval.threshold has the wrong type");
      c.eval.threshold = t->get<double>();
    }
    e.read_enum("format", c.eval.format, parse_report_format, "csv, json");
    e.finish();
  }
  {
    Section s = top.sub("synth");
    s.read("count", c.synth.count);
    s.read("anomaly_rate", c.synth.anomaly_rate);
    s.read_enum("anomaly_family", c.synth.anomaly_family, parse_family, "standard, novel");
    s.read("start_time", c.synth.start_time);
    s.finish();
  }
  {
    Section o = top.sub("output");
    o.read_enum("checkpoint_dtype", c.output.checkpoint_dtype, parse_dtype, "float64, float32");
    o.read("run_id", c.output.run_id);
    o.finish();
  }
  top.finish();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& config) { return config_json(config).dump(2); }

std::string config_digest(const RunConfig& config) {
  return fnv1a_hex(config_json(config).dump());
}

// ---------------------------------------------------------------------------
// Subcommands

namespace {

// Stream identifiers for derive_seed; each randomized step gets its own.
constexpr std::uint64_t kSeedUpdate = 2;
constexpr std::uint64_t kSeedBalance = 3;
constexpr std::uint64_t kSeedPreview = 4;

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string input, output, out_dir, checkpoint, history, report, split_name = "test";
  std::optional<std::string> format, report_format, family, run_id, optimizer;
  std::optional<std::size_t> count, epochs, batch_size, max_labels;
  std::optional<double> lr, anomaly_rate, threshold, rate, train_f, update_f, test_f;
  bool no_balance = false;
  bool alert_tag_input = false;
};

class Summary {
 public:
  explicit Summary(std::string command) { add("command", command); }

  template <typename T>
  Summary& add(const std::string& key, const T& value) {
    std::ostringstream os;
    os << value;
    items_.push_back(key + "=" + os.str());
    return *this;
  }

  Summary& real(const std::string& key, double value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    items_.push_back(key + "=" + buf);
    return *this;
  }

  std::string str() const {
    std::string s;
    for (const auto& it : items_) s += (s.empty() ? "" : " ") + it;
    return s;
  }

 private:
  std::vector<std::string> items_;
};

LogFormat resolve_format(LogFormat f, const std::filesystem::path& path) {
  if (f != LogFormat::automatic) return f;
  return path.extension() == ".tsv" ? LogFormat::tsv : LogFormat::alert_tag;
}

std::vector<LogRecord> load_records(const std::filesystem::path& path, const DataOptions& data) {
  const LogFormat format = resolve_format(data.format, path);
  auto records = load_labeled_log(path, path.stem().string(), format);
  if (format == LogFormat::alert_tag && data.strip_alert_tag) {
    for (auto& r : records) r.line = strip_alert_tag(r.line);
    std::erase_if(records, [](const LogRecord& r) { return r.line.empty(); });
    if (records.empty()) throw Error(Errc::empty_corpus, "no text left in " + path.string());
  }
  return records;
}

void ensure_parent(const std::filesystem::path& p) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
}

std::string provenance(const std::string& command, const RunConfig& c, std::size_t records) {
  return json{{"command", command},
              {"config_digest", config_digest(c)},
              {"seed", c.seed},
              {"records", records}}
      .dump();
}

int cmd_synth(const RunConfig& c, const Flags& f, std::ostream& out) {
  SynthConfig s;
  s.normal_templates = default_normal_templates();
  s.anomaly_templates = c.synth.anomaly_family == AnomalyFamily::standard
                            ? default_anomaly_templates()
                            : novel_anomaly_templates();
  s.count = c.synth.count;
  s.anomaly_rate = c.synth.anomaly_rate;
  s.seed = c.seed;
  s.start_time = c.synth.start_time;
  const auto records = synth_generate(s);
  ensure_parent(f.output);
  write_tsv(records, f.output);
  const auto stats = corpus_stats(records);
  out << Summary("synth")
             .add("status", "ok")
             .add("records", stats.total)
             .add("normal", stats.normal)
             .add("anomalous", stats.anomalous)
             .add("out", f.output)
             .str()
      << "\n";
  return 0;
}

int cmd_split(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto records = load_records(f.input, c.data);
  const auto parts = chronological_split(records, c.split);
  const std::filesystem::path dir = f.out_dir;
  std::filesystem::create_directories(dir);
  write_tsv(parts.train, dir / "train.tsv");
  write_tsv(parts.update, dir / "update.tsv");
  write_tsv(parts.test, dir / "test.tsv");
  out << Summary("split")
             .add("status", "ok")
             .add("train", parts.train.size())
             .add("update", parts.update.size())
             .add("test", parts.test.size())
             .add("out_dir", f.out_dir)
             .str()
      << "\n";
  return 0;
}

int cmd_train(const RunConfig& c, const Flags& f, std::ostream& out, std::ostream& err) {
  auto records = load_records(f.input, c.data);
  const std::size_t before = records.size();
  std::erase_if(records, [](const LogRecord& r) { return r.label == Label::anomalous; });
  const std::size_t dropped = before - records.size();
  if (dropped > 0) err << "train: ignoring " << dropped << " labeled anomalous records\n";

  TrainConfig t = c.train;
  t.seed = c.seed;
  t.perturbation = c.perturbation;
  const TrainResult result = train_selfsup(init_params(c.model, c.seed), records, t);

  Checkpoint cp;
  cp.params = result.params;
  cp.vocab_digest = fixed_vocab().digest();
  cp.provenance = provenance("train", c, records.size());
  ensure_parent(f.checkpoint);
  save_checkpoint(cp, f.checkpoint, c.output.checkpoint_dtype);
  if (!f.history.empty()) {
    ensure_parent(f.history);
    write_history_csv(result.history, f.history);
  }
  out << Summary("train")
             .add("status", "ok")
             .add("records", records.size())
             .add("dropped_anomalous", dropped)
             .add("epochs", result.history.mean_loss.size())
             .real("final_loss", result.history.mean_loss.back())
             .real("final_accuracy", result.history.accuracy.back())
             .add("checkpoint", f.checkpoint)
             .str()
      << "\n";
  return 0;
}

int cmd_update(const RunConfig& c, const Flags& f, std::ostream& out) {
  Checkpoint cp = load_checkpoint(f.checkpoint);
  const auto records = load_records(f.input, c.data);
  std::vector<LogRecord> normals, anomalies;
  for (const auto& r : records) {
    if (r.label == Label::normal) normals.push_back(r);
    if (r.label == Label::anomalous) anomalies.push_back(r);
  }
  if (c.update.max_labels > 0 && anomalies.size() > c.update.max_labels) {
    anomalies.resize(c.update.max_labels);
  }
  PerturbationSpec spec = c.perturbation;
  spec.seed = derive_seed(c.seed, {kSeedUpdate});
  const UpdateSet set = build_update_set(normals, anomalies, spec);

  TrainConfig t = c.update.train;
  t.seed = derive_seed(c.seed, {kSeedUpdate});
  const TrainResult result = update_with_labels(std::move(cp.params), set, t);

  cp.params = result.params;
  cp.provenance = provenance("update", c, set.items.size());
  ensure_parent(f.output);
  save_checkpoint(cp, f.output, c.output.checkpoint_dtype);
  if (!f.history.empty()) {
    ensure_parent(f.history);
    write_history_csv(result.history, f.history);
  }
  out << Summary("update")
             .add("status", "ok")
             .add("normals", normals.size())
             .add("labeled_anomalies", anomalies.size())
             .add("update_items", set.items.size())
             .add("epochs", result.history.mean_loss.size())
             .real("final_loss", result.history.mean_loss.back())
             .real("final_reward", result.history.mean_reward.back())
             .add("checkpoint", f.output)
             .str()
      << "\n";
  return 0;
}

int cmd_eval(const RunConfig& c, const Flags& f, std::ostream& out, std::ostream& err) {
  const Checkpoint cp = load_checkpoint(f.checkpoint);
  auto records = load_records(f.input, c.data);
  if (c.eval.balance) {
    auto balanced = balance_test_set(records, derive_seed(c.seed, {kSeedBalance}));
    if (balanced.imbalanced) {
      err << "eval: only " << balanced.normal << " normal records for " << balanced.anomalous
          << " anomalies; test set is imbalanced\n";
    }
    records = std::move(balanced.records);
  }
  MetricsReport report =
      evaluate(cp.params, records, fixed_vocab(), cp.params.config.max_len, c.eval.threshold);
  report.run_id = c.output.run_id;
  report.split = f.split_name;
  report.seed = c.seed;
  report.config_digest = config_digest(c);
  ensure_parent(f.report);
  emit_report({report}, f.report, c.eval.format);
  out << Summary("eval")
             .add("status", "ok")
             .add("records", records.size())
             .real("precision", report.precision)
             .real("recall", report.recall)
             .real("f1", report.f1)
             .add("tp", report.counts.tp)
             .add("fp", report.counts.fp)
             .add("fn", report.counts.fn)
             .add("tn", report.counts.tn)
             .add("report", f.report)
             .str()
      << "\n";
  return 0;
}

int cmd_score(const RunConfig& c, const Flags& f, std::istream& in, std::ostream& out) {
  const Checkpoint cp = load_checkpoint(f.checkpoint);
  std::string line;
  std::size_t scored = 0, anomalous = 0, skipped = 0;
  char prob[32];
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = f.alert_tag_input ? strip_alert_tag(line) : line;
    if (text.empty()) {
      ++skipped;
      continue;
    }
    const Probabilities p =
        classify(cp.params, encode_line(text, fixed_vocab(), cp.params.config.max_len));
    const bool flagged = c.eval.threshold ? p.anomalous >= *c.eval.threshold : p.argmax() == 1;
    std::snprintf(prob, sizeof prob, "%.6f", p.anomalous);
    out << prob << '\t' << (flagged ? "anomalous" : "normal") << '\t' << line << '\n';
    ++scored;
    if (flagged) ++anomalous;
  }
  out << Summary("score")
             .add("status", "ok")
             .add("scored", scored)
             .add("anomalous", anomalous)
             .add("skipped", skipped)
             .str()
      << "\n";
  return 0;
}

int cmd_augment_preview(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto records = load_records(f.input, c.data);
  PerturbationSpec spec = c.perturbation;
  if (f.rate) {
    spec.rate_min = *f.rate;
    spec.rate_max = *f.rate;
  }
  spec.validate();
  const std::uint64_t seed = derive_seed(c.seed, {kSeedPreview});
  const std::size_t n = std::min(records.size(), f.count.value_or(10));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = line_rng(seed, i);
    const auto p = perturb_line_traced(records[i].line, spec, rng);
    out << records[i].line << '\t' << p.text << '\t' << to_string(p.granularity) << '\t'
        << p.edits << '\n';
  }
  out << Summary("augment-preview").add("status", "ok").add("previewed", n).str() << "\n";
  return 0;
}

int cmd_stats(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto s = corpus_stats(load_records(f.input, c.data));
  out << Summary("stats")
             .add("status", "ok")
             .add("total", s.total)
             .add("normal", s.normal)
             .add("anomalous", s.anomalous)
             .add("unlabeled", s.unlabeled)
             .add("min_length", s.min_length)
             .real("mean_length", s.mean_length)
             .add("max_length", s.max_length)
             .str()
      << "\n";
  return 0;
}

// Flags win over the config file.
void apply_overrides(RunConfig& c, const Flags& f, const std::string& command) {
  if (f.seed) c.seed = *f.seed;
  if (f.format) {
    const auto fmt = parse_log_format(*f.format);
    if (!fmt) throw Error(Errc::config, "--format must be auto, alert_tag or tsv");
    c.data.format = *fmt;
  }
  TrainConfig& t = command == "update" ? c.update.train : c.train;
  if (f.lr) t.learning_rate = *f.lr;
  if (f.epochs) t.epochs = *f.epochs;
  if (f.batch_size) t.batch_size = *f.batch_size;
  if (f.optimizer) {
    const auto o = parse_optimizer(*f.optimizer);
    if (!o) throw Error(Errc::config, "--optimizer must be sgd or adam");
    t.optimizer = *o;
  }
  if (f.max_labels) c.update.max_labels = *f.max_labels;
  if (command == "synth" && f.count) c.synth.count = *f.count;
  if (f.anomaly_rate) c.synth.anomaly_rate = *f.anomaly_rate;
  if (f.family) {
    const auto fam = parse_family(*f.family);
    if (!fam) throw Error(Errc::config, "--family must be standard or novel");
    c.synth.anomaly_family = *fam;
  }
  if (f.train_f) c.split.train_fraction = *f.train_f;
  if (f.update_f) c.split.update_fraction = *f.update_f;
  if (f.test_f) c.split.test_fraction = *f.test_f;
  if (f.no_balance) c.eval.balance = false;
  if (f.threshold) c.eval.threshold = *f.threshold;
  if (f.report_format) {
    const auto rf = parse_report_format(*f.report_format);
    if (!rf) throw Error(Errc::config, "--report-format must be csv or json");
    c.eval.format = *rf;
  }
  if (f.run_id) c.output.run_id = *f.run_id;
  c.validate();
}

int exit_code_for(Errc code) { return code == Errc::config ? 1 : 2; }

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Character-level Transformer log anomaly detection", "loglens"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("-c,--config", f.config_path, "JSON run configuration");
  app.add_option("--seed", f.seed, "Seed for every randomized step");

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic corpus (TSV)");
  synth->add_option("-o,--out", f.output, "Output TSV file")->required();
  synth->add_option("-n,--count", f.count, "Number of lines");
  synth->add_option("--anomaly-rate", f.anomaly_rate, "Probability a line is anomalous");
  synth->add_option("--family", f.family, "Anomaly templates: standard or novel");

  auto* split = app.add_subcommand("split", "Chronological train/update/test split");
  split->add_option("-i,--input", f.input, "Labeled log file")->required();
  split->add_option("-o,--out-dir", f.out_dir, "Directory for train/update/test.tsv")->required();
  split->add_option("--format", f.format, "auto, alert_tag or tsv");
  split->add_option("--train", f.train_f, "Train fraction");
  split->add_option("--update", f.update_f, "Update fraction");
  split->add_option("--test", f.test_f, "Test fraction");

  auto* train = app.add_subcommand("train", "Self-supervised training on normal lines");
  auto* update = app.add_subcommand("update", "Train the classifier head on labeled anomalies");
  for (auto* sub : {train, update}) {
    sub->add_option("-i,--input", f.input, "Labeled log file")->required();
    sub->add_option("--format", f.format, "auto, alert_tag or tsv");
    sub->add_option("--history", f.history, "Per-epoch history CSV");
    sub->add_option("--lr", f.lr, "Learning rate");
    sub->add_option("--epochs", f.epochs, "Epochs");
    sub->add_option("--batch-size", f.batch_size, "Minibatch size");
    sub->add_option("--optimizer", f.optimizer, "sgd or adam");
  }
  train->add_option("-m,--checkpoint", f.checkpoint, "Output checkpoint")->required();
  update->add_option("-m,--checkpoint", f.checkpoint, "Input checkpoint")->required();
  update->add_option("-o,--out", f.output, "Output checkpoint")->required();
  update->add_option("--max-labels", f.max_labels, "Use at most this many labeled anomalies");

  auto* eval = app.add_subcommand("eval", "Precision, recall and F1 on a labeled file");
  eval->add_option("-m,--checkpoint", f.checkpoint, "Model checkpoint")->required();
  eval->add_option("-i,--input", f.input, "Labeled log file")->required();
  eval->add_option("-r,--report", f.report, "Report output path")->required();
  eval->add_option("--format", f.format, "auto, alert_tag or tsv");
  eval->add_option("--report-format", f.report_format, "csv or json");
  eval->add_option("--split", f.split_name, "Split name recorded in the report");
  eval->add_option("--run-id", f.run_id, "Run id recorded in the report");
  eval->add_option("--threshold", f.threshold, "Flag when p_anomalous >= threshold");
  eval->add_flag("--no-balance", f.no_balance, "Evaluate the file as is");

  auto* score = app.add_subcommand("score", "Score lines from standard input");
  score->add_option("-m,--checkpoint", f.checkpoint, "Model checkpoint")->required();
  score->add_option("--threshold", f.threshold, "Flag when p_anomalous >= threshold");
  score->add_flag("--alert-tag", f.alert_tag_input, "Drop the leading alert-tag field");

  auto* preview = app.add_subcommand("augment-preview", "Show perturbed lines next to originals");
  preview->add_option("-i,--input", f.input, "Log file")->required();
  preview->add_option("--format", f.format, "auto, alert_tag or tsv");
  preview->add_option("-n,--count", f.count, "Lines to preview");
  preview->add_option("--rate", f.rate, "Fixed perturbation rate");

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("-i,--input", f.input, "Log file")->required();
  stats->add_option("--format", f.format, "auto, alert_tag or tsv");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    RunConfig config = f.config_path.empty() ? RunConfig{} : load_run_config(f.config_path);
    apply_overrides(config, f, command);
    if (command == "synth") return cmd_synth(config, f, out);
    if (command == "split") return cmd_split(config, f, out);
    if (command == "train") return cmd_train(config, f, out, err);
    if (command == "update") return cmd_update(config, f, out);
    if (command == "eval") return cmd_eval(config, f, out, err);
    if (command == "score") return cmd_score(config, f, in, out);
    if (command == "augment-preview") return cmd_augment_preview(config, f, out);
    return cmd_stats(config, f, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    const int code = exit_code_for(e.code());
    out << Summary(command).add("status", "error").add("exit", code).add("error", to_string(e.code())).str()
        << "\n";
    return code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    out << Summary(command).add("status", "error").add("exit", 2).add("error", "runtime").str()
        << "\n";
    return 2;
  }
}

}  // namespace loglens::cli
