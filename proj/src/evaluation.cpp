#include "loglens/evaluation.hpp"

#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "loglens/error.hpp"

namespace loglens {

ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw Error(Errc::shape, "confusion: " + std::to_string(predictions.size()) +
                                 " predictions for " + std::to_string(labels.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == 1;
    const bool truth = labels[i] == 1;
    if (pred && truth) ++c.tp;
    else if (pred) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

PrecisionRecallF1 prf1(const ConfusionCounts& c) {
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  PrecisionRecallF1 m;
  m.precision = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
  m.recall = ratio(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
  m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
  return m;
}

MetricsReport evaluate(const ModelParams& params, const std::vector<LogRecord>& testset,
                       const Vocabulary& vocab, std::size_t max_len,
                       std::optional<double> threshold) {
  if (max_len != params.config.max_len) {
    throw Error(Errc::shape, "evaluate: max_len " + std::to_string(max_len) +
                                 " differs from the model's " +
                                 std::to_string(params.config.max_len));
  }
  std::vector<int> predictions, labels;
  predictions.reserve(testset.size());
  labels.reserve(testset.size());
  for (const auto& r : testset) {
    if (r.label == Label::unlabeled) {
      throw Error(Errc::label_missing, "test record " + std::to_string(r.index) + " has no label");
    }
    const Probabilities p = classify(params, encode_line(r.line, vocab, max_len));
    predictions.push_back(threshold ? (p.anomalous >= *threshold ? 1 : 0) : p.argmax());
    labels.push_back(r.label == Label::anomalous ? 1 : 0);
  }
  MetricsReport report;
  report.counts = confusion(predictions, labels);
  const auto m = prf1(report.counts);
  report.precision = m.precision;
  report.recall = m.recall;
  report.f1 = m.f1;
  if (!testset.empty()) report.dataset = testset.front().source;
  return report;
}

namespace {

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string render_report_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "run_id,dataset,split,precision,recall,f1,tp,fp,fn,tn,seed\n";
  for (const auto& r : reports) {
    out += csv_field(r.run_id) + "," + csv_field(r.dataset) + "," + csv_field(r.split) + "," +
           fixed6(r.precision) + "," + fixed6(r.recall) + "," + fixed6(r.f1) + "," +
           std::to_string(r.counts.tp) + "," + std::to_string(r.counts.fp) + "," +
           std::to_string(r.counts.fn) + "," + std::to_string(r.counts.tn) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

std::string render_report_json(const std::vector<MetricsReport>& reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    // Reals are stored through the same 6-decimal rendering as the CSV.
    arr.push_back({{"run_id", r.run_id},
                   {"dataset", r.dataset},
                   {"split", r.split},
                   {"precision", std::stod(fixed6(r.precision))},
                   {"recall", std::stod(fixed6(r.recall))},
                   {"f1", std::stod(fixed6(r.f1))},
                   {"tp", r.counts.tp},
                   {"fp", r.counts.fp},
                   {"fn", r.counts.fn},
                   {"tn", r.counts.tn},
                   {"seed", r.seed},
                   {"config_digest", r.config_digest}});
  }
  return arr.dump(2) + "\n";
}

std::vector<MetricsReport> parse_report_json(const std::string& text) {
  std::vector<MetricsReport> out;
  try {
    for (const auto& j : nlohmann::json::parse(text)) {
      MetricsReport r;
      r.run_id = j.at("run_id").get<std::string>();
      r.dataset = j.at("dataset").get<std::string>();
      r.split = j.at("split").get<std::string>();
      r.precision = j.at("precision").get<double>();
      r.recall = j.at("recall").get<double>();
      r.f1 = j.at("f1").get<double>();
      r.counts.tp = j.at("tp").get<std::size_t>();
      r.counts.fp = j.at("fp").get<std::size_t>();
      r.counts.fn = j.at("fn").get<std::size_t>();
      r.counts.tn = j.at("tn").get<std::size_t>();
      r.seed = j.at("seed").get<std::uint64_t>();
      r.config_digest = j.value("config_digest", "");
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_input, std::string("malformed report JSON: ") + e.what());
  }
  return out;
}

void emit_report(const std::vector<MetricsReport>& reports, const std::filesystem::path& path,
                 ReportFormat format) {
  if (reports.empty()) throw Error(Errc::precondition, "emit_report: no reports");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write report " + path.string());
  out << (format == ReportFormat::csv ? render_report_csv(reports) : render_report_json(reports));
  if (!out) throw Error(Errc::io, "error while writing report " + path.string());
}

}  // namespace loglens
