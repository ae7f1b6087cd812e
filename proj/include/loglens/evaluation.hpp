#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loglens/corpus.hpp"
#include "loglens/encoding.hpp"
#include "loglens/model.hpp"

namespace loglens {

/// Anomalous is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  std::size_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws Errc::shape on length mismatch.
ConfusionCounts confusion(std::span<const int> predictions, std::span<const int> labels);

struct PrecisionRecallF1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Any 0/0 ratio is taken as 0.
PrecisionRecallF1 prf1(const ConfusionCounts& counts);

struct MetricsReport {
  std::string run_id;
  std::string dataset;
  std::string split;
  std::string config_digest;
  std::uint64_t seed = 0;
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Argmax classification of every record (or p_anomalous >= threshold when
/// one is given). Throws Errc::label_missing on an unlabeled record.
MetricsReport evaluate(const ModelParams& params, const std::vector<LogRecord>& testset,
                       const Vocabulary& vocab, std::size_t max_len,
                       std::optional<double> threshold = std::nullopt);

enum class ReportFormat { csv, json };

/// CSV columns: run_id,dataset,split,precision,recall,f1,tp,fp,fn,tn,seed
/// with reals as %.6f. Throws Errc::io on write failure.
void emit_report(const std::vector<MetricsReport>& reports, const std::filesystem::path& path,
                 ReportFormat format);

std::string render_report_csv(const std::vector<MetricsReport>& reports);
std::string render_report_json(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> parse_report_json(const std::string& text);

}  // namespace loglens
