#pragma once

// Cohort report model and its three projections: CSV tables, a canonical
// JSON document, and long-form plot series.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/metrics.hpp"

namespace semcomp::report {

using Json = nlohmann::json;

struct TrialFlags {
  bool cr_clamped = false;
  bool ed_floored = false;
  bool replayed = false;

  friend bool operator==(const TrialFlags&, const TrialFlags&) = default;
};

struct PerTextRow {
  std::string text_id;
  std::string method_id;
  metrics::MetricVector metrics;
  TrialFlags flags;
};

/// Means over a method's successful trials. Fields are NaN when the method
/// has no successful trial.
struct AveragedRow {
  std::string method_id;
  std::size_t trials = 0;
  double entropy = 0.0;  // mean normalized entropy
  double entropy_bits = 0.0;
  double cr = 0.0;
  double ed = 0.0;
  double cs = 0.0;
  double ere_raw = 0.0;
  double sre_raw = 0.0;
  double ere_norm = 0.0;
  double sre_norm = 0.0;
};

struct FailureRow {
  std::string text_id;
  std::string method_id;
  std::string stage;
  std::string code;
  std::string reason;

  friend bool operator==(const FailureRow&, const FailureRow&) = default;
};

struct RunMetadata {
  std::string config_digest;
  std::string transport;
  std::string timestamp;  // UTC, ISO 8601
  std::string normalization_note;
  std::string norm_mode;
  double epsilon = metrics::kDefaultEpsilon;
};

struct CohortReport {
  RunMetadata metadata;
  std::vector<PerTextRow> per_text;   // sorted by (text_id, method_id)
  std::vector<AveragedRow> averaged;  // in configured method order
  std::vector<FailureRow> failures;   // sorted by (text_id, method_id)
};

Json metrics_to_json(const metrics::MetricVector& m);
metrics::MetricVector metrics_from_json(const Json& j);

Json to_json(const CohortReport& report);
CohortReport from_json(const Json& j);

/// Compact dump with sorted keys; the form written by emit_json.
std::string canonical_json(const CohortReport& report);

/// Fixed three-decimal rendering used by every CSV cell. NaN renders empty.
std::string format3(double v);

std::string per_text_csv(const CohortReport& report);
std::string averaged_csv(const CohortReport& report);
std::string failures_csv(const CohortReport& report);

/// Writes per_text.csv, averaged.csv and failures.csv. Throws Error(IoFailure).
std::vector<std::filesystem::path> emit_csv(const CohortReport& report, const std::filesystem::path& out_dir);

/// Writes the canonical JSON document. Throws Error(IoFailure).
void emit_json(const CohortReport& report, const std::filesystem::path& out_path);
CohortReport load_json(const std::filesystem::path& path);

/// One [text_id, method_id, value] file per figure family: entropy, cr, ed, cs.
std::vector<std::filesystem::path> emit_plot_series(const CohortReport& report,
                                                    const std::filesystem::path& out_dir);

}  // namespace semcomp::report
