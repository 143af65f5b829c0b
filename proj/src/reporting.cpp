#include "semcomp/reporting.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "semcomp/error.hpp"
#include "semcomp/file_io.hpp"

namespace semcomp::report {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

double number_from(const Json& j) { return j.is_null() ? kNaN : j.get<double>(); }

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  void row(std::initializer_list<std::string> fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) buf_ += ',';
      buf_ += csv_field(f);
      first = false;
    }
    buf_ += "\r\n";
  }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

std::string flag(bool b) { return b ? "1" : "0"; }

Json flags_to_json(const TrialFlags& f) {
  return {{"cr_clamped", f.cr_clamped}, {"ed_floored", f.ed_floored}, {"replayed", f.replayed}};
}

TrialFlags flags_from_json(const Json& j) {
  return {j.at("cr_clamped").get<bool>(), j.at("ed_floored").get<bool>(), j.at("replayed").get<bool>()};
}

void write_or_throw(const std::filesystem::path& p, std::string_view data) {
  try {
    io::write_file(p, data);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoFailure, p.string() + ": " + e.what());
  }
}

}  // namespace

Json metrics_to_json(const metrics::MetricVector& m) {
  return {{"entropy",
           {{"raw_bits", m.entropy.raw_bits},
            {"normalized", m.entropy.normalized},
            {"distinct_symbols", m.entropy.distinct_symbols}}},
          {"cr",
           {{"value", m.cr.value},
            {"original_bytes", m.cr.original_bytes},
            {"compressed_bytes", m.cr.compressed_bytes}}},
          {"ed", {{"raw", m.ed.raw}, {"normalized", m.ed.normalized}}},
          {"cs", {{"value", m.cs.value}, {"angle_degrees", m.cs.angle_degrees}}},
          {"ere_raw", m.ere_raw},
          {"sre_raw", m.sre_raw}};
}

metrics::MetricVector metrics_from_json(const Json& j) {
  metrics::MetricVector m;
  const Json& e = j.at("entropy");
  m.entropy = {e.at("raw_bits").get<double>(), e.at("normalized").get<double>(),
               e.at("distinct_symbols").get<std::size_t>()};
  const Json& cr = j.at("cr");
  m.cr = {cr.at("value").get<double>(), cr.at("original_bytes").get<std::uint64_t>(),
          cr.at("compressed_bytes").get<std::uint64_t>()};
  m.ed = {j.at("ed").at("raw").get<std::uint64_t>(), j.at("ed").at("normalized").get<double>()};
  m.cs = {j.at("cs").at("value").get<double>(), j.at("cs").at("angle_degrees").get<double>()};
  m.ere_raw = j.at("ere_raw").get<double>();
  m.sre_raw = j.at("sre_raw").get<double>();
  return m;
}

Json to_json(const CohortReport& r) {
  Json per_text = Json::array();
  for (const auto& row : r.per_text) {
    per_text.push_back({{"text_id", row.text_id},
                        {"method_id", row.method_id},
                        {"metrics", metrics_to_json(row.metrics)},
                        {"flags", flags_to_json(row.flags)}});
  }
  Json averaged = Json::array();
  for (const auto& a : r.averaged) {
    averaged.push_back({{"method_id", a.method_id},
                        {"trials", a.trials},
                        {"entropy", number(a.entropy)},
                        {"entropy_bits", number(a.entropy_bits)},
                        {"cr", number(a.cr)},
                        {"ed", number(a.ed)},
                        {"cs", number(a.cs)},
                        {"ere_raw", number(a.ere_raw)},
                        {"sre_raw", number(a.sre_raw)},
                        {"ere_norm", number(a.ere_norm)},
                        {"sre_norm", number(a.sre_norm)}});
  }
  Json failures = Json::array();
  for (const auto& f : r.failures) {
    failures.push_back({{"text_id", f.text_id},
                        {"method_id", f.method_id},
                        {"stage", f.stage},
                        {"code", f.code},
                        {"reason", f.reason}});
  }
  const RunMetadata& m = r.metadata;
  return {{"metadata",
           {{"config_digest", m.config_digest},
            {"transport", m.transport},
            {"timestamp", m.timestamp},
            {"normalization_note", m.normalization_note},
            {"norm_mode", m.norm_mode},
            {"epsilon", m.epsilon}}},
          {"per_text", std::move(per_text)},
          {"averaged", std::move(averaged)},
          {"failures", std::move(failures)}};
}

CohortReport from_json(const Json& j) {
  CohortReport r;
  try {
    const Json& m = j.at("metadata");
    r.metadata = {m.at("config_digest").get<std::string>(),       m.at("transport").get<std::string>(),
                  m.at("timestamp").get<std::string>(),           m.at("normalization_note").get<std::string>(),
                  m.at("norm_mode").get<std::string>(),           m.at("epsilon").get<double>()};
    for (const auto& row : j.at("per_text")) {
      r.per_text.push_back({row.at("text_id").get<std::string>(), row.at("method_id").get<std::string>(),
                            metrics_from_json(row.at("metrics")), flags_from_json(row.at("flags"))});
    }
    for (const auto& a : j.at("averaged")) {
      AveragedRow row;
      row.method_id = a.at("method_id").get<std::string>();
      row.trials = a.at("trials").get<std::size_t>();
      row.entropy = number_from(a.at("entropy"));
      row.entropy_bits = number_from(a.at("entropy_bits"));
      row.cr = number_from(a.at("cr"));
      row.ed = number_from(a.at("ed"));
      row.cs = number_from(a.at("cs"));
      row.ere_raw = number_from(a.at("ere_raw"));
      row.sre_raw = number_from(a.at("sre_raw"));
      row.ere_norm = number_from(a.at("ere_norm"));
      row.sre_norm = number_from(a.at("sre_norm"));
      r.averaged.push_back(row);
    }
    for (const auto& f : j.at("failures")) {
      r.failures.push_back({f.at("text_id").get<std::string>(), f.at("method_id").get<std::string>(),
                            f.at("stage").get<std::string>(), f.at("code").get<std::string>(),
                            f.at("reason").get<std::string>()});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("report document: ") + e.what());
  }
  return r;
}

std::string canonical_json(const CohortReport& report) { return to_json(report).dump(); }

std::string format3(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string per_text_csv(const CohortReport& r) {
  CsvWriter w;
  w.row({"text_id", "method_id", "entropy", "entropy_bits", "cr", "ed", "cs", "ere_raw", "sre_raw",
         "cr_clamped", "ed_floored", "replayed"});
  for (const auto& row : r.per_text) {
    const auto& m = row.metrics;
    w.row({row.text_id, row.method_id, format3(m.entropy.normalized), format3(m.entropy.raw_bits),
           format3(m.cr.value), format3(m.ed.normalized), format3(m.cs.value), format3(m.ere_raw),
           format3(m.sre_raw), flag(row.flags.cr_clamped), flag(row.flags.ed_floored),
           flag(row.flags.replayed)});
  }
  return w.take();
}

std::string averaged_csv(const CohortReport& r) {
  CsvWriter w;
  w.row({"method", "entropy", "cr", "ed", "cs", "ere_norm", "sre_norm"});
  for (const auto& a : r.averaged) {
    w.row({a.method_id, format3(a.entropy), format3(a.cr), format3(a.ed), format3(a.cs), format3(a.ere_norm),
           format3(a.sre_norm)});
  }
  return w.take();
}

std::string failures_csv(const CohortReport& r) {
  CsvWriter w;
  w.row({"text_id", "method_id", "stage", "code", "reason"});
  for (const auto& f : r.failures) w.row({f.text_id, f.method_id, f.stage, f.code, f.reason});
  return w.take();
}

std::vector<std::filesystem::path> emit_csv(const CohortReport& report, const std::filesystem::path& out_dir) {
  const std::vector<std::pair<std::string, std::string>> files = {
      {"per_text.csv", per_text_csv(report)},
      {"averaged.csv", averaged_csv(report)},
      {"failures.csv", failures_csv(report)},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, body] : files) {
    written.push_back(out_dir / name);
    write_or_throw(written.back(), body);
  }
  return written;
}

void emit_json(const CohortReport& report, const std::filesystem::path& out_path) {
  write_or_throw(out_path, canonical_json(report) + "\n");
}

CohortReport load_json(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return from_json(j);
}

std::vector<std::filesystem::path> emit_plot_series(const CohortReport& report,
                                                    const std::filesystem::path& out_dir) {
  struct Series {
    const char* file;
    double (*value)(const metrics::MetricVector&);
  };
  static constexpr Series kSeries[] = {
      {"entropy_by_text.csv", [](const metrics::MetricVector& m) { return m.entropy.normalized; }},
      {"cr_by_text.csv", [](const metrics::MetricVector& m) { return m.cr.value; }},
      {"ed_by_text.csv", [](const metrics::MetricVector& m) { return m.ed.normalized; }},
      {"cs_by_text.csv", [](const metrics::MetricVector& m) { return m.cs.value; }},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& s : kSeries) {
    CsvWriter w;
    w.row({"text_id", "method_id", "value"});
    for (const auto& row : report.per_text) w.row({row.text_id, row.method_id, format3(s.value(row.metrics))});
    written.push_back(out_dir / s.file);
    write_or_throw(written.back(), w.take());
  }
  return written;
}

}  // namespace semcomp::report
