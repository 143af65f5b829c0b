#pragma once

// Corpus evaluation: every (text x method) pair is compressed, decompressed
// in a separate exchange and scored; per-method means and cohort-normalized
// ERE/SRE are assembled into a CohortReport.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/codec.hpp"
#include "semcomp/corpus.hpp"
#include "semcomp/error.hpp"
#include "semcomp/llm_gateway.hpp"
#include "semcomp/metrics.hpp"
#include "semcomp/prompt_catalog.hpp"
#include "semcomp/reporting.hpp"

namespace semcomp::pipeline {

using Json = nlohmann::json;

enum class MethodKind { Llm, Codec };

struct MethodSpec {
  std::string method_id;
  MethodKind kind = MethodKind::Codec;
  // llm methods
  std::string endpoint;
  prompts::Strategy strategy = prompts::Strategy::Base;
  // codec methods
  codec::CodecLevel level{codec::CodecLevel::kMost};

  Json to_json() const;
};

/// "codec:<level>" or "llm:<endpoint>:<strategy>"; the text becomes the id.
MethodSpec parse_method_shorthand(std::string_view text);

struct RunConfig {
  std::filesystem::path corpus_manifest;
  std::string corpus_ref;  // as written in the config file
  std::map<std::string, llm::EndpointProfile> endpoints;
  std::string embedding_endpoint;  // required when any llm method is present
  std::vector<MethodSpec> methods;
  double epsilon = metrics::kDefaultEpsilon;
  metrics::NormMode norm = metrics::NormMode::MaxDivide;
  llm::TransportSpec transport;
  std::string transport_ref;  // as written
  std::filesystem::path out_dir;
  unsigned workers = 4;

  /// Throws Error(ConfigInvalid).
  void validate() const;
  /// Result-affecting settings only (no output directory, no worker count).
  Json to_json() const;
  std::string digest() const;
  std::vector<llm::EndpointProfile> profiles() const;
};

/// Relative paths inside the document resolve against `base_dir`.
RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

std::string_view to_string(metrics::NormMode mode) noexcept;
metrics::NormMode parse_norm_mode(std::string_view s);

struct TrialResult {
  std::string text_id;
  std::string method_id;
  codec::Bytes compressed_bytes;
  std::string decompressed_text;
  std::optional<llm::ChatExchange> compress_exchange;
  std::optional<llm::ChatExchange> decompress_exchange;
  metrics::MetricVector metrics;
  report::TrialFlags flags;

  Json to_json() const;
};

/// Raised by TrialRunner::run; carries the step that failed
/// (compress, decompress, codec, embed or score).
class TrialError : public Error {
 public:
  TrialError(std::string stage, const Error& cause);
  const std::string& stage() const noexcept { return stage_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string stage_;
  std::string reason_;
};

/// Embeddings keyed by the SHA-256 of the text; each distinct text is
/// requested at most once per cache. Safe for concurrent use.
class EmbeddingCache {
 public:
  EmbeddingCache(llm::Gateway& gateway, std::optional<llm::EndpointProfile> profile);

  std::shared_ptr<const llm::EmbeddingVector> get(std::string_view text);
  /// Cosine of the two texts' embeddings. Identical texts resolve to the same
  /// vector; without an embedding profile only identical texts can be scored.
  metrics::CosineScore similarity(std::string_view a, std::string_view b);
  std::size_t lookups() const;

 private:
  struct Slot;
  llm::Gateway& gateway_;
  std::optional<llm::EndpointProfile> profile_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Slot>> slots_;
  std::size_t lookups_ = 0;
};

/// Drop exactly one leading and one trailing newline.
std::string trim_single_newlines(std::string_view s);

class TrialRunner {
 public:
  TrialRunner(const RunConfig& config, llm::Gateway& gateway, const prompts::PromptCatalog& catalog,
              EmbeddingCache& embeddings);

  /// Throws TrialError.
  TrialResult run(const corpus::TextRecord& text, const MethodSpec& method);

 private:
  TrialResult run_codec(const corpus::TextRecord& text, const MethodSpec& method);
  TrialResult run_llm(const corpus::TextRecord& text, const MethodSpec& method);

  const RunConfig& config_;
  llm::Gateway& gateway_;
  const prompts::PromptCatalog& catalog_;
  EmbeddingCache& embeddings_;
};

struct CohortRun {
  report::CohortReport report;
  std::vector<TrialResult> trials;  // successful trials, sorted by (text_id, method_id)
};

struct RunHooks {
  std::function<std::string()> clock;  // UTC timestamp; defaults to the system clock
  std::function<void(const std::string&)> log;
};

/// Throws Error(ConfigInvalid) for invalid configs. Failed trials never
/// abort the run; they are listed in the report.
CohortRun run_cohort(const RunConfig& config, llm::Gateway& gateway, const RunHooks& hooks = {});

/// Run with the transport named in the config.
CohortRun run_cohort(const RunConfig& config, const RunHooks& hooks = {});

/// Per-method means over successful trials plus cohort normalization.
std::vector<report::AveragedRow> average_rows(const std::vector<report::PerTextRow>& rows,
                                              const std::vector<std::string>& method_order,
                                              metrics::NormMode mode, std::string* note = nullptr);

std::string utc_timestamp();

/// Writes trials.jsonl, one TrialResult per line.
void emit_trials(const std::vector<TrialResult>& trials, const std::filesystem::path& path);

}  // namespace semcomp::pipeline
