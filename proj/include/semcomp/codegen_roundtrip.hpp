#pragma once

// Code-generation round trip: describe a function, compress the description,
// rebuild the function from both descriptions, and ask a judge whether each
// rebuild is functionally equivalent to the original. Every stage is its own
// single-turn exchange.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcomp/eval_pipeline.hpp"
#include "semcomp/llm_gateway.hpp"
#include "semcomp/metrics.hpp"
#include "semcomp/prompt_catalog.hpp"

namespace semcomp::codegen {

using Json = nlohmann::json;

enum class Verdict { Equivalent, Partial, NotEquivalent };
std::string_view to_string(Verdict v) noexcept;
/// Accepts the judge tokens (EQUIVALENT, PARTIAL, NOT_EQUIVALENT) and the
/// manifest spellings (yes, partial, no).
Verdict parse_verdict_name(std::string_view s);

struct ExpectedEquivalence {
  Verdict baseline = Verdict::Equivalent;
  Verdict compressed = Verdict::Equivalent;
};

struct CodegenCase {
  std::string case_id;
  std::string source_text;
  std::string language_tag;
  std::optional<ExpectedEquivalence> expected;
};

/// {"cases": [{"case_id", "path", "language_tag", "expected_equivalence"}]}
/// with paths relative to the manifest. Throws ManifestInvalid / MissingFile.
std::vector<CodegenCase> load_cases(const std::filesystem::path& manifest_path);

struct Judgment {
  Verdict verdict = Verdict::NotEquivalent;
  std::string rationale;
  std::optional<llm::ChatExchange> exchange;
};

/// Strict parse: the first non-blank line must be "VERDICT: <token>".
/// Throws Error(UnparseableVerdict).
Judgment parse_verdict(std::string_view response);

/// Judge payload layout shared by the runner and fixture tooling.
std::string judge_payload(std::string_view original, std::string_view reconstruction);

Judgment judge_equivalence(std::string_view original, std::string_view reconstruction,
                           const llm::EndpointProfile& profile, llm::Gateway& gateway,
                           const prompts::PromptCatalog& catalog = prompts::PromptCatalog::builtin());

struct RoundTripRecord {
  std::string case_id;
  std::string description;               // stage 1
  std::string compressed_description;    // stage 2
  std::string reconstruction_base;       // stage 3
  std::string reconstruction_compressed; // stage 4
  std::optional<Judgment> judgment_base;
  std::optional<Judgment> judgment_compressed;
  std::optional<metrics::CompressionRatio> description_cr;
  std::optional<metrics::EditDistance> ed_base;
  std::optional<metrics::EditDistance> ed_compressed;
  std::optional<metrics::CosineScore> cs_base;
  std::optional<metrics::CosineScore> cs_compressed;
  std::optional<ExpectedEquivalence> expected;
  std::vector<llm::ChatExchange> exchanges;  // in stage order
  std::string failed_stage;                  // empty when complete
  std::string failure_reason;

  bool failed() const noexcept { return !failed_stage.empty(); }
  Json to_json() const;
};

/// Never throws for model or transport errors; the record names the stage
/// that failed instead. `embeddings` may be null, in which case no cosine
/// scores are recorded.
RoundTripRecord run_roundtrip(const CodegenCase& c, const llm::EndpointProfile& profile, llm::Gateway& gateway,
                              pipeline::EmbeddingCache* embeddings = nullptr,
                              const prompts::PromptCatalog& catalog = prompts::PromptCatalog::builtin());

struct VerdictCounts {
  std::size_t equivalent = 0;
  std::size_t partial = 0;
  std::size_t not_equivalent = 0;
  std::size_t missing = 0;  // record failed before a verdict existed

  friend bool operator==(const VerdictCounts&, const VerdictCounts&) = default;
};

struct RoundTripSummary {
  std::size_t records = 0;
  VerdictCounts baseline;
  VerdictCounts compressed;
  std::size_t cr_samples = 0;
  double mean_description_cr = 0.0;
  std::uint64_t base_token_limit = 0;
  std::optional<std::uint64_t> effective_token_limit;  // absent when the mean CR is outside [0, 1)

  Json to_json() const;
};

RoundTripSummary summarize_roundtrips(const std::vector<RoundTripRecord>& records, std::uint64_t base_token_limit);

struct CodegenConfig {
  std::filesystem::path cases_manifest;
  std::string endpoint;
  std::map<std::string, llm::EndpointProfile> endpoints;
  std::string embedding_endpoint;  // optional
  std::uint64_t base_token_limit = 32000;
  llm::TransportSpec transport;
  std::filesystem::path out_dir;
  unsigned workers = 4;

  void validate() const;
  std::vector<llm::EndpointProfile> profiles() const;
};

CodegenConfig parse_codegen_config(const Json& j, const std::filesystem::path& base_dir);
CodegenConfig load_codegen_config(const std::filesystem::path& path);

struct CodegenRun {
  std::vector<RoundTripRecord> records;  // in manifest order
  RoundTripSummary summary;
};

/// Cases run concurrently; stages within a case run in order.
CodegenRun run_codegen(const CodegenConfig& config, llm::Gateway& gateway);
CodegenRun run_codegen(const CodegenConfig& config);

/// roundtrips.jsonl, codegen_cases.csv and codegen_summary.json.
std::vector<std::filesystem::path> emit_codegen(const CodegenRun& run, const std::filesystem::path& out_dir);

}  // namespace semcomp::codegen
