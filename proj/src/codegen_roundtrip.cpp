#include "semcomp/codegen_roundtrip.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

#include "semcomp/error.hpp"
#include "semcomp/file_io.hpp"
#include "semcomp/utf8.hpp"

namespace semcomp::codegen {

namespace {

[[noreturn]] void manifest_error(const std::string& msg) { throw Error(ErrorCode::ManifestInvalid, msg); }
[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

Json judgment_to_json(const std::optional<Judgment>& j) {
  if (!j) return nullptr;
  return {{"verdict", to_string(j->verdict)}, {"rationale", j->rationale}};
}

void tally(VerdictCounts& c, const std::optional<Judgment>& j) {
  if (!j) {
    ++c.missing;
    return;
  }
  switch (j->verdict) {
    case Verdict::Equivalent: ++c.equivalent; break;
    case Verdict::Partial: ++c.partial; break;
    case Verdict::NotEquivalent: ++c.not_equivalent; break;
  }
}

Json counts_to_json(const VerdictCounts& c) {
  return {{"EQUIVALENT", c.equivalent},
          {"PARTIAL", c.partial},
          {"NOT_EQUIVALENT", c.not_equivalent},
          {"missing", c.missing}};
}

std::string chat_text(llm::Gateway& gateway, const llm::EndpointProfile& profile, const prompts::PromptTemplate& tmpl,
                      std::string_view payload, std::vector<llm::ChatExchange>& log) {
  auto ex = gateway.chat_once(profile, prompts::render(tmpl, payload));
  std::string text = pipeline::trim_single_newlines(ex.response_text);
  log.push_back(std::move(ex));
  if (text.empty()) throw Error(ErrorCode::EmptyPayload, "model returned an empty response");
  return text;
}

}  // namespace

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::Equivalent: return "EQUIVALENT";
    case Verdict::Partial: return "PARTIAL";
    case Verdict::NotEquivalent: return "NOT_EQUIVALENT";
  }
  return "";
}

Verdict parse_verdict_name(std::string_view s) {
  if (s == "EQUIVALENT" || s == "yes") return Verdict::Equivalent;
  if (s == "PARTIAL" || s == "partial") return Verdict::Partial;
  if (s == "NOT_EQUIVALENT" || s == "no") return Verdict::NotEquivalent;
  throw Error(ErrorCode::UnparseableVerdict, "unrecognized verdict '" + std::string(s) + "'");
}

std::vector<CodegenCase> load_cases(const std::filesystem::path& manifest_path) {
  if (!std::filesystem::is_regular_file(manifest_path)) {
    throw Error(ErrorCode::MissingFile, "case manifest not found: " + manifest_path.string());
  }
  Json j;
  try {
    j = Json::parse(io::read_file(manifest_path));
  } catch (const Json::exception& e) {
    manifest_error(manifest_path.string() + ": " + e.what());
  }
  const auto cases = j.find("cases");
  if (!j.is_object() || cases == j.end() || !cases->is_array() || cases->empty()) {
    manifest_error(manifest_path.string() + ": 'cases' must be a non-empty array");
  }
  std::vector<CodegenCase> out;
  std::set<std::string> seen;
  for (const auto& entry : *cases) {
    CodegenCase c;
    try {
      c.case_id = entry.at("case_id").get<std::string>();
      const std::string rel = entry.at("path").get<std::string>();
      c.language_tag = entry.value("language_tag", "");
      if (c.case_id.empty() || rel.empty()) manifest_error("case_id and path must be non-empty");
      if (!seen.insert(c.case_id).second) manifest_error("duplicate case_id '" + c.case_id + "'");
      const auto path = manifest_path.parent_path() / rel;
      if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::MissingFile, path.string());
      c.source_text = io::read_file(path);
      if (c.source_text.empty()) manifest_error("case '" + c.case_id + "' has an empty source file");
      if (!utf8::is_valid(c.source_text)) throw Error(ErrorCode::NotUtf8, path.string());
      if (const auto e = entry.find("expected_equivalence"); e != entry.end() && !e->is_null()) {
        c.expected = ExpectedEquivalence{parse_verdict_name(e->at("baseline").get<std::string>()),
                                         parse_verdict_name(e->at("compressed").get<std::string>())};
      }
    } catch (const Json::exception& e) {
      manifest_error(manifest_path.string() + ": " + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::UnparseableVerdict) manifest_error(e.what());
      throw;
    }
    out.push_back(std::move(c));
  }
  return out;
}

Judgment parse_verdict(std::string_view response) {
  std::size_t pos = 0;
  while (pos <= response.size()) {
    std::size_t end = response.find('\n', pos);
    if (end == std::string_view::npos) end = response.size();
    const std::string_view line = trim(response.substr(pos, end - pos));
    const std::size_t next = end + 1;
    if (line.empty()) {
      pos = next;
      continue;
    }
    constexpr std::string_view kTag = "VERDICT:";
    if (line.rfind(kTag, 0) != 0) break;
    const std::string_view token = trim(line.substr(kTag.size()));
    Judgment j;
    try {
      if (token != "EQUIVALENT" && token != "PARTIAL" && token != "NOT_EQUIVALENT") break;
      j.verdict = parse_verdict_name(token);
    } catch (const Error&) {
      break;
    }
    j.rationale = next < response.size() ? std::string(trim(response.substr(next))) : std::string();
    return j;
  }
  std::string excerpt(response.substr(0, 80));
  throw Error(ErrorCode::UnparseableVerdict, "judge response has no VERDICT line: '" + excerpt + "'");
}

std::string judge_payload(std::string_view original, std::string_view reconstruction) {
  std::string out = "ORIGINAL:\n";
  out += original;
  out += "\n\nRECONSTRUCTION:\n";
  out += reconstruction;
  return out;
}

Judgment judge_equivalence(std::string_view original, std::string_view reconstruction,
                           const llm::EndpointProfile& profile, llm::Gateway& gateway,
                           const prompts::PromptCatalog& catalog) {
  if (original.empty() || reconstruction.empty()) {
    throw Error(ErrorCode::EmptyPayload, "judge inputs must be non-empty");
  }
  const auto& tmpl = catalog.get("codegen.judge");
  auto ex = gateway.chat_once(profile, prompts::render(tmpl, judge_payload(original, reconstruction)));
  Judgment j = parse_verdict(ex.response_text);
  j.exchange = std::move(ex);
  return j;
}

Json RoundTripRecord::to_json() const {
  auto cr = [&]() -> Json {
    if (!description_cr) return nullptr;
    return {{"value", description_cr->value},
            {"original_bytes", description_cr->original_bytes},
            {"compressed_bytes", description_cr->compressed_bytes}};
  };
  auto ed = [](const std::optional<metrics::EditDistance>& e) -> Json {
    if (!e) return nullptr;
    return {{"raw", e->raw}, {"normalized", e->normalized}};
  };
  auto cs = [](const std::optional<metrics::CosineScore>& c) -> Json {
    if (!c) return nullptr;
    return {{"value", c->value}, {"angle_degrees", c->angle_degrees}};
  };
  Json exp = nullptr;
  if (expected) exp = {{"baseline", to_string(expected->baseline)}, {"compressed", to_string(expected->compressed)}};
  Json digests = Json::array();
  for (const auto& ex : exchanges) digests.push_back(ex.digest);
  return {{"case_id", case_id},
          {"description", description},
          {"compressed_description", compressed_description},
          {"reconstruction_base", reconstruction_base},
          {"reconstruction_compressed", reconstruction_compressed},
          {"judgment_base", judgment_to_json(judgment_base)},
          {"judgment_compressed", judgment_to_json(judgment_compressed)},
          {"description_cr", cr()},
          {"ed_base", ed(ed_base)},
          {"ed_compressed", ed(ed_compressed)},
          {"cs_base", cs(cs_base)},
          {"cs_compressed", cs(cs_compressed)},
          {"expected", std::move(exp)},
          {"request_digests", std::move(digests)},
          {"failed_stage", failed() ? Json(failed_stage) : Json(nullptr)},
          {"failure_reason", failed() ? Json(failure_reason) : Json(nullptr)}};
}

RoundTripRecord run_roundtrip(const CodegenCase& c, const llm::EndpointProfile& profile, llm::Gateway& gateway,
                              pipeline::EmbeddingCache* embeddings, const prompts::PromptCatalog& catalog) {
  RoundTripRecord r;
  r.case_id = c.case_id;
  r.expected = c.expected;
  const char* stage = "describe";
  try {
    if (c.source_text.empty()) throw Error(ErrorCode::EmptyPayload, "source text is empty");
    r.description = chat_text(gateway, profile, catalog.get("codegen.describe"), c.source_text, r.exchanges);

    stage = "compress_description";
    r.compressed_description =
        chat_text(gateway, profile, catalog.get("codegen.compress_desc"), r.description, r.exchanges);
    r.description_cr = metrics::compression_ratio(r.description.size(), r.compressed_description.size());

    stage = "reconstruct_base";
    r.reconstruction_base =
        chat_text(gateway, profile, catalog.get("codegen.reconstruct_base"), r.description, r.exchanges);

    stage = "reconstruct_compressed";
    r.reconstruction_compressed = chat_text(gateway, profile, catalog.get("codegen.reconstruct_compressed"),
                                            r.compressed_description, r.exchanges);

    r.ed_base = metrics::edit_distance(c.source_text, r.reconstruction_base);
    r.ed_compressed = metrics::edit_distance(c.source_text, r.reconstruction_compressed);

    stage = "judge_base";
    r.judgment_base = judge_equivalence(c.source_text, r.reconstruction_base, profile, gateway, catalog);
    r.exchanges.push_back(*r.judgment_base->exchange);

    stage = "judge_compressed";
    r.judgment_compressed = judge_equivalence(c.source_text, r.reconstruction_compressed, profile, gateway, catalog);
    r.exchanges.push_back(*r.judgment_compressed->exchange);

    if (embeddings != nullptr) {
      stage = "embed";
      r.cs_base = embeddings->similarity(c.source_text, r.reconstruction_base);
      r.cs_compressed = embeddings->similarity(c.source_text, r.reconstruction_compressed);
    }
  } catch (const std::exception& e) {
    r.failed_stage = stage;
    r.failure_reason = e.what();
  }
  return r;
}

Json RoundTripSummary::to_json() const {
  return {{"records", records},
          {"baseline", counts_to_json(baseline)},
          {"compressed", counts_to_json(compressed)},
          {"cr_samples", cr_samples},
          {"mean_description_cr", cr_samples > 0 ? Json(mean_description_cr) : Json(nullptr)},
          {"base_token_limit", base_token_limit},
          {"effective_token_limit", effective_token_limit ? Json(*effective_token_limit) : Json(nullptr)}};
}

RoundTripSummary summarize_roundtrips(const std::vector<RoundTripRecord>& records, std::uint64_t base_token_limit) {
  RoundTripSummary s;
  s.records = records.size();
  s.base_token_limit = base_token_limit;
  std::vector<double> crs;
  for (const auto& r : records) {
    tally(s.baseline, r.judgment_base);
    tally(s.compressed, r.judgment_compressed);
    if (r.description_cr) crs.push_back(r.description_cr->value);
  }
  // Summation in sorted order keeps the mean independent of record order.
  std::sort(crs.begin(), crs.end());
  s.cr_samples = crs.size();
  if (!crs.empty()) {
    double sum = 0.0;
    for (double v : crs) sum += v;
    s.mean_description_cr = sum / double(crs.size());
    if (s.mean_description_cr >= 0.0 && s.mean_description_cr < 1.0) {
      s.effective_token_limit = metrics::effective_token_limit(base_token_limit, s.mean_description_cr);
    }
  }
  return s;
}

void CodegenConfig::validate() const {
  if (cases_manifest.empty()) config_error("'cases' is required");
  if (!endpoints.count(endpoint)) config_error("endpoint '" + endpoint + "' is not defined");
  if (!embedding_endpoint.empty() && !endpoints.count(embedding_endpoint)) {
    config_error("embedding_endpoint names unknown endpoint '" + embedding_endpoint + "'");
  }
  if (base_token_limit == 0) config_error("base_token_limit must be positive");
  if (workers < 1) config_error("workers must be >= 1");
  if (transport.mode == llm::TransportMode::Replay && !std::filesystem::is_regular_file(transport.path)) {
    config_error("replay transcript not found: " + transport.path.string());
  }
}

std::vector<llm::EndpointProfile> CodegenConfig::profiles() const {
  std::vector<llm::EndpointProfile> out;
  for (const auto& [_, p] : endpoints) out.push_back(p);
  return out;
}

CodegenConfig parse_codegen_config(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) config_error("codegen config must be a JSON object");
  static const std::set<std::string> known = {"cases",     "endpoint", "endpoints", "embedding_endpoint",
                                              "base_token_limit", "transport", "out", "workers"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) config_error("unknown config key '" + key + "'");
  }
  CodegenConfig c;
  try {
    c.cases_manifest = (base_dir / j.at("cases").get<std::string>()).lexically_normal();
    c.endpoint = j.at("endpoint").get<std::string>();
    for (const auto& [name, body] : j.at("endpoints").items()) {
      c.endpoints.emplace(name, llm::profile_from_json(name, body));
    }
    c.embedding_endpoint = j.value("embedding_endpoint", "");
    c.base_token_limit = j.value("base_token_limit", c.base_token_limit);
    c.transport = llm::parse_transport_spec(j.value("transport", "replay:transcript.ndjson"), base_dir);
    if (j.contains("out")) c.out_dir = (base_dir / j.at("out").get<std::string>()).lexically_normal();
    const int workers = j.value("workers", 4);
    if (workers < 1) config_error("workers must be >= 1");
    c.workers = static_cast<unsigned>(workers);
  } catch (const Json::exception& e) {
    config_error(e.what());
  }
  return c;
}

CodegenConfig load_codegen_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::MissingFile, "config file not found: " + path.string());
  }
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return parse_codegen_config(j, path.parent_path());
}

CodegenRun run_codegen(const CodegenConfig& config, llm::Gateway& gateway) {
  config.validate();
  const auto cases = load_cases(config.cases_manifest);
  const auto& profile = config.endpoints.at(config.endpoint);
  std::optional<pipeline::EmbeddingCache> embeddings;
  if (!config.embedding_endpoint.empty()) embeddings.emplace(gateway, config.endpoints.at(config.embedding_endpoint));

  CodegenRun run;
  run.records.resize(cases.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cases.size(); i = next++) {
      run.records[i] = run_roundtrip(cases[i], profile, gateway, embeddings ? &*embeddings : nullptr);
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min<std::size_t>(config.workers, cases.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
  }
  run.summary = summarize_roundtrips(run.records, config.base_token_limit);
  return run;
}

CodegenRun run_codegen(const CodegenConfig& config) {
  config.validate();
  llm::Gateway gateway(llm::open_transport(config.transport, config.profiles()));
  return run_codegen(config, gateway);
}

std::vector<std::filesystem::path> emit_codegen(const CodegenRun& run, const std::filesystem::path& out_dir) {
  std::string jsonl;
  for (const auto& r : run.records) jsonl += r.to_json().dump() + "\n";

  auto num = [](const auto& opt, auto get) { return opt ? report::format3(get(*opt)) : std::string(); };
  auto verdict = [](const std::optional<Judgment>& j) { return j ? std::string(to_string(j->verdict)) : std::string(); };
  std::string csv = "case_id,description_cr,verdict_base,verdict_compressed,ed_base,ed_compressed,cs_base,"
                    "cs_compressed,expected_base,expected_compressed,failed_stage\r\n";
  for (const auto& r : run.records) {
    csv += r.case_id + ",";
    csv += num(r.description_cr, [](const metrics::CompressionRatio& c) { return c.value; }) + ",";
    csv += verdict(r.judgment_base) + "," + verdict(r.judgment_compressed) + ",";
    csv += num(r.ed_base, [](const metrics::EditDistance& e) { return e.normalized; }) + ",";
    csv += num(r.ed_compressed, [](const metrics::EditDistance& e) { return e.normalized; }) + ",";
    csv += num(r.cs_base, [](const metrics::CosineScore& c) { return c.value; }) + ",";
    csv += num(r.cs_compressed, [](const metrics::CosineScore& c) { return c.value; }) + ",";
    csv += r.expected ? std::string(to_string(r.expected->baseline)) + "," + std::string(to_string(r.expected->compressed))
                      : std::string(",");
    csv += "," + r.failed_stage + "\r\n";
  }

  const std::vector<std::pair<std::string, std::string>> files = {
      {"roundtrips.jsonl", jsonl},
      {"codegen_cases.csv", csv},
      {"codegen_summary.json", run.summary.to_json().dump() + "\n"},
  };
  std::vector<std::filesystem::path> written;
  for (const auto& [name, body] : files) {
    written.push_back(out_dir / name);
    io::write_file(written.back(), body);
  }
  return written;
}

}  // namespace semcomp::codegen
