#include "semcomp/eval_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <set>
#include <thread>

#include "semcomp/digest.hpp"
#include "semcomp/file_io.hpp"

namespace semcomp::pipeline {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigInvalid, msg); }

bool is_compression_strategy(prompts::Strategy s) {
  return s == prompts::Strategy::Base || s == prompts::Strategy::Lossless || s == prompts::Strategy::Semantic;
}

template <class F>
auto staged(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const TrialError&) {
    throw;
  } catch (const Error& e) {
    throw TrialError(stage, e);
  } catch (const std::exception& e) {
    throw TrialError(stage, Error(ErrorCode::TransportFailure, e.what()));
  }
}

Json exchange_to_json(const llm::ChatExchange& ex) {
  Json messages = Json::array();
  for (const auto& m : ex.request_messages) {
    messages.push_back({{"role", prompts::to_string(m.role)}, {"text", m.text}});
  }
  Json usage = nullptr;
  if (ex.token_usage) usage = {{"prompt", ex.token_usage->prompt}, {"completion", ex.token_usage->completion}};
  return {{"messages", std::move(messages)},
          {"response_text", ex.response_text},
          {"model", ex.model_name},
          {"usage", std::move(usage)},
          {"latency_ms", ex.latency_ms},
          {"attempts", ex.attempts},
          {"replayed", ex.replayed},
          {"digest", ex.digest}};
}

std::string path_string(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    config_error(std::string("'") + key + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

MethodSpec method_from_json(const Json& j) {
  if (!j.is_object()) config_error("each method must be an object");
  MethodSpec m;
  m.method_id = path_string(j, "id");
  const std::string kind = j.value("kind", "");
  for (const auto& [key, _] : j.items()) {
    static const std::set<std::string> known = {"id", "kind", "endpoint", "strategy", "level"};
    if (!known.count(key)) config_error("method '" + m.method_id + "': unknown key '" + key + "'");
  }
  if (kind == "codec") {
    m.kind = MethodKind::Codec;
    if (!j.contains("level") || !j["level"].is_number_integer()) {
      config_error("method '" + m.method_id + "': codec level must be an integer");
    }
    try {
      m.level = codec::CodecLevel(j["level"].get<int>());
    } catch (const Error& e) {
      config_error("method '" + m.method_id + "': " + e.what());
    }
  } else if (kind == "llm") {
    m.kind = MethodKind::Llm;
    m.endpoint = path_string(j, "endpoint");
    try {
      m.strategy = prompts::parse_strategy(path_string(j, "strategy"));
    } catch (const Error& e) {
      config_error("method '" + m.method_id + "': " + e.what());
    }
  } else {
    config_error("method '" + m.method_id + "': kind must be 'llm' or 'codec'");
  }
  return m;
}

}  // namespace

Json MethodSpec::to_json() const {
  if (kind == MethodKind::Codec) return {{"id", method_id}, {"kind", "codec"}, {"level", level.value()}};
  return {{"id", method_id}, {"kind", "llm"}, {"endpoint", endpoint}, {"strategy", prompts::to_string(strategy)}};
}

MethodSpec parse_method_shorthand(std::string_view text) {
  MethodSpec m;
  m.method_id = std::string(text);
  if (text.rfind("codec:", 0) == 0) {
    const std::string level(text.substr(6));
    if (level.empty() || level.find_first_not_of("0123456789") != std::string::npos) {
      config_error("codec method needs a numeric level: '" + m.method_id + "'");
    }
    m.kind = MethodKind::Codec;
    try {
      m.level = codec::CodecLevel(std::stoi(level));
    } catch (const Error& e) {
      config_error(e.what());
    } catch (const std::exception&) {
      config_error("codec level out of range: '" + m.method_id + "'");
    }
    return m;
  }
  if (text.rfind("llm:", 0) == 0) {
    const std::string_view rest = text.substr(4);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == rest.size()) {
      config_error("llm method must look like llm:<endpoint>:<strategy>: '" + m.method_id + "'");
    }
    m.kind = MethodKind::Llm;
    m.endpoint = std::string(rest.substr(0, colon));
    try {
      m.strategy = prompts::parse_strategy(rest.substr(colon + 1));
    } catch (const Error& e) {
      config_error(e.what());
    }
    return m;
  }
  config_error("unrecognized method '" + m.method_id + "' (expected codec:<level> or llm:<endpoint>:<strategy>)");
}

std::string_view to_string(metrics::NormMode mode) noexcept {
  return mode == metrics::NormMode::MaxDivide ? "max-divide" : "min-max";
}

metrics::NormMode parse_norm_mode(std::string_view s) {
  if (s == "max-divide") return metrics::NormMode::MaxDivide;
  if (s == "min-max") return metrics::NormMode::MinMax;
  config_error("norm must be max-divide or min-max (got '" + std::string(s) + "')");
}

void RunConfig::validate() const {
  if (methods.empty()) config_error("at least one method is required");
  if (corpus_manifest.empty()) config_error("corpus manifest path is required");
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) config_error("epsilon must be a positive number");
  if (workers < 1) config_error("workers must be >= 1");
  std::set<std::string> seen;
  bool any_llm = false;
  const auto& catalog = prompts::PromptCatalog::builtin();
  for (const auto& m : methods) {
    if (m.method_id.empty()) config_error("method id must be non-empty");
    if (!seen.insert(m.method_id).second) config_error("duplicate method id '" + m.method_id + "'");
    if (m.kind != MethodKind::Llm) continue;
    any_llm = true;
    const auto ep = endpoints.find(m.endpoint);
    if (ep == endpoints.end()) config_error("method '" + m.method_id + "' names unknown endpoint '" + m.endpoint + "'");
    if (!is_compression_strategy(m.strategy)) {
      config_error("method '" + m.method_id + "': strategy must be base, lossless or semantic");
    }
    catalog.resolve(m.strategy, prompts::Direction::Compress, ep->second.prompt_style);
    catalog.resolve(m.strategy, prompts::Direction::Decompress, ep->second.prompt_style);
  }
  if (any_llm) {
    if (embedding_endpoint.empty()) config_error("embedding_endpoint is required when llm methods are configured");
  }
  if (!embedding_endpoint.empty() && !endpoints.count(embedding_endpoint)) {
    config_error("embedding_endpoint names unknown endpoint '" + embedding_endpoint + "'");
  }
  if (transport.mode == llm::TransportMode::Replay && !std::filesystem::is_regular_file(transport.path)) {
    config_error("replay transcript not found: " + transport.path.string());
  }
}

Json RunConfig::to_json() const {
  Json eps = Json::object();
  for (const auto& [name, p] : endpoints) eps[name] = llm::profile_to_json(p);
  Json ms = Json::array();
  for (const auto& m : methods) ms.push_back(m.to_json());
  return {{"corpus", corpus_ref},
          {"endpoints", std::move(eps)},
          {"embedding_endpoint", embedding_endpoint},
          {"methods", std::move(ms)},
          {"epsilon", epsilon},
          {"norm", to_string(norm)}};
}

std::string RunConfig::digest() const { return digest::sha256_hex(to_json().dump()); }

std::vector<llm::EndpointProfile> RunConfig::profiles() const {
  std::vector<llm::EndpointProfile> out;
  for (const auto& [_, p] : endpoints) out.push_back(p);
  return out;
}

RunConfig parse_run_config(const Json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) config_error("run config must be a JSON object");
  static const std::set<std::string> known = {"corpus", "endpoints", "embedding_endpoint", "methods", "epsilon",
                                              "norm",   "transport", "out",                "workers"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) config_error("unknown config key '" + key + "'");
  }
  RunConfig c;
  c.corpus_ref = path_string(j, "corpus");
  c.corpus_manifest = (base_dir / c.corpus_ref).lexically_normal();
  if (const auto it = j.find("endpoints"); it != j.end()) {
    if (!it->is_object()) config_error("'endpoints' must be an object");
    for (const auto& [name, body] : it->items()) c.endpoints.emplace(name, llm::profile_from_json(name, body));
  }
  c.embedding_endpoint = j.value("embedding_endpoint", "");
  const auto ms = j.find("methods");
  if (ms == j.end() || !ms->is_array()) config_error("'methods' must be an array");
  for (const auto& m : *ms) c.methods.push_back(method_from_json(m));
  try {
    c.epsilon = j.value("epsilon", c.epsilon);
    c.norm = parse_norm_mode(j.value("norm", "max-divide"));
    c.transport_ref = j.value("transport", "replay:transcript.ndjson");
    if (j.contains("out")) c.out_dir = (base_dir / path_string(j, "out")).lexically_normal();
    const int workers = j.value("workers", 4);
    if (workers < 1) config_error("workers must be >= 1");
    c.workers = static_cast<unsigned>(workers);
  } catch (const Json::exception& e) {
    config_error(e.what());
  }
  c.transport = llm::parse_transport_spec(c.transport_ref, base_dir);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::MissingFile, "config file not found: " + path.string());
  }
  Json j;
  try {
    j = Json::parse(io::read_file(path));
  } catch (const Json::exception& e) {
    config_error(path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

Json TrialResult::to_json() const {
  return {{"text_id", text_id},
          {"method_id", method_id},
          {"compressed_b64", digest::base64_encode(compressed_bytes)},
          {"decompressed_text", decompressed_text},
          {"compress_exchange", compress_exchange ? exchange_to_json(*compress_exchange) : Json(nullptr)},
          {"decompress_exchange", decompress_exchange ? exchange_to_json(*decompress_exchange) : Json(nullptr)},
          {"metrics", report::metrics_to_json(metrics)},
          {"flags",
           {{"cr_clamped", flags.cr_clamped}, {"ed_floored", flags.ed_floored}, {"replayed", flags.replayed}}}};
}

TrialError::TrialError(std::string stage, const Error& cause)
    : Error(cause.code(), stage + " stage: " + cause.what()), stage_(std::move(stage)), reason_(cause.what()) {}

struct EmbeddingCache::Slot {
  std::once_flag once;
  std::shared_ptr<const llm::EmbeddingVector> value;
};

EmbeddingCache::EmbeddingCache(llm::Gateway& gateway, std::optional<llm::EndpointProfile> profile)
    : gateway_(gateway), profile_(std::move(profile)) {}

std::shared_ptr<const llm::EmbeddingVector> EmbeddingCache::get(std::string_view text) {
  if (!profile_) config_error("no embedding endpoint configured");
  const std::string key = digest::sha256_hex(text);
  std::shared_ptr<Slot> slot;
  {
    std::lock_guard lock(mu_);
    auto& s = slots_[key];
    if (!s) s = std::make_shared<Slot>();
    slot = s;
  }
  std::call_once(slot->once, [&] {
    auto v = std::make_shared<llm::EmbeddingVector>(gateway_.embed(*profile_, text));
    {
      std::lock_guard lock(mu_);
      ++lookups_;
    }
    slot->value = std::move(v);
  });
  return slot->value;
}

metrics::CosineScore EmbeddingCache::similarity(std::string_view a, std::string_view b) {
  if (!profile_) {
    if (a == b) return {1.0, 0.0};
    config_error("no embedding endpoint configured");
  }
  const auto va = get(a);
  const auto vb = get(b);
  return metrics::cosine_similarity(va->values, vb->values);
}

std::size_t EmbeddingCache::lookups() const {
  std::lock_guard lock(mu_);
  return lookups_;
}

std::string trim_single_newlines(std::string_view s) {
  if (!s.empty() && s.front() == '\n') s.remove_prefix(1);
  if (!s.empty() && s.back() == '\n') s.remove_suffix(1);
  return std::string(s);
}

TrialRunner::TrialRunner(const RunConfig& config, llm::Gateway& gateway, const prompts::PromptCatalog& catalog,
                         EmbeddingCache& embeddings)
    : config_(config), gateway_(gateway), catalog_(catalog), embeddings_(embeddings) {}

TrialResult TrialRunner::run(const corpus::TextRecord& text, const MethodSpec& method) {
  return method.kind == MethodKind::Codec ? run_codec(text, method) : run_llm(text, method);
}

TrialResult TrialRunner::run_codec(const corpus::TextRecord& text, const MethodSpec& method) {
  TrialResult r;
  r.text_id = text.text_id;
  r.method_id = method.method_id;
  staged("codec", [&] {
    r.compressed_bytes = codec::deflate(text.content, method.level).compressed;
    const codec::Bytes restored = codec::inflate(r.compressed_bytes);
    r.decompressed_text.assign(restored.begin(), restored.end());
    if (r.decompressed_text != text.content) {
      throw Error(ErrorCode::CorruptStream, "round trip did not restore the original");
    }
  });
  const auto cs = staged("embed", [&] { return embeddings_.similarity(text.content, r.decompressed_text); });
  const auto scored = staged("score", [&] {
    return metrics::score_trial(text.content, r.compressed_bytes, r.decompressed_text, cs, config_.epsilon);
  });
  r.metrics = scored.metrics;
  r.flags = {scored.cr_clamped, scored.ed_floored, false};
  return r;
}

TrialResult TrialRunner::run_llm(const corpus::TextRecord& text, const MethodSpec& method) {
  TrialResult r;
  r.text_id = text.text_id;
  r.method_id = method.method_id;
  const llm::EndpointProfile& profile = config_.endpoints.at(method.endpoint);

  std::string compressed;
  staged("compress", [&] {
    const auto& tmpl = catalog_.resolve(method.strategy, prompts::Direction::Compress, profile.prompt_style);
    r.compress_exchange = gateway_.chat_once(profile, prompts::render(tmpl, text.content));
    compressed = trim_single_newlines(r.compress_exchange->response_text);
    if (compressed.empty()) throw Error(ErrorCode::EmptyPayload, "model returned an empty compressed text");
  });
  r.compressed_bytes.assign(compressed.begin(), compressed.end());

  // Fresh exchange: the request carries the decompression template and the
  // compressed text, nothing else.
  staged("decompress", [&] {
    const auto& tmpl = catalog_.resolve(method.strategy, prompts::Direction::Decompress, profile.prompt_style);
    r.decompress_exchange = gateway_.chat_once(profile, prompts::render(tmpl, compressed));
    r.decompressed_text = trim_single_newlines(r.decompress_exchange->response_text);
    if (r.decompressed_text.empty()) throw Error(ErrorCode::EmptyPayload, "model returned an empty decompression");
  });

  const auto cs = staged("embed", [&] { return embeddings_.similarity(text.content, r.decompressed_text); });
  const auto scored = staged("score", [&] {
    return metrics::score_trial(text.content, r.compressed_bytes, r.decompressed_text, cs, config_.epsilon);
  });
  r.metrics = scored.metrics;
  r.flags = {scored.cr_clamped, scored.ed_floored,
             r.compress_exchange->replayed && r.decompress_exchange->replayed};
  return r;
}

std::vector<report::AveragedRow> average_rows(const std::vector<report::PerTextRow>& rows,
                                              const std::vector<std::string>& method_order,
                                              metrics::NormMode mode, std::string* note) {
  std::vector<report::AveragedRow> out;
  for (const auto& id : method_order) {
    report::AveragedRow a;
    a.method_id = id;
    double sums[7] = {};
    for (const auto& row : rows) {
      if (row.method_id != id) continue;
      const auto& m = row.metrics;
      sums[0] += m.entropy.normalized;
      sums[1] += m.entropy.raw_bits;
      sums[2] += m.cr.value;
      sums[3] += m.ed.normalized;
      sums[4] += m.cs.value;
      sums[5] += m.ere_raw;
      sums[6] += m.sre_raw;
      ++a.trials;
    }
    const double n = a.trials > 0 ? double(a.trials) : kNaN;
    a.entropy = sums[0] / n;
    a.entropy_bits = sums[1] / n;
    a.cr = sums[2] / n;
    a.ed = sums[3] / n;
    a.cs = sums[4] / n;
    a.ere_raw = sums[5] / n;
    a.sre_raw = sums[6] / n;
    a.ere_norm = kNaN;
    a.sre_norm = kNaN;
    out.push_back(a);
  }

  std::string text = "ERE and SRE: per-text raw values averaged per method, then ";
  text += mode == metrics::NormMode::MaxDivide ? "divided by the cohort maximum" : "min-max scaled across the cohort";
  text += "; ERE uses natural log with CR clamped to [1e-6, 1-1e-6] and normalized edit distance floored at epsilon";

  auto normalize = [&](double report::AveragedRow::*raw, double report::AveragedRow::*norm, const char* name) {
    std::vector<double> values;
    std::vector<report::AveragedRow*> targets;
    for (auto& a : out) {
      if (a.trials == 0) continue;
      values.push_back(a.*raw);
      targets.push_back(&a);
    }
    if (values.empty()) return;
    try {
      const auto normed = metrics::cohort_normalize(values, mode);
      for (std::size_t i = 0; i < targets.size(); ++i) targets[i]->*norm = normed[i];
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateCohort) throw;
      text += std::string("; ") + name + " not normalized (cohort maximum is not positive)";
    }
  };
  normalize(&report::AveragedRow::ere_raw, &report::AveragedRow::ere_norm, "ERE");
  normalize(&report::AveragedRow::sre_raw, &report::AveragedRow::sre_norm, "SRE");
  if (note) *note = text;
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

CohortRun run_cohort(const RunConfig& config, llm::Gateway& gateway, const RunHooks& hooks) {
  config.validate();
  const auto texts = corpus::load_corpus(config.corpus_manifest);
  const auto& catalog = prompts::PromptCatalog::builtin();

  std::optional<llm::EndpointProfile> embed_profile;
  if (!config.embedding_endpoint.empty()) embed_profile = config.endpoints.at(config.embedding_endpoint);
  EmbeddingCache embeddings(gateway, embed_profile);
  TrialRunner runner(config, gateway, catalog, embeddings);

  struct Task {
    const corpus::TextRecord* text;
    const MethodSpec* method;
    std::optional<TrialResult> result;
    std::optional<report::FailureRow> failure;
  };
  std::vector<Task> tasks;
  for (const auto& t : texts) {
    for (const auto& m : config.methods) tasks.push_back({&t, &m, std::nullopt, std::nullopt});
  }

  std::mutex log_mu;
  auto log = [&](const std::string& line) {
    if (!hooks.log) return;
    std::lock_guard lock(log_mu);
    hooks.log(line);
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      Task& task = tasks[i];
      try {
        task.result = runner.run(*task.text, *task.method);
        log("ok   " + task.text->text_id + " " + task.method->method_id);
      } catch (const TrialError& e) {
        task.failure = report::FailureRow{task.text->text_id, task.method->method_id, e.stage(),
                                          std::string(to_string(e.code())), e.reason()};
        log("FAIL " + task.text->text_id + " " + task.method->method_id + ": " + e.what());
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min<std::size_t>(config.workers, tasks.size()));
  {
    std::vector<std::jthread> pool;
    for (std::size_t i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
  }

  CohortRun run;
  for (auto& task : tasks) {
    if (task.result) {
      run.report.per_text.push_back({task.result->text_id, task.result->method_id, task.result->metrics,
                                     task.result->flags});
      run.trials.push_back(std::move(*task.result));
    } else if (task.failure) {
      run.report.failures.push_back(std::move(*task.failure));
    }
  }
  auto by_key = [](const auto& a, const auto& b) {
    return std::tie(a.text_id, a.method_id) < std::tie(b.text_id, b.method_id);
  };
  std::sort(run.report.per_text.begin(), run.report.per_text.end(), by_key);
  std::sort(run.trials.begin(), run.trials.end(), by_key);
  std::sort(run.report.failures.begin(), run.report.failures.end(), by_key);

  std::vector<std::string> order;
  for (const auto& m : config.methods) order.push_back(m.method_id);
  std::string note;
  run.report.averaged = average_rows(run.report.per_text, order, config.norm, &note);

  auto& md = run.report.metadata;
  md.config_digest = config.digest();
  md.transport = config.transport.mode == llm::TransportMode::Live     ? "live"
                 : config.transport.mode == llm::TransportMode::Record ? "record"
                                                                       : "replay";
  md.timestamp = hooks.clock ? hooks.clock() : utc_timestamp();
  md.normalization_note = note;
  md.norm_mode = std::string(to_string(config.norm));
  md.epsilon = config.epsilon;
  return run;
}

CohortRun run_cohort(const RunConfig& config, const RunHooks& hooks) {
  config.validate();
  llm::Gateway gateway(llm::open_transport(config.transport, config.profiles()));
  return run_cohort(config, gateway, hooks);
}

void emit_trials(const std::vector<TrialResult>& trials, const std::filesystem::path& path) {
  std::string out;
  for (const auto& t : trials) {
    out += t.to_json().dump();
    out += '\n';
  }
  io::write_file(path, out);
}

}  // namespace semcomp::pipeline
