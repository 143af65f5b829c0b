#include "semcomp/llm_gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <sstream>

#include "semcomp/digest.hpp"
#include "semcomp/error.hpp"
#include "semcomp/file_io.hpp"

namespace semcomp::llm {

namespace {

RequestKind parse_kind(std::string_view s) {
  if (s == "chat") return RequestKind::Chat;
  if (s == "embed") return RequestKind::Embed;
  throw Error(ErrorCode::ConfigInvalid, "unknown transcript record kind '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(RequestKind k) noexcept { return k == RequestKind::Chat ? "chat" : "embed"; }

void EndpointProfile::validate() const {
  auto fail = [this](const std::string& what) {
    throw Error(ErrorCode::ConfigInvalid, "endpoint '" + name + "': " + what);
  };
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    fail("base_url must be an absolute http(s) URL");
  }
  if (model_name.empty()) fail("model is required");
  if (api_key_env.empty()) fail("api_key_env is required");
  if (max_retries < 0) fail("max_retries must be >= 0");
  if (rate_limit < 1) fail("rate_limit must be >= 1");
  if (!(request_timeout_s > 0.0)) fail("request_timeout_s must be positive");
  if (backoff_initial_s < 0.0) fail("backoff_initial_s must be >= 0");
  if (!decoding.is_object()) fail("decoding must be an object");
}

EndpointProfile profile_from_json(const std::string& name, const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigInvalid, "endpoint '" + name + "' must be an object");
  EndpointProfile p;
  p.name = name;
  try {
    p.base_url = j.value("base_url", "");
    p.model_name = j.value("model", "");
    p.embedding_model = j.value("embedding_model", "");
    p.api_key_env = j.value("api_key_env", p.api_key_env);
    p.max_retries = j.value("max_retries", p.max_retries);
    p.request_timeout_s = j.value("request_timeout_s", p.request_timeout_s);
    p.rate_limit = j.value("rate_limit", p.rate_limit);
    p.backoff_initial_s = j.value("backoff_initial_s", p.backoff_initial_s);
    p.prompt_style = prompts::parse_style(j.value("prompt_style", "system_action"));
    p.decoding = j.value("decoding", Json::object());
    if (j.contains("api_key")) {
      throw Error(ErrorCode::ConfigInvalid,
                  "endpoint '" + name + "': API keys are read from the environment only (use api_key_env)");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, "endpoint '" + name + "': " + e.what());
  }
  p.validate();
  return p;
}

Json profile_to_json(const EndpointProfile& p) {
  return {{"base_url", p.base_url},
          {"model", p.model_name},
          {"embedding_model", p.embedding_model},
          {"api_key_env", p.api_key_env},
          {"max_retries", p.max_retries},
          {"request_timeout_s", p.request_timeout_s},
          {"rate_limit", p.rate_limit},
          {"backoff_initial_s", p.backoff_initial_s},
          {"prompt_style", prompts::to_string(p.prompt_style)},
          {"decoding", p.decoding}};
}

Json chat_request_body(const EndpointProfile& profile, const prompts::RenderedPrompt& prompt) {
  Json messages = Json::array();
  for (const auto& m : prompt.messages) {
    messages.push_back({{"role", prompts::to_string(m.role)}, {"content", m.text}});
  }
  Json body = profile.decoding.is_object() ? profile.decoding : Json::object();
  body["model"] = profile.model_name;
  body["messages"] = std::move(messages);
  return body;
}

Json embed_request_body(const EndpointProfile& profile, std::string_view text) {
  const std::string& model = profile.embedding_model.empty() ? profile.model_name : profile.embedding_model;
  return {{"model", model}, {"input", std::string(text)}};
}

std::string canonical(const Json& j) { return j.dump(); }

std::string request_digest(const Json& body) { return digest::sha256_hex(canonical(body)); }

Json TranscriptRecord::to_json() const {
  return {{"digest", digest},
          {"kind", to_string(kind)},
          {"request", request},
          {"response", response},
          {"latency_ms", latency_ms}};
}

TranscriptRecord TranscriptRecord::from_json(const Json& j) {
  TranscriptRecord r;
  try {
    r.digest = j.at("digest").get<std::string>();
    r.kind = parse_kind(j.at("kind").get<std::string>());
    r.request = j.at("request");
    r.response = j.at("response");
    r.latency_ms = j.value("latency_ms", 0.0);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("transcript record: ") + e.what());
  }
  return r;
}

Transcript Transcript::parse(std::string_view ndjson) {
  Transcript t;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < ndjson.size()) {
    std::size_t end = ndjson.find('\n', start);
    if (end == std::string_view::npos) end = ndjson.size();
    const std::string_view line = ndjson.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      t.records_.push_back(TranscriptRecord::from_json(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, "transcript line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return t;
}

Transcript Transcript::load(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::MissingFile, path.string());
  return parse(io::read_file(path));
}

std::string Transcript::serialize() const {
  std::string out;
  for (const auto& r : records_) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

TranscriptWriter::TranscriptWriter(std::filesystem::path path, std::vector<std::string> secrets)
    : path_(std::move(path)), secrets_(std::move(secrets)) {
  std::erase_if(secrets_, [](const std::string& s) { return s.empty(); });
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::IoFailure, "cannot open transcript " + path_.string());
}

void TranscriptWriter::append(const TranscriptRecord& rec) {
  const std::string line = rec.to_json().dump() + "\n";
  for (const auto& secret : secrets_) {
    if (line.find(secret) != std::string::npos) {
      throw Error(ErrorCode::SecretLeak, "transcript record " + rec.digest + " contains a credential");
    }
  }
  std::lock_guard lock(mu_);
  out_.write(line.data(), static_cast<std::streamsize>(line.size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::IoFailure, "write failed: " + path_.string());
  ++count_;
}

std::size_t TranscriptWriter::count() const {
  std::lock_guard lock(mu_);
  return count_;
}

ReplayTransport::ReplayTransport(const Transcript& transcript) {
  for (const auto& rec : transcript.records()) by_digest_.try_emplace(rec.digest, rec);
}

TransportReply ReplayTransport::send(const EndpointProfile&, RequestKind kind, const Json&,
                                     const std::string& digest) {
  const auto it = by_digest_.find(digest);
  if (it == by_digest_.end() || it->second.kind != kind) {
    throw Error(ErrorCode::ReplayMiss, std::string(to_string(kind)) + " request " + digest);
  }
  return {it->second.response, it->second.latency_ms, 1, true};
}

RecordingTransport::RecordingTransport(std::shared_ptr<Transport> inner,
                                       std::shared_ptr<TranscriptWriter> writer)
    : inner_(std::move(inner)), writer_(std::move(writer)) {}

TransportReply RecordingTransport::send(const EndpointProfile& profile, RequestKind kind,
                                        const Json& body, const std::string& digest) {
  TransportReply reply = inner_->send(profile, kind, body, digest);
  writer_->append({digest, kind, body, reply.response, reply.latency_ms});
  return reply;
}

std::string resolve_api_key(const EndpointProfile& profile) {
  const char* value = std::getenv(profile.api_key_env.c_str());
  if (value == nullptr || *value == '\0') {
    throw Error(ErrorCode::AuthMissing, "environment variable " + profile.api_key_env + " is not set");
  }
  return value;
}

void Gateway::Limiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return in_flight_ < cap_; });
  ++in_flight_;
}

void Gateway::Limiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

Gateway::Gateway(std::shared_ptr<Transport> transport) : transport_(std::move(transport)) {
  if (!transport_) throw Error(ErrorCode::ConfigInvalid, "gateway needs a transport");
}

Gateway::Limiter& Gateway::limiter_for(const EndpointProfile& profile) {
  std::lock_guard lock(limiters_mu_);
  auto& slot = limiters_[profile.name + "\n" + profile.base_url];
  if (!slot) slot = std::make_unique<Limiter>(profile.rate_limit);
  return *slot;
}

TransportReply Gateway::dispatch(const EndpointProfile& profile, RequestKind kind, const Json& body,
                                 const std::string& digest) {
  if (transport_->is_live()) resolve_api_key(profile);  // fail before any network activity
  Limiter& limiter = limiter_for(profile);
  limiter.acquire();
  struct Release {
    Limiter& l;
    ~Release() { l.release(); }
  } release{limiter};
  return transport_->send(profile, kind, body, digest);
}

ChatExchange Gateway::chat_once(const EndpointProfile& profile, const prompts::RenderedPrompt& prompt) {
  const Json body = chat_request_body(profile, prompt);
  const std::string digest = request_digest(body);
  const TransportReply reply = dispatch(profile, RequestKind::Chat, body, digest);

  ChatExchange ex;
  ex.request_messages = prompt.messages;
  try {
    ex.response_text = reply.response.at("text").get<std::string>();
    ex.model_name = reply.response.value("model", profile.model_name);
    if (const auto u = reply.response.find("usage"); u != reply.response.end() && u->is_object()) {
      ex.token_usage = TokenUsage{u->value("prompt_tokens", std::uint64_t{0}),
                                  u->value("completion_tokens", std::uint64_t{0})};
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::TransportFailure, std::string("malformed chat response: ") + e.what());
  }
  ex.latency_ms = reply.latency_ms;
  ex.attempts = reply.attempts;
  ex.replayed = reply.replayed;
  ex.digest = digest;
  return ex;
}

EmbeddingVector Gateway::embed(const EndpointProfile& profile, std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::EmptyPayload, "embedding input is empty");
  const Json body = embed_request_body(profile, text);
  const std::string digest = request_digest(body);
  const TransportReply reply = dispatch(profile, RequestKind::Embed, body, digest);

  EmbeddingVector v;
  try {
    v.values = reply.response.at("embedding").get<std::vector<double>>();
    v.source_model = reply.response.value("model", body["model"].get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::TransportFailure, std::string("malformed embedding response: ") + e.what());
  }
  if (v.values.empty()) throw Error(ErrorCode::TransportFailure, "embedding response has no values");
  return v;
}

}  // namespace semcomp::llm

namespace semcomp::llm {

std::string TransportSpec::describe() const {
  switch (mode) {
    case TransportMode::Live: return "live";
    case TransportMode::Replay: return "replay:" + path.generic_string();
    case TransportMode::Record: return "record:" + path.generic_string();
  }
  return "";
}

TransportSpec parse_transport_spec(std::string_view text, const std::filesystem::path& base_dir) {
  auto with_path = [&](TransportMode mode, std::string_view rest) {
    if (rest.empty()) {
      throw Error(ErrorCode::ConfigInvalid, "transport '" + std::string(text) + "' needs a path");
    }
    std::filesystem::path p{std::string(rest)};
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return TransportSpec{mode, p.lexically_normal()};
  };
  if (text == "live") return {TransportMode::Live, {}};
  if (text.rfind("replay:", 0) == 0) return with_path(TransportMode::Replay, text.substr(7));
  if (text.rfind("record:", 0) == 0) return with_path(TransportMode::Record, text.substr(7));
  throw Error(ErrorCode::ConfigInvalid,
              "transport must be live, replay:PATH or record:PATH (got '" + std::string(text) + "')");
}

std::shared_ptr<Transport> open_transport(const TransportSpec& spec,
                                          const std::vector<EndpointProfile>& profiles) {
  switch (spec.mode) {
    case TransportMode::Replay:
      return std::make_shared<ReplayTransport>(Transcript::load(spec.path));
    case TransportMode::Live:
      return std::make_shared<HttpTransport>();
    case TransportMode::Record: {
      std::vector<std::string> secrets;
      for (const auto& p : profiles) {
        if (const char* v = std::getenv(p.api_key_env.c_str()); v != nullptr && *v != '\0') {
          secrets.emplace_back(v);
        }
      }
      auto writer = std::make_shared<TranscriptWriter>(spec.path, std::move(secrets));
      return std::make_shared<RecordingTransport>(std::make_shared<HttpTransport>(), std::move(writer));
    }
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown transport mode");
}

}  // namespace semcomp::llm
