#pragma once

// Single-turn chat-completion and embedding client. Requests go through a
// Transport: live HTTP, replay from a recorded transcript, or live-with-
// recording. There is deliberately no API that carries earlier messages into
// a later request; every chat_once call is a fresh conversation.

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "semcomp/prompt_catalog.hpp"

namespace semcomp::llm {

using Json = nlohmann::json;

struct EndpointProfile {
  std::string name;
  std::string base_url;  // absolute, e.g. https://api.openai.com/v1
  std::string model_name;
  std::string embedding_model;
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 3;  // retries after the first attempt
  double request_timeout_s = 120.0;
  int rate_limit = 4;  // max in-flight requests for this profile
  double backoff_initial_s = 1.0;
  prompts::Style prompt_style = prompts::Style::SystemAction;
  Json decoding = Json::object();  // merged verbatim into chat request bodies

  /// Throws Error(ConfigInvalid) when a field is out of range.
  void validate() const;
};

EndpointProfile profile_from_json(const std::string& name, const Json& j);
Json profile_to_json(const EndpointProfile& p);

struct TokenUsage {
  std::uint64_t prompt = 0;
  std::uint64_t completion = 0;
};

struct ChatExchange {
  std::vector<prompts::ChatMessage> request_messages;
  std::string response_text;  // assistant content only
  std::string model_name;
  std::optional<TokenUsage> token_usage;
  double latency_ms = 0.0;
  int attempts = 1;
  bool replayed = false;
  std::string digest;
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string source_model;

  std::size_t dimension() const noexcept { return values.size(); }
};

enum class RequestKind { Chat, Embed };
std::string_view to_string(RequestKind k) noexcept;

/// Request bodies in wire form. Their compact dump (keys sorted) is the
/// canonical form that digests are computed over.
Json chat_request_body(const EndpointProfile& profile, const prompts::RenderedPrompt& prompt);
Json embed_request_body(const EndpointProfile& profile, std::string_view text);
std::string canonical(const Json& j);
std::string request_digest(const Json& body);

/// Normalized responses, independent of provider envelope:
///   chat:  {"text": "...", "model": "...", "usage": {"prompt_tokens", "completion_tokens"}}
///   embed: {"embedding": [...], "model": "..."}
struct TransportReply {
  Json response;
  double latency_ms = 0.0;
  int attempts = 1;
  bool replayed = false;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportReply send(const EndpointProfile& profile, RequestKind kind, const Json& body,
                              const std::string& digest) = 0;
  /// True when requests may reach the network.
  virtual bool is_live() const noexcept = 0;
};

struct TranscriptRecord {
  std::string digest;
  RequestKind kind = RequestKind::Chat;
  Json request;
  Json response;
  double latency_ms = 0.0;

  Json to_json() const;
  static TranscriptRecord from_json(const Json& j);
};

/// Newline-delimited JSON, one record per line.
class Transcript {
 public:
  static Transcript load(const std::filesystem::path& path);
  static Transcript parse(std::string_view ndjson);

  const std::vector<TranscriptRecord>& records() const noexcept { return records_; }
  void add(TranscriptRecord rec) { records_.push_back(std::move(rec)); }
  std::string serialize() const;

 private:
  std::vector<TranscriptRecord> records_;
};

/// Appends records to a file as they complete. Each serialized line is
/// scanned for the configured secret values before it is written.
class TranscriptWriter {
 public:
  TranscriptWriter(std::filesystem::path path, std::vector<std::string> secrets);

  /// Throws Error(SecretLeak) without writing if the record contains a secret.
  void append(const TranscriptRecord& rec);
  std::size_t count() const;
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<std::string> secrets_;
  mutable std::mutex mu_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

/// Serves responses from a transcript by request digest. Read-only after
/// construction; the first record for a digest wins.
class ReplayTransport final : public Transport {
 public:
  explicit ReplayTransport(const Transcript& transcript);
  TransportReply send(const EndpointProfile&, RequestKind kind, const Json& body,
                      const std::string& digest) override;
  bool is_live() const noexcept override { return false; }
  std::size_t size() const noexcept { return by_digest_.size(); }

 private:
  std::unordered_map<std::string, TranscriptRecord> by_digest_;
};

/// OpenAI-compatible JSON over HTTP(S) with bearer auth from the environment.
class HttpTransport final : public Transport {
 public:
  TransportReply send(const EndpointProfile& profile, RequestKind kind, const Json& body,
                      const std::string& digest) override;
  bool is_live() const noexcept override { return true; }
};

/// Wraps a live transport and persists every successful exchange.
class RecordingTransport final : public Transport {
 public:
  RecordingTransport(std::shared_ptr<Transport> inner, std::shared_ptr<TranscriptWriter> writer);
  TransportReply send(const EndpointProfile& profile, RequestKind kind, const Json& body,
                      const std::string& digest) override;
  bool is_live() const noexcept override { return inner_->is_live(); }

 private:
  std::shared_ptr<Transport> inner_;
  std::shared_ptr<TranscriptWriter> writer_;
};

/// Resolve the API key for a profile. Throws Error(AuthMissing) if unset.
std::string resolve_api_key(const EndpointProfile& profile);

enum class TransportMode { Live, Replay, Record };

/// Parsed form of "live", "replay:PATH" or "record:PATH".
struct TransportSpec {
  TransportMode mode = TransportMode::Replay;
  std::filesystem::path path;

  std::string describe() const;
};

/// Relative paths are resolved against `base_dir`. Throws Error(ConfigInvalid).
TransportSpec parse_transport_spec(std::string_view text, const std::filesystem::path& base_dir = {});

/// Build the transport for a run. Replay requires an existing transcript
/// (Error(MissingFile)); record mode writes to the given path and rejects any
/// record containing one of the profiles' API keys.
std::shared_ptr<Transport> open_transport(const TransportSpec& spec,
                                          const std::vector<EndpointProfile>& profiles);

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Transport> transport);

  ChatExchange chat_once(const EndpointProfile& profile, const prompts::RenderedPrompt& prompt);
  EmbeddingVector embed(const EndpointProfile& profile, std::string_view text);

  bool is_live() const noexcept { return transport_->is_live(); }

 private:
  class Limiter {
   public:
    explicit Limiter(int cap) : cap_(cap) {}
    void acquire();
    void release();

   private:
    std::mutex mu_;
    std::condition_variable cv_;
    int cap_;
    int in_flight_ = 0;
  };

  Limiter& limiter_for(const EndpointProfile& profile);
  TransportReply dispatch(const EndpointProfile& profile, RequestKind kind, const Json& body,
                          const std::string& digest);

  std::shared_ptr<Transport> transport_;
  std::mutex limiters_mu_;
  std::map<std::string, std::unique_ptr<Limiter>> limiters_;
};

}  // namespace semcomp::llm
