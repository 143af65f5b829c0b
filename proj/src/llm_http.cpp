// Live transport. Kept in its own translation unit because of httplib's size.

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "semcomp/error.hpp"
#include "semcomp/llm_gateway.hpp"

namespace semcomp::llm {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

Json normalize(RequestKind kind, const Json& raw, const std::string& fallback_model) {
  if (kind == RequestKind::Chat) {
    Json out = {{"text", raw.at("choices").at(0).at("message").at("content").get<std::string>()},
                {"model", raw.value("model", fallback_model)}};
    if (const auto u = raw.find("usage"); u != raw.end() && u->is_object()) {
      out["usage"] = {{"prompt_tokens", u->value("prompt_tokens", 0)},
                      {"completion_tokens", u->value("completion_tokens", 0)}};
    }
    return out;
  }
  return {{"embedding", raw.at("data").at(0).at("embedding")},
          {"model", raw.value("model", fallback_model)}};
}

}  // namespace

TransportReply HttpTransport::send(const EndpointProfile& profile, RequestKind kind, const Json& body,
                                   const std::string&) {
  const std::string key = resolve_api_key(profile);
  const SplitUrl url = split_url(profile.base_url);
  const std::string path = url.prefix + (kind == RequestKind::Chat ? "/chat/completions" : "/embeddings");

  httplib::Client client(url.origin);
  const auto timeout = std::chrono::duration<double>(profile.request_timeout_s);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  const httplib::Headers headers = {{"Authorization", "Bearer " + key}};
  const std::string payload = body.dump();

  const int total_attempts = 1 + profile.max_retries;
  bool rate_limited = false;
  std::string last_error;
  for (int attempt = 1; attempt <= total_attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    const auto res = client.Post(path, headers, payload, "application/json");
    const double latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    bool retryable = true;
    if (!res) {
      last_error = "connection error: " + httplib::to_string(res.error());
      rate_limited = false;
    } else if (res->status == 200) {
      try {
        const Json raw = Json::parse(res->body);
        const std::string fallback = body.value("model", profile.model_name);
        return {normalize(kind, raw, fallback), latency_ms, attempt, false};
      } catch (const Json::exception& e) {
        throw Error(ErrorCode::TransportFailure, std::string("unparseable response: ") + e.what());
      }
    } else if (res->status == 429) {
      rate_limited = true;
      last_error = "HTTP 429";
    } else if (res->status >= 500) {
      rate_limited = false;
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      retryable = false;
      last_error = "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
    }

    if (!retryable) break;
    if (attempt < total_attempts) {
      const double wait = profile.backoff_initial_s * std::pow(2.0, attempt - 1);
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
  }
  if (rate_limited) {
    throw Error(ErrorCode::RateLimited, "still rate limited after " + std::to_string(total_attempts) + " attempts");
  }
  throw Error(ErrorCode::TransportFailure, last_error + " (after up to " + std::to_string(total_attempts) + " attempts)");
}

}  // namespace semcomp::llm
