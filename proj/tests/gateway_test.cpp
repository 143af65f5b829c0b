#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "semcomp/llm_gateway.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>
#include <vector>

#include "semcomp/file_io.hpp"
#include "test_util.hpp"

namespace semcomp::llm {
namespace {

using prompts::ChatMessage;
using prompts::RenderedPrompt;
using prompts::Role;
using semcomp::testing::kFixtureDir;
using semcomp::testing::TempDir;

RenderedPrompt user_prompt(const std::string& text) { return RenderedPrompt{{ChatMessage{Role::User, text}}}; }

EndpointProfile test_profile(const std::string& base_url, const std::string& key_env) {
  EndpointProfile p;
  p.name = "local";
  p.base_url = base_url;
  p.model_name = "test-model";
  p.embedding_model = "test-embed";
  p.api_key_env = key_env;
  p.max_retries = 2;
  p.backoff_initial_s = 0.001;
  p.request_timeout_s = 5.0;
  return p;
}

// Counts sends and never touches the network, but claims to be live.
class FakeLiveTransport : public Transport {
 public:
  TransportReply send(const EndpointProfile&, RequestKind kind, const Json&, const std::string&) override {
    const int now = ++in_flight;
    int prev = peak.load();
    while (now > prev && !peak.compare_exchange_weak(prev, now)) {
    }
    ++sends;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --in_flight;
    if (kind == RequestKind::Embed) return {Json{{"embedding", {1.0, 0.0}}, {"model", "m"}}, 1.0, 1, false};
    return {Json{{"text", "ok"}, {"model", "m"}}, 1.0, 1, false};
  }
  bool is_live() const noexcept override { return true; }

  std::atomic<int> sends{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> peak{0};
};

TEST(RequestDigest, FixtureRecordsAreSelfConsistent) {
  for (const char* path : {"replay/transcript.ndjson", "codegen/transcript.ndjson"}) {
    const auto transcript = Transcript::load(kFixtureDir / path);
    ASSERT_FALSE(transcript.records().empty());
    for (const auto& rec : transcript.records()) {
      EXPECT_EQ(rec.digest, request_digest(rec.request));
    }
  }
}

TEST(RequestDigest, SensitiveToEveryRequestField) {
  auto p = test_profile("https://example.invalid/v1", "UNUSED");
  const auto base = request_digest(chat_request_body(p, user_prompt("hi")));
  EXPECT_NE(base, request_digest(chat_request_body(p, user_prompt("hi "))));
  auto other_model = p;
  other_model.model_name = "other";
  EXPECT_NE(base, request_digest(chat_request_body(other_model, user_prompt("hi"))));
  auto decoding = p;
  decoding.decoding = {{"temperature", 0}};
  EXPECT_NE(base, request_digest(chat_request_body(decoding, user_prompt("hi"))));
  RenderedPrompt two{{ChatMessage{Role::System, "s"}, ChatMessage{Role::User, "hi"}}};
  EXPECT_NE(base, request_digest(chat_request_body(p, two)));
  // Only the request matters, not the profile's bookkeeping fields.
  auto renamed = p;
  renamed.name = "renamed";
  renamed.max_retries = 7;
  EXPECT_EQ(base, request_digest(chat_request_body(renamed, user_prompt("hi"))));
}

TEST(Replay, ServesRecordedResponsesDeterministically) {
  auto transcript = Transcript::load(kFixtureDir / "replay/transcript.ndjson");
  auto replay = std::make_shared<ReplayTransport>(transcript);
  Gateway gw(replay);
  EXPECT_FALSE(gw.is_live());

  const auto chat = std::find_if(transcript.records().begin(), transcript.records().end(),
                                 [](const TranscriptRecord& r) { return r.kind == RequestKind::Chat; });
  ASSERT_NE(chat, transcript.records().end());
  const auto& first = *chat;
  EndpointProfile p = profile_from_json("p", {{"base_url", "https://api.openai.com/v1"},
                                              {"model", first.request.at("model")},
                                              {"api_key_env", "SEMCOMP_TEST_UNSET_KEY"}});
  for (const auto& [k, v] : first.request.items()) {
    if (k != "model" && k != "messages") p.decoding[k] = v;
  }
  RenderedPrompt prompt;
  for (const auto& m : first.request.at("messages")) {
    prompt.messages.push_back({m.at("role") == "system" ? Role::System : Role::User, m.at("content")});
  }
  const auto a = gw.chat_once(p, prompt);
  const auto b = gw.chat_once(p, prompt);
  EXPECT_TRUE(a.replayed);
  EXPECT_EQ(a.digest, first.digest);
  EXPECT_EQ(a.response_text, first.response.at("text").get<std::string>());
  EXPECT_EQ(a.response_text, b.response_text);

  EXPECT_SEMCOMP_ERROR(gw.chat_once(p, user_prompt("never recorded")), ErrorCode::ReplayMiss);
}

TEST(Replay, KindMismatchIsAMiss) {
  Transcript t;
  const auto p = test_profile("https://example.invalid/v1", "UNUSED");
  const Json body = embed_request_body(p, "text");
  t.add({request_digest(body), RequestKind::Embed, body, {{"embedding", {1.0}}, {"model", "e"}}, 0.0});
  ReplayTransport replay(t);
  EXPECT_SEMCOMP_ERROR(replay.send(p, RequestKind::Chat, body, request_digest(body)), ErrorCode::ReplayMiss);
  EXPECT_EQ(replay.send(p, RequestKind::Embed, body, request_digest(body)).response.at("model"), "e");
}

TEST(Replay, FirstRecordWins) {
  Transcript t;
  const auto p = test_profile("https://example.invalid/v1", "UNUSED");
  const Json body = chat_request_body(p, user_prompt("x"));
  t.add({request_digest(body), RequestKind::Chat, body, {{"text", "first"}}, 0.0});
  t.add({request_digest(body), RequestKind::Chat, body, {{"text", "second"}}, 0.0});
  Gateway gw(std::make_shared<ReplayTransport>(t));
  EXPECT_EQ(gw.chat_once(p, user_prompt("x")).response_text, "first");
}

TEST(Transcript, SerializeParseRoundTrip) {
  const auto t = Transcript::load(kFixtureDir / "codegen/transcript.ndjson");
  const auto again = Transcript::parse(t.serialize());
  ASSERT_EQ(again.records().size(), t.records().size());
  EXPECT_EQ(again.serialize(), t.serialize());
}

TEST(Gateway, EmptyEmbeddingInputRejected) {
  Gateway gw(std::make_shared<ReplayTransport>(Transcript{}));
  EXPECT_SEMCOMP_ERROR(gw.embed(test_profile("https://example.invalid/v1", "X"), ""), ErrorCode::EmptyPayload);
}

TEST(Gateway, MissingKeyFailsBeforeSending) {
  ::unsetenv("SEMCOMP_TEST_ABSENT_KEY");
  auto fake = std::make_shared<FakeLiveTransport>();
  Gateway gw(fake);
  const auto p = test_profile("https://example.invalid/v1", "SEMCOMP_TEST_ABSENT_KEY");
  EXPECT_SEMCOMP_ERROR(gw.chat_once(p, user_prompt("hi")), ErrorCode::AuthMissing);
  EXPECT_SEMCOMP_ERROR(gw.embed(p, "hi"), ErrorCode::AuthMissing);
  EXPECT_EQ(fake->sends.load(), 0);
}

TEST(Gateway, RateLimitCapsInFlightRequests) {
  ::setenv("SEMCOMP_TEST_KEY_CAP", "k", 1);
  auto fake = std::make_shared<FakeLiveTransport>();
  Gateway gw(fake);
  auto p = test_profile("https://example.invalid/v1", "SEMCOMP_TEST_KEY_CAP");
  p.rate_limit = 2;
  std::vector<std::jthread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int j = 0; j < 5; ++j) gw.chat_once(p, user_prompt("hi"));
    });
  }
  threads.clear();
  EXPECT_EQ(fake->sends.load(), 40);
  EXPECT_LE(fake->peak.load(), 2);
  EXPECT_GE(fake->peak.load(), 1);
}

TEST(Profile, ApiKeyFieldRejected) {
  EXPECT_SEMCOMP_ERROR(profile_from_json("x", {{"base_url", "https://a.b/v1"}, {"model", "m"}, {"api_key", "sk"}}),
                       ErrorCode::ConfigInvalid);
}

TEST(Profile, Validation) {
  auto p = test_profile("https://a.b/v1", "K");
  EXPECT_NO_THROW(p.validate());
  auto bad = p;
  bad.base_url = "ftp://a.b";
  EXPECT_SEMCOMP_ERROR(bad.validate(), ErrorCode::ConfigInvalid);
  bad = p;
  bad.rate_limit = 0;
  EXPECT_SEMCOMP_ERROR(bad.validate(), ErrorCode::ConfigInvalid);
  bad = p;
  bad.max_retries = -1;
  EXPECT_SEMCOMP_ERROR(bad.validate(), ErrorCode::ConfigInvalid);
  const auto round = profile_from_json("local", profile_to_json(p));
  EXPECT_EQ(round.base_url, p.base_url);
  EXPECT_EQ(round.model_name, p.model_name);
  EXPECT_EQ(round.max_retries, p.max_retries);
}

TEST(TransportSpec, Parsing) {
  EXPECT_EQ(parse_transport_spec("live").mode, TransportMode::Live);
  const auto r = parse_transport_spec("replay:t.ndjson", "/base");
  EXPECT_EQ(r.mode, TransportMode::Replay);
  EXPECT_EQ(r.path, std::filesystem::path("/base/t.ndjson"));
  EXPECT_EQ(parse_transport_spec("record:/abs.ndjson", "/base").path, std::filesystem::path("/abs.ndjson"));
  EXPECT_SEMCOMP_ERROR(parse_transport_spec("carrier-pigeon"), ErrorCode::ConfigInvalid);
  EXPECT_SEMCOMP_ERROR(parse_transport_spec("replay:"), ErrorCode::ConfigInvalid);
  EXPECT_SEMCOMP_ERROR(open_transport(parse_transport_spec("replay:/nonexistent/x.ndjson"), {}),
                       ErrorCode::MissingFile);
}

TEST(TranscriptWriter, RejectsSecretsWithoutWriting) {
  TempDir tmp;
  TranscriptWriter w(tmp / "t.ndjson", {"sk-super-secret"});
  const auto p = test_profile("https://a.b/v1", "K");
  const Json ok = chat_request_body(p, user_prompt("fine"));
  w.append({request_digest(ok), RequestKind::Chat, ok, {{"text", "fine"}}, 1.0});
  const Json leak = chat_request_body(p, user_prompt("my key is sk-super-secret"));
  EXPECT_SEMCOMP_ERROR(w.append({request_digest(leak), RequestKind::Chat, leak, {{"text", "x"}}, 1.0}),
                       ErrorCode::SecretLeak);
  EXPECT_SEMCOMP_ERROR(w.append({request_digest(ok), RequestKind::Chat, ok, {{"text", "sk-super-secret"}}, 1.0}),
                       ErrorCode::SecretLeak);
  EXPECT_EQ(w.count(), 1u);
  const std::string written = io::read_file(tmp / "t.ndjson");
  EXPECT_EQ(written.find("sk-super-secret"), std::string::npos);
  EXPECT_EQ(Transcript::parse(written).records().size(), 1u);
}

// Minimal OpenAI-shaped server on the loopback interface.
class LocalServer {
 public:
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

  explicit LocalServer(Handler chat) {
    server_.Post("/v1/chat/completions", [this, chat](const httplib::Request& req, httplib::Response& res) {
      {
        std::lock_guard lock(mu_);
        auth_headers_.push_back(req.get_header_value("Authorization"));
        bodies_.push_back(req.body);
      }
      ++hits_;
      chat(req, res);
    });
    server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      const auto body = Json::parse(req.body);
      res.set_content(Json{{"data", {{{"embedding", {0.6, 0.8}}}}}, {"model", body.at("model")}}.dump(),
                      "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }
  int hits() const { return hits_.load(); }
  std::vector<std::string> auth_headers() {
    std::lock_guard lock(mu_);
    return auth_headers_;
  }
  std::vector<std::string> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  std::mutex mu_;
  std::vector<std::string> auth_headers_;
  std::vector<std::string> bodies_;
};

void reply_text(httplib::Response& res, const std::string& text) {
  res.set_content(Json{{"model", "served-model"},
                       {"choices", {{{"message", {{"role", "assistant"}, {"content", text}}}}}},
                       {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 3}}}}
                      .dump(),
                  "application/json");
}

class HttpGatewayTest : public ::testing::Test {
 protected:
  void SetUp() override { ::setenv("SEMCOMP_TEST_HTTP_KEY", "test-secret-value", 1); }
};

TEST_F(HttpGatewayTest, SuccessfulExchange) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { reply_text(res, "compressed!"); });
  Gateway gw(std::make_shared<HttpTransport>());
  const auto p = test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY");
  const auto ex = gw.chat_once(p, user_prompt("hello"));
  EXPECT_EQ(ex.response_text, "compressed!");
  EXPECT_EQ(ex.model_name, "served-model");
  ASSERT_TRUE(ex.token_usage.has_value());
  EXPECT_EQ(ex.token_usage->prompt, 11u);
  EXPECT_EQ(ex.attempts, 1);
  EXPECT_FALSE(ex.replayed);
  EXPECT_EQ(server.auth_headers().at(0), "Bearer test-secret-value");
  // The wire body is exactly the digested request.
  EXPECT_EQ(Json::parse(server.bodies().at(0)), chat_request_body(p, user_prompt("hello")));

  const auto v = gw.embed(p, "hello");
  EXPECT_EQ(v.values, (std::vector<double>{0.6, 0.8}));
  EXPECT_EQ(v.source_model, "test-embed");
}

TEST_F(HttpGatewayTest, RetriesAfterRateLimit) {
  std::atomic<int> calls{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    if (calls++ == 0) {
      res.status = 429;
      return;
    }
    reply_text(res, "second time lucky");
  });
  Gateway gw(std::make_shared<HttpTransport>());
  const auto ex = gw.chat_once(test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY"), user_prompt("x"));
  EXPECT_EQ(ex.response_text, "second time lucky");
  EXPECT_EQ(ex.attempts, 2);
}

TEST_F(HttpGatewayTest, PersistentRateLimitExhaustsRetries) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { res.status = 429; });
  Gateway gw(std::make_shared<HttpTransport>());
  auto p = test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY");
  p.max_retries = 3;
  EXPECT_SEMCOMP_ERROR(gw.chat_once(p, user_prompt("x")), ErrorCode::RateLimited);
  EXPECT_EQ(server.hits(), 4);
}

TEST_F(HttpGatewayTest, ServerErrorsBecomeTransportFailure) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  Gateway gw(std::make_shared<HttpTransport>());
  EXPECT_SEMCOMP_ERROR(gw.chat_once(test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY"), user_prompt("x")),
                       ErrorCode::TransportFailure);
  EXPECT_EQ(server.hits(), 3);
}

TEST_F(HttpGatewayTest, ClientErrorsAreNotRetried) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) {
    res.status = 400;
    res.set_content("{\"error\":\"bad\"}", "application/json");
  });
  Gateway gw(std::make_shared<HttpTransport>());
  EXPECT_SEMCOMP_ERROR(gw.chat_once(test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY"), user_prompt("x")),
                       ErrorCode::TransportFailure);
  EXPECT_EQ(server.hits(), 1);
}

TEST_F(HttpGatewayTest, UnreachableHostIsTransportFailure) {
  auto p = test_profile("http://127.0.0.1:1/v1", "SEMCOMP_TEST_HTTP_KEY");
  p.max_retries = 0;
  Gateway gw(std::make_shared<HttpTransport>());
  EXPECT_SEMCOMP_ERROR(gw.chat_once(p, user_prompt("x")), ErrorCode::TransportFailure);
}

TEST_F(HttpGatewayTest, RecordThenReplay) {
  LocalServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = Json::parse(req.body);
    reply_text(res, "echo:" + body.at("messages").back().at("content").get<std::string>());
  });
  TempDir tmp;
  const auto p = test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY");
  const TransportSpec spec{TransportMode::Record, tmp / "rec.ndjson"};
  {
    Gateway gw(open_transport(spec, {p}));
    EXPECT_EQ(gw.chat_once(p, user_prompt("one")).response_text, "echo:one");
    gw.embed(p, "two");
  }
  const std::string written = io::read_file(tmp / "rec.ndjson");
  EXPECT_EQ(written.find("test-secret-value"), std::string::npos);
  EXPECT_EQ(Transcript::parse(written).records().size(), 2u);

  const int hits_before = server.hits();
  Gateway replay(open_transport({TransportMode::Replay, tmp / "rec.ndjson"}, {p}));
  const auto ex = replay.chat_once(p, user_prompt("one"));
  EXPECT_EQ(ex.response_text, "echo:one");
  EXPECT_TRUE(ex.replayed);
  EXPECT_EQ(replay.embed(p, "two").values, (std::vector<double>{0.6, 0.8}));
  EXPECT_EQ(server.hits(), hits_before);
}

TEST_F(HttpGatewayTest, RecordingRefusesToPersistTheKey) {
  LocalServer server([](const httplib::Request&, httplib::Response& res) { reply_text(res, "test-secret-value"); });
  TempDir tmp;
  const auto p = test_profile(server.base_url(), "SEMCOMP_TEST_HTTP_KEY");
  Gateway gw(open_transport({TransportMode::Record, tmp / "rec.ndjson"}, {p}));
  EXPECT_SEMCOMP_ERROR(gw.chat_once(p, user_prompt("leak it")), ErrorCode::SecretLeak);
  std::error_code ec;
  const auto size = std::filesystem::file_size(tmp / "rec.ndjson", ec);
  EXPECT_TRUE(ec || size == 0);
}

}  // namespace
}  // namespace semcomp::llm
