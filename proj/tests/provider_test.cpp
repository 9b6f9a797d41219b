#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "t2vqa/provider.hpp"
#include "test_util.hpp"

namespace t2vqa {
namespace {

using namespace provider;
using nlohmann::json;

FrameSequence tiny_video(int frames, std::uint32_t seed, int size = 16) {
  std::vector<RgbFrame> out;
  for (int i = 0; i < frames; ++i) out.push_back(testing::random_rgb(size, size, seed + i));
  return make_sequence(std::move(out), "vid");
}

// Minimal structural check for the subset of JSON Schema the wire-format file
// uses: type, required, properties, items, minItems, minimum, enum.
bool conforms(const json& value, const json& schema, std::string& why) {
  if (schema.contains("type")) {
    const std::string t = schema["type"];
    const bool ok = (t == "object" && value.is_object()) || (t == "array" && value.is_array()) ||
                    (t == "string" && value.is_string()) || (t == "number" && value.is_number()) ||
                    (t == "integer" && value.is_number_integer());
    if (!ok) {
      why = "expected " + t + ", got " + value.dump().substr(0, 40);
      return false;
    }
  }
  if (schema.contains("enum") && std::find(schema["enum"].begin(), schema["enum"].end(), value) == schema["enum"].end()) {
    why = "value not in enum: " + value.dump();
    return false;
  }
  if (schema.contains("minimum") && value.is_number() && value.get<double>() < schema["minimum"].get<double>()) {
    why = "below minimum";
    return false;
  }
  if (schema.contains("required")) {
    for (const auto& key : schema["required"]) {
      if (!value.contains(key.get<std::string>())) {
        why = "missing " + key.get<std::string>();
        return false;
      }
    }
  }
  if (schema.contains("properties") && value.is_object()) {
    for (const auto& [key, sub] : schema["properties"].items()) {
      if (value.contains(key) && !conforms(value[key], sub, why)) return false;
    }
  }
  if (schema.contains("items") && value.is_array()) {
    if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) {
      why = "too few items";
      return false;
    }
    for (const auto& item : value) {
      if (!conforms(item, schema["items"], why)) return false;
    }
  }
  return true;
}

const json& wire_schema() {
  static const json schema = [] {
    std::ifstream in(std::filesystem::path(T2VQA_SOURCE_DIR) / "schemas" / "provider.schema.json");
    return json::parse(in);
  }();
  return schema;
}

void expect_conforms(const json& value, const std::string& def) {
  std::string why;
  EXPECT_TRUE(conforms(value, wire_schema()["$defs"][def], why)) << def << ": " << why;
}

// In-process stub server speaking the wire protocol.
class StubServer {
 public:
  StubServer() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(json{{"status", "ok"}, {"mode", "stub"}}.dump(), "application/json");
    });
    server_.Post("/caption", [this](const httplib::Request& req, httplib::Response& res) {
      ++caption_calls;
      if (force_status > 0) {
        res.status = force_status;
        res.set_content(json{{"error", "forced failure"}}.dump(), "application/json");
        return;
      }
      track([&] {
        const RgbFrame f = decode(req, res);
        if (res.status == 400) return;
        res.set_content(json{{"caption", stub_caption(f)}}.dump(), "application/json");
      });
    });
    server_.Post("/class_probs", [this](const httplib::Request& req, httplib::Response& res) {
      track([&] {
        const RgbFrame f = decode(req, res);
        if (res.status == 400) return;
        res.set_content(json{{"probs", stub_class_probs(f)}, {"classes", kStubClasses}}.dump(), "application/json");
      });
    });
    server_.Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
      const auto body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.contains("text") || !body["text"].is_string()) {
        res.status = 400;
        res.set_content(json{{"error", "malformed request"}}.dump(), "application/json");
        return;
      }
      const auto v = stub_embedding(body["text"].get<std::string>());
      res.set_content(json{{"vector", v}, {"dim", v.size()}}.dump(), "application/json");
    });
    server_.Post("/flaky", [this](const httplib::Request&, httplib::Response& res) {
      ++flaky_calls;
      res.status = 503;
      res.set_content(json{{"error", "model not loaded"}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<int> max_concurrent{0};
  std::atomic<int> flaky_calls{0};
  std::atomic<int> caption_calls{0};
  std::atomic<int> force_status{0};
  std::atomic<int> delay_ms{0};

 private:
  template <typename Fn>
  void track(Fn&& fn) {
    const int now = ++active_;
    int prev = max_concurrent.load();
    while (now > prev && !max_concurrent.compare_exchange_weak(prev, now)) {
    }
    if (delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms.load()));
    fn();
    --active_;
  }

  static RgbFrame decode(const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = json::parse(req.body);
      return decode_image(codec::base64_decode(body.at("image").get<std::string>()));
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(json{{"error", "malformed request"}}.dump(), "application/json");
      return RgbFrame(1, 1);
    }
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::atomic<int> active_{0};
};

// ---------------------------------------------------------------------- stub

TEST(Stub, CaptionsAreDeterministicFunctionsOfFrameBytes) {
  const FrameSequence v = tiny_video(6, 1);
  StubProvider a, b;
  const auto caps = a.captions("vid", v);
  EXPECT_EQ(caps.size(), 6u);
  EXPECT_EQ(caps, b.captions("other", v));
  for (const auto& c : caps) {
    EXPECT_NE(std::find(stub_phrases().begin(), stub_phrases().end(), c), stub_phrases().end());
  }
  // The phrase is a function of the bytes: over many frames several phrases occur.
  std::set<std::string> seen;
  for (std::uint32_t s = 0; s < 64; ++s) seen.insert(stub_caption(testing::random_rgb(8, 8, s)));
  EXPECT_GT(seen.size(), 4u);
}

TEST(Stub, EmbeddingsAreDeterministicAndNormalized) {
  const auto v = stub_embedding("a dog running on the grass");
  EXPECT_EQ(v.size(), 64u);
  EXPECT_EQ(v, stub_embedding("a dog running on the grass"));
  EXPECT_EQ(v, stub_embedding("A DOG, running on the grass!"));
  double norm = 0.0;
  for (double x : v) norm += x * x;
  EXPECT_NEAR(norm, 1.0, 1e-12);
  EXPECT_NEAR(text::vector_cosine(v, v), 1.0, 1e-6);
  EXPECT_NE(v, stub_embedding("a dog running on the grass", "other seed"));
  EXPECT_EQ(stub_embedding("  ..  "), std::vector<double>(64, 0.0));
}

TEST(Stub, EmbeddingCosineOfDisjointTextsIsClampedAtZero) {
  // Hash projections of unrelated tokens are nearly orthogonal; whatever the
  // raw cosine, the clamped value is within [0, 1).
  int clamped = 0;
  for (int i = 0; i < 50; ++i) {
    const auto a = stub_embedding("alpha" + std::to_string(i));
    const auto b = stub_embedding("omega" + std::to_string(i));
    double dot = 0.0;
    for (int k = 0; k < 64; ++k) dot += a[k] * b[k];
    const double c = text::vector_cosine(a, b);
    EXPECT_LT(c, 1.0);
    if (dot < 0) {
      EXPECT_EQ(c, 0.0);
      ++clamped;
    }
  }
  EXPECT_GT(clamped, 0);
}

TEST(Stub, ClassProbsAreValidDistributions) {
  const FrameSequence v = tiny_video(3, 9);
  StubProvider p;
  const ClassProbs probs = p.class_probs("vid", v);
  EXPECT_EQ(probs.classes, 1000);
  ASSERT_EQ(probs.frames.size(), 3u);
  for (const auto& f : probs.frames) {
    double sum = 0.0;
    for (double x : f) sum += x;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  EXPECT_NO_THROW(probs.validate());
  EXPECT_EQ(probs.frames, p.class_probs("vid", v).frames);
}

TEST(Stub, HundredRandomRequestsAreReproducible) {
  std::mt19937 rng(12);
  for (int i = 0; i < 100; ++i) {
    const RgbFrame f = testing::random_rgb(1 + rng() % 20, 1 + rng() % 20, rng());
    const std::string t = "word" + std::to_string(rng() % 1000) + " other" + std::to_string(rng() % 1000);
    EXPECT_EQ(stub_caption(f), stub_caption(f));
    EXPECT_EQ(stub_class_probs(f), stub_class_probs(f));
    EXPECT_EQ(stub_embedding(t), stub_embedding(t));
  }
}

// ---------------------------------------------------------------------- file

TEST(FileMode, ReadsCaptionsEmbeddingsAndProbs) {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "captions");
  std::filesystem::create_directories(dir / "class_probs");
  testing::write_text(dir / "captions" / "v1.jsonl", "{\"frame\":0,\"caption\":\"a\"}\n{\"frame\":1,\"caption\":\"b\"}\n");
  testing::write_text(dir / "embeddings.jsonl",
                      "{\"text\":\"a\",\"vector\":[1,0]}\n{\"text\":\"b\",\"vector\":[0,1]}\n");
  testing::write_text(dir / "class_probs" / "v1.json", "{\"classes\":2,\"frames\":[[0.5,0.5],[1,0]]}");
  FileProvider p(dir.path());
  const FrameSequence v = tiny_video(2, 1);
  EXPECT_EQ(p.captions("v1", v), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(p.embed("b"), (std::vector<double>{0, 1}));
  EXPECT_EQ(p.class_probs("v1", v).frames.size(), 2u);

  try {
    p.embed("missing text");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retriable());
  }
  EXPECT_THROW(p.captions("v2", v), ProviderError);
  EXPECT_THROW(p.captions("v1", tiny_video(3, 1)), ProviderError);
  EXPECT_THROW(FileProvider(dir / "nope"), IoError);
}

TEST(MakeProvider, ParsesSpecsAndEnvironmentFallback) {
  testing::TempDir dir;
  EXPECT_EQ(make_provider("stub")->name(), "stub");
  EXPECT_EQ(make_provider("stub:seed")->name(), "stub:seed");
  EXPECT_EQ(make_provider("stub:t2vqa-stub")->name(), "stub");
  EXPECT_EQ(make_provider("file:" + dir.path().string())->name(), "file:" + dir.path().string());
  EXPECT_EQ(make_provider("http:127.0.0.1:9")->name(), "http:http://127.0.0.1:9");
  EXPECT_EQ(make_provider("http://localhost:8000/")->name(), "http:http://localhost:8000");
  EXPECT_THROW(make_provider("grpc:x"), InvalidInput);
  ::setenv("T2VQA_PROVIDER", ("file:" + dir.path().string()).c_str(), 1);
  EXPECT_EQ(make_provider("")->name(), "file:" + dir.path().string());
  ::unsetenv("T2VQA_PROVIDER");
  EXPECT_EQ(make_provider("")->name(), "stub");
}

// Counts calls so cache hits can be observed.
class CountingProvider : public StubProvider {
 public:
  std::vector<std::string> captions(const std::string& id, const FrameSequence& v) override {
    ++caption_calls;
    return StubProvider::captions(id, v);
  }
  int caption_calls = 0;
};

TEST(CaptionCache, SecondRunMakesNoProviderCalls) {
  testing::TempDir dir;
  const FrameSequence v = tiny_video(6, 3);
  CountingProvider p;
  const auto first = caption_video("vid", v, p, dir / "cache" / "vid.jsonl");
  EXPECT_EQ(p.caption_calls, 1);
  EXPECT_EQ(first.size(), 6u);
  const auto second = caption_video("vid", v, p, dir / "cache" / "vid.jsonl");
  EXPECT_EQ(p.caption_calls, 1);
  EXPECT_EQ(second.captions, first.captions);
  EXPECT_THROW(caption_video("vid", tiny_video(5, 3), p, dir / "cache" / "vid.jsonl"), InvalidInput);
}

// ---------------------------------------------------------------------- http

TEST(Http, HealthRoundTripIsFast) {
  StubServer server;
  HttpProvider client(server.url());
  const auto start = std::chrono::steady_clock::now();
  const json h = client.health();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_EQ(h, (json{{"status", "ok"}, {"mode", "stub"}}));
  EXPECT_LT(std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count(), 100);
  expect_conforms(h, "health_response");
}

TEST(Http, MatchesInProcessStub) {
  StubServer server;
  HttpProvider client(server.url());
  StubProvider local;
  const FrameSequence v = tiny_video(5, 30);
  EXPECT_EQ(client.captions("vid", v), local.captions("vid", v));
  EXPECT_EQ(client.embed("a red ball"), local.embed("a red ball"));
  EXPECT_EQ(client.class_probs("vid", v).frames, local.class_probs("vid", v).frames);
}

TEST(Http, BoundedInFlightRequests) {
  StubServer server;
  server.delay_ms = 40;
  HttpProvider client(server.url(), HttpOptions{.max_in_flight = 4});
  const FrameSequence v = tiny_video(12, 50);
  const auto caps = client.captions("vid", v);
  EXPECT_EQ(caps.size(), 12u);
  EXPECT_LE(server.max_concurrent.load(), 4);
  EXPECT_GE(server.max_concurrent.load(), 2);
  // Responses are matched by frame index, not arrival order.
  EXPECT_EQ(caps, StubProvider().captions("vid", v));
}

TEST(Http, UnreachableServerIsRetriable) {
  // Bind then release a port so nothing listens on it.
  int port;
  {
    httplib::Server s;
    port = s.bind_to_any_port("127.0.0.1");
  }
  HttpProvider client("http://127.0.0.1:" + std::to_string(port), HttpOptions{.retries = 0, .timeout_seconds = 1.0});
  try {
    client.embed("x");
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.retriable());
  }
}

TEST(Http, ServerErrorIsRetriedThenReported) {
  StubServer server;
  server.force_status = 500;
  HttpProvider client(server.url(), HttpOptions{.max_in_flight = 1, .retries = 2});
  try {
    client.captions("vidX", tiny_video(1, 1));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_TRUE(e.retriable());
    EXPECT_NE(std::string(e.what()).find("vidX frame 0"), std::string::npos) << e.what();
  }
  EXPECT_EQ(server.caption_calls.load(), 3);
}

TEST(Http, ClientErrorIsNotRetried) {
  StubServer server;
  server.force_status = 400;
  HttpProvider client(server.url(), HttpOptions{.max_in_flight = 1, .retries = 2});
  try {
    client.captions("vidX", tiny_video(1, 1));
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_FALSE(e.retriable());
  }
  EXPECT_EQ(server.caption_calls.load(), 1);
}

TEST(Http, ErrorResponsesConform) {
  StubServer server;
  httplib::Client raw(server.url());
  auto res = raw.Post("/flaky", "{}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 503);
  expect_conforms(json::parse(res->body), "error_response");
}

TEST(Http, MalformedRequestGets400) {
  StubServer server;
  httplib::Client raw(server.url());
  auto res = raw.Post("/embed", "{\"txt\": 1}", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
}

TEST(WireSchema, StubResponsesConform) {
  StubServer server;
  httplib::Client raw(server.url());
  const RgbFrame f = testing::random_rgb(8, 8, 2);
  const json image_req = {{"image", codec::base64_encode(encode_png(f))}};
  expect_conforms(image_req, "caption_request");
  expect_conforms(image_req, "class_probs_request");
  expect_conforms(json{{"text", "hi"}}, "embed_request");

  auto cap = raw.Post("/caption", image_req.dump(), "application/json");
  ASSERT_TRUE(cap);
  expect_conforms(json::parse(cap->body), "caption_response");
  auto emb = raw.Post("/embed", json{{"text", "hi there"}}.dump(), "application/json");
  ASSERT_TRUE(emb);
  expect_conforms(json::parse(emb->body), "embed_response");
  auto cp = raw.Post("/class_probs", image_req.dump(), "application/json");
  ASSERT_TRUE(cp);
  expect_conforms(json::parse(cp->body), "class_probs_response");

  std::string why;
  EXPECT_FALSE(conforms(json{{"vector", "oops"}, {"dim", 1}}, wire_schema()["$defs"]["embed_response"], why));
  EXPECT_FALSE(conforms(json{{"status", "ok"}}, wire_schema()["$defs"]["health_response"], why));
}

}  // namespace
}  // namespace t2vqa
