#include "doctest.h"

#include "halbench/errors.hpp"
#include "halbench/gateway.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace halbench;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string &name)
      : path(fs::temp_directory_path() / ("halbench_" + name + "_" +
                                          std::to_string(::getpid()))) {
    fs::remove(path);
  }
  ~TempFile() { fs::remove(path); }
};

class CountingTransport : public HttpTransport {
public:
  explicit CountingTransport(int *calls, HttpResponse reply) : calls_(calls), reply_(reply) {}
  HttpResponse post_json(const std::string &, const std::string &,
                         const std::map<std::string, std::string> &headers,
                         const std::string &body) override {
    ++*calls_;
    last_body = body;
    auth = headers.count("Authorization") ? headers.at("Authorization") : "";
    return reply_;
  }
  std::string last_body;
  std::string auth;

private:
  int *calls_;
  HttpResponse reply_;
};

} // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("request digests are stable and parameter sensitive") {
  GenerationParams p;
  auto a = request_digest("prompt", "gpt-4o", p);
  CHECK(a == request_digest("prompt", "gpt-4o", p));
  CHECK(a.size() == 64);
  CHECK(a != request_digest("prompt", "gpt-4.1", p));
  CHECK(a != request_digest("prompt!", "gpt-4o", p));
  GenerationParams hot;
  hot.temperature = 0.7;
  CHECK(a != request_digest("prompt", "gpt-4o", hot));
  GenerationParams longer;
  longer.max_tokens = 8192;
  CHECK(a != request_digest("prompt", "gpt-4o", longer));
  CHECK(a == sha256_hex(R"({"max_tokens":4096,"model":"gpt-4o","prompt":"prompt","temperature":0.0})"));
}

TEST_CASE("replay returns stored text byte-identical and never mutates the store") {
  TempFile file("replay");
  GenerationParams p;
  std::string tricky = "```python\nprint(\"h\\u00e9\")\n```\n\ttrailing  \r\n";
  {
    TranscriptStore writer(file.path.string());
    writer.append(request_digest("q", "m", p), tricky);
  }
  auto before = fs::file_size(file.path);
  auto store = std::make_shared<TranscriptStore>(file.path.string());
  Gateway gateway(GatewayMode::Replay, store, nullptr);
  CHECK(gateway.complete("q", "m", p) == tricky);
  try {
    gateway.complete("missing", "m", p);
    FAIL("expected a replay miss");
  } catch (const ReplayMissError &e) {
    CHECK(e.digest() == request_digest("missing", "m", p));
    CHECK(std::string(e.what()).find(e.digest()) != std::string::npos);
  }
  CHECK(store->entries().size() == 1);
  CHECK(fs::file_size(file.path) == before);
}

TEST_CASE("record mode is cache-through with one entry per digest") {
  TempFile file("record");
  GenerationParams p;
  for (int run = 0; run < 2; ++run) {
    auto store = std::make_shared<TranscriptStore>(file.path.string());
    auto provider = std::make_shared<ScriptedProvider>(std::vector<std::string>{"one", "two"});
    Gateway gateway(GatewayMode::Record, store, provider);
    CHECK(gateway.complete("a", "m", p) == "one");
    CHECK(gateway.complete("a", "m", p) == "one");
    CHECK(gateway.complete("b", "m", p) == (run == 0 ? "two" : "two"));
    CHECK(provider->calls() == (run == 0 ? 2u : 0u));
  }
  TranscriptStore reloaded(file.path.string());
  CHECK(reloaded.entries().size() == 2);
}

TEST_CASE("gateway construction rules") {
  CHECK_THROWS_AS(Gateway(GatewayMode::Replay, nullptr, nullptr), UsageError);
  CHECK_THROWS_AS(Gateway(GatewayMode::Live, nullptr, nullptr), UsageError);
  TempFile file("ctor");
  auto store = std::make_shared<TranscriptStore>(file.path.string());
  CHECK_THROWS_AS(Gateway(GatewayMode::Record, store, nullptr), UsageError);
  CHECK(parse_gateway_mode("replay") == GatewayMode::Replay);
  CHECK_FALSE(parse_gateway_mode("offline"));
}

TEST_CASE("malformed transcript lines are parse errors with a line number") {
  TempFile file("bad");
  {
    std::ofstream out(file.path);
    out << R"({"digest":"a","response":"x"})" << "\n" << "not json\n";
  }
  try {
    TranscriptStore store(file.path.string());
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("openai provider needs its credential before any network use") {
  int calls = 0;
  ::unsetenv("HALBENCH_TEST_MISSING_KEY");
  OpenAiConfig config;
  config.credential_env = "HALBENCH_TEST_MISSING_KEY";
  CHECK_THROWS_AS(OpenAiProvider(config, std::make_unique<CountingTransport>(
                                             &calls, HttpResponse{200, "{}"})),
                  ConfigError);
  CHECK(calls == 0);
}

TEST_CASE("openai provider request and response handling") {
  int calls = 0;
  ::setenv("HALBENCH_TEST_KEY", "secret", 1);
  OpenAiConfig config;
  config.credential_env = "HALBENCH_TEST_KEY";
  auto transport = std::make_unique<CountingTransport>(
      &calls, HttpResponse{200, R"({"choices":[{"message":{"content":"hello"}}]})"});
  auto *raw = transport.get();
  OpenAiProvider provider(config, std::move(transport));
  CHECK(provider.complete("p", "gpt-4o", {}) == "hello");
  CHECK(calls == 1);
  CHECK(raw->auth == "Bearer secret");
  CHECK(raw->last_body.find("\"role\":\"user\"") != std::string::npos);
  CHECK(raw->last_body.find("secret") == std::string::npos);

  OpenAiProvider busy(config, std::make_unique<CountingTransport>(&calls, HttpResponse{503, ""}));
  CHECK_THROWS_AS(busy.complete("p", "m", {}), RetriableError);
  OpenAiProvider down(config, std::make_unique<CountingTransport>(&calls, HttpResponse{0, ""}));
  CHECK_THROWS_AS(down.complete("p", "m", {}), RetriableError);
  OpenAiProvider junk(config,
                      std::make_unique<CountingTransport>(&calls, HttpResponse{200, "[]"}));
  CHECK_THROWS_AS(junk.complete("p", "m", {}), InfrastructureError);
  ::unsetenv("HALBENCH_TEST_KEY");
}

TEST_CASE("extract_code") {
  SUBCASE("one fenced block") {
    CHECK(extract_code("Here:\n```python\nx = 1\ny = 2\n```\nDone.") == "x = 1\ny = 2\n");
  }
  SUBCASE("two blocks in order separated by one blank line") {
    CHECK(extract_code("```python\na = 1\n```\ntext\n```\nb = 2\n```\n") == "a = 1\n\nb = 2\n");
  }
  SUBCASE("prose refusal") {
    CHECK(extract_code("I am sorry, but this task cannot be solved with the provided VSS "
                       "signals list.")
              .empty());
    CHECK(extract_code("   \n\n").empty());
  }
  SUBCASE("bare code without fences") {
    CHECK(extract_code("\n\nimport asyncio\nasyncio.run(main())\n  \n") ==
          "import asyncio\nasyncio.run(main())\n");
  }
  SUBCASE("unterminated fence keeps the rest") {
    CHECK(extract_code("```python\ndef f(:\n") == "def f(:\n");
  }
}
