#pragma once

#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace halbench {

struct GenerationParams {
  double temperature = 0.0;
  int max_tokens = 4096;

  bool operator==(const GenerationParams &) const = default;
};

/// Single text-in/text-out completion backend.
class Provider {
public:
  virtual ~Provider() = default;
  virtual std::string complete(const std::string &prompt, const std::string &model_id,
                               const GenerationParams &params) = 0;
};

/// Returns canned responses in order; throws UsageError when exhausted.
class ScriptedProvider : public Provider {
public:
  explicit ScriptedProvider(std::vector<std::string> responses);
  std::string complete(const std::string &prompt, const std::string &model_id,
                       const GenerationParams &params) override;
  std::size_t calls() const;

private:
  mutable std::mutex mutex_;
  std::deque<std::string> pending_;
  std::size_t calls_ = 0;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Outbound HTTP used by network providers; tests substitute a fake.
class HttpTransport {
public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string &base_url, const std::string &path,
                                 const std::map<std::string, std::string> &headers,
                                 const std::string &body) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport(int timeout_seconds);

struct OpenAiConfig {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string credential_env = "OPENAI_API_KEY";
  int timeout_seconds = 120;
};

/// Chat-completions client; the prompt becomes a single user message.
/// Reads the credential at construction and throws ConfigError when unset.
class OpenAiProvider : public Provider {
public:
  OpenAiProvider(OpenAiConfig config, std::unique_ptr<HttpTransport> transport);
  std::string complete(const std::string &prompt, const std::string &model_id,
                       const GenerationParams &params) override;

private:
  OpenAiConfig config_;
  std::string credential_;
  std::unique_ptr<HttpTransport> transport_;
};

std::string sha256_hex(std::string_view data);

/// Content hash over prompt, model and generation parameters.
std::string request_digest(const std::string &prompt, const std::string &model_id,
                           const GenerationParams &params);

struct TranscriptEntry {
  std::string digest;
  std::string response;

  bool operator==(const TranscriptEntry &) const = default;
};

/// Line-delimited `{"digest", "response"}` records backed by one file.
class TranscriptStore {
public:
  /// Loads `path` if it exists; a missing file is an empty store.
  explicit TranscriptStore(std::string path);

  std::optional<std::string> lookup(const std::string &digest) const;
  /// Appends to memory and file. An existing digest is left untouched.
  void append(const std::string &digest, const std::string &response);
  std::vector<TranscriptEntry> entries() const;
  const std::string &path() const { return path_; }

private:
  std::string path_;
  mutable std::mutex mutex_;
  std::vector<TranscriptEntry> entries_;
  std::map<std::string, std::size_t> index_;
};

enum class GatewayMode { Record, Replay, Live };

std::string_view to_string(GatewayMode mode);
std::optional<GatewayMode> parse_gateway_mode(std::string_view text);

class Gateway {
public:
  /// Replay needs a store; record needs a store and a provider; live needs a
  /// provider. Throws UsageError otherwise.
  Gateway(GatewayMode mode, std::shared_ptr<TranscriptStore> store,
          std::shared_ptr<Provider> provider);

  /// Replay returns the stored text or throws ReplayMissError. Record is
  /// cache-through: a stored digest is served without calling the provider.
  std::string complete(const std::string &prompt, const std::string &model_id,
                       const GenerationParams &params);

  GatewayMode mode() const { return mode_; }

private:
  GatewayMode mode_;
  std::shared_ptr<TranscriptStore> store_;
  std::shared_ptr<Provider> provider_;
};

/// Fenced blocks concatenated in order with one blank line between them;
/// without fences the trimmed response, or empty when it reads as prose.
std::string extract_code(std::string_view response);

} // namespace halbench
