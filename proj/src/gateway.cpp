#include "halbench/gateway.hpp"

#include "halbench/errors.hpp"

#include "json.hpp"
#include <openssl/evp.h>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

namespace halbench {

using nlohmann::json;

ScriptedProvider::ScriptedProvider(std::vector<std::string> responses)
    : pending_(responses.begin(), responses.end()) {}

std::string ScriptedProvider::complete(const std::string &, const std::string &,
                                       const GenerationParams &) {
  std::lock_guard lock(mutex_);
  ++calls_;
  if (pending_.empty())
    throw UsageError("scripted provider has no responses left");
  std::string next = std::move(pending_.front());
  pending_.pop_front();
  return next;
}

std::size_t ScriptedProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

OpenAiProvider::OpenAiProvider(OpenAiConfig config, std::unique_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  const char *value = std::getenv(config_.credential_env.c_str());
  if (!value || !*value)
    throw ConfigError("credential variable " + config_.credential_env + " is not set");
  credential_ = value;
  if (!transport_)
    throw UsageError("openai provider needs a transport");
}

std::string OpenAiProvider::complete(const std::string &prompt, const std::string &model_id,
                                     const GenerationParams &params) {
  json request = {
      {"model", model_id},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", params.temperature},
      {"max_tokens", params.max_tokens},
  };
  auto response = transport_->post_json(config_.base_url, config_.path,
                                        {{"Authorization", "Bearer " + credential_}},
                                        request.dump());
  if (response.status == 0 || response.status == 429 || response.status >= 500)
    throw RetriableError("completion request failed with status " +
                         std::to_string(response.status));
  if (response.status != 200)
    throw InfrastructureError("completion request rejected with status " +
                              std::to_string(response.status) + ": " + response.body);
  try {
    auto body = json::parse(response.body);
    return body.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception &e) {
    throw InfrastructureError(std::string("malformed completion response: ") + e.what());
  }
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw InfrastructureError("sha256 failed");
  static const char *hex = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string request_digest(const std::string &prompt, const std::string &model_id,
                           const GenerationParams &params) {
  json canonical = {
      {"max_tokens", params.max_tokens},
      {"model", model_id},
      {"prompt", prompt},
      {"temperature", params.temperature},
  };
  return sha256_hex(canonical.dump());
}

TranscriptStore::TranscriptStore(std::string path) : path_(std::move(path)) {
  std::ifstream in(path_);
  if (!in)
    return;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      auto record = json::parse(line);
      TranscriptEntry entry{record.at("digest").get<std::string>(),
                            record.at("response").get<std::string>()};
      if (index_.count(entry.digest))
        continue;
      index_[entry.digest] = entries_.size();
      entries_.push_back(std::move(entry));
    } catch (const json::exception &e) {
      throw ParseError(path_ + ": bad transcript record: " + e.what(), line_no);
    }
  }
}

std::optional<std::string> TranscriptStore::lookup(const std::string &digest) const {
  std::lock_guard lock(mutex_);
  auto it = index_.find(digest);
  if (it == index_.end())
    return std::nullopt;
  return entries_[it->second].response;
}

void TranscriptStore::append(const std::string &digest, const std::string &response) {
  std::lock_guard lock(mutex_);
  if (index_.count(digest))
    return;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out)
    throw ConfigError("cannot write transcript '" + path_ + "'");
  out << json{{"digest", digest}, {"response", response}}.dump() << "\n";
  out.flush();
  if (!out)
    throw ConfigError("cannot write transcript '" + path_ + "'");
  index_[digest] = entries_.size();
  entries_.push_back({digest, response});
}

std::vector<TranscriptEntry> TranscriptStore::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::string_view to_string(GatewayMode mode) {
  switch (mode) {
  case GatewayMode::Record:
    return "record";
  case GatewayMode::Replay:
    return "replay";
  case GatewayMode::Live:
    return "live";
  }
  return "replay";
}

std::optional<GatewayMode> parse_gateway_mode(std::string_view text) {
  for (auto m : {GatewayMode::Record, GatewayMode::Replay, GatewayMode::Live})
    if (to_string(m) == text)
      return m;
  return std::nullopt;
}

Gateway::Gateway(GatewayMode mode, std::shared_ptr<TranscriptStore> store,
                 std::shared_ptr<Provider> provider)
    : mode_(mode), store_(std::move(store)), provider_(std::move(provider)) {
  if (mode_ != GatewayMode::Live && !store_)
    throw UsageError(std::string(to_string(mode_)) + " mode needs a transcript store");
  if (mode_ != GatewayMode::Replay && !provider_)
    throw UsageError(std::string(to_string(mode_)) + " mode needs a provider");
}

std::string Gateway::complete(const std::string &prompt, const std::string &model_id,
                              const GenerationParams &params) {
  switch (mode_) {
  case GatewayMode::Replay: {
    auto digest = request_digest(prompt, model_id, params);
    if (auto stored = store_->lookup(digest))
      return *stored;
    throw ReplayMissError(digest);
  }
  case GatewayMode::Record: {
    auto digest = request_digest(prompt, model_id, params);
    if (auto stored = store_->lookup(digest))
      return *stored;
    auto response = provider_->complete(prompt, model_id, params);
    store_->append(digest, response);
    return response;
  }
  case GatewayMode::Live:
    return provider_->complete(prompt, model_id, params);
  }
  throw UsageError("unknown gateway mode");
}

namespace {

bool is_fence(std::string_view line) {
  auto start = line.find_first_not_of(" \t");
  return start != std::string_view::npos && line.substr(start, 3) == "```";
}

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos)
    return {};
  auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

bool looks_like_code(const std::string &line) {
  static const std::regex statement(
      R"(^\s*(import\s|from\s+\S+\s+import\b|def\s|class\s|async\s+def\s|await\s|return\b|if\s.*:\s*$|for\s.*:\s*$|while\s.*:\s*$|try:|with\s.*:\s*$|@\w|[A-Za-z_][\w.]*(\[.*\])?\s*(=[^=]|\+=|-=)|[A-Za-z_][\w.]*\(.*\)\s*$))");
  return std::regex_search(line, statement);
}

} // namespace

std::string extract_code(std::string_view response) {
  std::vector<std::string> blocks;
  std::istringstream in{std::string(response)};
  std::string line;
  bool inside = false;
  std::string current;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (is_fence(line)) {
      if (inside) {
        blocks.push_back(std::move(current));
        current.clear();
      }
      inside = !inside;
      continue;
    }
    if (inside)
      current += line + "\n";
  }
  if (inside)
    blocks.push_back(std::move(current));
  if (!blocks.empty()) {
    std::string out;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (i)
        out += "\n";
      out += blocks[i];
    }
    return out;
  }
  std::string whole = trim(response);
  std::istringstream lines(whole);
  while (std::getline(lines, line))
    if (looks_like_code(line))
      return whole.empty() ? whole : whole + "\n";
  return {};
}

} // namespace halbench
