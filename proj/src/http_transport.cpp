#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include "halbench/gateway.hpp"

namespace halbench {

namespace {

class HttplibTransport : public HttpTransport {
public:
  explicit HttplibTransport(int timeout_seconds) : timeout_(timeout_seconds) {}

  HttpResponse post_json(const std::string &base_url, const std::string &path,
                         const std::map<std::string, std::string> &headers,
                         const std::string &body) override {
    httplib::Client client(base_url);
    client.set_connection_timeout(timeout_, 0);
    client.set_read_timeout(timeout_, 0);
    client.set_write_timeout(timeout_, 0);
    httplib::Headers h(headers.begin(), headers.end());
    auto result = client.Post(path, h, body, "application/json");
    if (!result)
      return {0, httplib::to_string(result.error())};
    return {result->status, result->body};
  }

private:
  int timeout_;
};

} // namespace

std::unique_ptr<HttpTransport> make_http_transport(int timeout_seconds) {
  return std::make_unique<HttplibTransport>(timeout_seconds);
}

} // namespace halbench
