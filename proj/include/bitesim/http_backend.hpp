#pragma once
//
// LanguageBackend over plain HTTP. POSTs {"prompt", "image"} as JSON to the
// configured path and reads the reply text from the "text" field.
//

#include <httplib.h>

#include <optional>
#include <string>

#include "bitesim/backend.hpp"
#include "bitesim/json_util.hpp"

namespace bitesim {

struct HttpBackendConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string path = "/complete";
  double timeout_s = 30.0;

  static HttpBackendConfig from_json(const Json& j, const std::string& where) {
    HttpBackendConfig c;
    c.host = field_or<std::string>(j, "host", c.host, where);
    c.port = field_or<int>(j, "port", c.port, where);
    c.path = field_or<std::string>(j, "path", c.path, where);
    c.timeout_s = field_or<double>(j, "timeout_s", c.timeout_s, where);
    if (!(c.timeout_s > 0.0)) throw ConfigError(where + ".timeout_s: must be > 0");
    return c;
  }
};

class HttpBackend final : public LanguageBackend {
 public:
  explicit HttpBackend(HttpBackendConfig cfg) : cfg_(std::move(cfg)) {}

  std::optional<std::string> complete(const std::string& prompt,
                                      const std::string& image_ref) override {
    httplib::Client cli(cfg_.host, cfg_.port);
    const auto secs = static_cast<time_t>(cfg_.timeout_s);
    const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    const Json body{{"prompt", prompt}, {"image", image_ref}};
    auto res = cli.Post(cfg_.path, body.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    const Json reply = Json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("text") || !reply["text"].is_string())
      return std::nullopt;
    return reply["text"].get<std::string>();
  }

 private:
  HttpBackendConfig cfg_;
};

}  // namespace bitesim
