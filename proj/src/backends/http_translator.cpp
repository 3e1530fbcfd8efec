#include "detox/backends/http_translator.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"

namespace detox::backends {

HttpTranslationClient::HttpTranslationClient(HttpTranslatorOptions opts) : opts_(std::move(opts)) {
    const auto scheme_end = opts_.endpoint.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("translator endpoint must be a full URL: " + opts_.endpoint);
    const auto path_begin = opts_.endpoint.find('/', scheme_end + 3);
    scheme_host_port_ = opts_.endpoint.substr(0, path_begin);
    path_ = path_begin == std::string::npos ? "/" : opts_.endpoint.substr(path_begin);
    const char* key = std::getenv(opts_.credential_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw ConfigError("translator credential variable " + opts_.credential_env + " is not set");
    }
    key_ = key;
}

std::string HttpTranslationClient::translate(const std::string& text, Language src, Language tgt) {
    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(opts_.timeout);
    client.set_read_timeout(opts_.timeout);

    const nlohmann::json body = {
        {"q", text},
        {"source", std::string(language_code(src))},
        {"target", std::string(language_code(tgt))},
        {"format", "text"},
    };
    const std::string sep = path_.find('?') == std::string::npos ? "?" : "&";
    auto res = client.Post(path_ + sep + "key=" + httplib::detail::encode_query_param(key_), body.dump(), "application/json");
    if (!res) throw TransientError("transport error: " + httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500) {
        throw TransientError("HTTP " + std::to_string(res->status));
    }
    if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status) + ": " + res->body);

    try {
        const auto parsed = nlohmann::json::parse(res->body);
        return parsed.at("data").at("translations").at(0).at("translatedText").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("unexpected translator response: ") + e.what());
    }
}

}  // namespace detox::backends
