#include "plp/http.hpp"

#include <httplib.h>

#include <chrono>

#include "plp/errors.hpp"

namespace plp::http {

Endpoint parse_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("URL without scheme: " + url);
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") throw ConfigError("unsupported URL scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    if (path_start == std::string::npos) {
        ep.origin = url;
    } else {
        ep.origin = url.substr(0, path_start);
        ep.path_prefix = url.substr(path_start);
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    if (ep.origin.size() <= scheme_end + 3) throw ConfigError("URL without host: " + url);
    return ep;
}

Response post_json(const Endpoint& endpoint, const std::string& path, const std::string& body,
                   const std::map<std::string, std::string>& headers, double timeout_seconds) {
    httplib::Client client(endpoint.origin);
    const auto timeout = std::chrono::duration<double>(timeout_seconds);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
    client.set_connection_timeout(micros);
    client.set_read_timeout(micros);
    client.set_write_timeout(micros);

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);

    Response out;
    auto res = client.Post(endpoint.path_prefix + path, h, body, "application/json");
    if (!res) {
        out.error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

}  // namespace plp::http
