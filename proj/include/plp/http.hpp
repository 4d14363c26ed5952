#pragma once

#include <map>
#include <string>

namespace plp::http {

struct Endpoint {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // "" or "/v1"
};

// Throws ConfigError for anything that is not http:// or https://.
Endpoint parse_endpoint(const std::string& url);

struct Response {
    int status = 0;  // 0 means the request never completed
    std::string body;
    std::string error;
};

Response post_json(const Endpoint& endpoint, const std::string& path, const std::string& body,
                   const std::map<std::string, std::string>& headers, double timeout_seconds);

}  // namespace plp::http
