#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <json.hpp>

namespace panelpower {

/// Largest parameter sweep /v1/grid accepts.
inline constexpr std::size_t kMaxGridPoints = 10000;

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

/// Transport-free request handling: `endpoint` is the path ("/v1/mde", ...),
/// `body` the raw request body. Grid responses are returned whole here; the
/// HTTP route streams the same rows.
[[nodiscard]] ApiResponse handle_request(std::string_view method, std::string_view endpoint, std::string_view body);

/// Grid rows, one at a time: writes the envelope prefix, each row, then the
/// suffix through `sink`. Returns false if the request is rejected before any
/// row is produced, in which case `rejected` holds the error response.
bool stream_grid(std::string_view body, const std::function<bool(std::string_view)>& sink, ApiResponse& rejected);

struct ServiceOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    /// Empty means Access-Control-Allow-Origin: *; otherwise only this origin.
    std::string allowed_origin;
    bool restrict_cors = false;
    /// Directory served at "/" (the dashboard bundle); empty disables it.
    std::string static_dir;
};

class Service {
public:
    explicit Service(ServiceOptions options);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the socket; returns the bound port or -1 on failure.
    int bind();
    /// Serves until stop(); call after bind().
    bool listen();
    void stop();
    [[nodiscard]] bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace panelpower
