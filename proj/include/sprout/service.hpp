#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "sprout/llm.hpp"

namespace sprout::service {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::string templates_dir;  // empty: built-in templates
    std::shared_ptr<const llm::Gateway> gateway;
    std::int64_t default_seed = 0;
};

/// "host:port", ":port" or "port". Throws InvalidArgument.
void parse_bind(const std::string& bind, ServiceConfig& config);

/// HTTP + server-sent-events front end over the engine, tree operations,
/// node space and store. Projects live in memory.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds the listening socket. Throws BindError. Returns the bound port.
    int bind();

    /// Serves until stop(). Binds first when needed.
    void listen();

    /// bind() then listen() on a background thread.
    void start();

    /// Stops autopilot runs, waits for them, then closes the server.
    void stop();

    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sprout::service
