#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <thread>

#include "touchlab/config.hpp"

namespace touchlab::service {

/// WebSocket endpoint speaking the v=1 JSON protocol; one thread and one Session per connection.
class Server {
public:
    Server(std::string address, std::uint16_t port, AppConfig config);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts accepting in a background thread; returns the bound port.
    std::uint16_t start();
    /// Stops accepting; open connections finish on their own threads.
    void stop();
    /// Blocks until stop() is called from another thread.
    void wait();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace touchlab::service
