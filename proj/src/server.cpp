#include "touchlab/server.hpp"

#include <condition_variable>
#include <list>
#include <mutex>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "touchlab/session.hpp"

namespace touchlab::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct Server::Impl {
    std::string address;
    std::uint16_t port;
    AppConfig config;
    asio::io_context ioc;
    tcp::acceptor acceptor{ioc};
    std::thread accept_thread;

    std::mutex mu;
    std::condition_variable stopped_cv;
    bool stopped = false;
    struct Conn {
        std::shared_ptr<tcp::socket> socket;
        std::thread thread;
    };
    std::list<Conn> conns;

    void accept_next() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;
            auto sock = std::make_shared<tcp::socket>(std::move(socket));
            sock->set_option(tcp::no_delay(true), ec);
            {
                std::lock_guard lock(mu);
                if (stopped) return;
                conns.push_back({sock, std::thread([this, sock] { serve_connection(sock); })});
            }
            accept_next();
        });
    }

    void serve_connection(const std::shared_ptr<tcp::socket>& sock) {
        try {
            websocket::stream<tcp::socket&> ws(*sock);
            ws.accept();
            ws.text(true);
            Session session(config);
            beast::flat_buffer buffer;
            for (;;) {
                buffer.clear();
                ws.read(buffer);
                const std::string text = beast::buffers_to_string(buffer.data());
                for (const auto& reply : session.handle_text(text)) ws.write(asio::buffer(reply));
            }
        } catch (const std::exception&) {
            // Closed by the peer or by stop().
        }
    }
};

Server::Server(std::string address, std::uint16_t port, AppConfig config) : impl_(std::make_unique<Impl>()) {
    impl_->address = std::move(address);
    impl_->port = port;
    impl_->config = std::move(config);
}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
    auto& m = *impl_;
    const tcp::endpoint ep(asio::ip::make_address(m.address), m.port);
    m.acceptor.open(ep.protocol());
    m.acceptor.set_option(asio::socket_base::reuse_address(true));
    m.acceptor.bind(ep);
    m.acceptor.listen();
    m.port = m.acceptor.local_endpoint().port();
    m.accept_next();
    m.accept_thread = std::thread([&m] { m.ioc.run(); });
    return m.port;
}

void Server::stop() {
    auto& m = *impl_;
    std::list<Impl::Conn> conns;
    {
        std::lock_guard lock(m.mu);
        if (m.stopped) return;
        m.stopped = true;
        conns.swap(m.conns);
    }
    asio::post(m.ioc, [&m] {
        beast::error_code ec;
        m.acceptor.close(ec);
    });
    if (m.accept_thread.joinable()) {
        m.ioc.stop();
        m.accept_thread.join();
    }
    for (auto& c : conns) {
        beast::error_code ec;
        c.socket->shutdown(tcp::socket::shutdown_both, ec);
        c.socket->close(ec);
        if (c.thread.joinable()) c.thread.join();
    }
    m.stopped_cv.notify_all();
}

void Server::wait() {
    std::unique_lock lock(impl_->mu);
    impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

}  // namespace touchlab::service
