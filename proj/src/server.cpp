#include "traffic/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <string>

namespace traffic {

LineServer::LineServer(NodeRegistry& registry, int port)
    : registry_(registry), port_(port) {}

LineServer::~LineServer() { stop(); }

int LineServer::start() {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw IoError("socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(port_));
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        ::close(listen_fd_);
        throw IoError("bind to port " + std::to_string(port_) + " failed");
    }
    if (::listen(listen_fd_, 16) != 0) {
        ::close(listen_fd_);
        throw IoError("listen() failed");
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return port_;
}

void LineServer::stop() {
    if (!running_.exchange(false)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    ::close(listen_fd_);
    if (accept_thread_.joinable()) accept_thread_.join();
    for (std::thread& t : workers_)
        if (t.joinable()) t.join();
    workers_.clear();
}

void LineServer::accept_loop() {
    while (running_) {
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) break;
        workers_.emplace_back([this, fd] { serve_connection(fd); });
    }
}

void LineServer::serve_connection(int fd) {
    std::string buffer;
    char chunk[4096];
    while (running_) {
        const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
        if (n <= 0) break;
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, pos);
            buffer.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            const std::string response = registry_.handle_message(line) + "\n";
            std::size_t sent = 0;
            while (sent < response.size()) {
                const ssize_t w = ::send(fd, response.data() + sent,
                                         response.size() - sent, MSG_NOSIGNAL);
                if (w <= 0) { sent = response.size(); break; }
                sent += static_cast<std::size_t>(w);
            }
        }
    }
    ::close(fd);
}

}  // namespace traffic
