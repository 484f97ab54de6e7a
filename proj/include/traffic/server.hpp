#ifndef TRAFFIC_SERVER_HPP
#define TRAFFIC_SERVER_HPP

#include <atomic>
#include <thread>
#include <vector>

#include "traffic/service.hpp"

namespace traffic {

// Newline-delimited JSON over TCP; one response line per request line.
class LineServer {
public:
    LineServer(NodeRegistry& registry, int port);
    ~LineServer();

    // Binds and starts accepting; returns the bound port (useful with
    // port 0 in tests).
    int start();
    void stop();

private:
    void accept_loop();
    void serve_connection(int fd);

    NodeRegistry& registry_;
    int port_;
    int listen_fd_ = -1;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
};

}  // namespace traffic

#endif
