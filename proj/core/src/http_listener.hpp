#pragma once

#include "httplib.h"

#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

namespace fogroute::detail {

/// Owns an httplib server running on a background thread.
class HttpListener {
public:
  HttpListener() = default;
  ~HttpListener() { stop(); }

  HttpListener(const HttpListener&) = delete;
  HttpListener& operator=(const HttpListener&) = delete;

  /// Fresh server object for the caller to register routes on.
  httplib::Server& reset() {
    stop();
    server_ = std::make_unique<httplib::Server>();
    return *server_;
  }

  httplib::Server& server() { return *server_; }

  /// Binds and starts serving. Port 0 picks an ephemeral port.
  int start(const std::string& host, int port) {
    if (!server_) {
      throw std::logic_error("HttpListener::start without routes");
    }
    if (port == 0) {
      port_ = server_->bind_to_any_port(host);
    } else {
      port_ = server_->bind_to_port(host, port) ? port : -1;
    }
    if (port_ <= 0) {
      throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
    }
    host_ = host;
    thread_ = std::thread([server = server_.get()] { server->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
  }

  void stop() {
    if (server_) {
      server_->stop();
    }
    if (thread_.joinable()) {
      thread_.join();
    }
  }

  [[nodiscard]] bool running() const { return server_ && server_->is_running(); }
  [[nodiscard]] int port() const { return port_; }
  [[nodiscard]] const std::string& host() const { return host_; }

private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = -1;
};

} // namespace fogroute::detail
