#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "igda/session.hpp"

namespace igda {

/// JSON-over-HTTP front end for a SessionService, plus optional static
/// files for the browser client.
///
///   POST /api/sessions                  create
///   GET  /api/sessions                  list ids
///   GET  /api/sessions/{id}             state
///   POST /api/sessions/{id}/feedback    label one proposed pair
///   POST /api/sessions/{id}/undo        withdraw pending feedback
///   GET  /api/sessions/{id}/graph       confidence and label matrices
///   GET  /api/sessions/{id}/history     per-round snapshots
///
/// Mutating requests take a request id from the Idempotency-Key or
/// X-Request-Id header, or a "request_id" body field.
class SessionHttpServer {
 public:
  explicit SessionHttpServer(SessionService& service, std::filesystem::path static_dir = {});
  ~SessionHttpServer();

  SessionHttpServer(const SessionHttpServer&) = delete;
  SessionHttpServer& operator=(const SessionHttpServer&) = delete;

  /// Returns false when the address is unavailable. Port 0 picks a free port.
  bool bind(const std::string& host, int port);
  int port() const noexcept { return port_; }

  /// Blocks until stop().
  void serve();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace igda
