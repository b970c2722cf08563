#include "igda/server.hpp"

#include <httplib.h>

#include "igda/errors.hpp"

namespace igda {

struct SessionHttpServer::Impl {
  SessionService& service;
  httplib::Server server;

  explicit Impl(SessionService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const ApiResponse& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

/// Parses the body; an empty body is an empty object.
bool read_body(const httplib::Request& req, httplib::Response& res, nlohmann::json& out) {
  if (req.body.empty()) {
    out = nlohmann::json::object();
    return true;
  }
  try {
    out = nlohmann::json::parse(req.body);
    return true;
  } catch (const nlohmann::json::exception& err) {
    send(res, {400, {{"error", std::string("invalid JSON body: ") + err.what()}}});
    return false;
  }
}

std::string request_id(const httplib::Request& req, const nlohmann::json& body) {
  if (req.has_header("Idempotency-Key")) return req.get_header_value("Idempotency-Key");
  if (req.has_header("X-Request-Id")) return req.get_header_value("X-Request-Id");
  if (body.is_object() && body.contains("request_id") && body["request_id"].is_string()) {
    return body["request_id"].get<std::string>();
  }
  return {};
}

}  // namespace

SessionHttpServer::SessionHttpServer(SessionService& service, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;

  // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which lets a
  // second server share an occupied port instead of failing to bind.
  srv.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key, X-Request-Id");
    res.status = 204;
  });

  srv.Post("/api/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (!read_body(req, res, body)) return;
    send(res, svc.create(body, request_id(req, body)));
  });
  srv.Get("/api/sessions", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.list()); });
  srv.Get(R"(/api/sessions/([0-9A-Za-z_-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get(req.matches[1]));
  });
  srv.Post(R"(/api/sessions/([0-9A-Za-z_-]+)/feedback)", [&svc](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (!read_body(req, res, body)) return;
    send(res, svc.feedback(req.matches[1], body, request_id(req, body)));
  });
  srv.Post(R"(/api/sessions/([0-9A-Za-z_-]+)/undo)", [&svc](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    if (!read_body(req, res, body)) return;
    send(res, svc.undo(req.matches[1], body, request_id(req, body)));
  });
  srv.Get(R"(/api/sessions/([0-9A-Za-z_-]+)/graph)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.graph(req.matches[1]));
  });
  srv.Get(R"(/api/sessions/([0-9A-Za-z_-]+)/history)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.history(req.matches[1]));
  });

  if (!static_dir.empty()) {
    if (!srv.set_mount_point("/", static_dir.string())) {
      throw ConfigError("static asset directory " + static_dir.string() + " does not exist");
    }
  }
}

SessionHttpServer::~SessionHttpServer() { stop(); }

bool SessionHttpServer::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    port_ = srv.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!srv.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void SessionHttpServer::serve() { impl_->server.listen_after_bind(); }

void SessionHttpServer::start() {
  thread_ = std::thread([this] { serve(); });
  impl_->server.wait_until_ready();
}

void SessionHttpServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace igda
