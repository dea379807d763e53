#include <httplib.h>

#include "cprdraft/service.hpp"

namespace cprdraft::service {

struct HttpServer::Impl {
  Impl(RecommendationService& s, ServerOptions o) : service(s), options(std::move(o)) {}

  RecommendationService& service;
  ServerOptions options;
  httplib::Server server;
  bool bound = false;
};

HttpServer::HttpServer(RecommendationService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto& server = impl_->server;
  if (impl_->options.static_dir) {
    if (!server.set_mount_point("/", impl_->options.static_dir->string()))
      throw InputError("static directory not found: " + impl_->options.static_dir->string());
  }
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = impl_->service.handle(req.method, req.path, req.body);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json");
  };
  server.Get(".*", dispatch);
  server.Post(".*", dispatch);
  server.Put(".*", dispatch);
  server.Delete(".*", dispatch);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, POST");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& o = impl_->options;
  int port = o.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(o.host);
    if (port < 0) throw InputError("cannot bind " + o.host);
  } else if (!impl_->server.bind_to_port(o.host, port)) {
    throw InputError("cannot bind " + o.host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return port;
}

void HttpServer::run() {
  if (!impl_->bound) throw std::logic_error("HttpServer::run before bind");
  impl_->server.listen_after_bind();
}

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace cprdraft::service
