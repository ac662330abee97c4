#include <stdexcept>

#include "isolex/annotate.hpp"
#include "httplib.h"

namespace isolex::annotate {

void serve(AnnotationService& service, const ServeOptions& options) {
  httplib::Server server;
  auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const Response r = service.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/topics", bridge);
  server.Get("/export/labels", bridge);
  server.Get(R"(/queue/[^/]+)", bridge);
  server.Get(R"(/agreement/[^/]+)", bridge);
  server.Post("/label", bridge);
  if (options.static_dir && !server.set_mount_point("/ui", options.static_dir->string()))
    throw std::runtime_error("static directory not found: " + options.static_dir->string());
  int port = options.port;
  if (port == 0) {
    port = server.bind_to_any_port(options.host);
    if (port < 0) throw std::runtime_error("cannot bind " + options.host);
  } else if (!server.bind_to_port(options.host, port)) {
    throw std::runtime_error("cannot bind " + options.host + ":" + std::to_string(port));
  }
  if (options.on_ready) options.on_ready(port, [&server] { server.stop(); });
  server.listen_after_bind();
}

}  // namespace isolex::annotate
