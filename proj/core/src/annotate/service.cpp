#include "mmtlab/annotate/service.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

#include "codec.hpp"
#include "mmtlab/error.hpp"

namespace mmtlab::annotate {

using codec::json;

int http_status(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument:
    case Errc::data: return 400;
    case Errc::not_found: return 404;
    case Errc::conflict:
    case Errc::state: return 409;
    case Errc::io: return 500;
  }
  return 500;
}

std::pair<std::string, int> parse_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == address.size())
    throw Error(Errc::invalid_argument, "address must be HOST:PORT, got '" + address + "'");
  const std::string port = address.substr(colon + 1);
  std::size_t used = 0;
  int value = -1;
  try {
    value = std::stoi(port, &used);
  } catch (const std::exception&) {
  }
  if (used != port.size() || value < 0 || value > 65535)
    throw Error(Errc::invalid_argument, "bad port '" + port + "'");
  return {address.substr(0, colon), value};
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, Errc code, const std::string& message) {
  send_json(res, http_status(code), {{"error", {{"code", errc_name(code)}, {"message", message}}}});
}

json parse_body(const httplib::Request& req) {
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("body is not valid JSON: ") + e.what());
  }
}

std::optional<std::string> query(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  std::string v = req.get_param_value(name);
  if (v.empty()) return std::nullopt;
  return v;
}

std::string required(const httplib::Request& req, const char* name) {
  auto v = query(req, name);
  if (!v) throw Error(Errc::invalid_argument, std::string("missing query parameter '") + name + "'");
  return *v;
}

const char* content_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".png") return "image/png";
  if (ext == ".webp") return "image/webp";
  if (ext == ".gif") return "image/gif";
  return "application/octet-stream";
}

bool safe_media_id(const std::string& id) {
  if (id.empty() || id == "." || id == "..") return false;
  return id.find_first_of(std::string("/\\\0", 3)) == std::string::npos && id.find("..") == std::string::npos;
}

json task_json(const AnnotationTask& t) {
  json j = codec::to_json(t);
  if (t.kind == TaskKind::quality && !t.quality.image.empty()) j["media_url"] = "/media/" + t.quality.image;
  return j;
}

}  // namespace

struct Service::Impl {
  Store& store;
  ServiceOptions options;
  httplib::Server server;
  bool bound = false;

  Impl(Store& s, ServiceOptions o) : store(s), options(std::move(o)) {}

  template <class F>
  void route(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      send_error(res, Errc::io, e.what());
    }
  }

  void install() {
    server.Post("/batches", [this](const httplib::Request& req, httplib::Response& res) {
      route(res, [&] {
        const BatchResult r = store.create_batch(codec::batch_request(parse_body(req)));
        json tasks = json::array(), ids = json::array();
        for (const auto& t : r.tasks) {
          ids.push_back(t.task_id);
          tasks.push_back(task_json(t));
        }
        send_json(res, r.created ? 201 : 200,
                  {{"batch", r.batch}, {"created", r.created}, {"task_ids", ids}, {"tasks", tasks}});
      });
    });

    server.Get("/tasks/next", [this](const httplib::Request& req, httplib::Response& res) {
      route(res, [&] {
        const TaskKind kind = parse_task_kind(required(req, "kind"));
        const auto t = store.next_task(kind, required(req, "annotator"));
        send_json(res, 200, {{"task", t ? task_json(*t) : json(nullptr)}});
      });
    });

    server.Post("/verdicts", [this](const httplib::Request& req, httplib::Response& res) {
      route(res, [&] {
        const Verdict v = store.submit_verdict(codec::verdict(parse_body(req)));
        send_json(res, 200, {{"ok", true}, {"verdict", codec::to_json(v)}});
      });
    });

    server.Get("/reports/quality", [this](const httplib::Request& req, httplib::Response& res) {
      route(res, [&] {
        const QualityReport r = store.aggregate_quality({query(req, "subset"), query(req, "language")});
        send_json(res, 200, codec::to_json(r));
      });
    });

    server.Get("/reports/naturalness", [this](const httplib::Request& req, httplib::Response& res) {
      route(res, [&] { send_json(res, 200, codec::to_json(store.aggregate_naturalness(required(req, "batch")))); });
    });

    server.Get(R"(/media/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      route(res, [&] {
        const std::string id = req.matches[1];
        if (!safe_media_id(id)) throw Error(Errc::invalid_argument, "invalid image id");
        if (options.media_root.empty()) throw Error(Errc::not_found, "no media root configured");
        for (const char* ext : {"", ".jpg", ".jpeg", ".png", ".webp", ".gif"}) {
          const std::filesystem::path p = options.media_root / (id + ext);
          std::error_code ec;
          if (!std::filesystem::is_regular_file(p, ec)) continue;
          std::ifstream in(p, std::ios::binary);
          std::ostringstream ss;
          ss << in.rdbuf();
          res.status = 200;
          res.set_content(ss.str(), content_type(p));
          return;
        }
        throw Error(Errc::not_found, "no media for image '" + id + "'");
      });
    });

    server.Get("/config", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200,
                {{"kinds", {"naturalness", "quality"}},
                 {"media_base", "/media/"},
                 {"rating", {{"min", 1}, {"max", 5}}},
                 {"grades", {"good", "medium", "bad"}},
                 {"image_need", {"yes", "maybe", "no", "not_reflected"}},
                 {"version", MMTLAB_VERSION_STRING}});
    });

    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send_error(res, res.status == 404 ? Errc::not_found : Errc::invalid_argument,
                                       "no route for this request");
    });
  }
};

Service::Service(Store& store, ServiceOptions options) : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->install();
}

Service::~Service() { stop(); }

int Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::io, "cannot bind " + host);
    impl_->bound = true;
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port))
    throw Error(Errc::io, "cannot bind " + host + ":" + std::to_string(port));
  impl_->bound = true;
  return port;
}

void Service::run() {
  if (!impl_->bound) throw Error(Errc::state, "service is not bound");
  impl_->server.listen_after_bind();
}

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace mmtlab::annotate
