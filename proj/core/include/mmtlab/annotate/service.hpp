#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <utility>

#include "mmtlab/annotate/store.hpp"
#include "mmtlab/error.hpp"

namespace mmtlab::annotate {

struct ServiceOptions {
  std::filesystem::path media_root;  // empty: /media answers 404
};

/// HTTP+JSON front end of a Store:
///   POST /batches, GET /tasks/next, POST /verdicts, GET /reports/quality,
///   GET /reports/naturalness, GET /media/{image_id}, GET /config.
/// Errors answer {"error": {"code": ..., "message": ...}}.
class Service {
 public:
  Service(Store& store, ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Port 0 binds any free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); requires bind().
  void run();
  /// Blocks until run() accepts connections (call from another thread).
  void wait_until_ready() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// "HOST:PORT" -> (host, port); throws Error(Errc::invalid_argument).
std::pair<std::string, int> parse_address(const std::string& address);

/// HTTP status used for an error code.
int http_status(Errc code) noexcept;

}  // namespace mmtlab::annotate
