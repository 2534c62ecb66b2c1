#pragma once

#include <stdexcept>
#include <string>

namespace mmtlab {

enum class Errc {
  invalid_argument,  // caller violated a precondition
  data,              // malformed input data
  io,                // filesystem or network failure
  not_found,         // referenced entity does not exist
  conflict,          // request contradicts stored state
  state,             // operation not valid in the current state
};

/// Returns the machine-readable code for an error category, e.g. "data".
const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace mmtlab
