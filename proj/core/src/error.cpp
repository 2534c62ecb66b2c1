#include "mmtlab/error.hpp"

namespace mmtlab {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::data: return "data";
    case Errc::io: return "io";
    case Errc::not_found: return "not_found";
    case Errc::conflict: return "conflict";
    case Errc::state: return "state";
  }
  return "unknown";
}

}  // namespace mmtlab
