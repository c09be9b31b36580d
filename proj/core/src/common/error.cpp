#include "geopre/common/error.hpp"

namespace geopre {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid_argument";
    case Errc::config: return "config";
    case Errc::numerical: return "numerical";
    case Errc::not_converged: return "not_converged";
    case Errc::io: return "io";
    case Errc::format_version: return "format_version";
    case Errc::truncated: return "truncated";
    case Errc::checksum: return "checksum";
    case Errc::degenerate_geometry: return "degenerate_geometry";
    case Errc::mismatch: return "mismatch";
  }
  return "unknown";
}

}  // namespace geopre
