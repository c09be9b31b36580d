#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace geopre {

enum class Errc {
  invalid_argument,
  config,
  numerical,
  not_converged,
  io,
  format_version,
  truncated,
  checksum,
  degenerate_geometry,
  mismatch,
};

std::string_view to_string(Errc code);

/// Exception carrying a machine-readable code. The CLI maps codes onto exit
/// statuses; library callers can switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace geopre
