#pragma once

#include <cstdio>
#include <string>

namespace qtube::detail {

// Round-trip precision for every number written to disk.
inline std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace qtube::detail
