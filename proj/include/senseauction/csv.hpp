#pragma once

#include <cstdio>
#include <string>

namespace senseauction {

/// Fixed, locale-independent rendering for CSV and log output.
inline std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace senseauction
