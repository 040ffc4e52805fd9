#include "eslab/common.hpp"

#include <cstdio>

namespace eslab {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace eslab
