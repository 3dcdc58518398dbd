#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace sccl {

// Shortest round-trip decimal form of a double. Used everywhere a double goes
// into a text artifact so reruns produce byte-identical files.
inline std::string format_double(double x) {
  char buf[32];
  std::to_chars_result r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

}  // namespace sccl
