#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ian {

using Shape = std::vector<std::int64_t>;

/// Raised for every contract violation in the library (bad shapes, bad
/// files, inconsistent configuration).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

}  // namespace ian
