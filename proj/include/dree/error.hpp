#pragma once

#include <stdexcept>
#include <string>

namespace dree {

/// Contract violation or unusable input. The message is the user-facing
/// diagnostic; callers match on it in tests.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, const char* message) {
  if (!condition) throw Error(message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

}  // namespace dree
