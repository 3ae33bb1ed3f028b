#pragma once

#include <array>
#include <charconv>
#include <string>

namespace shapkit {

// Shortest decimal that reads back to the same double.
inline std::string shortest(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

}  // namespace shapkit
