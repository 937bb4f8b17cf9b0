#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pore {

using UserId = std::uint32_t;
using ItemId = std::uint32_t;
using ItemList = std::vector<ItemId>;

/// Raised for malformed input, violated preconditions and inconsistent files.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed line in an input file; carries the 1-based line number.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace pore
