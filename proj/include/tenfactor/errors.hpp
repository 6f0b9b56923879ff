// SPDX-License-Identifier: MIT
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tenfactor {

/// Numerical failure (non-finite input, singular solve, eigensolver breakdown).
class numeric_error : public std::runtime_error {
  public:
    explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// I/O failure (missing file, short read/write).
class io_error : public std::runtime_error {
  public:
    explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; carries the byte offset where parsing stopped.
class parse_error : public io_error {
  public:
    parse_error(const std::string& what, std::size_t byte_offset)
        : io_error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const { return byte_offset_; }

  private:
    std::size_t byte_offset_;
};

}  // namespace tenfactor
