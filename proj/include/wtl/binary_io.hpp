#pragma once

// Little-endian primitive encoding for the weights and dataset files.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "wtl/errors.hpp"

namespace wtl::bin {

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

 private:
  void le(std::uint64_t v, int n) {
    unsigned char buf[8];
    for (int i = 0; i < n; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, static_cast<std::size_t>(n));
  }
  std::ostream& out_;
};

/// Reads fields, failing with format-error and the field name on truncation.
class Reader {
 public:
  Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(void* p, std::size_t n, const std::string& field) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      fail(ErrorKind::format, source_ + ": truncated while reading " + field);
    }
  }
  std::uint32_t u32(const std::string& field) { return static_cast<std::uint32_t>(le(4, field)); }
  std::int32_t i32(const std::string& field) { return static_cast<std::int32_t>(u32(field)); }
  std::uint64_t u64(const std::string& field) { return le(8, field); }
  float f32(const std::string& field) { return std::bit_cast<float>(u32(field)); }

 private:
  std::uint64_t le(int n, const std::string& field) {
    unsigned char buf[8];
    bytes(buf, static_cast<std::size_t>(n), field);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string source_;
};

}  // namespace wtl::bin
