#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "cprdraft/error.hpp"

namespace cprdraft::detail {

/// Little-endian fixed-width writer that also tracks an FNV-1a checksum of
/// everything written.
class LeWriter {
 public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  template <typename T>
  void put(T value) {
    static_assert(std::is_integral_v<T>);
    auto v = static_cast<std::make_unsigned_t<T>>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) byte(static_cast<unsigned char>(v >> (8 * i)));
  }
  void put_f64(double value) { put(std::bit_cast<std::uint64_t>(value)); }
  void put_bytes(std::string_view bytes) {
    for (char c : bytes) byte(static_cast<unsigned char>(c));
  }
  std::uint64_t checksum() const { return hash_; }

 private:
  void byte(unsigned char b) {
    out_.put(static_cast<char>(b));
    hash_ = (hash_ ^ b) * 0x100000001b3ULL;
  }
  std::ostream& out_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

class LeReader {
 public:
  LeReader(std::istream& in, std::string what) : in_(in), what_(std::move(what)) {}

  template <typename T>
  T get() {
    static_assert(std::is_integral_v<T>);
    std::make_unsigned_t<T> v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::make_unsigned_t<T>>(byte()) << (8 * i);
    return static_cast<T>(v);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string get_bytes(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>(byte()));
    return s;
  }
  std::uint64_t checksum() const { return hash_; }

 private:
  unsigned char byte() {
    int c = in_.get();
    if (c == std::char_traits<char>::eof()) throw InputError(what_ + ": unexpected end of file");
    auto b = static_cast<unsigned char>(c);
    hash_ = (hash_ ^ b) * 0x100000001b3ULL;
    return b;
  }
  std::istream& in_;
  std::string what_;
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace cprdraft::detail
