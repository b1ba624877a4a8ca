#pragma once

// Little-endian primitive encoding shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "seqdn/errors.hpp"

namespace seqdn::bytes {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  Reader(std::string_view data, std::string_view what) : data_(data), what_(what) {}

  std::string_view take(std::size_t n) {
    if (n > data_.size() - pos_) {
      throw InputError(std::string(what_) + ": truncated at byte " + std::to_string(pos_));
    }
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }

  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  bool done() const { return pos_ == data_.size(); }
  std::size_t position() const { return pos_; }

 private:
  std::string_view data_;
  std::string_view what_;
  std::size_t pos_ = 0;
};

}  // namespace seqdn::bytes
