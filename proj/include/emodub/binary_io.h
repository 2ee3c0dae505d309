#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emodub/errors.h"

namespace emodub {

// Little-endian encoder. Byte order is produced with shifts, so the output
// does not depend on host endianness.
class ByteWriter {
 public:
  void put_bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void put_u32(std::uint32_t v) { put_le(v, 4); }
  void put_u64(std::uint64_t v) { put_le(v, 8); }
  void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
  void put_string(std::string_view s) {
    put_u32(static_cast<std::uint32_t>(s.size()));
    put_bytes(s);
  }
  const std::vector<char>& bytes() const { return buf_; }
  std::vector<char> take() { return std::move(buf_); }

 private:
  void put_le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::vector<char> buf_;
};

// Bounds-checked reader; running off the end raises FormatError(Truncated).
class ByteReader {
 public:
  explicit ByteReader(std::span<const char> data) : data_(data) {}

  std::string_view get_bytes(std::size_t n) {
    need(n);
    std::string_view out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }
  std::uint32_t get_u32() { return static_cast<std::uint32_t>(get_le(4)); }
  std::uint64_t get_u64() { return get_le(8); }
  double get_f64() { return std::bit_cast<double>(get_u64()); }
  std::string get_string() {
    const std::uint32_t n = get_u32();
    return std::string(get_bytes(n));
  }
  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      throw FormatError(FormatReason::Truncated,
                        "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                            ", have " + std::to_string(remaining()));
    }
  }
  std::uint64_t get_le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const char> data_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const char> bytes);

}  // namespace emodub
