#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>

#include "fcnbc/field.hpp"

namespace fcnbc::detail {

template <typename T>
T to_little(T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
    std::memcpy(&value, bytes, sizeof(T));
  }
  return value;
}

template <typename T>
void put(std::string& out, T value) {
  value = to_little(value);
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

/// Appends a [u32 length][bytes] field.
template <typename T>
void put_field(std::string& out, T value) {
  put<std::uint32_t>(out, sizeof(T));
  put(out, value);
}

inline void put_floats(std::ostream& os, std::span<const float> values) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(values.data()),
             static_cast<std::streamsize>(values.size() * sizeof(float)));
  } else {
    std::string buf;
    buf.reserve(values.size() * sizeof(float));
    for (float v : values) put(buf, v);
    os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

/// Sequential reader over an in-memory byte buffer with bounds checks.
class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size, std::string what) : data_(data), size_(size), what_(std::move(what)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return to_little(value);
  }

  template <typename T>
  T get_field() {
    const auto len = get<std::uint32_t>();
    if (len != sizeof(T)) {
      throw FormatError(what_ + ": metadata field has length " + std::to_string(len) + ", expected " +
                        std::to_string(sizeof(T)));
    }
    return get<T>();
  }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }

  void get_floats(std::span<float> out) {
    need(out.size() * sizeof(float));
    std::memcpy(out.data(), data_ + pos_, out.size() * sizeof(float));
    if constexpr (std::endian::native == std::endian::big) {
      for (auto& v : out) v = to_little(v);
    }
    pos_ += out.size() * sizeof(float);
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) {
      throw FormatError(what_ + ": truncated, expected at least " + std::to_string(pos_ + n) + " bytes, got " +
                        std::to_string(size_));
    }
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace fcnbc::detail
