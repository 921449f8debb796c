#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "gsverse/error.hpp"

static_assert(std::endian::native == std::endian::little, "byte codecs assume a little-endian host");

namespace gsverse {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

class ByteWriter {
 public:
  template <typename T>
    requires std::is_arithmetic_v<T>
  void put(T value) {
    const auto offset = buf_.size();
    buf_.resize(offset + sizeof(T));
    std::memcpy(buf_.data() + offset, &value, sizeof(T));
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void put_array(std::span<const T> values) {
    const auto offset = buf_.size();
    buf_.resize(offset + values.size_bytes());
    if (!values.empty()) std::memcpy(buf_.data() + offset, values.data(), values.size_bytes());
  }

  void put_raw(ByteView bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }
  void put_raw(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  // Overwrites a previously written value, used to back-patch lengths.
  template <typename T>
  void patch(std::size_t offset, T value) {
    std::memcpy(buf_.data() + offset, &value, sizeof(T));
  }

  std::size_t size() const { return buf_.size(); }
  Bytes take() { return std::move(buf_); }
  const Bytes& bytes() const { return buf_; }

 private:
  Bytes buf_;
};

// Bounds-checked little-endian reader. Running past the end throws Error with
// the code given at construction so each format reports its own truncation.
class ByteReader {
 public:
  ByteReader(ByteView data, ErrorCode truncation_code) : data_(data), code_(truncation_code) {}

  template <typename T>
    requires std::is_arithmetic_v<T>
  T get() {
    require(sizeof(T));
    T value;
    std::memcpy(&value, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  void get_array(std::span<T> out) {
    require(out.size_bytes());
    if (!out.empty()) std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  template <typename T>
    requires std::is_arithmetic_v<T>
  std::vector<T> get_vector(std::size_t count) {
    // Checked before allocating so a corrupted count cannot request gigabytes.
    if (count > remaining() / sizeof(T)) fail(count * sizeof(T));
    std::vector<T> out(count);
    get_array(std::span<T>(out));
    return out;
  }

  ByteView get_raw(std::size_t n) {
    require(n);
    auto view = data_.subspan(pos_, n);
    pos_ += n;
    return view;
  }

  std::string get_string(std::size_t n) {
    auto raw = get_raw(n);
    return std::string(raw.begin(), raw.end());
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void require(std::size_t n) {
    if (n > remaining()) fail(n);
  }
  [[noreturn]] void fail(std::size_t n) const {
    throw Error(code_, "need " + std::to_string(n) + " bytes at offset " + std::to_string(pos_) +
                           ", have " + std::to_string(remaining()));
  }

  ByteView data_;
  std::size_t pos_ = 0;
  ErrorCode code_;
};

}  // namespace gsverse
