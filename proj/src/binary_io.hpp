#pragma once

// Little-endian helpers shared by the map file formats.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "protost/error.hpp"

namespace protost::detail {

class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void i32(std::int32_t v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes_.data()), static_cast<std::streamsize>(bytes_.size()));
    if (!out) fail(ErrorKind::kIo, "write failed for " + path.string());
  }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::kIo, "cannot open " + path_);
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void expect_magic(std::string_view m) {
    if (bytes_.size() < m.size() || std::memcmp(bytes_.data(), m.data(), m.size()) != 0)
      fail(ErrorKind::kFormat, path_ + ": missing " + std::string(m) + " magic");
    pos_ = m.size();
  }

  void expect_version(std::uint8_t version) {
    if (remaining() < 1) fail(ErrorKind::kFormat, path_ + ": truncated header");
    std::uint8_t v = bytes_[pos_++];
    if (v != version)
      fail(ErrorKind::kVersion, path_ + ": unsupported version " + std::to_string(v));
  }

  std::uint32_t header_u32() {
    if (remaining() < 4) fail(ErrorKind::kFormat, path_ + ": truncated header");
    return raw_u32();
  }

  /// Verifies the payload holds exactly `count` 4-byte words.
  void expect_payload_words(std::uint64_t count) {
    if (remaining() != count * 4)
      fail(ErrorKind::kLength, path_ + ": expected " + std::to_string(count) + " values, found " +
                                   std::to_string(remaining() / 4) +
                                   (remaining() % 4 ? " plus a partial word" : ""));
  }

  std::int32_t i32() { return std::bit_cast<std::int32_t>(raw_u32()); }
  float f32() { return std::bit_cast<float>(raw_u32()); }

  const std::string& path() const { return path_; }

 private:
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t raw_u32() {
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= std::uint32_t(bytes_[pos_ + k]) << (8 * k);
    pos_ += 4;
    return v;
  }

  std::string path_;
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace protost::detail
