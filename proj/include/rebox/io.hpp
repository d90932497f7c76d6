#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rebox/errors.hpp"

namespace rebox {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts are unsupported");

/// CRC-32 (IEEE), reflected polynomial 0xEDB88320.
inline uint32_t crc32_update(uint32_t crc, const void* data, size_t n) {
  static const std::array<uint32_t, 256> table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  const auto* p = static_cast<const unsigned char*>(data);
  crc = ~crc;
  for (size_t i = 0; i < n; ++i) crc = table[(crc ^ p[i]) & 0xFFu] ^ (crc >> 8);
  return ~crc;
}

inline uint32_t crc32(const void* data, size_t n) { return crc32_update(0, data, n); }

/// Streaming binary writer that tracks a running CRC-32 of every byte written.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error("cannot open for writing: " + path);
  }

  void bytes(const void* p, size_t n) {
    out_.write(static_cast<const char*>(p), std::streamsize(n));
    crc_ = crc32_update(crc_, p, n);
    offset_ += n;
  }

  void u8(uint8_t v) { bytes(&v, 1); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s) { bytes(s.data(), s.size()); }

  /// Appends the running CRC (the CRC itself is not included in it).
  void finish_with_crc() {
    uint32_t c = crc_;
    out_.write(reinterpret_cast<const char*>(&c), 4);
  }

  uint32_t crc() const { return crc_; }
  uint64_t offset() const { return offset_; }

  /// Rewrites bytes at an absolute offset. The running CRC becomes stale;
  /// callers that patch must recompute the file CRC afterwards.
  void patch_at(uint64_t off, const void* p, size_t n) {
    out_.flush();
    auto pos = out_.tellp();
    out_.seekp(std::streamoff(off));
    out_.write(static_cast<const char*>(p), std::streamsize(n));
    out_.seekp(pos);
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
  uint32_t crc_ = 0;
  uint64_t offset_ = 0;
};

/// Streaming binary reader with running CRC-32 and truncation checking.
class BinReader {
 public:
  explicit BinReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw FormatError(FormatError::Kind::Truncated, "cannot open: " + path);
  }

  void bytes(void* p, size_t n) {
    in_.read(static_cast<char*>(p), std::streamsize(n));
    if (size_t(in_.gcount()) != n)
      throw FormatError(FormatError::Kind::Truncated, "unexpected end of file");
    crc_ = crc32_update(crc_, p, n);
  }

  uint8_t u8() { uint8_t v; bytes(&v, 1); return v; }
  uint32_t u32() { uint32_t v; bytes(&v, 4); return v; }
  uint64_t u64() { uint64_t v; bytes(&v, 8); return v; }
  float f32() { float v; bytes(&v, 4); return v; }
  double f64() { double v; bytes(&v, 8); return v; }

  std::string str(size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  /// Reads the stored CRC (not folded into the running CRC) and compares.
  void expect_crc() {
    const uint32_t want = crc_;
    uint32_t stored;
    in_.read(reinterpret_cast<char*>(&stored), 4);
    if (in_.gcount() != 4)
      throw FormatError(FormatError::Kind::Truncated, "missing trailing checksum");
    if (stored != want)
      throw FormatError(FormatError::Kind::BadCrc, "checksum mismatch");
  }

  uint32_t crc() const { return crc_; }

 private:
  std::ifstream in_;
  uint32_t crc_ = 0;
};

/// Recomputes the CRC-32 of a whole file, excluding its last `tail` bytes.
inline uint32_t crc32_of_file(const std::string& path, size_t tail) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot reopen: " + path);
  in.seekg(0, std::ios::end);
  uint64_t total = uint64_t(in.tellg());
  if (total < tail) throw FormatError(FormatError::Kind::Truncated, "file too short");
  in.seekg(0);
  uint64_t remaining = total - tail;
  uint32_t crc = 0;
  std::vector<char> buf(1 << 20);
  while (remaining > 0) {
    size_t chunk = size_t(std::min<uint64_t>(remaining, buf.size()));
    in.read(buf.data(), std::streamsize(chunk));
    if (size_t(in.gcount()) != chunk) throw Error("short read while checksumming");
    crc = crc32_update(crc, buf.data(), chunk);
    remaining -= chunk;
  }
  return crc;
}

/// Writes via a sibling temp file and renames into place.
template <typename Fn>
void atomic_write(const std::string& path, Fn&& fn) {
  const std::string tmp = path + ".tmp";
  fn(tmp);
  std::filesystem::rename(tmp, path);
}

inline void write_text_file(const std::string& path, const std::string& content) {
  atomic_write(path, [&](const std::string& tmp) {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + tmp);
    out << content;
  });
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace rebox
