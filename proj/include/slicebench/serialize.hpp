#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace slicebench {

// Minimal little-endian binary IO for policy/model files. Doubles are stored
// bit-exact so save/load round-trips are lossless.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open for write: " + path);
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void i32(int32_t v) { raw(&v, 4); }
  void i64(int64_t v) { raw(&v, 8); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  void f64_array(const double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) f64(p[i]);
  }
  void finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed");
  }

 private:
  void raw(const void* p, size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  std::ofstream out_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open for read: " + path);
  }
  uint8_t u8() {
    uint8_t v;
    raw(&v, 1);
    return v;
  }
  uint32_t u32() {
    uint32_t v;
    raw(&v, 4);
    return v;
  }
  uint64_t u64() {
    uint64_t v;
    raw(&v, 8);
    return v;
  }
  int32_t i32() {
    int32_t v;
    raw(&v, 4);
    return v;
  }
  int64_t i64() {
    int64_t v;
    raw(&v, 8);
    return v;
  }
  double f64() {
    uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str() {
    size_t n = u64();
    if (n > (1u << 28)) throw std::runtime_error("corrupt string length");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }
  void f64_array(double* p, size_t n) {
    for (size_t i = 0; i < n; ++i) p[i] = f64();
  }

 private:
  void raw(void* p, size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) throw std::runtime_error("unexpected end of file");
  }
  std::ifstream in_;
};

}  // namespace slicebench
