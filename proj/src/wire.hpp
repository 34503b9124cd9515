#pragma once

// Little-endian scalar IO shared by the dataset and checkpoint writers.

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "paad/errors.hpp"

namespace paad::wire {

inline void put_u8(std::ostream& os, uint8_t v) { os.put(static_cast<char>(v)); }

inline void put_u16(std::ostream& os, uint16_t v) {
  for (int i = 0; i < 2; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u32(std::ostream& os, uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::ostream& os, uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::ostream& os, float v) {
  uint32_t u;
  std::memcpy(&u, &v, sizeof(u));
  put_u32(os, u);
}

inline void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, sizeof(u));
  put_u64(os, u);
}

inline void get_raw(std::istream& is, void* p, size_t n, const char* what) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(is.gcount()) != n)
    throw IoError(std::string("truncated file while reading ") + what);
}

inline uint8_t get_u8(std::istream& is, const char* what) {
  uint8_t b;
  get_raw(is, &b, 1, what);
  return b;
}

inline uint16_t get_u16(std::istream& is, const char* what) {
  uint8_t b[2];
  get_raw(is, b, 2, what);
  return static_cast<uint16_t>(b[0] | (static_cast<uint16_t>(b[1]) << 8));
}

inline uint32_t get_u32(std::istream& is, const char* what) {
  uint8_t b[4];
  get_raw(is, b, 4, what);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline uint64_t get_u64(std::istream& is, const char* what) {
  uint8_t b[8];
  get_raw(is, b, 8, what);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline float get_f32(std::istream& is, const char* what) {
  const uint32_t u = get_u32(is, what);
  float v;
  std::memcpy(&v, &u, sizeof(v));
  return v;
}

inline double get_f64(std::istream& is, const char* what) {
  const uint64_t u = get_u64(is, what);
  double v;
  std::memcpy(&v, &u, sizeof(v));
  return v;
}

}  // namespace paad::wire
