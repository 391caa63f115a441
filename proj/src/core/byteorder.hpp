#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

namespace r2u3d::le {

// Little-endian encode/decode of fixed-width values. Host order is irrelevant.

template <typename U>
U load_uint(const unsigned char* p) {
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <typename U>
void store_uint(unsigned char* p, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) p[i] = static_cast<unsigned char>(v >> (8 * i));
}

inline float load_f32(const unsigned char* p) { return std::bit_cast<float>(load_uint<uint32_t>(p)); }
inline void store_f32(unsigned char* p, float v) { store_uint<uint32_t>(p, std::bit_cast<uint32_t>(v)); }
inline int16_t load_i16(const unsigned char* p) { return std::bit_cast<int16_t>(load_uint<uint16_t>(p)); }

inline std::vector<unsigned char> encode_f32(std::span<const float> values) {
  std::vector<unsigned char> out(values.size() * 4);
  for (size_t i = 0; i < values.size(); ++i) store_f32(out.data() + 4 * i, values[i]);
  return out;
}

inline void decode_f32(std::span<const unsigned char> bytes, std::span<float> out) {
  for (size_t i = 0; i < out.size(); ++i) out[i] = load_f32(bytes.data() + 4 * i);
}

}  // namespace r2u3d::le
