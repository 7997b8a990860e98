#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include <zlib.h>

namespace tinyva {

using Bytes = std::vector<std::uint8_t>;

static_assert(std::endian::native == std::endian::little,
              "wire and file formats assume a little-endian host");

inline void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }

template <typename T>
inline void put_le(Bytes& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
inline T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return v;
}

/// CRC-32 (IEEE 802.3, reflected, as used by zlib/PNG/Ethernet).
inline std::uint32_t crc32(std::span<const std::uint8_t> data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

}  // namespace tinyva
