#ifndef SFF_BINARY_IO_HPP
#define SFF_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

// Little-endian primitives shared by the binary file formats. Values are
// assembled byte by byte, so the encoding does not depend on host order.
namespace sff::binary {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b, 4);
}

inline void write_f32(std::ostream& os, float v) {
  write_u32(os, std::bit_cast<std::uint32_t>(v));
}

// Returns false on a short read.
inline bool read_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

inline bool read_f32(std::istream& is, float& v) {
  std::uint32_t bits = 0;
  if (!read_u32(is, bits)) return false;
  v = std::bit_cast<float>(bits);
  return true;
}

inline bool read_magic(std::istream& is, std::string& magic) {
  char b[4];
  if (!is.read(b, 4)) return false;
  magic.assign(b, 4);
  return true;
}

}  // namespace sff::binary

#endif  // SFF_BINARY_IO_HPP
