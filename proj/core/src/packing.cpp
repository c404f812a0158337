#include "tbq/packing.hpp"

#include <stdexcept>

namespace tbq {

namespace {

void check_bits(int b) {
  if (b < 0 || b > 8)
    throw std::invalid_argument("packing: bits per code must be in [0, 8]");
}

}  // namespace

size_t packed_byte_size(int b, size_t count) {
  check_bits(b);
  return (size_t(b) * count + 7) / 8;
}

PackedCodes pack_indices(std::span<const uint32_t> indices, int b) {
  check_bits(b);
  PackedCodes out;
  out.b = b;
  out.count = indices.size();
  out.bytes.assign(packed_byte_size(b, indices.size()), 0);
  if (b == 0) {
    for (uint32_t v : indices)
      if (v != 0) throw std::invalid_argument("pack_indices: index overflow");
    return out;
  }
  const uint32_t limit = uint32_t(1) << b;
  size_t bit = 0;
  for (uint32_t v : indices) {
    if (v >= limit) throw std::invalid_argument("pack_indices: index overflow");
    const size_t byte = bit >> 3, off = bit & 7;
    out.bytes[byte] |= uint8_t(v << off);
    if (off + b > 8) out.bytes[byte + 1] |= uint8_t(v >> (8 - off));
    bit += b;
  }
  return out;
}

std::vector<uint32_t> unpack_indices(std::span<const uint8_t> bytes, int b,
                                     size_t count) {
  check_bits(b);
  if (bytes.size() != packed_byte_size(b, count))
    throw std::invalid_argument("unpack_indices: byte length mismatch");
  std::vector<uint32_t> out(count);
  if (b == 0) return out;
  const uint32_t mask = (uint32_t(1) << b) - 1;
  size_t bit = 0;
  for (size_t j = 0; j < count; ++j) {
    const size_t byte = bit >> 3, off = bit & 7;
    uint32_t v = uint32_t(bytes[byte]) >> off;
    if (off + b > 8) v |= uint32_t(bytes[byte + 1]) << (8 - off);
    out[j] = v & mask;
    bit += b;
  }
  return out;
}

std::vector<uint32_t> unpack_indices(const PackedCodes& codes) {
  return unpack_indices(codes.bytes, codes.b, codes.count);
}

uint32_t packed_code_at(std::span<const uint8_t> bytes, int b, size_t j) {
  check_bits(b);
  if (b == 0) return 0;
  const uint32_t mask = (uint32_t(1) << b) - 1;
  const size_t bit = j * size_t(b);
  const size_t byte = bit >> 3, off = bit & 7;
  uint32_t v = uint32_t(bytes[byte]) >> off;
  if (off + b > 8) v |= uint32_t(bytes[byte + 1]) << (8 - off);
  return v & mask;
}

}  // namespace tbq
