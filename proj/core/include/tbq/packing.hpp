#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tbq {

/* Fixed-width codes packed LSB-first within little-endian bytes: code j
 * occupies bit positions [j*b, (j+1)*b) of the byte stream, least
 * significant code bit at the lowest position. This is the wire contract.
 * Example, b=2: [3,0,1,2] -> 0b10'01'00'11 = 0x93. */
struct PackedCodes {
  std::vector<uint8_t> bytes;
  int b = 0;        // bits per code, 0..8
  size_t count = 0; // number of codes

  size_t byte_size() const { return bytes.size(); }
  bool operator==(const PackedCodes&) const = default;
};

size_t packed_byte_size(int b, size_t count);

/* Rejects indices >= 2^b. b=0 packs to zero bytes. */
PackedCodes pack_indices(std::span<const uint32_t> indices, int b);

std::vector<uint32_t> unpack_indices(const PackedCodes& codes);
/* Rejects a byte length inconsistent with (b, count). */
std::vector<uint32_t> unpack_indices(std::span<const uint8_t> bytes, int b,
                                     size_t count);

/* Extract code j without unpacking the whole stream. */
uint32_t packed_code_at(std::span<const uint8_t> bytes, int b, size_t j);

}  // namespace tbq
