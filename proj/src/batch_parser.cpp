#include "cfa/protocol.hpp"

namespace cfa {

// Hardened input path: fixed-width reads only, every length checked before
// use, no allocation proportional to anything but the checked input size.
std::optional<ParsedBatch> parse_batch_plaintext(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 + 32) return std::nullopt;
  const std::size_t id_bytes = bytes.size() - 32;
  if (id_bytes % 8 != 0) return std::nullopt;
  ParsedBatch out;
  out.ids.reserve(id_bytes / 8);
  for (std::size_t off = 0; off < id_bytes; off += 8) {
    EndpointId id = 0;
    for (std::size_t i = 0; i < 8; ++i)
      id |= static_cast<EndpointId>(bytes[off + i]) << (8 * i);
    out.ids.push_back(id);
  }
  for (std::size_t i = 0; i < 32; ++i) out.digest[i] = bytes[id_bytes + i];
  return out;
}

}  // namespace cfa
