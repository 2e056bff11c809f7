#pragma once

#include <cstdint>
#include <functional>

namespace cfa {

// Unique identifier of one edge endpoint. Indirect transfers emit a masked
// variant (static id XOR jump offset).
using EndpointId = std::uint64_t;

// Reserved stream delimiters; no instrumentation point may carry these values.
inline constexpr EndpointId kBeginTag = 0xFFFF'FFFF'FFFF'FFFFull;
inline constexpr EndpointId kEndTag = 0xFFFF'FFFF'FFFF'FFFEull;

inline constexpr bool is_tag(EndpointId v) { return v >= kEndTag; }

using TraceSink = std::function<void(EndpointId)>;

}  // namespace cfa
