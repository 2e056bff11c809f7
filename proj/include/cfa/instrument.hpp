#pragma once

#include <cstdint>
#include <vector>

#include "cfa/toyir.hpp"

namespace cfa {

enum class SiteKind {
  BlockEntry,
  BlockExit,
  PreDirectCall,
  PostDirectCall,
  PreIndirectCall,
  PostIndirectCall,
  PreIndirectJump,
  PreReturn,
};

struct InstrumentationPoint {
  EndpointId id = 0;
  SiteKind kind = SiteKind::BlockEntry;
  std::uint64_t anchor_address = 0;
};

// Ids attached to one instruction. kNoId marks an absent point.
inline constexpr EndpointId kNoId = 0;

struct InstrPoints {
  EndpointId entry = kNoId;      // block entry, on the block's first instruction
  EndpointId exit = kNoId;       // block exit, on the block's last instruction
  EndpointId pre_call = kNoId;   // direct or indirect call
  EndpointId post_call = kNoId;
  EndpointId pre_transfer = kNoId;  // indirect jump / return (masked at emit)
};

struct InstrumentedProgram {
  Program program;
  std::vector<InstrumentationPoint> points;
  std::vector<InstrPoints> per_instr;  // indexed like program.locations

  const InstrPoints& at(std::uint64_t addr) const {
    return per_instr[addr - program.base];
  }
};

// Two sequential stages sharing one monotone counter: the IR-like stage
// assigns block entry/exit and direct-call points, the layout-aware stage
// assigns points for indirect calls, indirect jumps, and returns. Ids start
// at 1 so that kNoId never collides, and never reach the tag values.
InstrumentedProgram instrument(const Program& program);

// static_id XOR (dest - source), two's-complement wrap in 64 bits. Invariant
// under common relocation of source and destination, and bijective in dest
// except for the two reserved tag values, which are escaped into the high
// half so a masked emission can never fake a request delimiter.
constexpr EndpointId emit_masked_id(EndpointId static_id, std::uint64_t source_addr,
                                    std::uint64_t dest_addr) {
  EndpointId masked = static_id ^ (dest_addr - source_addr);
  if (is_tag(masked)) masked ^= 0x8000'0000'0000'0000ull;
  return masked;
}

}  // namespace cfa
