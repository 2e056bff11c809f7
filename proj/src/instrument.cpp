#include "cfa/instrument.hpp"

namespace cfa {

namespace {

bool block_has_exit_point(const BasicBlock& b) {
  // Blocks leaving through a masked transfer get no separate exit point; the
  // pre-transfer point is the exit-side endpoint.
  switch (b.instructions.back().op) {
    case Opcode::Return:
    case Opcode::IndirectJump:
      return false;
    default:
      return true;
  }
}

}  // namespace

InstrumentedProgram instrument(const Program& program) {
  if (!program.laid_out) throw ProgramError("instrument requires a laid-out program");
  InstrumentedProgram ip;
  ip.program = program;
  ip.per_instr.assign(program.locations.size(), InstrPoints{});
  EndpointId next = 1;
  auto add = [&](SiteKind kind, std::uint64_t anchor) {
    ip.points.push_back(InstrumentationPoint{next, kind, anchor});
    return next++;
  };
  auto idx = [&](std::uint64_t addr) { return addr - program.base; };

  // Stage 1, IR-like: block entry/exit and direct-call points.
  for (const auto& f : program.functions) {
    for (const auto& b : f.blocks) {
      if (b.instructions.empty()) continue;
      const auto& first = b.instructions.front();
      const auto& last = b.instructions.back();
      ip.per_instr[idx(first.address)].entry = add(SiteKind::BlockEntry, first.address);
      for (const auto& ins : b.instructions) {
        if (ins.op == Opcode::DirectCall) {
          ip.per_instr[idx(ins.address)].pre_call = add(SiteKind::PreDirectCall, ins.address);
          ip.per_instr[idx(ins.address)].post_call =
              add(SiteKind::PostDirectCall, ins.address);
        }
      }
      if (block_has_exit_point(b))
        ip.per_instr[idx(last.address)].exit = add(SiteKind::BlockExit, last.address);
    }
  }

  // Stage 2, layout-aware: indirect calls, indirect jumps, returns. The
  // pre-transfer point anchors on the transfer instruction itself, so no
  // un-attested instruction sits between the point and the transfer.
  for (const auto& f : program.functions) {
    for (const auto& b : f.blocks) {
      for (const auto& ins : b.instructions) {
        auto& slots = ip.per_instr[idx(ins.address)];
        switch (ins.op) {
          case Opcode::IndirectCall:
            slots.pre_call = add(SiteKind::PreIndirectCall, ins.address);
            slots.post_call = add(SiteKind::PostIndirectCall, ins.address);
            break;
          case Opcode::IndirectJump:
            slots.pre_transfer = add(SiteKind::PreIndirectJump, ins.address);
            break;
          case Opcode::Return:
            slots.pre_transfer = add(SiteKind::PreReturn, ins.address);
            break;
          default:
            break;
        }
      }
    }
  }
  return ip;
}

}  // namespace cfa
