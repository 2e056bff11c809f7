#include "cfa/randprog.hpp"

#include <random>

namespace cfa {

// Generated shape: f0 is the entry (begin tag first, end tag before falling
// off its last block); the other functions end in returns. Direct calls and
// call slots only target strictly later functions and cond branches / jump
// tables only later blocks, so control flow forms a DAG and every execution
// terminates.
Program random_program(std::uint64_t seed, std::size_t size_budget) {
  if (size_budget < 1) size_budget = 1;
  std::mt19937_64 rng(seed ^ 0x5DEECE66Dull);
  auto pick = [&](std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
  };

  Program p;
  const bool rich = size_budget >= 8;
  const std::size_t nfuncs = rich ? pick(3, 4) : (size_budget >= 6 ? 2 : 1);
  for (std::size_t fi = 0; fi < nfuncs; ++fi) {
    Function f;
    f.name = "f" + std::to_string(fi);
    std::size_t nblocks = size_budget >= 4 ? pick(2, 5) : 1;
    if (rich && fi + 1 == nfuncs && nblocks < 3) nblocks = 3;  // ijump room
    for (std::size_t bi = 0; bi < nblocks; ++bi)
      f.blocks.push_back(BasicBlock{"b" + std::to_string(bi), {}});
    p.functions.push_back(std::move(f));
  }
  p.entry = "f0";

  // Slots target the last function only (no recursion through a slot); jump
  // tables target the last function's non-initial blocks.
  if (rich) {
    const Function& tf = p.functions.back();
    std::vector<BlockRef> refs;
    for (std::size_t e = 1; e < tf.blocks.size(); ++e)
      refs.push_back(BlockRef{tf.name, tf.blocks[e].id});
    p.jump_tables.push_back(std::move(refs));
    p.call_slots.push_back(tf.name);
  }

  for (std::size_t fi = 0; fi < nfuncs; ++fi) {
    Function& f = p.functions[fi];
    const bool is_entry = (fi == 0);
    const bool is_last_func = (fi + 1 == nfuncs);
    for (std::size_t bi = 0; bi < f.blocks.size(); ++bi) {
      BasicBlock& b = f.blocks[bi];
      const bool is_last_block = (bi + 1 == f.blocks.size());
      if (is_entry && bi == 0) b.instructions.push_back({Opcode::AnnotateBegin});

      for (std::size_t k = 0, body = pick(1, 3); k < body; ++k)
        b.instructions.push_back({Opcode::Compute});
      if (fi + 1 < nfuncs && (rng() % 10 < 4 || (is_entry && bi == 0))) {
        Instruction ins{Opcode::DirectCall};
        ins.target = p.functions[pick(fi + 1, nfuncs - 1)].name;
        b.instructions.push_back(std::move(ins));
      }
      if (rich && !is_last_func && (rng() % 10 < 3 || (is_entry && bi == 0))) {
        Instruction ins{Opcode::IndirectCall};
        ins.index = 0;
        b.instructions.push_back(std::move(ins));
      }

      // Terminator.
      if (is_last_block) {
        b.instructions.push_back(is_entry ? Instruction{Opcode::AnnotateEnd}
                                          : Instruction{Opcode::Return});
      } else if (rich && is_last_func && bi == 0 && !p.jump_tables[0].empty()) {
        Instruction ins{Opcode::IndirectJump};
        ins.index = 0;
        b.instructions.push_back(std::move(ins));
      } else if (f.blocks.size() > bi + 1 && (rng() % 10 < 5 || (is_entry && bi == 0))) {
        Instruction ins{Opcode::CondBranch};
        ins.target = f.blocks[pick(bi + 1, f.blocks.size() - 1)].id;
        b.instructions.push_back(std::move(ins));
      }
      // Otherwise plain fallthrough into the next block.
    }
  }
  return p;
}

}  // namespace cfa
