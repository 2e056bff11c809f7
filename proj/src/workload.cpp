#include "cfa/workload.hpp"

#include <random>

namespace cfa {

namespace {

Instruction make(Opcode op) { return Instruction{op}; }

Instruction make_target(Opcode op, std::string target) {
  Instruction ins{op};
  ins.target = std::move(target);
  return ins;
}

Instruction make_index(Opcode op, std::size_t index) {
  Instruction ins{op};
  ins.index = index;
  return ins;
}

}  // namespace

Program make_signing_program() {
  Program p;
  p.entry = "main";

  // ~40 handler rounds per request put a request's id volume in the hundreds,
  // so batch-size amortization is visible in the sweeps.
  Function main_fn{"main", {}};
  BasicBlock entry_block{"b0", {make(Opcode::AnnotateBegin), make(Opcode::Compute)}};
  for (int round = 0; round < 40; ++round)
    entry_block.instructions.push_back(make_target(Opcode::DirectCall, "handle"));
  entry_block.instructions.push_back(make(Opcode::Compute));
  entry_block.instructions.push_back(make(Opcode::AnnotateEnd));
  main_fn.blocks.push_back(std::move(entry_block));
  p.functions.push_back(std::move(main_fn));

  // Validity check: fallthrough path rejects, taken path hashes and signs.
  Function handle{"handle", {}};
  handle.blocks.push_back(
      BasicBlock{"b0", {make(Opcode::Compute), make_target(Opcode::CondBranch, "b2")}});
  handle.blocks.push_back(BasicBlock{
      "b1", {make(Opcode::Compute), make(Opcode::Compute), make(Opcode::Return)}});
  handle.blocks.push_back(
      BasicBlock{"b2",
                 {make(Opcode::Compute), make_target(Opcode::DirectCall, "hash"),
                  make_index(Opcode::IndirectCall, 0), make(Opcode::Compute),
                  make(Opcode::Return)}});
  p.functions.push_back(std::move(handle));

  // Digest rounds selected through a jump table.
  Function hash{"hash", {}};
  hash.blocks.push_back(
      BasicBlock{"b0", {make(Opcode::Compute), make_index(Opcode::IndirectJump, 0)}});
  hash.blocks.push_back(BasicBlock{"b1", {make(Opcode::Compute), make(Opcode::Return)}});
  hash.blocks.push_back(BasicBlock{
      "b2", {make(Opcode::Compute), make(Opcode::Compute), make(Opcode::Return)}});
  p.functions.push_back(std::move(hash));

  Function sign{"sign", {}};
  sign.blocks.push_back(BasicBlock{
      "b0", {make(Opcode::Compute), make(Opcode::Compute), make(Opcode::Return)}});
  p.functions.push_back(std::move(sign));

  p.jump_tables.push_back({BlockRef{"hash", "b1"}, BlockRef{"hash", "b2"}});
  p.call_slots.push_back("sign");
  return p;
}

Program make_password_program() {
  Program p;
  p.entry = "main";

  Function main_fn{"main", {}};
  main_fn.blocks.push_back(BasicBlock{
      "b0",
      {make(Opcode::AnnotateBegin), make(Opcode::Compute),
       make_target(Opcode::DirectCall, "check"), make(Opcode::Compute),
       make(Opcode::AnnotateEnd)}});
  p.functions.push_back(std::move(main_fn));

  // Compare, then fetch public (fallthrough) or private (taken) data.
  Function check{"check", {}};
  check.blocks.push_back(
      BasicBlock{"b0", {make(Opcode::Compute), make_target(Opcode::CondBranch, "b2")}});
  check.blocks.push_back(BasicBlock{"b1", {make(Opcode::Compute), make(Opcode::Return)}});
  check.blocks.push_back(BasicBlock{
      "b2", {make(Opcode::Compute), make(Opcode::Compute), make(Opcode::Return)}});
  p.functions.push_back(std::move(check));
  return p;
}

Workload make_workload(std::uint64_t seed, std::size_t requests, std::size_t payload_len,
                       std::uint64_t value_range) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ull + 1);
  if (value_range == 0) value_range = 1;
  Workload w;
  w.reserve(requests);
  for (std::size_t r = 0; r < requests; ++r) {
    Input in(payload_len);
    for (auto& v : in) v = rng() % value_range;
    w.push_back(std::move(in));
  }
  return w;
}

Workload driver_inputs() {
  return {
      {0, 0, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 1, 1},
      {0, 1, 0, 1, 0, 1, 0, 1}, {1, 0, 1, 0, 1, 0, 1, 0},
      {2, 3, 5, 7, 2, 3, 5, 7}, {7, 6, 5, 4, 3, 2, 1, 0},
      {1, 1, 0, 0, 1, 1, 0, 0}, {0, 0, 1, 1, 0, 0, 1, 1},
  };
}

}  // namespace cfa
