#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfa/ids.hpp"

namespace cfa {

struct ProgramError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Opcode {
  Compute,
  CondBranch,     // target = block id in the same function
  DirectCall,     // target = function name
  IndirectCall,   // index = call-slot index
  IndirectJump,   // index = jump-table index
  Return,
  AnnotateBegin,  // emits the BEGIN tag
  AnnotateEnd,    // emits the END tag
};

struct Instruction {
  Opcode op = Opcode::Compute;
  std::string target;        // CondBranch / DirectCall
  std::uint32_t index = 0;   // IndirectCall / IndirectJump
  std::uint64_t address = 0; // assigned by layout()
};

struct BasicBlock {
  std::string id;
  std::vector<Instruction> instructions;
};

struct Function {
  std::string name;
  std::vector<BasicBlock> blocks;
};

// Symbolic reference to a block, "function:block".
struct BlockRef {
  std::string function;
  std::string block;
};

// Location of one instruction inside a laid-out program.
struct Location {
  std::uint32_t function = 0;
  std::uint32_t block = 0;
  std::uint32_t instr = 0;
};

struct Program {
  std::vector<Function> functions;
  std::string entry;
  std::vector<std::vector<BlockRef>> jump_tables;
  std::vector<std::string> call_slots;

  // Filled by layout(). The resolved tables are the run-time attack surface:
  // adversary hooks may rewrite entries after layout.
  bool laid_out = false;
  std::uint64_t base = 0;
  std::vector<Location> locations;  // indexed by address - base
  std::vector<std::vector<std::uint64_t>> jump_table_addrs;
  std::vector<std::uint64_t> call_slot_addrs;

  const Function* find_function(const std::string& name) const;
  int function_index(const std::string& name) const;  // -1 if absent
  bool owns_address(std::uint64_t addr) const {
    return laid_out && addr >= base && addr - base < locations.size();
  }
  const Location& location(std::uint64_t addr) const {
    return locations[addr - base];
  }
  const Instruction& instruction(const Location& loc) const {
    return functions[loc.function].blocks[loc.block].instructions[loc.instr];
  }
  std::uint64_t instruction_count() const;
};

// Assigns one abstract address per instruction, strictly increasing from
// `base`, and resolves jump tables / call slots to addresses. Validates the
// structural invariants and throws ProgramError on duplicate block ids,
// dangling branch targets, unknown callees, or bad table/slot references.
void layout(Program& program, std::uint64_t base = 0);

// Line-based fixture format, one instruction per line; see README.
Program parse_program(std::istream& in);
Program parse_program_file(const std::string& path);
std::string print_program(const Program& program);

}  // namespace cfa
