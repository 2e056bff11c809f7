#include "cfa/toyir.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace cfa {

const Function* Program::find_function(const std::string& name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

int Program::function_index(const std::string& name) const {
  for (std::size_t i = 0; i < functions.size(); ++i)
    if (functions[i].name == name) return static_cast<int>(i);
  return -1;
}

std::uint64_t Program::instruction_count() const {
  std::uint64_t n = 0;
  for (const auto& f : functions)
    for (const auto& b : f.blocks) n += b.instructions.size();
  return n;
}

namespace {

void validate(const Program& p) {
  std::unordered_set<std::string> fnames;
  for (const auto& f : p.functions) {
    if (!fnames.insert(f.name).second)
      throw ProgramError("duplicate function name: " + f.name);
    std::unordered_set<std::string> bids;
    for (const auto& b : f.blocks) {
      if (!bids.insert(b.id).second)
        throw ProgramError("duplicate block id: " + f.name + ":" + b.id);
      for (std::size_t i = 0; i + 1 < b.instructions.size(); ++i) {
        switch (b.instructions[i].op) {
          case Opcode::CondBranch:
          case Opcode::IndirectJump:
          case Opcode::Return:
            throw ProgramError("control transfer before terminator in " + f.name + ":" +
                               b.id);
          default:
            break;
        }
      }
    }
    for (const auto& b : f.blocks)
      for (const auto& ins : b.instructions) {
        if (ins.op == Opcode::CondBranch && !bids.contains(ins.target))
          throw ProgramError("dangling branch target " + ins.target + " in " + f.name);
        if (ins.op == Opcode::DirectCall && !p.find_function(ins.target))
          throw ProgramError("call to unknown function " + ins.target);
        if (ins.op == Opcode::IndirectJump && ins.index >= p.jump_tables.size())
          throw ProgramError("jump-table index out of range");
        if (ins.op == Opcode::IndirectCall && ins.index >= p.call_slots.size())
          throw ProgramError("call-slot index out of range");
      }
  }
  if (!p.entry.empty() && !p.find_function(p.entry))
    throw ProgramError("entry function does not exist: " + p.entry);
  for (const auto& table : p.jump_tables)
    for (const auto& ref : table) {
      const Function* f = p.find_function(ref.function);
      if (!f) throw ProgramError("jump table references unknown function " + ref.function);
      bool found = false;
      for (const auto& b : f->blocks) found |= (b.id == ref.block);
      if (!found)
        throw ProgramError("jump table references unknown block " + ref.function + ":" +
                           ref.block);
    }
  for (const auto& slot : p.call_slots)
    if (!p.find_function(slot))
      throw ProgramError("call slot references unknown function " + slot);
}

}  // namespace

void layout(Program& p, std::uint64_t base) {
  validate(p);
  p.base = base;
  p.locations.clear();
  std::uint64_t addr = base;
  std::unordered_map<std::string, std::uint64_t> block_start;  // "func:block"
  std::unordered_map<std::string, std::uint64_t> func_start;
  for (std::uint32_t fi = 0; fi < p.functions.size(); ++fi) {
    auto& f = p.functions[fi];
    for (std::uint32_t bi = 0; bi < f.blocks.size(); ++bi) {
      auto& b = f.blocks[bi];
      block_start[f.name + ":" + b.id] = addr;
      for (std::uint32_t ii = 0; ii < b.instructions.size(); ++ii) {
        if (bi == 0 && ii == 0) func_start[f.name] = addr;
        b.instructions[ii].address = addr++;
        p.locations.push_back(Location{fi, bi, ii});
      }
      if (b.instructions.empty())
        throw ProgramError("empty block " + f.name + ":" + b.id);
    }
  }
  p.jump_table_addrs.clear();
  for (const auto& table : p.jump_tables) {
    std::vector<std::uint64_t> addrs;
    for (const auto& ref : table) addrs.push_back(block_start.at(ref.function + ":" + ref.block));
    p.jump_table_addrs.push_back(std::move(addrs));
  }
  p.call_slot_addrs.clear();
  for (const auto& slot : p.call_slots) p.call_slot_addrs.push_back(func_start.at(slot));
  p.laid_out = true;
}

namespace {

Opcode opcode_from_name(const std::string& s) {
  if (s == "compute") return Opcode::Compute;
  if (s == "cond") return Opcode::CondBranch;
  if (s == "call") return Opcode::DirectCall;
  if (s == "icall") return Opcode::IndirectCall;
  if (s == "ijump") return Opcode::IndirectJump;
  if (s == "return") return Opcode::Return;
  if (s == "begin") return Opcode::AnnotateBegin;
  if (s == "end") return Opcode::AnnotateEnd;
  throw ProgramError("unknown opcode: " + s);
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::Compute: return "compute";
    case Opcode::CondBranch: return "cond";
    case Opcode::DirectCall: return "call";
    case Opcode::IndirectCall: return "icall";
    case Opcode::IndirectJump: return "ijump";
    case Opcode::Return: return "return";
    case Opcode::AnnotateBegin: return "begin";
    case Opcode::AnnotateEnd: return "end";
  }
  return "?";
}

BlockRef parse_block_ref(const std::string& tok) {
  auto colon = tok.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
    throw ProgramError("bad block reference: " + tok);
  return BlockRef{tok.substr(0, colon), tok.substr(colon + 1)};
}

}  // namespace

Program parse_program(std::istream& in) {
  Program p;
  Function* cur_func = nullptr;
  BasicBlock* cur_block = nullptr;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok) || tok[0] == '#') continue;
    try {
      if (tok == "func") {
        std::string name;
        ls >> name;
        p.functions.push_back(Function{name, {}});
        cur_func = &p.functions.back();
        cur_block = nullptr;
      } else if (tok == "block") {
        if (!cur_func) throw ProgramError("block outside function");
        std::string id;
        ls >> id;
        cur_func->blocks.push_back(BasicBlock{id, {}});
        cur_block = &cur_func->blocks.back();
      } else if (tok == "entry") {
        ls >> p.entry;
      } else if (tok == "jumptable") {
        std::vector<BlockRef> refs;
        std::string ref;
        while (ls >> ref) refs.push_back(parse_block_ref(ref));
        p.jump_tables.push_back(std::move(refs));
      } else if (tok == "callslots") {
        std::string name;
        while (ls >> name) p.call_slots.push_back(name);
      } else {
        if (!cur_block) throw ProgramError("instruction outside block");
        Instruction ins;
        ins.op = opcode_from_name(tok);
        if (ins.op == Opcode::CondBranch || ins.op == Opcode::DirectCall) {
          if (!(ls >> ins.target)) throw ProgramError("missing operand");
        } else if (ins.op == Opcode::IndirectCall || ins.op == Opcode::IndirectJump) {
          if (!(ls >> ins.index)) throw ProgramError("missing index operand");
        }
        cur_block->instructions.push_back(std::move(ins));
      }
    } catch (const ProgramError& e) {
      throw ProgramError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (p.entry.empty() && !p.functions.empty()) p.entry = p.functions.front().name;
  return p;
}

Program parse_program_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ProgramError("cannot open program file: " + path);
  return parse_program(in);
}

std::string print_program(const Program& p) {
  std::ostringstream out;
  out << "entry " << p.entry << "\n";
  for (const auto& f : p.functions) {
    out << "func " << f.name << "\n";
    for (const auto& b : f.blocks) {
      out << "block " << b.id << "\n";
      for (const auto& ins : b.instructions) {
        out << "  " << opcode_name(ins.op);
        if (ins.op == Opcode::CondBranch || ins.op == Opcode::DirectCall)
          out << " " << ins.target;
        else if (ins.op == Opcode::IndirectCall || ins.op == Opcode::IndirectJump)
          out << " " << ins.index;
        out << "\n";
      }
    }
  }
  for (const auto& table : p.jump_tables) {
    out << "jumptable";
    for (const auto& ref : table) out << " " << ref.function << ":" << ref.block;
    out << "\n";
  }
  if (!p.call_slots.empty()) {
    out << "callslots";
    for (const auto& s : p.call_slots) out << " " << s;
    out << "\n";
  }
  return out.str();
}

}  // namespace cfa
