#include "cfa/interp.hpp"

namespace cfa {

namespace {

struct Frame {
  std::uint64_t resume = 0;     // expected return address (call addr + 1)
  std::uint64_t call_addr = 0;  // site carrying the post-call / exit points
};

using BlockSink = std::function<void(const BlockEvent&)>;

class Interp {
 public:
  Interp(const Program& prog, const InstrumentedProgram* ip, const Input& input,
         const TraceSink* trace, const BlockSink* blocks, const ExecHooks* hooks,
         std::uint64_t fuel)
      : prog_(prog), ip_(ip), input_(input), trace_(trace), blocks_(blocks),
        hooks_(hooks), fuel_(fuel) {}

  ExecResult run() {
    const Function* entry = prog_.find_function(prog_.entry);
    if (!entry || entry->blocks.empty() || entry->blocks.front().instructions.empty()) {
      res_.output = {acc_};
      return res_;
    }
    pc_ = entry->blocks.front().instructions.front().address;
    while (!halted_ && !res_.trapped) {
      if (res_.steps++ >= fuel_) {
        res_.trapped = true;
        res_.trap_address = pc_;
        break;
      }
      step();
    }
    res_.output = {acc_};
    return res_;
  }

 private:
  void emit(EndpointId id) {
    if (trace_ && id != kNoId) (*trace_)(id);
  }
  // Masked values are emitted unconditionally: XOR can land on any value.
  void emit_masked(EndpointId static_id, std::uint64_t src, std::uint64_t dest) {
    if (trace_ && static_id != kNoId) (*trace_)(emit_masked_id(static_id, src, dest));
  }
  void emit_tag(EndpointId tag) {
    if (trace_) (*trace_)(tag);
    if (blocks_)
      (*blocks_)(BlockEvent{tag == kBeginTag ? BlockEvent::Begin : BlockEvent::End, 0});
  }
  const InstrPoints& points(std::uint64_t addr) const {
    static const InstrPoints none{};
    return ip_ ? ip_->at(addr) : none;
  }
  std::uint64_t next_input() {
    if (input_.empty()) return 0;
    return input_[cursor_++ % input_.size()];
  }
  std::uint64_t block_start_of(const Location& loc) const {
    return prog_.functions[loc.function].blocks[loc.block].instructions.front().address -
           prog_.base;
  }
  bool is_last_in_block(const Location& loc) const {
    return loc.instr + 1 ==
           prog_.functions[loc.function].blocks[loc.block].instructions.size();
  }

  void trap(std::uint64_t addr) {
    res_.trapped = true;
    res_.trap_address = addr;
  }

  // Fallthrough past the last instruction of a block.
  void fallthrough(const Location& loc) {
    std::uint64_t next = pc_ + 1;
    if (!prog_.owns_address(next) || prog_.location(next).function != loc.function) {
      if (stack_.empty())
        halted_ = true;
      else
        trap(next);
      return;
    }
    pc_ = next;
  }

  void resolve_indirect(TransferKind kind, std::uint64_t& dest) {
    if (hooks_ && hooks_->on_indirect_transfer)
      hooks_->on_indirect_transfer(kind, pc_, dest, transfer_index_);
    ++transfer_index_;
  }

  void step() {
    const Location loc = prog_.location(pc_);
    const Instruction& ins = prog_.instruction(loc);
    const InstrPoints& pts = points(pc_);
    const bool first = (loc.instr == 0);
    const bool last = is_last_in_block(loc);

    // Block-entry endpoint; a leading begin annotation precedes it.
    bool begin_emitted = false;
    if (first) {
      if (ins.op == Opcode::AnnotateBegin) {
        emit_tag(kBeginTag);
        begin_emitted = true;
      }
      emit(pts.entry);
      if (blocks_) (*blocks_)(BlockEvent{BlockEvent::Block, block_start_of(loc)});
    }

    switch (ins.op) {
      case Opcode::Compute:
        acc_ = acc_ * 6364136223846793005ull + next_input() + 1;
        if (last) {
          emit(pts.exit);
          fallthrough(loc);
        } else {
          ++pc_;
        }
        break;

      case Opcode::AnnotateBegin:
        if (!begin_emitted) emit_tag(kBeginTag);
        if (last) {
          emit(pts.exit);
          fallthrough(loc);
        } else {
          ++pc_;
        }
        break;

      case Opcode::AnnotateEnd:
        // The exit endpoint still belongs to the request.
        if (last) emit(pts.exit);
        emit_tag(kEndTag);
        if (last)
          fallthrough(loc);
        else
          ++pc_;
        break;

      case Opcode::CondBranch: {
        emit(pts.exit);
        const bool taken = (next_input() & 1) != 0;
        if (taken) {
          const Function& f = prog_.functions[loc.function];
          for (const auto& b : f.blocks)
            if (b.id == ins.target) {
              pc_ = b.instructions.front().address;
              return;
            }
          trap(pc_);  // unreachable after validation
        } else {
          fallthrough(loc);
        }
        break;
      }

      case Opcode::DirectCall: {
        emit(pts.pre_call);
        const Function* callee = prog_.find_function(ins.target);
        if (!callee || callee->blocks.empty() || callee->blocks.front().instructions.empty()) {
          // Degenerate callee: returns immediately.
          emit(pts.post_call);
          if (last) {
            emit(pts.exit);
            fallthrough(loc);
          } else {
            ++pc_;
          }
          break;
        }
        stack_.push_back(Frame{pc_ + 1, pc_});
        pc_ = callee->blocks.front().instructions.front().address;
        break;
      }

      case Opcode::IndirectCall: {
        std::uint64_t dest =
            ins.index < prog_.call_slot_addrs.size() ? prog_.call_slot_addrs[ins.index] : 0;
        resolve_indirect(TransferKind::IndirectCall, dest);
        emit_masked(pts.pre_call, pc_, dest);
        if (!prog_.owns_address(dest)) {
          trap(dest);
          break;
        }
        stack_.push_back(Frame{pc_ + 1, pc_});
        pc_ = dest;
        break;
      }

      case Opcode::IndirectJump: {
        const auto& table = prog_.jump_table_addrs[ins.index];
        std::uint64_t dest = table.empty() ? 0 : table[next_input() % table.size()];
        resolve_indirect(TransferKind::IndirectJump, dest);
        emit_masked(pts.pre_transfer, pc_, dest);
        if (!prog_.owns_address(dest)) {
          trap(dest);
          break;
        }
        pc_ = dest;
        break;
      }

      case Opcode::Return: {
        if (stack_.empty()) {
          halted_ = true;
          break;
        }
        Frame frame = stack_.back();
        stack_.pop_back();
        std::uint64_t dest = frame.resume;
        resolve_indirect(TransferKind::Return, dest);
        emit_masked(pts.pre_transfer, pc_, dest);
        if (!prog_.owns_address(dest)) {
          trap(dest);
          break;
        }
        pc_ = dest;
        if (dest == frame.resume) {
          // Control came back to the call site: post-call point, then the
          // caller block's exit if the call was its last instruction.
          const InstrPoints& call_pts = points(frame.call_addr);
          emit(call_pts.post_call);
          const Location call_loc = prog_.location(frame.call_addr);
          if (is_last_in_block(call_loc)) emit(call_pts.exit);
        }
        break;
      }
    }
  }

  const Program& prog_;
  const InstrumentedProgram* ip_;
  const Input& input_;
  const TraceSink* trace_;
  const BlockSink* blocks_;
  const ExecHooks* hooks_;
  std::uint64_t fuel_;

  ExecResult res_;
  std::uint64_t pc_ = 0;
  std::uint64_t acc_ = 0;
  std::size_t cursor_ = 0;
  std::uint64_t transfer_index_ = 0;
  std::vector<Frame> stack_;
  bool halted_ = false;
};

}  // namespace

ExecResult execute(const InstrumentedProgram& iprog, const Input& input,
                   const TraceSink& sink, const ExecHooks* hooks, std::uint64_t fuel) {
  return Interp(iprog.program, &iprog, input, &sink, nullptr, hooks, fuel).run();
}

ExecResult execute_uninstrumented(const Program& program, const Input& input,
                                  const std::function<void(const BlockEvent&)>& sink,
                                  std::uint64_t fuel) {
  return Interp(program, nullptr, input, nullptr, &sink, nullptr, fuel).run();
}

}  // namespace cfa
