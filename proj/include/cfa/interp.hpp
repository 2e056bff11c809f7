#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cfa/instrument.hpp"
#include "cfa/toyir.hpp"

namespace cfa {

using Input = std::vector<std::uint64_t>;
using Output = std::vector<std::uint64_t>;

enum class TransferKind { IndirectCall, IndirectJump, Return };

// Called before every indirect transfer with the resolved destination.
// Mutating `dest` models a control-flow attack: the masked id is computed
// from the mutated destination, exactly like a trampoline reading the live
// pointer.
using TransferHook =
    std::function<void(TransferKind kind, std::uint64_t source, std::uint64_t& dest,
                       std::uint64_t transfer_index)>;

struct ExecHooks {
  TransferHook on_indirect_transfer;
};

struct ExecResult {
  Output output;
  bool trapped = false;
  std::uint64_t trap_address = 0;  // destination that hit uninstrumented space
  std::uint64_t steps = 0;
};

// Runs the instrumented program, emitting every crossed instrumentation
// point (and BEGIN/END tags) to `sink` in execution order. Deterministic for
// a fixed input and program state. An indirect transfer to an address owned
// by no instruction traps; the masked id has been emitted by then.
ExecResult execute(const InstrumentedProgram& iprog, const Input& input,
                   const TraceSink& sink, const ExecHooks* hooks = nullptr,
                   std::uint64_t fuel = 1'000'000);

// Uninstrumented oracle: the same interpreter semantics, but records the
// sequence of entered blocks (by laid-out block-start address) instead of
// endpoint ids. BEGIN/END windows are reported through `begin`/`end` flags.
struct BlockEvent {
  enum Kind { Begin, End, Block } kind;
  std::uint64_t block_start_address = 0;  // base-relative, relocation invariant
};

ExecResult execute_uninstrumented(const Program& program, const Input& input,
                                  const std::function<void(const BlockEvent&)>& sink,
                                  std::uint64_t fuel = 1'000'000);

}  // namespace cfa
