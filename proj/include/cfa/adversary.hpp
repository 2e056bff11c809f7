#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfa/cfg.hpp"
#include "cfa/pipeline.hpp"

namespace cfa {

enum class AttackKind {
  HijackIndirectTarget,
  RopReturnOverwrite,
  TamperCachedId,
  TamperCiphertext,
  DropBatch,
  ReplayBatch,
  ReorderBatches,
  ForkVerifier,
  SuppressFeedback,
  MixedFlow,
};

enum class Detection {
  CfgViolation,
  AeadFailure,
  DigestMismatch,
  CounterDesync,
  ProverStall,
  UndetectedByDesign,
};

struct AttackScenario {
  AttackKind kind = AttackKind::HijackIndirectTarget;
  std::uint64_t param = 0;  // batch index, transfer index, ... per kind
  Detection expected = Detection::CfgViolation;
  std::string name;
};

struct AttackOutcome {
  std::optional<Detection> observed;  // nullopt: nothing fired
  std::optional<Edge> offending_edge;
  std::optional<std::uint64_t> failing_batch;
  std::uint64_t violation_records = 0;
  std::uint64_t valid_records = 0;
  std::string detail;

  bool matches(Detection expected) const {
    if (expected == Detection::UndetectedByDesign) return !observed.has_value();
    return observed == expected;
  }
};

// Runs the scenario against the two-thread pipeline (or a scripted exchange
// where the threat lives outside it) and reports where detection fired.
AttackOutcome apply(const AttackScenario& scenario);

// One scenario per modeled threat, including the context-insensitivity
// limitation (mixed valid flows, undetected by design).
std::vector<AttackScenario> scenario_suite();

std::string kind_name(AttackKind kind);
std::string detection_name(Detection d);
std::optional<AttackKind> kind_from_name(const std::string& name);
std::optional<Detection> detection_from_name(const std::string& name);

// Declarative scenario file: JSON array of {kind, param, expected, name}.
std::vector<AttackScenario> load_scenarios(const std::string& path);

}  // namespace cfa
