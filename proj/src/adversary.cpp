#include "cfa/adversary.hpp"

#include <fstream>

#include <json.hpp>

#include "cfa/instrument.hpp"
#include "cfa/workload.hpp"

namespace cfa {

std::string kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::HijackIndirectTarget: return "hijack-indirect-target";
    case AttackKind::RopReturnOverwrite: return "rop-return-overwrite";
    case AttackKind::TamperCachedId: return "tamper-cached-id";
    case AttackKind::TamperCiphertext: return "tamper-ciphertext";
    case AttackKind::DropBatch: return "drop-batch";
    case AttackKind::ReplayBatch: return "replay-batch";
    case AttackKind::ReorderBatches: return "reorder-batches";
    case AttackKind::ForkVerifier: return "fork-verifier";
    case AttackKind::SuppressFeedback: return "suppress-feedback";
    case AttackKind::MixedFlow: return "mixed-flow";
  }
  return "?";
}

std::string detection_name(Detection d) {
  switch (d) {
    case Detection::CfgViolation: return "cfg-violation";
    case Detection::AeadFailure: return "aead-failure";
    case Detection::DigestMismatch: return "digest-mismatch";
    case Detection::CounterDesync: return "counter-desync";
    case Detection::ProverStall: return "prover-stall";
    case Detection::UndetectedByDesign: return "undetected-by-design";
  }
  return "?";
}

std::optional<AttackKind> kind_from_name(const std::string& name) {
  for (AttackKind k :
       {AttackKind::HijackIndirectTarget, AttackKind::RopReturnOverwrite,
        AttackKind::TamperCachedId, AttackKind::TamperCiphertext, AttackKind::DropBatch,
        AttackKind::ReplayBatch, AttackKind::ReorderBatches, AttackKind::ForkVerifier,
        AttackKind::SuppressFeedback, AttackKind::MixedFlow})
    if (kind_name(k) == name) return k;
  return std::nullopt;
}

std::optional<Detection> detection_from_name(const std::string& name) {
  for (Detection d :
       {Detection::CfgViolation, Detection::AeadFailure, Detection::DigestMismatch,
        Detection::CounterDesync, Detection::ProverStall, Detection::UndetectedByDesign})
    if (detection_name(d) == name) return d;
  return std::nullopt;
}

namespace {

Detection detection_of(FailureKind kind) {
  switch (kind) {
    case FailureKind::AeadFailure: return Detection::AeadFailure;
    case FailureKind::DigestMismatch: return Detection::DigestMismatch;
    case FailureKind::CounterDesync: return Detection::CounterDesync;
    case FailureKind::ProverStall: return Detection::ProverStall;
  }
  return Detection::AeadFailure;
}

}  // namespace

AttackOutcome apply(const AttackScenario& scenario) {
  Program program = make_signing_program();
  layout(program);
  InstrumentedProgram iprog = instrument(program);
  KeyMaterial keys = dev_key_material();

  // Train on inputs covering both branch classes and both table targets.
  Workload training = driver_inputs();
  for (auto& in : make_workload(7, 32)) training.push_back(std::move(in));
  RunConfig learn_cfg;
  learn_cfg.batch_size = 64;
  learn_cfg.feedback_frequency = 4;
  learn_cfg.learn_mode = true;
  RunResult learned = run_reference(iprog, nullptr, training, learn_cfg, keys);

  RunConfig config;
  config.batch_size = 8;
  config.feedback_frequency = 2;
  config.queue_capacity = 8;
  if (scenario.kind == AttackKind::SuppressFeedback)
    config.stall_timeout = std::chrono::milliseconds(150);

  PipelineHooks hooks;
  const std::uint64_t param = scenario.param;
  const Program& prog = iprog.program;

  switch (scenario.kind) {
    case AttackKind::HijackIndirectTarget:
      hooks.pre_transfer = [&prog, param](TransferKind kind, std::uint64_t,
                                          std::uint64_t& dest, std::uint64_t index) {
        if (kind == TransferKind::IndirectCall && index == param)
          dest = prog.owns_address(dest + 1) ? dest + 1 : dest - 1;
      };
      break;
    case AttackKind::RopReturnOverwrite:
      hooks.pre_transfer = [&prog, param](TransferKind kind, std::uint64_t,
                                          std::uint64_t& dest, std::uint64_t index) {
        if (kind == TransferKind::Return && index == param)
          dest = prog.owns_address(dest + 1) ? dest + 1 : dest - 1;
      };
      break;
    case AttackKind::MixedFlow:
      // Swap the jump-table pick for the other learned target: the spliced
      // flow is edge-wise valid, so the verifier accepts it.
      hooks.pre_transfer = [&prog](TransferKind kind, std::uint64_t, std::uint64_t& dest,
                                   std::uint64_t) {
        if (kind != TransferKind::IndirectJump) return;
        const auto& table = prog.jump_table_addrs.at(0);
        dest = (dest == table[0]) ? table[1] : table[0];
      };
      break;
    case AttackKind::TamperCachedId:
      hooks.post_record = [param](std::vector<EndpointId>& ids, std::uint64_t batch_no) {
        if (batch_no == param && !ids.empty()) ids[0] ^= 0x1;
      };
      break;
    case AttackKind::TamperCiphertext:
      hooks.in_queue = [param](SealedBatch&& b) {
        if (b.batch_no == param && !b.ciphertext.empty()) b.ciphertext[0] ^= 0x1;
        return std::vector<SealedBatch>{std::move(b)};
      };
      break;
    case AttackKind::DropBatch:
      hooks.in_queue = [param](SealedBatch&& b) {
        if (b.batch_no == param) return std::vector<SealedBatch>{};
        return std::vector<SealedBatch>{std::move(b)};
      };
      break;
    case AttackKind::ReplayBatch:
      hooks.in_queue = [param](SealedBatch&& b) {
        if (b.batch_no == param) return std::vector<SealedBatch>{b, b};
        return std::vector<SealedBatch>{std::move(b)};
      };
      break;
    case AttackKind::ReorderBatches:
      hooks.in_queue = [param, held = std::optional<SealedBatch>{}](
                           SealedBatch&& b) mutable {
        if (b.batch_no == param) {
          held = std::move(b);
          return std::vector<SealedBatch>{};
        }
        if (held) {
          std::vector<SealedBatch> out{std::move(b), std::move(*held)};
          held.reset();
          return out;
        }
        return std::vector<SealedBatch>{std::move(b)};
      };
      break;
    case AttackKind::ForkVerifier:
      hooks.fork_verifier = true;
      break;
    case AttackKind::SuppressFeedback:
      hooks.suppress_feedback = true;
      break;
  }

  Workload workload = driver_inputs();
  for (auto& in : make_workload(11, 16)) workload.push_back(std::move(in));
  RunResult res = run_pipeline(iprog, &learned.learned, workload, config, keys, &hooks);

  AttackOutcome out;
  for (const auto& rec : res.records) {
    if (rec.verdict == Verdict::Violation) {
      ++out.violation_records;
      if (!out.offending_edge) out.offending_edge = rec.offending_edge;
    } else {
      ++out.valid_records;
    }
  }
  if (res.failure) {
    out.observed = detection_of(res.failure->kind);
    out.failing_batch = res.failure->batch_no;
    out.detail = res.failure->detail;
  } else if (res.any_violation) {
    out.observed = Detection::CfgViolation;
    if (out.offending_edge)
      out.detail = "first offending edge " + std::to_string(out.offending_edge->from) +
                   "->" + std::to_string(out.offending_edge->to);
  }
  return out;
}

std::vector<AttackScenario> scenario_suite() {
  return {
      {AttackKind::HijackIndirectTarget, 2, Detection::CfgViolation,
       "hijack dispatch slot to a gadget"},
      {AttackKind::RopReturnOverwrite, 1, Detection::CfgViolation,
       "overwrite a return address"},
      {AttackKind::TamperCachedId, 1, Detection::DigestMismatch,
       "flip a cached id before sealing"},
      {AttackKind::TamperCiphertext, 1, Detection::AeadFailure,
       "flip a ciphertext bit in transit"},
      {AttackKind::DropBatch, 0, Detection::AeadFailure, "drop the first batch"},
      {AttackKind::ReplayBatch, 0, Detection::AeadFailure, "replay the first batch"},
      {AttackKind::ReorderBatches, 0, Detection::AeadFailure, "swap adjacent batches"},
      {AttackKind::ForkVerifier, 0, Detection::CounterDesync,
       "mirror batches to a second verifier"},
      {AttackKind::SuppressFeedback, 0, Detection::ProverStall,
       "withhold all acknowledgments"},
      {AttackKind::MixedFlow, 0, Detection::UndetectedByDesign,
       "splice two individually valid flows"},
  };
}

std::vector<AttackScenario> load_scenarios(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scenario file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<AttackScenario> out;
  for (const auto& item : doc) {
    AttackScenario s;
    auto kind = kind_from_name(item.at("kind").get<std::string>());
    if (!kind) throw std::runtime_error("unknown attack kind in " + path);
    s.kind = *kind;
    s.param = item.value("param", 0ull);
    auto expected = detection_from_name(item.at("expected").get<std::string>());
    if (!expected) throw std::runtime_error("unknown detection in " + path);
    s.expected = *expected;
    s.name = item.value("name", kind_name(s.kind));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace cfa
