#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cfa/cfg.hpp"
#include "cfa/instrument.hpp"
#include "cfa/interp.hpp"
#include "cfa/protocol.hpp"

namespace cfa {

struct RunConfig {
  std::size_t batch_size = 10000;
  std::size_t feedback_frequency = 10;
  std::size_t queue_capacity = 64;
  bool learn_mode = false;
  bool timing = false;
  bool halt_on_violation = false;
  std::chrono::milliseconds stall_timeout{2000};
};

struct RunMetrics {
  double prover_us_per_req = 0.0;
  double verifier_us_per_req = 0.0;  // excludes idle wait on the queue
  double ns_per_id_transfer = 0.0;
  std::uint64_t ids_total = 0;
  std::uint64_t batches_total = 0;
  std::uint64_t requests = 0;
  std::size_t max_queue_occupancy = 0;
};

enum class FailureKind { AeadFailure, DigestMismatch, CounterDesync, ProverStall };

struct ProtocolFailure {
  FailureKind kind = FailureKind::AeadFailure;
  std::uint64_t batch_no = 0;
  std::string detail;
};

// Attack-injection surfaces, all optional.
struct PipelineHooks {
  TransferHook pre_transfer;  // mutate indirect-transfer destinations
  std::function<void(std::vector<EndpointId>&, std::uint64_t batch_no)>
      post_record;  // mutate the prover cache before sealing
  // Batch stream transform between enqueue and delivery: return the batches
  // to actually deliver (empty = drop, two copies = replay, ...).
  std::function<std::vector<SealedBatch>(SealedBatch&&)> in_queue;
  bool fork_verifier = false;     // second verifier instance fed duplicates
  bool suppress_feedback = false; // feedback never reaches the prover
};

struct RunResult {
  std::vector<AttestationRecord> records;
  RunMetrics metrics;
  std::optional<ProtocolFailure> failure;
  Cfg learned;  // learn mode only
  bool any_violation = false;

  std::string log_text() const;
};

using Workload = std::vector<Input>;

// Two-thread pipeline: the prover thread executes each request through the
// interpreter, feeds ids to the prover state, and enqueues sealed batches,
// blocking for an acknowledgment whenever unacked batches reach the feedback
// frequency. The verifier thread ingests, verifies (or learns), and emits
// feedback every feedback-frequency batches. A partial batch is flushed
// after each request's END tag.
RunResult run_pipeline(const InstrumentedProgram& iprog, const Cfg* cfg,
                       const Workload& workload, const RunConfig& config,
                       const KeyMaterial& keys, const PipelineHooks* hooks = nullptr);

// Single-threaded reference with identical protocol semantics; used to pin
// ordering determinism of the attestation log.
RunResult run_reference(const InstrumentedProgram& iprog, const Cfg* cfg,
                        const Workload& workload, const RunConfig& config,
                        const KeyMaterial& keys);

// Uninstrumented execution of the same workload; fills prover_us_per_req
// only. The overhead baseline for benchmark reports.
RunMetrics run_baseline(const InstrumentedProgram& iprog, const Workload& workload);

}  // namespace cfa
