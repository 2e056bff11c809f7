#include "cfa/pipeline.hpp"

#include <atomic>
#include <mutex>
#include <sstream>
#include <thread>

#include "cfa/queue.hpp"

namespace cfa {

namespace {

using Clock = std::chrono::steady_clock;

double ns_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::nano>(b - a).count();
}

const char* failure_name(FailureKind kind) {
  switch (kind) {
    case FailureKind::AeadFailure: return "aead-failure";
    case FailureKind::DigestMismatch: return "digest-mismatch";
    case FailureKind::CounterDesync: return "counter-desync";
    case FailureKind::ProverStall: return "prover-stall";
  }
  return "?";
}

FailureKind classify(const std::exception& e) {
  if (dynamic_cast<const DigestMismatch*>(&e)) return FailureKind::DigestMismatch;
  if (dynamic_cast<const CounterDesync*>(&e)) return FailureKind::CounterDesync;
  return FailureKind::AeadFailure;
}

std::uint64_t failure_batch(const std::exception& e) {
  if (auto* p = dynamic_cast<const ProtocolError*>(&e)) return p->batch_no;
  return 0;
}

struct Shared {
  BoundedQueue<SealedBatch> queue;
  SingleSlot<SealedBatch> feedback;
  std::atomic<bool> stop{false};
  std::mutex fail_mu;
  std::optional<ProtocolFailure> failure;

  explicit Shared(std::size_t capacity) : queue(capacity) {}

  void fail(FailureKind kind, std::uint64_t batch_no, std::string detail) {
    {
      std::lock_guard lock(fail_mu);
      if (!failure) failure = ProtocolFailure{kind, batch_no, std::move(detail)};
    }
    stop.store(true);
    queue.close();
    feedback.close();
  }
};

class VerifierThread {
 public:
  VerifierThread(Shared& sh, const Cfg* cfg, const RunConfig& config,
                 const KeyMaterial& keys, const PipelineHooks* hooks)
      : sh_(sh), config_(config),
        state_(Secret::from_bytes(keys.secret), RatchetKey::from_bytes(keys.key_init)) {
    if (cfg) sv_.emplace(*cfg);
    if (hooks && hooks->fork_verifier)
      fork_.emplace(Secret::from_bytes(keys.secret), RatchetKey::from_bytes(keys.key_init));
    suppress_ = hooks && hooks->suppress_feedback;
  }

  void run() {
    while (auto batch = sh_.queue.pop()) {
      auto t0 = Clock::now();
      std::vector<EndpointId> ids;
      try {
        ids = state_.ingest(*batch);
        if (fork_) fork_->ingest(*batch);
      } catch (const std::exception& e) {
        sh_.fail(classify(e), failure_batch(e), e.what());
        return;
      }
      bool halt = false;
      for (EndpointId id : ids) {
        if (sv_) {
          if (auto rec = sv_->feed(id)) {
            if (rec->verdict == Verdict::Violation) any_violation = true;
            records.push_back(*rec);
            if (config_.halt_on_violation && rec->verdict == Verdict::Violation) halt = true;
          }
        } else {
          try {
            learner_.feed(id);
          } catch (const std::exception& e) {
            sh_.fail(FailureKind::DigestMismatch, batch->batch_no,
                     std::string("learn: ") + e.what());
            return;
          }
        }
      }
      ++ingested_;
      busy_ns_ += ns_between(t0, Clock::now());
      if (halt) {
        sh_.stop.store(true);
        sh_.queue.close();
        sh_.feedback.close();
        return;
      }
      if (feedback_open_ && ingested_ % config_.feedback_frequency == 0 && !suppress_) {
        // A failed post means the prover is gone (shutdown); keep draining
        // the queue so verification and learning see the full stream.
        if (!sh_.feedback.post(state_.make_feedback()))
          feedback_open_ = false;
        else if (fork_ && !sh_.feedback.post(fork_->make_feedback()))
          feedback_open_ = false;
      }
    }
    if (sv_) {
      if (auto rec = sv_->finish()) {
        if (rec->verdict == Verdict::Violation) any_violation = true;
        records.push_back(*rec);
      }
    } else {
      try {
        learned = learner_.finish();
      } catch (const std::exception& e) {
        sh_.fail(FailureKind::DigestMismatch, 0, std::string("learn: ") + e.what());
      }
    }
  }

  std::vector<AttestationRecord> records;
  Cfg learned;
  bool any_violation = false;
  double busy_ns() const { return busy_ns_; }

 private:
  Shared& sh_;
  const RunConfig& config_;
  VerifierState state_;
  std::optional<VerifierState> fork_;
  std::optional<StreamVerifier> sv_;
  StreamLearner learner_;
  bool suppress_ = false;
  bool feedback_open_ = true;
  std::uint64_t ingested_ = 0;
  double busy_ns_ = 0.0;
};

class ProverThread {
 public:
  ProverThread(Shared& sh, const RunConfig& config, const KeyMaterial& keys,
               const PipelineHooks* hooks)
      : sh_(sh), config_(config), hooks_(hooks),
        state_(Secret::from_bytes(keys.secret), RatchetKey::from_bytes(keys.key_init),
               config.batch_size, config.feedback_frequency) {
    if (hooks && hooks->post_record) state_.pre_seal_hook = hooks->post_record;
  }

  void run_request(const InstrumentedProgram& iprog, const Input& input) {
    auto t0 = Clock::now();
    TraceSink sink = [this](EndpointId id) { on_id(id); };
    ExecHooks eh;
    if (hooks_ && hooks_->pre_transfer) eh.on_indirect_transfer = hooks_->pre_transfer;
    execute(iprog, input, sink, &eh);
    if (!sh_.stop.load() && !awaiting_failed_) {
      try {
        if (state_.unacked() == config_.feedback_frequency && !await_feedback()) return;
        if (auto batch = state_.flush()) deliver(std::move(*batch));
      } catch (const std::exception& e) {
        sh_.fail(classify(e), failure_batch(e), e.what());
      }
    }
    total_ns_ += ns_between(t0, Clock::now());
  }

  std::uint64_t ids_total() const { return ids_total_; }
  std::uint64_t batches_total() const { return state_.batch_no(); }
  double total_ns() const { return total_ns_; }
  double trampoline_ns() const { return trampoline_ns_; }

 private:
  void on_id(EndpointId id) {
    if (sh_.stop.load() || awaiting_failed_) return;
    auto t0 = config_.timing ? Clock::now() : Clock::time_point{};
    try {
      if (state_.unacked() == config_.feedback_frequency && !await_feedback()) return;
      ++ids_total_;
      if (auto batch = state_.record_id(id)) deliver(std::move(*batch));
    } catch (const std::exception& e) {
      sh_.fail(classify(e), failure_batch(e), e.what());
      return;
    }
    if (config_.timing) trampoline_ns_ += ns_between(t0, Clock::now());
  }

  void deliver(SealedBatch&& batch) {
    if (hooks_ && hooks_->in_queue) {
      for (auto& b : hooks_->in_queue(std::move(batch)))
        if (!sh_.queue.push(std::move(b))) return;
    } else {
      sh_.queue.push(std::move(batch));
    }
  }

  bool await_feedback() {
    auto fb = sh_.feedback.take_for(config_.stall_timeout);
    if (!fb) {
      if (!sh_.stop.load())
        sh_.fail(FailureKind::ProverStall, state_.batch_no(),
                 "no feedback within stall timeout");
      awaiting_failed_ = true;
      return false;
    }
    try {
      state_.apply_feedback(*fb);
    } catch (const std::exception& e) {
      sh_.fail(classify(e), failure_batch(e), e.what());
      awaiting_failed_ = true;
      return false;
    }
    return true;
  }

  Shared& sh_;
  const RunConfig& config_;
  const PipelineHooks* hooks_;
  ProverState state_;
  bool awaiting_failed_ = false;
  std::uint64_t ids_total_ = 0;
  double total_ns_ = 0.0;
  double trampoline_ns_ = 0.0;
};

}  // namespace

RunResult run_pipeline(const InstrumentedProgram& iprog, const Cfg* cfg,
                       const Workload& workload, const RunConfig& config,
                       const KeyMaterial& keys, const PipelineHooks* hooks) {
  Shared sh(config.queue_capacity);
  VerifierThread verifier(sh, config.learn_mode ? nullptr : cfg, config, keys, hooks);
  ProverThread prover(sh, config, keys, hooks);

  std::thread vthread([&] { verifier.run(); });
  for (const Input& input : workload) {
    if (sh.stop.load()) break;
    prover.run_request(iprog, input);
  }
  sh.queue.close();
  sh.feedback.close();
  vthread.join();

  RunResult res;
  res.records = std::move(verifier.records);
  res.learned = std::move(verifier.learned);
  res.any_violation = verifier.any_violation;
  {
    std::lock_guard lock(sh.fail_mu);
    res.failure = sh.failure;
  }
  RunMetrics& m = res.metrics;
  m.requests = workload.size();
  m.ids_total = prover.ids_total();
  m.batches_total = prover.batches_total();
  m.max_queue_occupancy = sh.queue.max_occupancy();
  if (m.requests) {
    m.prover_us_per_req = prover.total_ns() / 1000.0 / static_cast<double>(m.requests);
    m.verifier_us_per_req = verifier.busy_ns() / 1000.0 / static_cast<double>(m.requests);
  }
  if (m.ids_total && config.timing)
    m.ns_per_id_transfer = prover.trampoline_ns() / static_cast<double>(m.ids_total);
  return res;
}

RunResult run_reference(const InstrumentedProgram& iprog, const Cfg* cfg,
                        const Workload& workload, const RunConfig& config,
                        const KeyMaterial& keys) {
  RunResult res;
  ProverState prover(Secret::from_bytes(keys.secret), RatchetKey::from_bytes(keys.key_init),
                     config.batch_size, config.feedback_frequency);
  VerifierState verifier(Secret::from_bytes(keys.secret),
                         RatchetKey::from_bytes(keys.key_init));
  std::optional<StreamVerifier> sv;
  StreamLearner learner;
  if (!config.learn_mode && cfg) sv.emplace(*cfg);
  std::uint64_t ingested = 0;
  std::uint64_t ids_total = 0;

  auto handle_batch = [&](const SealedBatch& batch) {
    for (EndpointId id : verifier.ingest(batch)) {
      if (sv) {
        if (auto rec = sv->feed(id)) {
          if (rec->verdict == Verdict::Violation) res.any_violation = true;
          res.records.push_back(*rec);
        }
      } else {
        learner.feed(id);
      }
    }
    if (++ingested % config.feedback_frequency == 0)
      prover.apply_feedback(verifier.make_feedback());
  };

  try {
    for (const Input& input : workload) {
      TraceSink sink = [&](EndpointId id) {
        ++ids_total;
        if (auto batch = prover.record_id(id)) handle_batch(*batch);
      };
      execute(iprog, input, sink);
      if (auto batch = prover.flush()) handle_batch(*batch);
    }
    if (sv) {
      if (auto rec = sv->finish()) {
        if (rec->verdict == Verdict::Violation) res.any_violation = true;
        res.records.push_back(*rec);
      }
    } else {
      res.learned = learner.finish();
    }
  } catch (const std::exception& e) {
    res.failure = ProtocolFailure{classify(e), failure_batch(e), e.what()};
  }
  res.metrics.requests = workload.size();
  res.metrics.ids_total = ids_total;
  res.metrics.batches_total = prover.batch_no();
  return res;
}

RunMetrics run_baseline(const InstrumentedProgram& iprog, const Workload& workload) {
  RunMetrics m;
  m.requests = workload.size();
  auto t0 = Clock::now();
  for (const Input& input : workload)
    execute_uninstrumented(iprog.program, input, [](const BlockEvent&) {});
  if (m.requests)
    m.prover_us_per_req =
        ns_between(t0, Clock::now()) / 1000.0 / static_cast<double>(m.requests);
  return m;
}

std::string RunResult::log_text() const {
  std::ostringstream out;
  for (const auto& rec : records) out << format_record(rec) << "\n";
  if (failure)
    out << "failure kind=" << failure_name(failure->kind) << " batch=" << failure->batch_no
        << " detail=" << failure->detail << "\n";
  return out.str();
}

}  // namespace cfa
