#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <future>
#include <thread>

#include "cfa/instrument.hpp"
#include "cfa/pipeline.hpp"
#include "cfa/queue.hpp"
#include "cfa/workload.hpp"

using namespace cfa;
using namespace std::chrono_literals;

namespace {

InstrumentedProgram signing_iprog() {
  Program p = make_signing_program();
  layout(p);
  return instrument(p);
}

Cfg learn_cfg(const InstrumentedProgram& iprog, const Workload& training) {
  RunConfig config;
  config.learn_mode = true;
  config.batch_size = 64;
  config.feedback_frequency = 4;
  RunResult res = run_reference(iprog, nullptr, training, config, dev_key_material());
  REQUIRE(!res.failure);
  return res.learned;
}

Workload standard_training() {
  Workload w = driver_inputs();
  for (auto& in : make_workload(3, 24)) w.push_back(std::move(in));
  return w;
}

}  // namespace

TEST_CASE("queue preserves FIFO order") {
  BoundedQueue<int> q(4);
  q.push(1);
  q.push(2);
  q.push(3);
  CHECK(q.pop() == 1);
  CHECK(q.pop() == 2);
  CHECK(q.pop() == 3);
  q.close();
  CHECK(!q.pop());
}

TEST_CASE("full queue blocks the producer until a slot frees") {
  BoundedQueue<int> q(1);
  q.push(1);
  std::atomic<bool> second_done{false};
  std::thread producer([&] {
    q.push(2);
    second_done.store(true);
  });
  std::this_thread::sleep_for(50ms);
  CHECK(!second_done.load());  // still waiting on capacity
  CHECK(q.pop() == 1);
  producer.join();
  CHECK(second_done.load());
  CHECK(q.pop() == 2);
}

TEST_CASE("queue stress: no loss, duplication, or reordering across threads") {
  constexpr int kItems = 100000;
  BoundedQueue<int> q(32);
  std::thread producer([&] {
    for (int i = 0; i < kItems; ++i) q.push(i);
    q.close();
  });
  int expected = 0;
  while (auto item = q.pop()) {
    CHECK(*item == expected);
    ++expected;
  }
  producer.join();
  CHECK(expected == kItems);
  CHECK(q.max_occupancy() <= 32);
}

TEST_CASE("single slot hands over one item at a time and times out when empty") {
  SingleSlot<int> slot;
  CHECK(!slot.take_for(20ms));
  CHECK(slot.post(5));
  CHECK(slot.take_for(20ms) == 5);

  std::atomic<bool> second_posted{false};
  slot.post(6);
  std::thread poster([&] {
    slot.post(7);
    second_posted.store(true);
  });
  std::this_thread::sleep_for(30ms);
  CHECK(!second_posted.load());  // occupied slot blocks the poster
  CHECK(slot.take_for(20ms) == 6);
  poster.join();
  CHECK(slot.take_for(20ms) == 7);
  slot.close();
  CHECK(!slot.post(8));
}

TEST_CASE("learn then verify over the same inputs yields an all-valid log") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();
  Cfg cfg = learn_cfg(iprog, training);

  RunConfig config;
  config.batch_size = 32;
  config.feedback_frequency = 4;
  RunResult res = run_pipeline(iprog, &cfg, training, config, dev_key_material());
  REQUIRE(!res.failure);
  CHECK(!res.any_violation);
  CHECK(res.records.size() == training.size());
  for (const auto& rec : res.records) CHECK(rec.verdict == Verdict::Valid);
  CHECK(res.metrics.batches_total > 0);
  CHECK(res.metrics.ids_total > 0);
}

TEST_CASE("one hijacked request produces exactly one violation") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();
  Cfg cfg = learn_cfg(iprog, training);

  // Redirect the dispatch-slot call once, within one request.
  PipelineHooks hooks;
  std::atomic<bool> fired{false};
  hooks.pre_transfer = [&](TransferKind kind, std::uint64_t, std::uint64_t& dest,
                           std::uint64_t) {
    if (kind == TransferKind::IndirectCall && !fired.exchange(true)) dest += 1;
  };
  RunConfig config;
  config.batch_size = 32;
  config.feedback_frequency = 4;
  RunResult res = run_pipeline(iprog, &cfg, training, config, dev_key_material(), &hooks);
  REQUIRE(!res.failure);
  CHECK(res.any_violation);
  std::size_t violations = 0;
  for (const auto& rec : res.records)
    if (rec.verdict == Verdict::Violation) ++violations;
  CHECK(violations == 1);
  CHECK(res.records.size() == training.size());
}

TEST_CASE("pipeline log is byte-identical to the single-threaded reference") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();
  Cfg cfg = learn_cfg(iprog, training);
  Workload workload = make_workload(17, 40);

  RunConfig config;
  config.batch_size = 16;
  config.feedback_frequency = 2;
  RunResult threaded = run_pipeline(iprog, &cfg, workload, config, dev_key_material());
  RunResult reference = run_reference(iprog, &cfg, workload, config, dev_key_material());
  REQUIRE(!threaded.failure);
  REQUIRE(!reference.failure);
  CHECK(threaded.log_text() == reference.log_text());
  CHECK(threaded.metrics.ids_total == reference.metrics.ids_total);
  CHECK(threaded.metrics.batches_total == reference.metrics.batches_total);
}

TEST_CASE("learn mode through the pipeline equals the reference learner") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();

  RunConfig config;
  config.learn_mode = true;
  config.batch_size = 16;
  config.feedback_frequency = 2;
  RunResult threaded = run_pipeline(iprog, nullptr, training, config, dev_key_material());
  REQUIRE(!threaded.failure);
  CHECK(threaded.learned == learn_cfg(iprog, training));
}

TEST_CASE("halt on violation stops the run early") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();
  Cfg cfg = learn_cfg(iprog, training);

  PipelineHooks hooks;
  hooks.pre_transfer = [](TransferKind kind, std::uint64_t, std::uint64_t& dest,
                          std::uint64_t) {
    if (kind == TransferKind::IndirectCall) dest += 1;  // every request violates
  };
  RunConfig config;
  config.batch_size = 8;
  config.feedback_frequency = 2;
  config.halt_on_violation = true;
  RunResult res = run_pipeline(iprog, &cfg, training, config, dev_key_material(), &hooks);
  CHECK(res.any_violation);
  std::size_t violations = 0;
  for (const auto& rec : res.records)
    if (rec.verdict == Verdict::Violation) ++violations;
  CHECK(violations == 1);
  CHECK(res.records.size() < training.size());
}

TEST_CASE("deadlock freedom across the parameter grid under a watchdog") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();
  Cfg cfg = learn_cfg(iprog, training);
  Workload workload = make_workload(23, 10);

  for (std::size_t batch : {1, 7, 64, 1000}) {
    for (std::size_t freq : {1, 3, 16}) {
      for (std::size_t capacity : {1, 2, 64}) {
        auto fut = std::async(std::launch::async, [&] {
          RunConfig config;
          config.batch_size = batch;
          config.feedback_frequency = freq;
          config.queue_capacity = capacity;
          return run_pipeline(iprog, &cfg, workload, config, dev_key_material());
        });
        REQUIRE(fut.wait_for(30s) == std::future_status::ready);
        RunResult res = fut.get();
        CHECK(!res.failure);
        CHECK(!res.any_violation);
      }
    }
  }
}

TEST_CASE("no backlog at batch sizes where the verifier keeps pace") {
  InstrumentedProgram iprog = signing_iprog();
  Workload training = standard_training();
  Cfg cfg = learn_cfg(iprog, training);
  Workload workload = make_workload(31, 500);

  RunConfig config;
  config.batch_size = 200;
  config.feedback_frequency = 10;
  config.queue_capacity = 64;
  RunResult res = run_pipeline(iprog, &cfg, workload, config, dev_key_material());
  REQUIRE(!res.failure);
  CHECK(res.metrics.max_queue_occupancy < config.queue_capacity);
}
