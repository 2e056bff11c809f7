#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "cfa/adversary.hpp"

using namespace cfa;

TEST_CASE("attack kind and detection names round trip") {
  for (AttackKind k :
       {AttackKind::HijackIndirectTarget, AttackKind::RopReturnOverwrite,
        AttackKind::TamperCachedId, AttackKind::TamperCiphertext, AttackKind::DropBatch,
        AttackKind::ReplayBatch, AttackKind::ReorderBatches, AttackKind::ForkVerifier,
        AttackKind::SuppressFeedback, AttackKind::MixedFlow})
    CHECK(kind_from_name(kind_name(k)) == k);
  for (Detection d :
       {Detection::CfgViolation, Detection::AeadFailure, Detection::DigestMismatch,
        Detection::CounterDesync, Detection::ProverStall, Detection::UndetectedByDesign})
    CHECK(detection_from_name(detection_name(d)) == d);
  CHECK(!kind_from_name("quantum-tunnel"));
  CHECK(!detection_from_name("psychic"));
}

TEST_CASE("built-in suite covers every kind exactly once with valid expectations") {
  auto suite = scenario_suite();
  CHECK(suite.size() == 10);
  std::set<AttackKind> kinds;
  for (const auto& s : suite) {
    CHECK(kinds.insert(s.kind).second);
    if (s.expected == Detection::UndetectedByDesign) CHECK(s.kind == AttackKind::MixedFlow);
  }
}

TEST_CASE("every scenario is detected as expected") {
  for (const auto& scenario : scenario_suite()) {
    AttackOutcome out = apply(scenario);
    INFO(kind_name(scenario.kind));
    CHECK(out.matches(scenario.expected));
  }
}

TEST_CASE("control-flow attacks localize an offending edge") {
  for (const auto& scenario : scenario_suite()) {
    if (scenario.expected != Detection::CfgViolation) continue;
    AttackOutcome out = apply(scenario);
    INFO(kind_name(scenario.kind));
    CHECK(out.offending_edge.has_value());
    CHECK(out.violation_records >= 1);
  }
}

TEST_CASE("drop-batch reports the batch after the dropped one") {
  AttackScenario drop{AttackKind::DropBatch, 0, Detection::AeadFailure, "drop"};
  AttackOutcome out = apply(drop);
  REQUIRE(out.observed == Detection::AeadFailure);
  REQUIRE(out.failing_batch);
  CHECK(*out.failing_batch == 1);  // counter desync surfaces on the successor
}

TEST_CASE("the mixed-flow scenario stays silent") {
  AttackScenario mixed{AttackKind::MixedFlow, 0, Detection::UndetectedByDesign, "mix"};
  AttackOutcome out = apply(mixed);
  CHECK(!out.observed);
  CHECK(out.violation_records == 0);
  CHECK(out.valid_records > 0);
}

TEST_CASE("a wrong expectation is reported as a mismatch") {
  AttackScenario wrong{AttackKind::TamperCiphertext, 1, Detection::DigestMismatch, "wrong"};
  AttackOutcome out = apply(wrong);
  CHECK(!out.matches(wrong.expected));
  CHECK(out.matches(Detection::AeadFailure));
}

TEST_CASE("scenario files load and validate") {
  std::string path = "test_scenarios.json";
  {
    std::ofstream out(path);
    out << R"([
      {"kind": "drop-batch", "param": 2, "expected": "aead-failure", "name": "late drop"},
      {"kind": "mixed-flow", "expected": "undetected-by-design"}
    ])";
  }
  auto scenarios = load_scenarios(path);
  REQUIRE(scenarios.size() == 2);
  CHECK(scenarios[0].kind == AttackKind::DropBatch);
  CHECK(scenarios[0].param == 2);
  CHECK(scenarios[0].expected == Detection::AeadFailure);
  CHECK(scenarios[0].name == "late drop");
  CHECK(scenarios[1].kind == AttackKind::MixedFlow);
  CHECK(scenarios[1].name == "mixed-flow");  // defaults to the kind name

  {
    std::ofstream out(path);
    out << R"([{"kind": "nope", "expected": "aead-failure"}])";
  }
  CHECK_THROWS(load_scenarios(path));
  std::remove(path.c_str());
  CHECK_THROWS(load_scenarios(path));
}
