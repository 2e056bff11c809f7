#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <sstream>

#include "cfa/cfg.hpp"
#include "cfa/instrument.hpp"
#include "cfa/interp.hpp"
#include "cfa/workload.hpp"

using namespace cfa;

namespace {

const EndpointId B = kBeginTag;
const EndpointId E = kEndTag;

std::vector<EndpointId> trace_of(const InstrumentedProgram& iprog, const Input& input) {
  std::vector<EndpointId> out;
  execute(iprog, input, [&](EndpointId id) { out.push_back(id); });
  return out;
}

}  // namespace

TEST_CASE("learn collects nodes, edges, starts, and ends") {
  Cfg cfg = learn({B, 1, 2, 3, E});
  CHECK(cfg.nodes == std::unordered_set<EndpointId>{1, 2, 3});
  CHECK(cfg.edges.size() == 2);
  CHECK(cfg.has_edge(1, 2));
  CHECK(cfg.has_edge(2, 3));
  CHECK(cfg.starts == std::unordered_set<EndpointId>{1});
  CHECK(cfg.ends == std::unordered_set<EndpointId>{3});
  CHECK(!cfg.allow_empty_request);
}

TEST_CASE("learn merges traces by union") {
  Cfg cfg = learn({B, 1, 2, 3, E, B, 1, 2, 4, E});
  CHECK(cfg.edges.size() == 3);
  CHECK(cfg.has_edge(2, 3));
  CHECK(cfg.has_edge(2, 4));
  CHECK(!cfg.has_edge(4, 3));
  CHECK(cfg.ends == std::unordered_set<EndpointId>{3, 4});
}

TEST_CASE("learn rejects malformed delimiting") {
  CHECK_THROWS_AS(learn({1, 2}), CfgError);           // ids outside a request
  CHECK_THROWS_AS(learn({E}), CfgError);              // END without BEGIN
  CHECK_THROWS_AS(learn({B, 1, B}), CfgError);        // nested BEGIN
  CHECK_THROWS_AS(learn({B, 1, 2}), CfgError);        // trailing open request
}

TEST_CASE("learning is monotone under added traces") {
  std::vector<EndpointId> t1{B, 1, 2, 3, E};
  std::vector<EndpointId> t2{B, 2, 5, E, B, 1, 4, E};
  Cfg small = learn(t1);
  std::vector<EndpointId> merged = t1;
  merged.insert(merged.end(), t2.begin(), t2.end());
  Cfg big = learn(merged);
  for (EndpointId n : small.nodes) CHECK(big.nodes.contains(n));
  for (const Edge& e : small.edges) CHECK(big.edges.contains(e));
  for (EndpointId n : small.starts) CHECK(big.starts.contains(n));
  for (EndpointId n : small.ends) CHECK(big.ends.contains(n));
}

TEST_CASE("verify accepts a replayed trace and flags the first bad edge") {
  Cfg cfg = learn({B, 1, 2, 3, E, B, 1, 2, 4, E});

  auto ok = verify(cfg, {B, 1, 2, 4, E});
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].verdict == Verdict::Valid);
  CHECK(ok[0].request_index == 0);
  CHECK(!ok[0].offending_edge);

  auto bad = verify(cfg, {B, 1, 2, 4, 3, E});
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].verdict == Verdict::Violation);
  REQUIRE(bad[0].offending_edge);
  CHECK(*bad[0].offending_edge == Edge{4, 3});
  CHECK(bad[0].position == 3);
}

TEST_CASE("verify reports start, end, and unknown-node violations") {
  Cfg cfg = learn({B, 1, 2, 3, E});

  auto start = verify(cfg, {B, 2, 3, E});
  REQUIRE(start.size() == 1);
  CHECK(*start[0].offending_edge == Edge{B, 2});
  CHECK(start[0].position == 0);

  auto end = verify(cfg, {B, 1, 2, E});
  REQUIRE(end.size() == 1);
  CHECK(*end[0].offending_edge == Edge{2, E});

  auto unknown = verify(cfg, {B, 1, 99, 3, E});
  REQUIRE(unknown.size() == 1);
  CHECK(*unknown[0].offending_edge == Edge{1, 99});

  auto trailing = verify(cfg, {B, 1, 2});
  REQUIRE(trailing.size() == 1);
  CHECK(*trailing[0].offending_edge == Edge{2, E});
}

TEST_CASE("scanning resumes at the next request after a violation") {
  Cfg cfg = learn({B, 1, 2, 3, E});
  auto recs = verify(cfg, {B, 1, 99, 77, E, B, 1, 2, 3, E});
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].verdict == Verdict::Violation);
  CHECK(*recs[0].offending_edge == Edge{1, 99});  // first illegal transition only
  CHECK(recs[1].verdict == Verdict::Valid);
  CHECK(recs[1].request_index == 1);
}

TEST_CASE("empty requests are legal only if observed offline") {
  Cfg strict = learn({B, 1, 2, E});
  auto rec = verify(strict, {B, E});
  REQUIRE(rec.size() == 1);
  CHECK(rec[0].verdict == Verdict::Violation);

  Cfg lenient = learn({B, 1, 2, E, B, E});
  CHECK(lenient.allow_empty_request);
  auto ok = verify(lenient, {B, E});
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].verdict == Verdict::Valid);
}

TEST_CASE("mixed-flow blindness: splicing two valid flows goes undetected") {
  // Flows A->B->C and D->B->E were each observed; the spliced A->B->E is
  // accepted because verification is edge-level and context-insensitive.
  Cfg cfg = learn({B, 10, 20, 30, E, B, 40, 20, 50, E});
  auto recs = verify(cfg, {B, 10, 20, 50, E});
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].verdict == Verdict::Valid);
}

TEST_CASE("password program learned on both branches rejects the illegal merge") {
  Program p = make_password_program();
  layout(p);
  InstrumentedProgram ip = instrument(p);

  std::vector<EndpointId> stream;
  std::vector<EndpointId> miss = trace_of(ip, {0, 0, 0, 0});
  std::vector<EndpointId> match = trace_of(ip, {1, 1, 1, 1});
  stream.insert(stream.end(), miss.begin(), miss.end());
  stream.insert(stream.end(), match.begin(), match.end());
  Cfg cfg = learn(stream);

  // Both branch decisions are edges out of the same cond exit.
  EndpointId cond_exit = 0, b1_entry = 0, b2_entry = 0;
  for (const auto& f : p.functions)
    if (f.name == "check") {
      cond_exit = ip.at(f.blocks[0].instructions.back().address).exit;
      b1_entry = ip.at(f.blocks[1].instructions[0].address).entry;
      b2_entry = ip.at(f.blocks[2].instructions[0].address).entry;
    }
  CHECK(cfg.has_edge(cond_exit, b1_entry));
  CHECK(cfg.has_edge(cond_exit, b2_entry));
  CHECK(!cfg.has_edge(b1_entry, b2_entry));

  // Replays verify clean; a stream jumping from the public path into the
  // private fetch is flagged exactly at that edge.
  for (const auto& t : {miss, match}) {
    auto recs = verify(cfg, t);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].verdict == Verdict::Valid);
  }
  std::vector<EndpointId> spliced;
  for (EndpointId id : miss) {
    spliced.push_back(id);
    if (id == b1_entry) break;
  }
  spliced.push_back(b2_entry);
  spliced.push_back(E);
  auto recs = verify(cfg, spliced);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].verdict == Verdict::Violation);
  CHECK(*recs[0].offending_edge == Edge{b1_entry, b2_entry});
}

TEST_CASE("serialization round trips, including the empty CFG") {
  Cfg empty;
  CHECK(deserialize(serialize(empty)) == empty);

  Cfg cfg = learn({B, 1, 2, 3, E, B, 1, 2, 4, E, B, E});
  CHECK(deserialize(serialize(cfg)) == cfg);
  CHECK(serialize(cfg) == serialize(deserialize(serialize(cfg))));  // canonical form
}

TEST_CASE("every single-bit corruption is rejected") {
  Cfg cfg = learn({B, 1, 2, 3, E, B, 1, 2, 4, E});
  std::vector<std::uint8_t> bytes = serialize(cfg);
  for (std::size_t byte = 0; byte < bytes.size(); ++byte) {
    for (int bit = 0; bit < 8; ++bit) {
      std::vector<std::uint8_t> corrupt = bytes;
      corrupt[byte] ^= static_cast<std::uint8_t>(1u << bit);
      CHECK_THROWS_AS(deserialize(corrupt), CfgError);
    }
  }
  CHECK_THROWS_AS(deserialize(std::vector<std::uint8_t>{}), CfgError);
  std::vector<std::uint8_t> truncated(bytes.begin(), bytes.end() - 1);
  CHECK_THROWS_AS(deserialize(truncated), CfgError);
}

TEST_CASE("cfg files round trip on disk") {
  Cfg cfg = learn({B, 7, 8, E});
  std::string path = "test_cfg_roundtrip.bin";
  save_cfg(cfg, path);
  CHECK(load_cfg(path) == cfg);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_cfg(path), CfgError);
}

TEST_CASE("attestation records format and parse with stable fields") {
  AttestationRecord valid{3, Verdict::Valid, std::nullopt, std::nullopt};
  CHECK(format_record(valid) == "request=3 verdict=valid");

  AttestationRecord viol{7, Verdict::Violation, Edge{4, 3}, 12};
  CHECK(format_record(viol) == "request=7 verdict=violation edge=4->3 pos=12");

  AttestationRecord tagged{0, Verdict::Violation, Edge{B, 9}, 0};
  CHECK(format_record(tagged) == "request=0 verdict=violation edge=BEGIN->9 pos=0");

  for (const auto& rec : {valid, viol, tagged}) {
    auto back = parse_record(format_record(rec));
    REQUIRE(back);
    CHECK(back->request_index == rec.request_index);
    CHECK(back->verdict == rec.verdict);
    CHECK(back->offending_edge == rec.offending_edge);
    CHECK(back->position == rec.position);
  }

  CHECK(!parse_record("garbage"));
  CHECK(!parse_record("request=1"));
  CHECK(!parse_record("request=1 verdict=maybe"));
  CHECK(!parse_record("request=x verdict=valid"));
}

TEST_CASE("streaming learner and verifier match the batch forms") {
  std::vector<EndpointId> stream{B, 1, 2, 3, E, B, 1, 2, 99, E, B, 1, 2, 4, E};
  Cfg cfg = learn({B, 1, 2, 3, E, B, 1, 2, 4, E});

  StreamVerifier sv(cfg);
  std::vector<AttestationRecord> streamed;
  for (EndpointId id : stream)
    if (auto rec = sv.feed(id)) streamed.push_back(*rec);
  if (auto rec = sv.finish()) streamed.push_back(*rec);

  auto batch = verify(cfg, stream);
  REQUIRE(streamed.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(streamed[i].verdict == batch[i].verdict);
    CHECK(streamed[i].offending_edge == batch[i].offending_edge);
  }

  StreamLearner sl;
  for (EndpointId id : stream) sl.feed(id);
  CHECK(sl.finish() == learn(stream));
}
