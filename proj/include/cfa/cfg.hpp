#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "cfa/ids.hpp"

namespace cfa {

struct CfgError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Edge {
  EndpointId from = 0;
  EndpointId to = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

struct EdgeHash {
  std::size_t operator()(const Edge& e) const {
    return std::hash<EndpointId>{}(e.from * 0x9E3779B97F4A7C15ull ^ e.to);
  }
};

struct Cfg {
  std::unordered_set<EndpointId> nodes;
  std::unordered_set<Edge, EdgeHash> edges;
  std::unordered_set<EndpointId> starts;
  std::unordered_set<EndpointId> ends;
  bool allow_empty_request = false;  // BEGIN immediately followed by END

  friend bool operator==(const Cfg&, const Cfg&) = default;
  bool has_edge(EndpointId from, EndpointId to) const {
    return edges.contains(Edge{from, to});
  }
};

enum class Verdict { Valid, Violation };

struct AttestationRecord {
  std::optional<std::uint64_t> request_index;  // none: ids outside any request
  Verdict verdict = Verdict::Valid;
  std::optional<Edge> offending_edge;  // present iff verdict == Violation
  std::optional<std::uint64_t> position;  // event ordinal within the request
};

// Merges BEGIN..END delimited traces into a CFG: edges are exactly the union
// of consecutive-id pairs inside delimiters. Throws CfgError on malformed
// delimiting (END without BEGIN, nested BEGIN, trailing open request).
Cfg learn(const std::vector<EndpointId>& stream);

// One record per request; on the first illegal transition the record carries
// the offending edge and position and scanning resumes at the next request.
// Start violations are reported as the edge (BEGIN, id), end violations as
// (id, END). An unterminated trailing request is a violation at (last, END).
std::vector<AttestationRecord> verify(const Cfg& cfg,
                                      const std::vector<EndpointId>& stream);

// Incremental forms used by the pipeline threads.
class StreamLearner {
 public:
  void feed(EndpointId id);
  Cfg finish();

 private:
  Cfg cfg_;
  bool in_request_ = false;
  bool any_ = false;
  EndpointId prev_ = 0;
};

class StreamVerifier {
 public:
  explicit StreamVerifier(const Cfg& cfg) : cfg_(&cfg) {}
  std::optional<AttestationRecord> feed(EndpointId id);
  std::optional<AttestationRecord> finish();

 private:
  const Cfg* cfg_;
  std::uint64_t request_index_ = 0;
  std::uint64_t position_ = 0;
  bool in_request_ = false;
  bool failed_ = false;
  bool any_ = false;
  EndpointId prev_ = 0;
  AttestationRecord pending_;
};

// Deterministic byte form: magic, version, flags, sorted fixed-width entries,
// trailing CRC-32. deserialize throws CfgError on any corruption.
std::vector<std::uint8_t> serialize(const Cfg& cfg);
Cfg deserialize(const std::vector<std::uint8_t>& bytes);

void save_cfg(const Cfg& cfg, const std::string& path);
Cfg load_cfg(const std::string& path);

// Append-only attestation log lines with stable field order.
std::string format_record(const AttestationRecord& rec);
std::optional<AttestationRecord> parse_record(const std::string& line);

}  // namespace cfa
