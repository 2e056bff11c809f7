#include "cfa/cfg.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace cfa {

void StreamLearner::feed(EndpointId id) {
  if (id == kBeginTag) {
    if (in_request_) throw CfgError("nested BEGIN in trace");
    in_request_ = true;
    any_ = false;
    return;
  }
  if (id == kEndTag) {
    if (!in_request_) throw CfgError("END without BEGIN in trace");
    if (!any_)
      cfg_.allow_empty_request = true;
    else
      cfg_.ends.insert(prev_);
    in_request_ = false;
    return;
  }
  if (!in_request_) throw CfgError("id outside BEGIN..END in trace");
  cfg_.nodes.insert(id);
  if (!any_) {
    cfg_.starts.insert(id);
    any_ = true;
  } else {
    cfg_.edges.insert(Edge{prev_, id});
  }
  prev_ = id;
}

Cfg StreamLearner::finish() {
  if (in_request_) throw CfgError("trace ends inside an open request");
  return std::move(cfg_);
}

Cfg learn(const std::vector<EndpointId>& stream) {
  StreamLearner l;
  for (EndpointId id : stream) l.feed(id);
  return l.finish();
}

std::optional<AttestationRecord> StreamVerifier::feed(EndpointId id) {
  if (!in_request_) {
    if (id == kBeginTag) {
      in_request_ = true;
      any_ = false;
      failed_ = false;
      position_ = 0;
      pending_ = AttestationRecord{request_index_, Verdict::Valid, std::nullopt,
                                   std::nullopt};
      return std::nullopt;
    }
    // Stray event outside any request: report it, attributed to no request.
    return AttestationRecord{std::nullopt, Verdict::Violation,
                             Edge{kBeginTag, id}, std::nullopt};
  }

  if (id == kEndTag) {
    if (!failed_) {
      if (!any_) {
        if (!cfg_->allow_empty_request) {
          pending_.verdict = Verdict::Violation;
          pending_.offending_edge = Edge{kBeginTag, kEndTag};
          pending_.position = 0;
        }
      } else if (!cfg_->ends.contains(prev_)) {
        pending_.verdict = Verdict::Violation;
        pending_.offending_edge = Edge{prev_, kEndTag};
        pending_.position = position_;
      }
    }
    in_request_ = false;
    ++request_index_;
    return pending_;
  }

  if (failed_) return std::nullopt;  // resume at the next request

  if (id == kBeginTag) {
    failed_ = true;
    pending_.verdict = Verdict::Violation;
    pending_.offending_edge = Edge{any_ ? prev_ : kBeginTag, kBeginTag};
    pending_.position = position_;
    return std::nullopt;
  }

  if (!any_) {
    any_ = true;
    if (!cfg_->starts.contains(id)) {
      failed_ = true;
      pending_.verdict = Verdict::Violation;
      pending_.offending_edge = Edge{kBeginTag, id};
      pending_.position = position_;
    }
  } else if (!cfg_->has_edge(prev_, id)) {
    failed_ = true;
    pending_.verdict = Verdict::Violation;
    pending_.offending_edge = Edge{prev_, id};
    pending_.position = position_;
  }
  prev_ = id;
  ++position_;
  return std::nullopt;
}

std::optional<AttestationRecord> StreamVerifier::finish() {
  if (!in_request_) return std::nullopt;
  in_request_ = false;
  if (!failed_) {
    pending_.verdict = Verdict::Violation;
    pending_.offending_edge = Edge{any_ ? prev_ : kBeginTag, kEndTag};
    pending_.position = position_;
  }
  ++request_index_;
  return pending_;
}

std::vector<AttestationRecord> verify(const Cfg& cfg,
                                      const std::vector<EndpointId>& stream) {
  StreamVerifier v(cfg);
  std::vector<AttestationRecord> out;
  for (EndpointId id : stream)
    if (auto rec = v.feed(id)) out.push_back(*rec);
  if (auto rec = v.finish()) out.push_back(*rec);
  return out;
}

namespace {

constexpr char kMagic[4] = {'C', 'F', 'G', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::vector<EndpointId> sorted(const std::unordered_set<EndpointId>& s) {
  std::vector<EndpointId> v(s.begin(), s.end());
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::vector<std::uint8_t> serialize(const Cfg& cfg) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  put_u32(out, kVersion);
  out.push_back(cfg.allow_empty_request ? 1 : 0);
  put_u64(out, cfg.nodes.size());
  put_u64(out, cfg.edges.size());
  put_u64(out, cfg.starts.size());
  put_u64(out, cfg.ends.size());
  for (EndpointId n : sorted(cfg.nodes)) put_u64(out, n);
  std::vector<Edge> edges(cfg.edges.begin(), cfg.edges.end());
  std::sort(edges.begin(), edges.end());
  for (const Edge& e : edges) {
    put_u64(out, e.from);
    put_u64(out, e.to);
  }
  for (EndpointId n : sorted(cfg.starts)) put_u64(out, n);
  for (EndpointId n : sorted(cfg.ends)) put_u64(out, n);
  std::uint32_t crc =
      static_cast<std::uint32_t>(crc32(0L, out.data(), static_cast<uInt>(out.size())));
  put_u32(out, crc);
  return out;
}

Cfg deserialize(const std::vector<std::uint8_t>& bytes) {
  constexpr std::size_t kHeader = 4 + 4 + 1 + 4 * 8;
  if (bytes.size() < kHeader + 4) throw CfgError("cfg file truncated");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CfgError("bad cfg magic");
  if (get_u32(bytes.data() + 4) != kVersion) throw CfgError("unsupported cfg version");
  std::uint8_t flags = bytes[8];
  if (flags > 1) throw CfgError("bad cfg flags");
  std::uint64_t n_nodes = get_u64(bytes.data() + 9);
  std::uint64_t n_edges = get_u64(bytes.data() + 17);
  std::uint64_t n_starts = get_u64(bytes.data() + 25);
  std::uint64_t n_ends = get_u64(bytes.data() + 33);
  std::uint64_t body = (n_nodes + 2 * n_edges + n_starts + n_ends) * 8;
  if (bytes.size() != kHeader + body + 4) throw CfgError("cfg size mismatch");
  std::uint32_t want = get_u32(bytes.data() + bytes.size() - 4);
  std::uint32_t got = static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4)));
  if (want != got) throw CfgError("cfg checksum mismatch");

  Cfg cfg;
  cfg.allow_empty_request = flags == 1;
  const std::uint8_t* p = bytes.data() + kHeader;
  for (std::uint64_t i = 0; i < n_nodes; ++i, p += 8) cfg.nodes.insert(get_u64(p));
  for (std::uint64_t i = 0; i < n_edges; ++i, p += 16)
    cfg.edges.insert(Edge{get_u64(p), get_u64(p + 8)});
  for (std::uint64_t i = 0; i < n_starts; ++i, p += 8) cfg.starts.insert(get_u64(p));
  for (std::uint64_t i = 0; i < n_ends; ++i, p += 8) cfg.ends.insert(get_u64(p));
  for (const Edge& e : cfg.edges)
    if (!cfg.nodes.contains(e.from) || !cfg.nodes.contains(e.to))
      throw CfgError("cfg edge references unknown node");
  for (EndpointId s : cfg.starts)
    if (!cfg.nodes.contains(s)) throw CfgError("cfg start references unknown node");
  for (EndpointId e : cfg.ends)
    if (!cfg.nodes.contains(e)) throw CfgError("cfg end references unknown node");
  return cfg;
}

void save_cfg(const Cfg& cfg, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CfgError("cannot open cfg file for writing: " + path);
  auto bytes = serialize(cfg);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CfgError("cfg write failed: " + path);
}

Cfg load_cfg(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CfgError("cannot open cfg file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

namespace {

std::string endpoint_str(EndpointId id) {
  if (id == kBeginTag) return "BEGIN";
  if (id == kEndTag) return "END";
  return std::to_string(id);
}

std::optional<EndpointId> endpoint_from(const std::string& s) {
  if (s == "BEGIN") return kBeginTag;
  if (s == "END") return kEndTag;
  try {
    std::size_t pos = 0;
    EndpointId v = std::stoull(s, &pos);
    if (pos != s.size()) return std::nullopt;
    return v;
  } catch (...) {
    return std::nullopt;
  }
}

}  // namespace

std::string format_record(const AttestationRecord& rec) {
  std::ostringstream out;
  out << "request=";
  if (rec.request_index)
    out << *rec.request_index;
  else
    out << "-";
  if (rec.verdict == Verdict::Valid) {
    out << " verdict=valid";
  } else {
    out << " verdict=violation";
    if (rec.offending_edge)
      out << " edge=" << endpoint_str(rec.offending_edge->from) << "->"
          << endpoint_str(rec.offending_edge->to);
    if (rec.position) out << " pos=" << *rec.position;
  }
  return out.str();
}

std::optional<AttestationRecord> parse_record(const std::string& line) {
  std::istringstream in(line);
  std::string tok;
  AttestationRecord rec;
  bool have_request = false, have_verdict = false;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) return std::nullopt;
    std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "request") {
      if (val != "-") {
        auto v = endpoint_from(val);
        if (!v) return std::nullopt;
        rec.request_index = *v;
      }
      have_request = true;
    } else if (key == "verdict") {
      if (val == "valid")
        rec.verdict = Verdict::Valid;
      else if (val == "violation")
        rec.verdict = Verdict::Violation;
      else
        return std::nullopt;
      have_verdict = true;
    } else if (key == "edge") {
      auto arrow = val.find("->");
      if (arrow == std::string::npos) return std::nullopt;
      auto from = endpoint_from(val.substr(0, arrow));
      auto to = endpoint_from(val.substr(arrow + 2));
      if (!from || !to) return std::nullopt;
      rec.offending_edge = Edge{*from, *to};
    } else if (key == "pos") {
      auto v = endpoint_from(val);
      if (!v) return std::nullopt;
      rec.position = *v;
    } else {
      return std::nullopt;
    }
  }
  if (!have_request || !have_verdict) return std::nullopt;
  return rec;
}

}  // namespace cfa
