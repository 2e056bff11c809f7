#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfa/crypto.hpp"
#include "cfa/ids.hpp"

namespace cfa {

struct ProtocolError : std::runtime_error {
  explicit ProtocolError(const std::string& what, std::uint64_t batch_no = 0)
      : std::runtime_error(what), batch_no(batch_no) {}
  std::uint64_t batch_no;
};
struct AeadFailure : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct DigestMismatch : ProtocolError {
  using ProtocolError::ProtocolError;
};
struct CounterDesync : ProtocolError {
  using ProtocolError::ProtocolError;
};

// Wire format (bit-exact): 8-byte LE batch-no, 4-byte LE ciphertext length,
// ciphertext, 16-byte tag. The cleartext batch-no is diagnostic only;
// authenticity comes from the counter-derived nonce.
struct SealedBatch {
  std::uint64_t batch_no = 0;
  std::vector<std::uint8_t> ciphertext;
  Tag tag{};

  std::vector<std::uint8_t> encode() const;
  static SealedBatch decode(std::span<const std::uint8_t> bytes);  // throws ProtocolError
};

struct ParsedBatch {
  std::vector<EndpointId> ids;
  Digest digest{};
};

// Hardened fixed-width parser for unsealed batch plaintext (8k+32 bytes,
// k >= 1). Rejects by returning nullopt; never throws. The implementation is
// kept under 30 logical lines, enforced by a lint test.
std::optional<ParsedBatch> parse_batch_plaintext(std::span<const std::uint8_t> bytes);

struct KeyMaterial {
  Key256 secret{};
  Key256 key_init{};
};
KeyMaterial load_key_material(const std::string& path);  // 64-byte raw file
void save_key_material(const KeyMaterial& km, const std::string& path);
KeyMaterial dev_key_material();  // fixed development provisioning

class ProverState {
 public:
  ProverState(Secret&& secret, const RatchetKey& key_init, std::size_t batch_size,
              std::size_t feedback_frequency);

  // Hashes the id into the chain, caches it; seals and returns a batch when
  // the cache reaches capacity.
  std::optional<SealedBatch> record_id(EndpointId id);
  SealedBatch seal_batch();              // throws ProtocolError on empty buffer
  std::optional<SealedBatch> flush();    // partial batch at END, if any
  void apply_feedback(const SealedBatch& fb);  // throws CounterDesync

  std::uint64_t batch_no() const { return batch_no_; }
  std::uint64_t key_generation() const { return key_.generation(); }
  std::size_t unacked() const { return unacked_; }
  std::size_t feedback_frequency() const { return feedback_frequency_; }
  Digest chain_digest() const { return chain_.digest(); }

  // Attack surface for the adversary harness: mutates cached ids without
  // recomputing the chain. Runs immediately before each seal.
  std::function<void(std::vector<EndpointId>&, std::uint64_t batch_no)> pre_seal_hook;

 private:
  ChainHash chain_;
  RatchetKey key_;
  std::uint64_t batch_no_ = 0;
  std::uint64_t feedback_no_ = 0;
  std::vector<EndpointId> buffer_;
  std::size_t batch_size_;
  std::size_t feedback_frequency_;
  std::size_t unacked_ = 0;
};

class VerifierState {
 public:
  VerifierState(Secret&& secret, const RatchetKey& key_init);

  // Unseal under the current key and counter nonce, ratchet, extend hash_v,
  // compare digests. Throws AeadFailure (tamper or counter desync,
  // indistinguishable) or DigestMismatch (cached-id tampering upstream).
  std::vector<EndpointId> ingest(const SealedBatch& batch);
  SealedBatch make_feedback();  // throws ProtocolError before first ingest

  std::uint64_t batch_no() const { return batch_no_; }
  std::uint64_t key_generation() const { return key_.generation(); }
  Digest chain_digest() const { return chain_.digest(); }

 private:
  ChainHash chain_;
  RatchetKey key_;
  std::uint64_t batch_no_ = 0;
  std::uint64_t feedback_no_ = 0;
};

}  // namespace cfa
