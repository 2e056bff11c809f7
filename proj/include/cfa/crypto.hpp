#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "blake3.h"
#include "cfa/ids.hpp"

namespace cfa {

using Key256 = std::array<std::uint8_t, 32>;
using Digest = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, 12>;
using Tag = std::array<std::uint8_t, 16>;

// Pre-shared 32-byte root, consumed exactly once; the bytes are overwritten
// on consumption and the state is observable afterwards.
class Secret {
 public:
  static Secret from_bytes(const Key256& bytes);
  Key256 consume();
  std::string_view state() const { return destroyed_ ? "destroyed" : "live"; }

 private:
  Key256 bytes_{};
  bool destroyed_ = false;
};

// Incremental keyed BLAKE3 over the recorded id stream, rooted in the
// pre-shared secret. Copyable; digest() finalizes a copy.
class ChainHash {
 public:
  explicit ChainHash(const Key256& secret_root);
  void update(EndpointId id);
  Digest digest() const;

 private:
  blake3_hasher hasher_;
};

inline constexpr std::string_view kRatchetContext = "guarantee-ratchet";

// Forward-only key: generation-n material is derivable only from n-1 via
// BLAKE3 derive_key; old material is overwritten on ratchet.
class RatchetKey {
 public:
  static RatchetKey from_bytes(const Key256& bytes);
  void ratchet();
  std::uint64_t generation() const { return generation_; }
  const Key256& material() const { return key_; }

 private:
  Key256 key_{};
  std::uint64_t generation_ = 0;
};

Digest blake3_hash(std::span<const std::uint8_t> data);
Key256 blake3_derive(std::string_view context, std::span<const std::uint8_t> material);

// AES-256-GCM. seal appends nothing: ciphertext is plaintext-sized, tag
// returned separately. open returns nullopt on authentication failure.
std::vector<std::uint8_t> aead_seal(const Key256& key, const Nonce& nonce,
                                    std::span<const std::uint8_t> plaintext,
                                    Tag& tag_out);
std::optional<std::vector<std::uint8_t>> aead_open(const Key256& key, const Nonce& nonce,
                                                   std::span<const std::uint8_t> ciphertext,
                                                   const Tag& tag);

// 1 direction byte || 3 zero bytes || 64-bit big-endian counter.
inline constexpr std::uint8_t kDirectionBatch = 0x00;
inline constexpr std::uint8_t kDirectionFeedback = 0x01;
Nonce make_nonce(std::uint8_t direction, std::uint64_t counter);

}  // namespace cfa
