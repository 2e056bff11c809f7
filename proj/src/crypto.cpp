#include "cfa/crypto.hpp"

#include <stdexcept>
#include <string>

#include <openssl/evp.h>

namespace cfa {

Secret Secret::from_bytes(const Key256& bytes) {
  Secret s;
  s.bytes_ = bytes;
  return s;
}

Key256 Secret::consume() {
  if (destroyed_) throw std::logic_error("secret already consumed");
  Key256 out = bytes_;
  bytes_.fill(0);
  destroyed_ = true;
  return out;
}

ChainHash::ChainHash(const Key256& secret_root) {
  blake3_hasher_init_keyed(&hasher_, secret_root.data());
}

void ChainHash::update(EndpointId id) {
  std::uint8_t buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<std::uint8_t>(id >> (8 * i));
  blake3_hasher_update(&hasher_, buf, sizeof buf);
}

Digest ChainHash::digest() const {
  blake3_hasher copy = hasher_;
  Digest out;
  blake3_hasher_finalize(&copy, out.data(), out.size());
  return out;
}

RatchetKey RatchetKey::from_bytes(const Key256& bytes) {
  RatchetKey k;
  k.key_ = bytes;
  return k;
}

void RatchetKey::ratchet() {
  key_ = blake3_derive(kRatchetContext, std::span<const std::uint8_t>(key_));
  ++generation_;
}

Digest blake3_hash(std::span<const std::uint8_t> data) {
  blake3_hasher h;
  blake3_hasher_init(&h);
  blake3_hasher_update(&h, data.data(), data.size());
  Digest out;
  blake3_hasher_finalize(&h, out.data(), out.size());
  return out;
}

Key256 blake3_derive(std::string_view context, std::span<const std::uint8_t> material) {
  blake3_hasher h;
  blake3_hasher_init_derive_key(&h, std::string(context).c_str());
  blake3_hasher_update(&h, material.data(), material.size());
  Key256 out;
  blake3_hasher_finalize(&h, out.data(), out.size());
  return out;
}

namespace {

struct CipherCtx {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  ~CipherCtx() { EVP_CIPHER_CTX_free(ctx); }
};

}  // namespace

std::vector<std::uint8_t> aead_seal(const Key256& key, const Nonce& nonce,
                                    std::span<const std::uint8_t> plaintext,
                                    Tag& tag_out) {
  CipherCtx c;
  if (!c.ctx ||
      EVP_EncryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1)
    throw std::runtime_error("aead seal init failed");
  std::vector<std::uint8_t> out(plaintext.size());
  int len = 0;
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(c.ctx, out.data(), &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1)
    throw std::runtime_error("aead seal update failed");
  int fin = 0;
  if (EVP_EncryptFinal_ex(c.ctx, out.data() + len, &fin) != 1 ||
      EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_GET_TAG, static_cast<int>(tag_out.size()),
                          tag_out.data()) != 1)
    throw std::runtime_error("aead seal finalize failed");
  return out;
}

std::optional<std::vector<std::uint8_t>> aead_open(const Key256& key, const Nonce& nonce,
                                                   std::span<const std::uint8_t> ciphertext,
                                                   const Tag& tag) {
  CipherCtx c;
  if (!c.ctx ||
      EVP_DecryptInit_ex(c.ctx, EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1)
    throw std::runtime_error("aead open init failed");
  std::vector<std::uint8_t> out(ciphertext.size());
  int len = 0;
  if (!ciphertext.empty() &&
      EVP_DecryptUpdate(c.ctx, out.data(), &len, ciphertext.data(),
                        static_cast<int>(ciphertext.size())) != 1)
    return std::nullopt;
  Tag tag_copy = tag;
  if (EVP_CIPHER_CTX_ctrl(c.ctx, EVP_CTRL_GCM_SET_TAG, static_cast<int>(tag_copy.size()),
                          tag_copy.data()) != 1)
    throw std::runtime_error("aead open set-tag failed");
  int fin = 0;
  if (EVP_DecryptFinal_ex(c.ctx, out.data() + len, &fin) != 1) return std::nullopt;
  return out;
}

Nonce make_nonce(std::uint8_t direction, std::uint64_t counter) {
  Nonce n{};
  n[0] = direction;
  for (int i = 0; i < 8; ++i)
    n[4 + i] = static_cast<std::uint8_t>(counter >> (8 * (7 - i)));
  return n;
}

}  // namespace cfa
