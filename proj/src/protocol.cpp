#include "cfa/protocol.hpp"

#include <fstream>

namespace cfa {

namespace {

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> SealedBatch::encode() const {
  std::vector<std::uint8_t> out;
  out.reserve(12 + ciphertext.size() + tag.size());
  put_u64(out, batch_no);
  std::uint32_t len = static_cast<std::uint32_t>(ciphertext.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), ciphertext.begin(), ciphertext.end());
  out.insert(out.end(), tag.begin(), tag.end());
  return out;
}

SealedBatch SealedBatch::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 + 16) throw ProtocolError("sealed batch truncated");
  SealedBatch b;
  b.batch_no = get_u64(bytes.data());
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i)
    len |= static_cast<std::uint32_t>(bytes[8 + i]) << (8 * i);
  if (bytes.size() != 12 + static_cast<std::size_t>(len) + 16)
    throw ProtocolError("sealed batch length mismatch");
  b.ciphertext.assign(bytes.begin() + 12, bytes.begin() + 12 + len);
  std::copy(bytes.end() - 16, bytes.end(), b.tag.begin());
  return b;
}

KeyMaterial load_key_material(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ProtocolError("cannot open key file: " + path);
  KeyMaterial km;
  in.read(reinterpret_cast<char*>(km.secret.data()), 32);
  in.read(reinterpret_cast<char*>(km.key_init.data()), 32);
  if (!in || in.peek() != std::ifstream::traits_type::eof())
    throw ProtocolError("key file must be exactly 64 bytes: " + path);
  return km;
}

void save_key_material(const KeyMaterial& km, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ProtocolError("cannot open key file for writing: " + path);
  out.write(reinterpret_cast<const char*>(km.secret.data()), 32);
  out.write(reinterpret_cast<const char*>(km.key_init.data()), 32);
  if (!out) throw ProtocolError("key file write failed: " + path);
}

KeyMaterial dev_key_material() {
  KeyMaterial km;
  for (int i = 0; i < 32; ++i) {
    km.secret[i] = static_cast<std::uint8_t>(0xA0 + i);
    km.key_init[i] = static_cast<std::uint8_t>(0x50 + i);
  }
  return km;
}

ProverState::ProverState(Secret&& secret, const RatchetKey& key_init,
                         std::size_t batch_size, std::size_t feedback_frequency)
    : chain_(secret.consume()), key_(key_init), batch_size_(batch_size),
      feedback_frequency_(feedback_frequency) {
  if (batch_size_ < 1) throw ProtocolError("batch size must be at least 1");
  if (feedback_frequency_ < 1) throw ProtocolError("feedback frequency must be at least 1");
  key_.ratchet();  // Key_1 = KDF(Key_init); generation 1 before the first seal
  buffer_.reserve(batch_size_);
}

std::optional<SealedBatch> ProverState::record_id(EndpointId id) {
  chain_.update(id);
  buffer_.push_back(id);
  if (buffer_.size() >= batch_size_) return seal_batch();
  return std::nullopt;
}

SealedBatch ProverState::seal_batch() {
  if (buffer_.empty()) throw ProtocolError("seal on empty batch buffer", batch_no_);
  if (unacked_ >= feedback_frequency_)
    throw ProtocolError("seal while awaiting feedback", batch_no_);
  if (pre_seal_hook) pre_seal_hook(buffer_, batch_no_);

  std::vector<std::uint8_t> plaintext;
  plaintext.reserve(buffer_.size() * 8 + 32);
  for (EndpointId id : buffer_) put_u64(plaintext, id);
  Digest d = chain_.digest();
  plaintext.insert(plaintext.end(), d.begin(), d.end());

  SealedBatch batch;
  batch.batch_no = batch_no_;
  batch.ciphertext =
      aead_seal(key_.material(), make_nonce(kDirectionBatch, batch_no_), plaintext, batch.tag);
  key_.ratchet();
  ++batch_no_;
  ++unacked_;
  buffer_.clear();
  return batch;
}

std::optional<SealedBatch> ProverState::flush() {
  if (buffer_.empty()) return std::nullopt;
  return seal_batch();
}

void ProverState::apply_feedback(const SealedBatch& fb) {
  auto plaintext = aead_open(key_.material(), make_nonce(kDirectionFeedback, feedback_no_),
                             fb.ciphertext, fb.tag);
  if (!plaintext) throw CounterDesync("feedback authentication failed", fb.batch_no);
  if (plaintext->size() != 8) throw CounterDesync("malformed feedback", fb.batch_no);
  std::uint64_t acked = get_u64(plaintext->data());
  if (acked != batch_no_)
    throw CounterDesync("feedback acknowledges " + std::to_string(acked) + " of " +
                            std::to_string(batch_no_) + " batches",
                        acked);
  unacked_ = 0;
  ++feedback_no_;
}

VerifierState::VerifierState(Secret&& secret, const RatchetKey& key_init)
    : chain_(secret.consume()), key_(key_init) {
  key_.ratchet();
}

std::vector<EndpointId> VerifierState::ingest(const SealedBatch& batch) {
  auto plaintext = aead_open(key_.material(), make_nonce(kDirectionBatch, batch_no_),
                             batch.ciphertext, batch.tag);
  if (!plaintext) throw AeadFailure("batch authentication failed", batch.batch_no);
  key_.ratchet();
  ++batch_no_;
  auto parsed = parse_batch_plaintext(*plaintext);
  if (!parsed) throw ProtocolError("malformed batch plaintext", batch.batch_no);
  for (EndpointId id : parsed->ids) chain_.update(id);
  if (chain_.digest() != parsed->digest)
    throw DigestMismatch("recorded-id digest mismatch", batch.batch_no);
  return std::move(parsed->ids);
}

SealedBatch VerifierState::make_feedback() {
  if (batch_no_ == 0) throw ProtocolError("feedback before first batch");
  std::vector<std::uint8_t> plaintext;
  put_u64(plaintext, batch_no_);
  SealedBatch fb;
  fb.batch_no = batch_no_;
  fb.ciphertext = aead_seal(key_.material(), make_nonce(kDirectionFeedback, feedback_no_),
                            plaintext, fb.tag);
  ++feedback_no_;
  return fb;
}

}  // namespace cfa
