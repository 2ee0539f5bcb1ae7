#include "ctsim/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/obj_mac.h>

#include <memory>

namespace ctsim::crypto {
namespace {

struct BnFree {
  void operator()(BIGNUM* b) const { BN_clear_free(b); }
};
struct PointFree {
  void operator()(EC_POINT* p) const { EC_POINT_free(p); }
};
struct CtxFree {
  void operator()(BN_CTX* c) const { BN_CTX_free(c); }
};
struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

using BnPtr = std::unique_ptr<BIGNUM, BnFree>;
using PointPtr = std::unique_ptr<EC_POINT, PointFree>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;

using Scalar32 = std::array<std::uint8_t, 32>;

void check(int ok, const char* what) {
  if (ok != 1) {
    throw CryptoError(what);
  }
}

BnPtr new_bn() {
  BnPtr b(BN_new());
  if (!b) throw CryptoError("BN_new failed");
  return b;
}

BnPtr bn_from(std::span<const std::uint8_t> bytes) {
  BnPtr b(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
  if (!b) throw CryptoError("BN_bin2bn failed");
  return b;
}

Scalar32 bn_to32(const BIGNUM* b) {
  Scalar32 out{};
  check(BN_bn2binpad(b, out.data(), 32) == 32 ? 1 : 0, "BN_bn2binpad failed");
  return out;
}

BN_CTX* bn_ctx() {
  thread_local std::unique_ptr<BN_CTX, CtxFree> ctx(BN_CTX_new());
  return ctx.get();
}

class Curve {
 public:
  static const Curve& get() {
    static const Curve curve;
    return curve;
  }

  EC_GROUP* group() const { return group_; }
  const BIGNUM* order() const { return order_.get(); }
  const BIGNUM* half_order() const { return half_order_.get(); }
  const Scalar32& order_bytes() const { return order_bytes_; }

 private:
  Curve() {
    group_ = EC_GROUP_new_by_curve_name(NID_secp256k1);
    if (group_ == nullptr) throw CryptoError("secp256k1 unavailable");
    order_ = new_bn();
    check(BN_copy(order_.get(), EC_GROUP_get0_order(group_)) != nullptr ? 1 : 0, "order");
    half_order_ = new_bn();
    check(BN_rshift1(half_order_.get(), order_.get()), "half order");
    order_bytes_ = bn_to32(order_.get());
#if OPENSSL_VERSION_MAJOR < 4
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-declarations"
    // Generator table; roughly 40% off every k*G.
    EC_GROUP_precompute_mult(group_, bn_ctx());
#pragma GCC diagnostic pop
#endif
  }

  EC_GROUP* group_ = nullptr;
  BnPtr order_;
  BnPtr half_order_;
  Scalar32 order_bytes_{};
};

PointPtr new_point() {
  PointPtr p(EC_POINT_new(Curve::get().group()));
  if (!p) throw CryptoError("EC_POINT_new failed");
  return p;
}

PointPtr decode_point(const PublicKey& key) {
  PointPtr p = new_point();
  if (EC_POINT_oct2point(Curve::get().group(), p.get(), key.bytes.data(), key.bytes.size(),
                         bn_ctx()) != 1) {
    return nullptr;
  }
  if (EC_POINT_is_at_infinity(Curve::get().group(), p.get())) {
    return nullptr;
  }
  return p;
}

PublicKey encode_point(const EC_POINT* p) {
  PublicKey out;
  const std::size_t n = EC_POINT_point2oct(Curve::get().group(), p, POINT_CONVERSION_COMPRESSED,
                                           out.bytes.data(), out.bytes.size(), bn_ctx());
  if (n != out.bytes.size()) throw CryptoError("point encoding failed");
  return out;
}

bool scalar_in_range(const BIGNUM* k) {
  return !BN_is_zero(k) && !BN_is_negative(k) && BN_cmp(k, Curve::get().order()) < 0;
}

PointPtr mul_generator(const BIGNUM* k) {
  PointPtr r = new_point();
  check(EC_POINT_mul(Curve::get().group(), r.get(), k, nullptr, nullptr, bn_ctx()), "k*G");
  return r;
}

std::array<std::uint8_t, 4> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
          static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)};
}

Digest hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Digest out;
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
           out.bytes.data(), &len) == nullptr ||
      len != 32) {
    throw CryptoError("HMAC-SHA256 failed");
  }
  return out;
}

/// RFC 6979 section 3.2 nonce stream for qlen = hlen = 256.
class Rfc6979 {
 public:
  Rfc6979(const Scalar32& priv, const Digest& msg) {
    BnPtr h = bn_from(msg.bytes);
    check(BN_nnmod(h.get(), h.get(), Curve::get().order(), bn_ctx()), "bits2octets");
    const Scalar32 h1 = bn_to32(h.get());
    v_.fill(0x01);
    k_.fill(0x00);
    for (std::uint8_t sep : {std::uint8_t{0x00}, std::uint8_t{0x01}}) {
      Bytes data(v_.begin(), v_.end());
      data.push_back(sep);
      data.insert(data.end(), priv.begin(), priv.end());
      data.insert(data.end(), h1.begin(), h1.end());
      k_ = hmac_sha256(k_, data).bytes;
      v_ = hmac_sha256(k_, v_).bytes;
    }
  }

  BnPtr next() {
    for (;;) {
      if (!first_) {
        Bytes data(v_.begin(), v_.end());
        data.push_back(0x00);
        k_ = hmac_sha256(k_, data).bytes;
        v_ = hmac_sha256(k_, v_).bytes;
      }
      first_ = false;
      v_ = hmac_sha256(k_, v_).bytes;
      BnPtr k = bn_from(v_);
      if (scalar_in_range(k.get())) {
        return k;
      }
    }
  }

 private:
  Scalar32 v_{};
  Scalar32 k_{};
  bool first_ = true;
};

Scalar32 add_mod_n(const Scalar32& a, const Scalar32& b) {
  BnPtr x = bn_from(a);
  BnPtr y = bn_from(b);
  BnPtr r = new_bn();
  check(BN_mod_add(r.get(), x.get(), y.get(), Curve::get().order(), bn_ctx()), "mod add");
  return bn_to32(r.get());
}

Digest tweak_preimage_hash(const PublicKey& parent, std::uint32_t index, std::uint32_t counter) {
  Bytes data(parent.bytes.begin(), parent.bytes.end());
  const auto idx = be32(index);
  data.insert(data.end(), idx.begin(), idx.end());
  if (counter > 0) {
    const auto ctr = be32(counter);
    data.insert(data.end(), ctr.begin(), ctr.end());
  }
  return hash(data);
}

std::array<std::uint8_t, 32> derive_symmetric_key(const PublicKey& shared,
                                                  const PublicKey& ephemeral) {
  Bytes data;
  const std::string_view label = "ctsim/ecies/v1";
  data.insert(data.end(), label.begin(), label.end());
  data.insert(data.end(), shared.bytes.begin(), shared.bytes.end());
  data.insert(data.end(), ephemeral.bytes.begin(), ephemeral.bytes.end());
  return hash(data).bytes;
}

PublicKey ecdh(const PrivateKey& priv, const PublicKey& peer) {
  PointPtr point = decode_point(peer);
  if (!point) throw CryptoError("invalid peer public key");
  BnPtr k = bn_from(priv.bytes);
  if (!scalar_in_range(k.get())) throw CryptoError("private scalar out of range");
  PointPtr shared = new_point();
  check(EC_POINT_mul(Curve::get().group(), shared.get(), nullptr, point.get(), k.get(), bn_ctx()),
        "ECDH");
  return encode_point(shared.get());
}

}  // namespace

Digest hash(std::span<const std::uint8_t> data) {
  Digest out;
  unsigned int len = 0;
  check(EVP_Digest(data.data(), data.size(), out.bytes.data(), &len, EVP_sha256(), nullptr),
        "SHA-256 failed");
  return out;
}

Digest hash(std::string_view text) { return hash(as_bytes(text)); }

Digest hash_concat(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  Bytes data(a.begin(), a.end());
  data.insert(data.end(), b.begin(), b.end());
  return hash(data);
}

Address address_of(const PublicKey& key) {
  const Digest d = hash(key.bytes);
  return Address::from_span(std::span(d.bytes).first<20>());
}

Address address_of_label(std::string_view label) {
  const Digest d = hash(label);
  return Address::from_span(std::span(d.bytes).first<20>());
}

const std::array<std::uint8_t, 32>& curve_order() { return Curve::get().order_bytes(); }

PublicKey public_key_of(const PrivateKey& key) {
  BnPtr k = bn_from(key.bytes);
  if (!scalar_in_range(k.get())) {
    throw CryptoError("private scalar out of range");
  }
  PointPtr p = mul_generator(k.get());
  return encode_point(p.get());
}

bool is_valid_public_key(const PublicKey& key) { return decode_point(key) != nullptr; }

KeyPair generate_keypair(std::span<const std::uint8_t, 32> seed) {
  Scalar32 candidate{};
  std::copy(seed.begin(), seed.end(), candidate.begin());
  for (std::uint32_t counter = 1;; ++counter) {
    BnPtr k = bn_from(candidate);
    if (scalar_in_range(k.get())) {
      break;
    }
    Bytes data(seed.begin(), seed.end());
    const auto ctr = be32(counter);
    data.insert(data.end(), ctr.begin(), ctr.end());
    candidate = hash(data).bytes;
  }
  KeyPair out;
  out.private_key.bytes = candidate;
  out.public_key = public_key_of(out.private_key);
  return out;
}

std::array<std::uint8_t, 32> child_tweak(const PublicKey& parent, std::uint32_t index,
                                         std::uint32_t counter) {
  BnPtr t = bn_from(tweak_preimage_hash(parent, index, counter).bytes);
  check(BN_nnmod(t.get(), t.get(), Curve::get().order(), bn_ctx()), "tweak mod n");
  return bn_to32(t.get());
}

KeyPair derive_child_key(const KeyPair& parent, std::uint32_t index) {
  for (std::uint32_t counter = 0;; ++counter) {
    const Scalar32 child = add_mod_n(parent.private_key.bytes, child_tweak(parent.public_key, index, counter));
    BnPtr k = bn_from(child);
    if (BN_is_zero(k.get())) {
      continue;
    }
    KeyPair out;
    out.private_key.bytes = child;
    out.public_key = public_key_of(out.private_key);
    return out;
  }
}

PublicKey derive_child_public(const PublicKey& parent, std::uint32_t index) {
  PointPtr p = decode_point(parent);
  if (!p) throw CryptoError("invalid parent public key");
  for (std::uint32_t counter = 0;; ++counter) {
    BnPtr t = bn_from(child_tweak(parent, index, counter));
    PointPtr tg = mul_generator(t.get());
    PointPtr sum = new_point();
    check(EC_POINT_add(Curve::get().group(), sum.get(), p.get(), tg.get(), bn_ctx()), "point add");
    if (EC_POINT_is_at_infinity(Curve::get().group(), sum.get())) {
      continue;
    }
    return encode_point(sum.get());
  }
}

Signature sign(const KeyPair& key, const Digest& msg) {
  const Curve& curve = Curve::get();
  BN_CTX* ctx = bn_ctx();
  BnPtr d = bn_from(key.private_key.bytes);
  if (!scalar_in_range(d.get())) throw CryptoError("private scalar out of range");
  BnPtr e = bn_from(msg.bytes);
  Rfc6979 nonces(key.private_key.bytes, msg);

  BnPtr r = new_bn();
  BnPtr s = new_bn();
  BnPtr x = new_bn();
  BnPtr kinv = new_bn();
  for (;;) {
    BnPtr k = nonces.next();
    PointPtr big_r = mul_generator(k.get());
    check(EC_POINT_get_affine_coordinates(curve.group(), big_r.get(), x.get(), nullptr, ctx),
          "affine");
    check(BN_nnmod(r.get(), x.get(), curve.order(), ctx), "r mod n");
    if (BN_is_zero(r.get())) continue;
    check(BN_mod_inverse(kinv.get(), k.get(), curve.order(), ctx) != nullptr ? 1 : 0, "k^-1");
    check(BN_mod_mul(s.get(), r.get(), d.get(), curve.order(), ctx), "r*d");
    check(BN_mod_add(s.get(), s.get(), e.get(), curve.order(), ctx), "e+r*d");
    check(BN_mod_mul(s.get(), s.get(), kinv.get(), curve.order(), ctx), "s");
    if (BN_is_zero(s.get())) continue;
    if (BN_cmp(s.get(), curve.half_order()) > 0) {
      check(BN_sub(s.get(), curve.order(), s.get()), "low-s");
    }
    break;
  }
  Signature sig;
  const Scalar32 rb = bn_to32(r.get());
  const Scalar32 sb = bn_to32(s.get());
  std::copy(rb.begin(), rb.end(), sig.bytes.begin());
  std::copy(sb.begin(), sb.end(), sig.bytes.begin() + 32);
  return sig;
}

bool verify(const PublicKey& pub, const Digest& msg, const Signature& sig) {
  const Curve& curve = Curve::get();
  BN_CTX* ctx = bn_ctx();
  PointPtr q = decode_point(pub);
  if (!q) return false;
  BnPtr r = bn_from(std::span(sig.bytes).first<32>());
  BnPtr s = bn_from(std::span(sig.bytes).last<32>());
  if (!scalar_in_range(r.get()) || !scalar_in_range(s.get())) return false;
  if (BN_cmp(s.get(), curve.half_order()) > 0) return false;

  BnPtr e = bn_from(msg.bytes);
  BnPtr w = new_bn();
  BnPtr u1 = new_bn();
  BnPtr u2 = new_bn();
  if (BN_mod_inverse(w.get(), s.get(), curve.order(), ctx) == nullptr) return false;
  check(BN_mod_mul(u1.get(), e.get(), w.get(), curve.order(), ctx), "u1");
  check(BN_mod_mul(u2.get(), r.get(), w.get(), curve.order(), ctx), "u2");
  PointPtr big_r = new_point();
  check(EC_POINT_mul(curve.group(), big_r.get(), u1.get(), q.get(), u2.get(), ctx), "u1G+u2Q");
  if (EC_POINT_is_at_infinity(curve.group(), big_r.get())) return false;
  BnPtr x = new_bn();
  check(EC_POINT_get_affine_coordinates(curve.group(), big_r.get(), x.get(), nullptr, ctx),
        "affine");
  check(BN_nnmod(x.get(), x.get(), curve.order(), ctx), "x mod n");
  return BN_cmp(x.get(), r.get()) == 0;
}

Ciphertext encrypt_for(const PublicKey& recipient, std::span<const std::uint8_t> plaintext,
                       Rng& rng) {
  const auto seed = rng.seed32();
  const KeyPair ephemeral = generate_keypair(seed);
  Ciphertext ct;
  ct.ephemeral_pub = ephemeral.public_key;
  rng.fill(ct.nonce);
  const auto key = derive_symmetric_key(ecdh(ephemeral.private_key, recipient), ct.ephemeral_pub);

  CipherCtxPtr c(EVP_CIPHER_CTX_new());
  if (!c) throw CryptoError("EVP_CIPHER_CTX_new failed");
  int len = 0;
  check(EVP_EncryptInit_ex(c.get(), EVP_chacha20_poly1305(), nullptr, nullptr, nullptr), "init");
  check(EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_AEAD_SET_IVLEN, 12, nullptr), "ivlen");
  check(EVP_EncryptInit_ex(c.get(), nullptr, nullptr, key.data(), ct.nonce.data()), "key");
  check(EVP_EncryptUpdate(c.get(), nullptr, &len, ct.ephemeral_pub.bytes.data(),
                          static_cast<int>(ct.ephemeral_pub.bytes.size())),
        "aad");
  ct.body.resize(plaintext.size());
  if (!plaintext.empty()) {
    check(EVP_EncryptUpdate(c.get(), ct.body.data(), &len, plaintext.data(),
                            static_cast<int>(plaintext.size())),
          "encrypt");
  }
  check(EVP_EncryptFinal_ex(c.get(), ct.body.data() + ct.body.size(), &len), "final");
  check(EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_AEAD_GET_TAG, 16, ct.tag.data()), "tag");
  return ct;
}

Bytes decrypt(const PrivateKey& recipient, const Ciphertext& ct) {
  PublicKey shared;
  try {
    shared = ecdh(recipient, ct.ephemeral_pub);
  } catch (const CryptoError& e) {
    throw DecryptionError(e.what());
  }
  const auto key = derive_symmetric_key(shared, ct.ephemeral_pub);

  CipherCtxPtr c(EVP_CIPHER_CTX_new());
  if (!c) throw CryptoError("EVP_CIPHER_CTX_new failed");
  int len = 0;
  check(EVP_DecryptInit_ex(c.get(), EVP_chacha20_poly1305(), nullptr, nullptr, nullptr), "init");
  check(EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_AEAD_SET_IVLEN, 12, nullptr), "ivlen");
  check(EVP_DecryptInit_ex(c.get(), nullptr, nullptr, key.data(), ct.nonce.data()), "key");
  check(EVP_DecryptUpdate(c.get(), nullptr, &len, ct.ephemeral_pub.bytes.data(),
                          static_cast<int>(ct.ephemeral_pub.bytes.size())),
        "aad");
  Bytes out(ct.body.size());
  if (!ct.body.empty()) {
    check(EVP_DecryptUpdate(c.get(), out.data(), &len, ct.body.data(),
                            static_cast<int>(ct.body.size())),
          "decrypt");
  }
  auto tag = ct.tag;
  check(EVP_CIPHER_CTX_ctrl(c.get(), EVP_CTRL_AEAD_SET_TAG, 16, tag.data()), "set tag");
  if (EVP_DecryptFinal_ex(c.get(), out.data() + out.size(), &len) <= 0) {
    throw DecryptionError("ciphertext authentication failed");
  }
  return out;
}

bool SignatureCache::verify(const PublicKey& pub, const Digest& msg, const Signature& sig) {
  Bytes key;
  key.reserve(pub.size() + msg.size() + sig.size());
  key.insert(key.end(), pub.bytes.begin(), pub.bytes.end());
  key.insert(key.end(), msg.bytes.begin(), msg.bytes.end());
  key.insert(key.end(), sig.bytes.begin(), sig.bytes.end());
  const Digest id = hash(key);
  if (verified_.contains(id)) {
    ++hits_;
    return true;
  }
  if (!crypto::verify(pub, msg, sig)) {
    return false;
  }
  verified_.insert(id);
  return true;
}

bool verify_with(SignatureCache* cache, const PublicKey& pub, const Digest& msg,
                 const Signature& sig) {
  return cache != nullptr ? cache->verify(pub, msg, sig) : verify(pub, msg, sig);
}

}  // namespace ctsim::crypto
