#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <span>
#include <stdexcept>
#include <string_view>

#include "ctsim/bytes.hpp"
#include "ctsim/rng.hpp"

/// secp256k1 keys, deterministic ECDSA, SHA-256, addresses and hybrid
/// public-key encryption. Backed by OpenSSL's libcrypto.
namespace ctsim::crypto {

struct DigestTag {};
struct AddressTag {};
struct PublicKeyTag {};
struct PrivateKeyTag {};
struct SignatureTag {};

using Digest = ByteArray<32, DigestTag>;
using Address = ByteArray<20, AddressTag>;
/// Compressed SEC1 encoding.
using PublicKey = ByteArray<33, PublicKeyTag>;
/// Big-endian scalar in [1, n-1].
using PrivateKey = ByteArray<32, PrivateKeyTag>;
/// r || s, both 32-byte big-endian, s normalized to the lower half-order.
using Signature = ByteArray<64, SignatureTag>;

struct KeyPair {
  PrivateKey private_key;
  PublicKey public_key;

  friend bool operator==(const KeyPair&, const KeyPair&) = default;
};

struct Ciphertext {
  PublicKey ephemeral_pub;
  std::array<std::uint8_t, 12> nonce{};
  Bytes body;
  std::array<std::uint8_t, 16> tag{};

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

class CryptoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an authenticated ciphertext does not open under the given key.
class DecryptionError : public CryptoError {
 public:
  using CryptoError::CryptoError;
};

/// SHA-256.
Digest hash(std::span<const std::uint8_t> data);
Digest hash(std::string_view text);
Digest hash_concat(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// First 20 bytes of SHA-256 over the compressed public key.
Address address_of(const PublicKey& key);
/// First 20 bytes of SHA-256 over a resource label.
Address address_of_label(std::string_view label);

/// The curve order n, big-endian.
const std::array<std::uint8_t, 32>& curve_order();

/// Key from 32 bytes of entropy. The seed itself is the first candidate
/// scalar; if it is 0 or >= n, SHA-256(seed || counter_be32) is tried for
/// counter = 1, 2, ...
KeyPair generate_keypair(std::span<const std::uint8_t, 32> seed);

/// Additive, non-hardened child:
/// child = parent + SHA-256(parent_pub || index_be32) mod n.
/// A zero child rehashes with an appended counter_be32 (1, 2, ...).
KeyPair derive_child_key(const KeyPair& parent, std::uint32_t index);

/// Public-only route for the same derivation: parent_pub + tweak * G.
PublicKey derive_child_public(const PublicKey& parent, std::uint32_t index);

/// The tweak scalar (mod n) used by derive_child_key, exposed for tests.
std::array<std::uint8_t, 32> child_tweak(const PublicKey& parent, std::uint32_t index,
                                         std::uint32_t counter = 0);

/// Public key for a private scalar; throws CryptoError if out of range.
PublicKey public_key_of(const PrivateKey& key);

bool is_valid_public_key(const PublicKey& key);

/// ECDSA over secp256k1 with RFC 6979 (HMAC-SHA256) nonces, low-s form.
Signature sign(const KeyPair& key, const Digest& msg);

/// False for any malformed key or signature encoding, high-s included.
bool verify(const PublicKey& pub, const Digest& msg, const Signature& sig);

/// ECIES-style: ephemeral key, ECDH, SHA-256 KDF, ChaCha20-Poly1305.
Ciphertext encrypt_for(const PublicKey& recipient, std::span<const std::uint8_t> plaintext,
                       Rng& rng);

/// Throws DecryptionError when authentication fails.
Bytes decrypt(const PrivateKey& recipient, const Ciphertext& ct);

/// Memoizes successful verifications keyed by the exact (pub, msg, sig)
/// bytes. Single-threaded; one per simulated world or verification run.
class SignatureCache {
 public:
  bool verify(const PublicKey& pub, const Digest& msg, const Signature& sig);
  std::size_t size() const { return verified_.size(); }
  std::uint64_t hits() const { return hits_; }

 private:
  std::set<Digest> verified_;
  std::uint64_t hits_ = 0;
};

/// Verifies through the cache when one is supplied.
bool verify_with(SignatureCache* cache, const PublicKey& pub, const Digest& msg,
                 const Signature& sig);

}  // namespace ctsim::crypto
