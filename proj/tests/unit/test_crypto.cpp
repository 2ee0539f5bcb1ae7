#include <gtest/gtest.h>

#include "ctsim/crypto.hpp"

namespace ctsim::crypto {
namespace {

// Reference values from tests/oracles/vectors.py (Python `cryptography`
// with RFC 6979 nonces, low-s normalized).
struct SignVector {
  const char* priv;
  const char* msg;
  const char* digest;
  const char* pub;
  const char* addr;
  const char* r;
  const char* s;
};

const SignVector kVectors[] = {
    {"0000000000000000000000000000000000000000000000000000000000000001", "Satoshi Nakamoto",
     "a0dc65ffca799873cbea0ac274015b9526505daaaed385155425f7337704883e",
     "0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798",
     "0f715baf5d4c2ed329785cef29e562f73488c8a2",
     "934b1ea10a4b3c1757e2b0c017d0b6143ce3c9a7e6a4a49860d7a6ab210ee3d8",
     "2442ce9d2b916064108014783e923ec36b49743e2ffa1c4496f01a512aafd9e5"},
    {"fffffffffffffffffffffffffffffffebaaedce6af48a03bbfd25e8cd0364140", "Satoshi Nakamoto",
     "a0dc65ffca799873cbea0ac274015b9526505daaaed385155425f7337704883e",
     "0379be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798",
     "fbd27dbb9e7f471bf3de3704a35e884e37d35c67",
     "fd567d121db66e382991534ada77a6bd3106f0a1098c231e47993447cd6af2d0",
     "6b39cd0eb1bc8603e159ef5c20a5c8ad685a45b06ce9bebed3f153d10d93bed5"},
    {"f8b8af8ce3c7cca5e300d33939540c10d45ce001b8f252bfbc57ba0342904181", "Alan Turing",
     "4ba38d48a60f1b29e9eb726eaff08b2e83d8d81e031666fee50e85900d7dc1ef",
     "0292df7b245b81aa637ab4e867c8d511008f79161a97d64f2ac709600352f7acbc",
     "58debee8199fb02d3ca129db2e6862cefdf33e94",
     "7063ae83e7f62bbb171798131b4a0564b956930092b33b07b395615d9ec7e15c",
     "58dfcc1e00a35e1572f366ffe34ba0fc47db1e7189759b9fb233c5b05ab388ea"},
    {"0000000000000000000000000000000000000000000000000000000000000007", "ctsim",
     "d9bc8213eabb91d5869479281d5291033981301cfd9f7494a073e2b393495ef5",
     "025cbdf0646e5db4eaa398f365f2ea7a0e3d419b7e0330e39ce92bddedcac4f9bc",
     "a2039429ca2d2f2bcc0725a1682aeeeb3ac1b8e7",
     "58ee7cab5f697617023f56767b3458f8a76e3738ffe65e24a5f56fa0e59751bb",
     "06b50c12409ddad1e1d52ed3f12c543c7f48380a0285937eae7ddc920c83e490"},
};

KeyPair from_priv(const char* hex) {
  KeyPair k;
  k.private_key = PrivateKey::from_hex(hex);
  k.public_key = public_key_of(k.private_key);
  return k;
}

TEST(Crypto, Sha256KnownAnswers) {
  EXPECT_EQ(hash(std::string_view{}).hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hash("abc").hex(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  EXPECT_EQ(hash_concat(as_bytes("a"), as_bytes("bc")), hash("abc"));
}

TEST(Crypto, DeterministicSignaturesMatchReference) {
  for (const auto& v : kVectors) {
    SCOPED_TRACE(v.msg);
    const KeyPair k = from_priv(v.priv);
    EXPECT_EQ(k.public_key.hex(), v.pub);
    EXPECT_EQ(address_of(k.public_key).hex(), v.addr);
    const Digest d = hash(v.msg);
    EXPECT_EQ(d.hex(), v.digest);
    const Signature sig = sign(k, d);
    EXPECT_EQ(sig.hex(), std::string(v.r) + v.s);
    EXPECT_TRUE(verify(k.public_key, d, sig));
  }
}

TEST(Crypto, AnySingleBitFlipFailsVerification) {
  const KeyPair k = from_priv(kVectors[3].priv);
  const Digest d = hash("ctsim");
  const Signature sig = sign(k, d);
  for (std::size_t bit = 0; bit < 64 * 8; ++bit) {
    Signature bad = sig;
    bad.bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    ASSERT_FALSE(verify(k.public_key, d, bad)) << "sig bit " << bit;
  }
  for (std::size_t bit = 0; bit < 32 * 8; ++bit) {
    Digest bad = d;
    bad.bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    ASSERT_FALSE(verify(k.public_key, bad, sig)) << "digest bit " << bit;
  }
  EXPECT_FALSE(verify(from_priv(kVectors[0].priv).public_key, d, sig));
}

TEST(Crypto, HighSIsRejected) {
  const KeyPair k = from_priv(kVectors[2].priv);
  const Digest d = hash("Alan Turing");
  Signature sig = sign(k, d);
  // s' = n - s
  const auto& n = curve_order();
  int borrow = 0;
  for (int i = 31; i >= 0; --i) {
    int x = n[static_cast<std::size_t>(i)] - sig.bytes[32 + static_cast<std::size_t>(i)] - borrow;
    borrow = x < 0 ? 1 : 0;
    sig.bytes[32 + static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(x + (borrow ? 256 : 0));
  }
  EXPECT_FALSE(verify(k.public_key, d, sig));
}

TEST(Crypto, MalformedKeysAreRejected) {
  PublicKey junk;
  junk.bytes[0] = 0x02;
  for (std::size_t i = 1; i < 33; ++i) junk.bytes[i] = 0xff;  // x >= p
  EXPECT_FALSE(is_valid_public_key(junk));
  EXPECT_FALSE(is_valid_public_key(PublicKey{}));
  EXPECT_THROW(public_key_of(PrivateKey{}), CryptoError);
  PrivateKey n;
  std::copy(curve_order().begin(), curve_order().end(), n.bytes.begin());
  EXPECT_THROW(public_key_of(n), CryptoError);
}

TEST(Crypto, KeyGenerationFromSeed) {
  std::array<std::uint8_t, 32> seed{};
  seed[31] = 7;
  EXPECT_EQ(generate_keypair(seed).public_key.hex(), kVectors[3].pub);
  // Zero and out-of-range seeds are rehashed into a valid scalar.
  std::array<std::uint8_t, 32> zero{};
  const KeyPair z = generate_keypair(zero);
  EXPECT_TRUE(is_valid_public_key(z.public_key));
  std::array<std::uint8_t, 32> ones;
  ones.fill(0xff);
  EXPECT_TRUE(is_valid_public_key(generate_keypair(ones).public_key));
}

TEST(Crypto, ChildKeysMatchReference) {
  const KeyPair parent = from_priv(kVectors[3].priv);
  struct {
    std::uint32_t index;
    const char* priv;
    const char* pub;
    const char* addr;
  } const children[] = {
      {0, "fcf99e06f4271aedd1b67c95568dbb103dd4ccaf08b909a698efbd7a010a129c",
       "03e52aef7857ada20a766a5a5506f83871180ada24ad750ee0d8012acd810ba3f5",
       "efc536c25abee5f361eca657eaf391bded809e51"},
      {1, "1165ca6dd822279fd4de56acf9c5656bf1fd04870ed3e240dc8a00886ebb6049",
       "03734577209e49b4e0b233e7312d78e63c37dff246876934fe9ae4a7434da425be",
       "6fab528be9b7bc5a63b2feb776453f73427c15a7"},
      {5, "a7594bc6085b1ad38e419064ee7d57b8f8f270a38ebf1cef0b04f77db1a5b0ad",
       "03a721b97c872b196a089e8f8645668d3fb5e640366f777c138fd474d6472244d9",
       "c146cc2119f6894aa2376a6915c0c16dc477e533"},
  };
  for (const auto& c : children) {
    const KeyPair child = derive_child_key(parent, c.index);
    EXPECT_EQ(child.private_key.hex(), c.priv);
    EXPECT_EQ(child.public_key.hex(), c.pub);
    EXPECT_EQ(address_of(child.public_key).hex(), c.addr);
    EXPECT_EQ(derive_child_public(parent.public_key, c.index), child.public_key);
  }
}

TEST(Crypto, ChildKeysAreDistinctAndSign) {
  const KeyPair parent = from_priv(kVectors[2].priv);
  std::set<PublicKey> seen{parent.public_key};
  for (std::uint32_t i = 0; i < 50; ++i) {
    const KeyPair child = derive_child_key(parent, i);
    EXPECT_TRUE(seen.insert(child.public_key).second);
    const Digest d = hash("child " + std::to_string(i));
    EXPECT_TRUE(verify(child.public_key, d, sign(child, d)));
  }
}

TEST(Crypto, EncryptionRoundTripAndWrongKey) {
  Rng rng(3);
  const KeyPair alice = from_priv(kVectors[0].priv);
  const KeyPair bob = from_priv(kVectors[3].priv);
  const std::string msg = "user profile: alice";
  const Ciphertext ct = encrypt_for(alice.public_key, as_bytes(msg), rng);
  const Bytes pt = decrypt(alice.private_key, ct);
  EXPECT_EQ(std::string(pt.begin(), pt.end()), msg);
  EXPECT_THROW(decrypt(bob.private_key, ct), DecryptionError);

  Ciphertext tampered = ct;
  tampered.body[0] ^= 1;
  EXPECT_THROW(decrypt(alice.private_key, tampered), DecryptionError);
  tampered = ct;
  tampered.tag[0] ^= 1;
  EXPECT_THROW(decrypt(alice.private_key, tampered), DecryptionError);

  // Fresh ephemeral key per encryption.
  const Ciphertext again = encrypt_for(alice.public_key, as_bytes(msg), rng);
  EXPECT_NE(again.ephemeral_pub, ct.ephemeral_pub);
}

TEST(Crypto, EmptyPlaintextRoundTrips) {
  Rng rng(4);
  const KeyPair k = from_priv(kVectors[1].priv);
  const Ciphertext ct = encrypt_for(k.public_key, {}, rng);
  EXPECT_TRUE(decrypt(k.private_key, ct).empty());
}

TEST(Crypto, SignatureCacheOnlyRemembersValidSignatures) {
  const KeyPair k = from_priv(kVectors[3].priv);
  const Digest d = hash("ctsim");
  const Signature sig = sign(k, d);
  SignatureCache cache;
  EXPECT_TRUE(cache.verify(k.public_key, d, sig));
  EXPECT_TRUE(cache.verify(k.public_key, d, sig));
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_EQ(cache.hits(), 1u);
  Signature bad = sig;
  bad.bytes[5] ^= 1;
  EXPECT_FALSE(cache.verify(k.public_key, d, bad));
  EXPECT_FALSE(verify_with(&cache, k.public_key, d, bad));
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_TRUE(verify_with(nullptr, k.public_key, d, sig));
}

TEST(Crypto, LabelAddressIsHashPrefix) {
  const Digest d = hash("disk");
  EXPECT_TRUE(std::equal(d.bytes.begin(), d.bytes.begin() + 20,
                         address_of_label("disk").bytes.begin()));
}

}  // namespace
}  // namespace ctsim::crypto
