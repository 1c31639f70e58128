#include "vicos/crypto.hpp"

#include <catch2/catch.hpp>
#include <random>
#include <set>

using namespace vicos;

TEST_CASE("sha256 matches the published empty-string vector") {
  CHECK(to_hex(view(sha256(byte_view{}))) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(to_hex(view(sha256(byte_view(to_bytes("abc"))))) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("sha256 is deterministic and distinguishes inputs") {
  auto a = to_bytes("a"), b = to_bytes("b");
  CHECK(sha256(byte_view(a)) == sha256(byte_view(a)));
  CHECK(sha256(byte_view(a)) != sha256(byte_view(b)));
}

TEST_CASE("streaming hash equals one-shot hash") {
  bytes data = random_bytes(100000);
  sha256_stream s;
  s.update(byte_view(data).subspan(0, 33333));
  s.update(byte_view(data).subspan(33333, 1));
  s.update(byte_view(data).subspan(33334));
  CHECK(s.finish() == sha256(byte_view(data)));
}

TEST_CASE("no collisions over a randomized corpus") {
  std::mt19937_64 rng(7);
  std::set<bytes> seen_inputs;
  std::set<digest> seen_digests;
  for (int i = 0; i < 2000; ++i) {
    bytes input(rng() % 64);
    for (auto& c : input) c = static_cast<std::uint8_t>(rng());
    if (!seen_inputs.insert(input).second) continue;
    CHECK(seen_digests.insert(sha256(byte_view(input))).second);
  }
}

TEMPLATE_TEST_CASE_SIG("signature round trips and rejections", "", ((sig_scheme M), M),
                       (sig_scheme::mac), (sig_scheme::public_key)) {
  keyring keys =
      M == sig_scheme::mac ? keyring::make_mac(3) : keyring::make_public_key(3);
  bytes msg = to_bytes("the quick brown fox");

  signature sig = keys.sign(1, "invoke", byte_view(msg));

  SECTION("round trip verifies") { CHECK(keys.verify(1, "invoke", byte_view(msg), sig)); }

  SECTION("wrong signer fails") { CHECK_FALSE(keys.verify(2, "invoke", byte_view(msg), sig)); }

  SECTION("domain tags separate signatures") {
    CHECK_FALSE(keys.verify(1, "commit", byte_view(msg), sig));
    // a tag/message boundary shift must not verify either
    CHECK_FALSE(keys.verify(1, "invokethe", byte_view(to_bytes(" quick brown fox")), sig));
  }

  SECTION("bit-flipped message fails") {
    bytes flipped = msg;
    flipped[4] ^= 0x20;
    CHECK_FALSE(keys.verify(1, "invoke", byte_view(flipped), sig));
  }

  SECTION("truncated signature fails") {
    signature cut = sig;
    cut.value.pop_back();
    CHECK_FALSE(keys.verify(1, "invoke", byte_view(msg), cut));
    cut.value.clear();
    CHECK_FALSE(keys.verify(1, "invoke", byte_view(msg), cut));
  }

  SECTION("randomized messages never cross-verify") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
      bytes m(1 + rng() % 40);
      for (auto& c : m) c = static_cast<std::uint8_t>(rng());
      if (m == msg) continue;
      CHECK_FALSE(keys.verify(1, "invoke", byte_view(m), sig));
    }
  }
}

TEST_CASE("verifier-only keyring can verify public-key signatures but never sign") {
  keyring keys = keyring::make_public_key(2);
  keyring server = keys.verifier_only();
  bytes msg = to_bytes("m");
  signature sig = keys.sign(2, "auth", byte_view(msg));
  CHECK(server.verify(2, "auth", byte_view(msg), sig));
  CHECK_FALSE(server.can_sign(2));
  CHECK_THROWS(server.sign(2, "auth", byte_view(msg)));
}

TEST_CASE("verifier-only keyring in mac mode holds no key") {
  keyring keys = keyring::make_mac(2);
  keyring server = keys.verifier_only();
  CHECK_FALSE(server.can_verify());
  CHECK_FALSE(server.can_sign(1));
}

TEST_CASE("mac keys default to 128 bits") {
  keyring keys = keyring::make_mac(2);
  CHECK(keys.shared_mac_key().size() == 16);
}
