#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string_view>

#include "vicos/bytes.hpp"

namespace vicos {

/// 256-bit digest.  Fixed length for the configured hash (SHA-256);
/// collision resistance is all the protocol relies on.
using digest = std::array<std::uint8_t, 32>;

inline constexpr digest null_digest{};  // hash-chain anchor H[0]

inline byte_view view(const digest& d) { return byte_view(d.data(), d.size()); }

inline bytes to_vec(const digest& d) { return bytes(d.begin(), d.end()); }

inline digest digest_from(byte_view b) {
  if (b.size() != 32) throw decode_error("digest must be 32 bytes");
  digest d;
  std::memcpy(d.data(), b.data(), 32);
  return d;
}

inline digest sha256(byte_view data) {
  digest out;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size())
    throw std::runtime_error("sha256 failed");
  return out;
}

inline digest sha256(const byte_writer& w) { return sha256(byte_view(w.data())); }

/// Incremental SHA-256 for hashing large objects without buffering; the
/// result is identical to one-shot sha256 over the concatenation.
class sha256_stream {
 public:
  sha256_stream() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw std::runtime_error("sha256 init failed");
  }

  void update(byte_view data) {
    if (EVP_DigestUpdate(ctx_.get(), data.data(), data.size()) != 1)
      throw std::runtime_error("sha256 update failed");
  }

  digest finish() {
    digest out;
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != out.size())
      throw std::runtime_error("sha256 final failed");
    return out;
  }

 private:
  struct ctx_free {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
  };
  std::unique_ptr<EVP_MD_CTX, ctx_free> ctx_;
};

inline bytes random_bytes(std::size_t n) {
  bytes out(n);
  if (n > 0 && RAND_bytes(out.data(), static_cast<int>(n)) != 1)
    throw std::runtime_error("RAND_bytes failed");
  return out;
}

using client_id = std::uint32_t;

/// Reserved pseudo-client that signs the genesis records at setup time.
inline constexpr client_id genesis_client = 0;

enum class sig_scheme : std::uint8_t { mac = 0, public_key = 1 };

struct signature {
  client_id signer = 0;
  sig_scheme scheme = sig_scheme::mac;
  bytes value;

  bool operator==(const signature&) const = default;
};

namespace detail {

inline bytes hmac_sha256(byte_view key, byte_view msg) {
  unsigned int len = 0;
  bytes out(EVP_MAX_MD_SIZE);
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(), msg.size(),
            out.data(), &len))
    throw std::runtime_error("HMAC failed");
  out.resize(len);
  return out;
}

struct pkey_free {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
using pkey_ptr = std::unique_ptr<EVP_PKEY, pkey_free>;

inline pkey_ptr ed25519_private(byte_view raw) {
  EVP_PKEY* p =
      EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, raw.data(), raw.size());
  if (!p) throw std::runtime_error("bad ed25519 private key");
  return pkey_ptr(p);
}

inline pkey_ptr ed25519_public(byte_view raw) {
  EVP_PKEY* p =
      EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, raw.data(), raw.size());
  if (!p) throw std::runtime_error("bad ed25519 public key");
  return pkey_ptr(p);
}

inline bytes ed25519_sign(byte_view priv, byte_view msg) {
  auto key = ed25519_private(priv);
  std::unique_ptr<EVP_MD_CTX, decltype([](EVP_MD_CTX* c) { EVP_MD_CTX_free(c); })> ctx(
      EVP_MD_CTX_new());
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1)
    throw std::runtime_error("ed25519 sign init failed");
  std::size_t len = 0;
  if (EVP_DigestSign(ctx.get(), nullptr, &len, msg.data(), msg.size()) != 1)
    throw std::runtime_error("ed25519 sign failed");
  bytes sig(len);
  if (EVP_DigestSign(ctx.get(), sig.data(), &len, msg.data(), msg.size()) != 1)
    throw std::runtime_error("ed25519 sign failed");
  sig.resize(len);
  return sig;
}

inline bool ed25519_verify(byte_view pub, byte_view msg, byte_view sig) {
  pkey_ptr key;
  try {
    key = ed25519_public(pub);
  } catch (const std::exception&) {
    return false;
  }
  std::unique_ptr<EVP_MD_CTX, decltype([](EVP_MD_CTX* c) { EVP_MD_CTX_free(c); })> ctx(
      EVP_MD_CTX_new());
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, key.get()) != 1)
    return false;
  return EVP_DigestVerify(ctx.get(), sig.data(), sig.size(), msg.data(), msg.size()) == 1;
}

}  // namespace detail

/// Per-party signing and verification material.
///
/// Two modes mirror the deployment choices:
///  - mac: one shared symmetric key among the clients (HMAC-SHA256,
///    128-bit keys by default).  The signer id is mixed into the MAC
///    input so a tag for client i never verifies for client j.  The
///    server holds no key in this mode and cannot verify.
///  - public_key: one Ed25519 keypair per client; the server holds the
///    public keys only, so it can verify but never sign.
///
/// Domain tags ("invoke", "commit", "auth") are length-prefixed into the
/// signed bytes, so no signed string is valid under two different tags.
class keyring {
 public:
  static constexpr std::size_t mac_key_len = 16;

  static keyring make_mac(client_id max_client, byte_view shared_key = {}) {
    keyring k;
    k.mode_ = sig_scheme::mac;
    k.max_client_ = max_client;
    k.mac_key_ = shared_key.empty() ? random_bytes(mac_key_len)
                                    : bytes(shared_key.begin(), shared_key.end());
    return k;
  }

  static keyring make_public_key(client_id max_client) {
    keyring k;
    k.mode_ = sig_scheme::public_key;
    k.max_client_ = max_client;
    for (client_id i = 0; i <= max_client; ++i) {
      bytes priv = random_bytes(32);
      auto key = detail::ed25519_private(priv);
      bytes pub(32);
      std::size_t len = pub.size();
      if (EVP_PKEY_get_raw_public_key(key.get(), pub.data(), &len) != 1 || len != 32)
        throw std::runtime_error("ed25519 keygen failed");
      k.priv_[i] = std::move(priv);
      k.pub_[i] = std::move(pub);
    }
    return k;
  }

  /// The server's copy: verification material only.
  keyring verifier_only() const {
    keyring k;
    k.mode_ = mode_;
    k.max_client_ = max_client_;
    if (mode_ == sig_scheme::public_key) k.pub_ = pub_;
    return k;
  }

  sig_scheme mode() const { return mode_; }
  client_id max_client() const { return max_client_; }

  bool can_sign(client_id i) const {
    if (mode_ == sig_scheme::mac) return !mac_key_.empty();
    return priv_.count(i) != 0;
  }

  /// True when this party holds material to check signatures at all.
  /// In mac mode the server holds nothing and must skip verification.
  bool can_verify() const {
    return mode_ == sig_scheme::public_key ? !pub_.empty() : !mac_key_.empty();
  }

  signature sign(client_id i, std::string_view tag, byte_view msg) const {
    byte_writer w;
    w.blob(tag);
    w.blob(msg);
    signature s;
    s.signer = i;
    s.scheme = mode_;
    if (mode_ == sig_scheme::mac) {
      if (mac_key_.empty()) throw std::runtime_error("no mac key configured");
      byte_writer inner;
      inner.u32(i);
      inner.raw(byte_view(w.data()));
      s.value = detail::hmac_sha256(byte_view(mac_key_), byte_view(inner.data()));
    } else {
      auto it = priv_.find(i);
      if (it == priv_.end()) throw std::runtime_error("no signing key for client");
      s.value = detail::ed25519_sign(byte_view(it->second), byte_view(w.data()));
    }
    return s;
  }

  /// Never throws on malformed input; any failure is just `false`.
  bool verify(client_id i, std::string_view tag, byte_view msg, const signature& sig) const {
    if (sig.signer != i || sig.scheme != mode_) return false;
    byte_writer w;
    w.blob(tag);
    w.blob(msg);
    if (mode_ == sig_scheme::mac) {
      if (mac_key_.empty()) return false;
      byte_writer inner;
      inner.u32(i);
      inner.raw(byte_view(w.data()));
      bytes expect = detail::hmac_sha256(byte_view(mac_key_), byte_view(inner.data()));
      if (expect.size() != sig.value.size()) return false;
      // constant-time compare
      unsigned char acc = 0;
      for (std::size_t k = 0; k < expect.size(); ++k) acc |= expect[k] ^ sig.value[k];
      return acc == 0;
    }
    auto it = pub_.find(i);
    if (it == pub_.end()) return false;
    return detail::ed25519_verify(byte_view(it->second), byte_view(w.data()),
                                  byte_view(sig.value));
  }

  // Raw key access for config serialization (see config.hpp).
  const bytes& shared_mac_key() const { return mac_key_; }
  const std::map<client_id, bytes>& private_keys() const { return priv_; }
  const std::map<client_id, bytes>& public_keys() const { return pub_; }

  void set_shared_mac_key(bytes k) {
    mode_ = sig_scheme::mac;
    mac_key_ = std::move(k);
  }
  void set_keys(client_id i, std::optional<bytes> priv, std::optional<bytes> pub) {
    mode_ = sig_scheme::public_key;
    if (priv) priv_[i] = std::move(*priv);
    if (pub) pub_[i] = std::move(*pub);
    if (i > max_client_) max_client_ = i;
  }

 private:
  sig_scheme mode_ = sig_scheme::mac;
  client_id max_client_ = 0;
  bytes mac_key_;
  std::map<client_id, bytes> priv_;
  std::map<client_id, bytes> pub_;
};

}  // namespace vicos
