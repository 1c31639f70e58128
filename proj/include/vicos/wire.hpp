#pragma once

#include <optional>
#include <variant>
#include <vector>

#include "vicos/ads.hpp"
#include "vicos/bytes.hpp"
#include "vicos/crypto.hpp"

namespace vicos {

inline constexpr std::uint8_t wire_version = 1;

enum class msg_kind : std::uint8_t {
  invoke = 1,
  reply = 2,
  commit = 3,
  update_auth = 4,
  commit_auth = 5,
};

/// Low-priority messages start new work; the rest complete work in
/// flight and are preferred by the server's intake queue.
inline bool high_priority(msg_kind k) {
  return k == msg_kind::commit || k == msg_kind::update_auth || k == msg_kind::commit_auth;
}

/// Reads the kind of an encoded message without decoding the payload.
inline msg_kind peek_kind(byte_view raw) {
  if (raw.size() < 2 || raw[0] != wire_version) throw decode_error("bad message header");
  std::uint8_t t = raw[1];
  if (t < 1 || t > 5) throw decode_error("unknown message tag");
  return static_cast<msg_kind>(t);
}

/// Protocol messages and their canonical encodings for an ADS
/// instantiation.  Every encoding is deterministic with fixed field order
/// and length-prefixed variable fields: hash chains and signatures cover
/// these bytes, so they must stay bit-stable.
template <class Ads>
  requires authenticated_data_structure<Ads>
struct wire {
  using operation = typename Ads::operation;
  using response = typename Ads::response;
  using aux_data = typename Ads::aux_data;

  /// Entry of the cleared list (and of the server's committed-op map).
  struct operation_record {
    operation op;
    op_status status = op_status::success;
    signature commit_sig;
    client_id client = 0;
    bool operator==(const operation_record&) const = default;
  };

  /// Entry of the pending list.  `committed` is only populated when the
  /// server prunes aborted operations: it carries the originator's commit
  /// signature so the recipient can verify the claimed status.
  struct pending_record {
    operation op;
    signature invoke_sig;
    client_id client = 0;
    std::optional<std::pair<op_status, signature>> committed;
    bool operator==(const pending_record&) const = default;
  };

  struct auth_record {
    digest authenticator{};
    signature auth_sig;
    bool operator==(const auth_record&) const = default;
  };

  struct invoke_msg {
    operation op;
    signature invoke_sig;
    std::uint64_t cleared = 0;
    bool operator==(const invoke_msg&) const = default;
  };

  struct reply_msg {
    std::vector<operation_record> cleared;  // delta
    std::uint64_t applied = 0;              // b
    auth_record alpha;
    std::vector<pending_record> pending;  // omega
    std::uint64_t seq = 0;                // t
    response resp;
    aux_data aux;
    // Present when the passive phase is skipped for queries: the sequence
    // number and record of the operation whose authenticator `alpha` is.
    std::optional<std::pair<std::uint64_t, operation_record>> auth_ref;
    bool operator==(const reply_msg&) const = default;
  };

  struct commit_msg {
    operation op;
    std::uint64_t seq = 0;
    op_status status = op_status::success;
    signature commit_sig;
    bool operator==(const commit_msg&) const = default;
  };

  struct update_auth_msg {
    operation op;
    response resp;
    aux_data aux;
    signature commit_sig;
    std::uint64_t seq = 0;       // q
    std::uint64_t prev_seq = 0;  // q-1, or the last state-modifying op
    operation_record prev_record;
    auth_record prev_auth;
    bool operator==(const update_auth_msg&) const = default;
  };

  struct commit_auth_msg {
    digest authenticator{};
    aux_data aux;
    signature auth_sig;
    bool operator==(const commit_auth_msg&) const = default;
  };

  using message =
      std::variant<invoke_msg, reply_msg, commit_msg, update_auth_msg, commit_auth_msg>;

  // ------------------------------------------------------------ encoding

  static bytes encode(const message& m) {
    byte_writer w;
    w.u8(wire_version);
    std::visit([&](const auto& v) { encode_body(w, v); }, m);
    return w.take();
  }

  static message decode(byte_view raw) {
    byte_reader r(raw);
    if (r.u8() != wire_version) throw decode_error("unsupported wire version");
    std::uint8_t tag = r.u8();
    message m;
    switch (static_cast<msg_kind>(tag)) {
      case msg_kind::invoke: {
        invoke_msg v;
        v.op = Ads::read_operation(r);
        v.invoke_sig = read_sig(r);
        v.cleared = r.u64();
        m = std::move(v);
        break;
      }
      case msg_kind::reply: {
        reply_msg v;
        std::uint32_t nd = r.u32();
        for (std::uint32_t i = 0; i < nd; ++i) v.cleared.push_back(read_record(r));
        v.applied = r.u64();
        v.alpha = read_auth(r);
        std::uint32_t np = r.u32();
        for (std::uint32_t i = 0; i < np; ++i) v.pending.push_back(read_pending(r));
        v.seq = r.u64();
        v.resp = Ads::read_response(r);
        v.aux = Ads::read_aux(r);
        if (r.u8()) {
          std::uint64_t s = r.u64();
          v.auth_ref = {s, read_record(r)};
        }
        m = std::move(v);
        break;
      }
      case msg_kind::commit: {
        commit_msg v;
        v.op = Ads::read_operation(r);
        v.seq = r.u64();
        v.status = read_status(r);
        v.commit_sig = read_sig(r);
        m = std::move(v);
        break;
      }
      case msg_kind::update_auth: {
        update_auth_msg v;
        v.op = Ads::read_operation(r);
        v.resp = Ads::read_response(r);
        v.aux = Ads::read_aux(r);
        v.commit_sig = read_sig(r);
        v.seq = r.u64();
        v.prev_seq = r.u64();
        v.prev_record = read_record(r);
        v.prev_auth = read_auth(r);
        m = std::move(v);
        break;
      }
      case msg_kind::commit_auth: {
        commit_auth_msg v;
        v.authenticator = digest_from(byte_view(r.raw(32)));
        v.aux = Ads::read_aux(r);
        v.auth_sig = read_sig(r);
        m = std::move(v);
        break;
      }
      default:
        throw decode_error("unknown message tag");
    }
    r.finish();
    return m;
  }

  static msg_kind kind_of(const message& m) {
    return static_cast<msg_kind>(m.index() + 1);
  }

  // field-level helpers; also used for config and log serialization
  static void encode_body(byte_writer& w, const invoke_msg& v) {
    w.u8(static_cast<std::uint8_t>(msg_kind::invoke));
    Ads::write_operation(w, v.op);
    write_sig(w, v.invoke_sig);
    w.u64(v.cleared);
  }

  static void encode_body(byte_writer& w, const reply_msg& v) {
    w.u8(static_cast<std::uint8_t>(msg_kind::reply));
    w.u32(static_cast<std::uint32_t>(v.cleared.size()));
    for (const auto& rec : v.cleared) write_record(w, rec);
    w.u64(v.applied);
    write_auth(w, v.alpha);
    w.u32(static_cast<std::uint32_t>(v.pending.size()));
    for (const auto& p : v.pending) write_pending(w, p);
    w.u64(v.seq);
    Ads::write_response(w, v.resp);
    Ads::write_aux(w, v.aux);
    w.u8(v.auth_ref ? 1 : 0);
    if (v.auth_ref) {
      w.u64(v.auth_ref->first);
      write_record(w, v.auth_ref->second);
    }
  }

  static void encode_body(byte_writer& w, const commit_msg& v) {
    w.u8(static_cast<std::uint8_t>(msg_kind::commit));
    Ads::write_operation(w, v.op);
    w.u64(v.seq);
    w.u8(static_cast<std::uint8_t>(v.status));
    write_sig(w, v.commit_sig);
  }

  static void encode_body(byte_writer& w, const update_auth_msg& v) {
    w.u8(static_cast<std::uint8_t>(msg_kind::update_auth));
    Ads::write_operation(w, v.op);
    Ads::write_response(w, v.resp);
    Ads::write_aux(w, v.aux);
    write_sig(w, v.commit_sig);
    w.u64(v.seq);
    w.u64(v.prev_seq);
    write_record(w, v.prev_record);
    write_auth(w, v.prev_auth);
  }

  static void encode_body(byte_writer& w, const commit_auth_msg& v) {
    w.u8(static_cast<std::uint8_t>(msg_kind::commit_auth));
    w.raw(view(v.authenticator));
    Ads::write_aux(w, v.aux);
    write_sig(w, v.auth_sig);
  }

  static void write_sig(byte_writer& w, const signature& s) {
    w.u32(s.signer);
    w.u8(static_cast<std::uint8_t>(s.scheme));
    w.blob(byte_view(s.value));
  }

  static signature read_sig(byte_reader& r) {
    signature s;
    s.signer = r.u32();
    std::uint8_t sch = r.u8();
    if (sch > 1) throw decode_error("unknown signature scheme");
    s.scheme = static_cast<sig_scheme>(sch);
    s.value = r.blob();
    return s;
  }

  static op_status read_status(byte_reader& r) {
    std::uint8_t z = r.u8();
    if (z > 1) throw decode_error("unknown operation status");
    return static_cast<op_status>(z);
  }

  static void write_record(byte_writer& w, const operation_record& rec) {
    Ads::write_operation(w, rec.op);
    w.u8(static_cast<std::uint8_t>(rec.status));
    write_sig(w, rec.commit_sig);
    w.u32(rec.client);
  }

  static operation_record read_record(byte_reader& r) {
    operation_record rec;
    rec.op = Ads::read_operation(r);
    rec.status = read_status(r);
    rec.commit_sig = read_sig(r);
    rec.client = r.u32();
    return rec;
  }

  static void write_pending(byte_writer& w, const pending_record& p) {
    Ads::write_operation(w, p.op);
    write_sig(w, p.invoke_sig);
    w.u32(p.client);
    w.u8(p.committed ? 1 : 0);
    if (p.committed) {
      w.u8(static_cast<std::uint8_t>(p.committed->first));
      write_sig(w, p.committed->second);
    }
  }

  static pending_record read_pending(byte_reader& r) {
    pending_record p;
    p.op = Ads::read_operation(r);
    p.invoke_sig = read_sig(r);
    p.client = r.u32();
    if (r.u8()) {
      op_status z = read_status(r);
      signature s = read_sig(r);
      p.committed = {z, s};
    }
    return p;
  }

  static void write_auth(byte_writer& w, const auth_record& a) {
    w.raw(view(a.authenticator));
    write_sig(w, a.auth_sig);
  }

  static auth_record read_auth(byte_reader& r) {
    auth_record a;
    a.authenticator = digest_from(byte_view(r.raw(32)));
    a.auth_sig = read_sig(r);
    return a;
  }
};

/// Canonical byte layouts covered by the hash chain and the three
/// signature domains.
template <class Ads>
  requires authenticated_data_structure<Ads>
struct aip_encoding {
  using operation = typename Ads::operation;

  /// H[l] = hash(H[l-1] || op || l || client), H[0] = null.
  static digest chain_entry(const digest& prev, const operation& op, std::uint64_t l,
                            client_id j) {
    byte_writer w;
    w.blob(view(prev));
    w.blob(byte_view(Ads::encode_operation(op)));
    w.u64(l);
    w.u32(j);
    return sha256(w);
  }

  static bytes invoke_payload(const operation& op, client_id j) {
    byte_writer w;
    w.blob(byte_view(Ads::encode_operation(op)));
    w.u32(j);
    return w.take();
  }

  static bytes commit_payload(std::uint64_t q, const operation& op, client_id j, op_status z,
                              const digest& chain) {
    byte_writer w;
    w.u64(q);
    w.blob(byte_view(Ads::encode_operation(op)));
    w.u32(j);
    w.u8(static_cast<std::uint8_t>(z));
    w.blob(view(chain));
    return w.take();
  }

  static bytes auth_payload(const operation& op, std::uint64_t q, const digest& chain,
                            const digest& authenticator) {
    byte_writer w;
    w.blob(byte_view(Ads::encode_operation(op)));
    w.u64(q);
    w.blob(view(chain));
    w.blob(view(authenticator));
    return w.take();
  }
};

inline constexpr std::string_view invoke_tag = "invoke";
inline constexpr std::string_view commit_tag = "commit";
inline constexpr std::string_view auth_tag = "auth";

/// The well-known records at sequence number zero.  They anchor the very
/// first view check (the cleared list always contains at least one entry)
/// and are derived deterministically from the group's key material at
/// setup time, signed by the reserved client id 0.
template <class Ads>
  requires authenticated_data_structure<Ads>
struct genesis {
  typename wire<Ads>::operation_record record;
  typename wire<Ads>::auth_record auth;

  static genesis make(const keyring& keys) {
    using enc = aip_encoding<Ads>;
    genesis g;
    auto op = Ads::genesis_operation();
    g.record.op = op;
    g.record.status = op_status::success;
    g.record.client = genesis_client;
    g.record.commit_sig = keys.sign(
        genesis_client, commit_tag,
        byte_view(enc::commit_payload(0, op, genesis_client, op_status::success, null_digest)));
    g.auth.authenticator = Ads::initial_authenticator();
    g.auth.auth_sig =
        keys.sign(genesis_client, auth_tag,
                  byte_view(enc::auth_payload(op, 0, null_digest, g.auth.authenticator)));
    return g;
  }
};

}  // namespace vicos
