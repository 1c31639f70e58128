#pragma once

#include <optional>
#include <random>

#include "vicos/adict.hpp"
#include "vicos/aip_client.hpp"
#include "vicos/cos.hpp"

namespace vicos {

/// Result of one object-store operation as seen by the application.
struct vicos_result {
  enum class kind : std::uint8_t { ok = 0, value = 1, keys = 2, absent = 3, aborted = 4 };

  kind k = kind::ok;
  bytes value;
  std::vector<bytes> keys;

  bool aborted() const { return k == kind::aborted; }
  bool operator==(const vicos_result&) const = default;
};

struct vicos_config {
  client_id id = 1;
  bool query_fast_path = false;
  bool prune_aborted = false;
  std::size_t max_object_size = 64ull << 20;
  /// Seed for nonce generation; 0 draws nonces from the system RNG.
  std::uint64_t nonce_seed = 0;
  typename aip_client_core<adict>::compat_relation compat;
};

/// Object-store client with transparent integrity verification.
///
/// Object bytes live in the (untrusted) object store under a
/// nonce-translated key; the dictionary protected by the integrity
/// protocol maps the logical key to the nonce and the object's hash.  A
/// read first resolves the authenticated record, then fetches and checks
/// the bytes; any mismatch raises a fault alarm rather than returning the
/// data.  Key translation keeps concurrent writers to the same key from
/// ever interfering in the object store.
///
/// Superseded and orphaned object versions (replaced values, deleted
/// keys, compensated aborts) are reclaimed by the explicit gc_orphans
/// maintenance pass, never inline: only the nonce makes a version safe to
/// delete, and only a quiesced sweep can tell stale versions from writes
/// still in flight.
///
/// Event-driven core, mirroring aip_client_core: one operation in flight,
/// fed by `on_message`, one result per completed operation.
class vicos_client_core {
 public:
  using aip = aip_client_core<adict>;

  /// Separates the logical key from the nonce; never occurs in a valid
  /// logical key.
  static constexpr std::uint8_t key_separator = 0x00;
  static constexpr std::size_t nonce_len = 16;

  struct step_result {
    std::vector<bytes> to_send;
    std::optional<vicos_result> completed;
  };

  vicos_client_core(vicos_config cfg, const keyring* keys, cos_backend* cos)
      : cfg_(cfg),
        cos_(cos),
        aip_({cfg.id, cfg.query_fast_path, cfg.prune_aborted}, keys, cfg.compat),
        nonce_rng_(cfg.nonce_seed) {}

  aip& protocol() { return aip_; }
  const aip& protocol() const { return aip_; }
  std::size_t outstanding_passive() const { return aip_.outstanding_passive(); }

  bool alarmed() const { return aip_.alarmed() || alarm_.has_value(); }
  const alarm_info& alarm() const { return alarm_ ? *alarm_ : aip_.alarm(); }
  bool in_flight() const { return pending_.has_value(); }
  client_id id() const { return cfg_.id; }

  static bool valid_key(const bytes& key) {
    if (key.empty() || key.size() > 1024) return false;
    for (std::uint8_t b : key)
      if (b == key_separator) return false;
    return true;
  }

  bytes begin_put(bytes key, bytes value) {
    precheck(key);
    if (value.size() > cfg_.max_object_size) throw storage_error("object too large");
    bytes nonce = make_nonce();
    bytes cos_key = translate(key, nonce);
    cos_->put(cos_key, byte_view(value));

    sha256_stream h;
    h.update(byte_view(value));
    bytes record = encode_record(nonce, h.finish());

    pending_ = in_flight_op{op_kind::put, key, std::move(cos_key)};
    return aip_.begin_invoke(adict::operation::make_put(std::move(key), std::move(record)));
  }

  bytes begin_get(bytes key) {
    precheck(key);
    pending_ = in_flight_op{op_kind::get, key, {}};
    return aip_.begin_invoke(adict::operation::make_get(std::move(key)));
  }

  /// Resolves only the authenticated record (nonce and object hash)
  /// without touching the object store; used by orphan collection.
  bytes begin_stat(bytes key) {
    precheck(key);
    pending_ = in_flight_op{op_kind::stat, key, {}};
    return aip_.begin_invoke(adict::operation::make_get(std::move(key)));
  }

  bytes begin_del(bytes key) {
    precheck(key);
    pending_ = in_flight_op{op_kind::del, key, {}};
    return aip_.begin_invoke(adict::operation::make_del(std::move(key)));
  }

  bytes begin_list() {
    if (alarmed()) throw fault_alarm(alarm());
    pending_ = in_flight_op{op_kind::list, {}, {}};
    return aip_.begin_invoke(adict::operation::make_list());
  }

  step_result on_message(byte_view raw) {
    auto aip_step = aip_.on_message(raw);
    step_result out;
    out.to_send = std::move(aip_step.to_send);
    if (!aip_step.completed) return out;

    if (!pending_) throw std::logic_error("protocol completion without a pending op");
    in_flight_op op = std::move(*pending_);
    pending_.reset();
    out.completed = finish(op, *aip_step.completed);  // nullopt when an alarm fired
    return out;
  }

 private:
  enum class op_kind : std::uint8_t { put, get, del, list, stat };

  struct in_flight_op {
    op_kind kind;
    bytes key;
    bytes cos_key;  // put only: for abort compensation
  };

  void precheck(const bytes& key) {
    if (alarmed()) throw fault_alarm(alarm());
    if (!valid_key(key)) throw storage_error("invalid object key");
  }

  std::optional<vicos_result> finish(const in_flight_op& op, const aip::completion& done) {
    if (done.status == op_status::aborted) {
      if (op.kind == op_kind::put) {
        // compensate: remove the object written optimistically
        try {
          cos_->del(op.cos_key);
        } catch (const storage_error&) {
          // best effort; gc-orphans cleans up stragglers
        }
      }
      return vicos_result{vicos_result::kind::aborted, {}, {}};
    }

    switch (op.kind) {
      case op_kind::put:
        return vicos_result{vicos_result::kind::ok, {}, {}};
      case op_kind::del:
        // superseded object versions stay in the store until gc_orphans.
        // Deleting them here would race with a concurrent put to the same
        // key whose object is already written but whose dictionary record
        // is sequenced after this delete; the sweep would destroy bytes
        // the dictionary still attests to and turn an honest schedule
        // into a false integrity violation.
        return vicos_result{vicos_result::kind::ok, {}, {}};
      case op_kind::list:
        return vicos_result{vicos_result::kind::keys, {}, done.resp.keys};
      case op_kind::stat: {
        if (done.resp.k == adict::response::kind::none)
          return vicos_result{vicos_result::kind::absent, {}, {}};
        if (!decode_record(done.resp.value)) {
          raise(alarm_kind::bad_proof, done.seq, "malformed object record");
          return std::nullopt;
        }
        return vicos_result{vicos_result::kind::value, done.resp.value, {}};
      }
      case op_kind::get: {
        if (done.resp.k == adict::response::kind::none)
          return vicos_result{vicos_result::kind::absent, {}, {}};
        auto rec = decode_record(done.resp.value);
        if (!rec) {
          raise(alarm_kind::bad_proof, done.seq, "malformed object record");
          return std::nullopt;
        }
        auto [nonce, expect] = *rec;
        auto value = cos_->get(translate(op.key, nonce));
        if (!value) {
          raise(alarm_kind::bad_proof, done.seq, "attested object missing from store");
          return std::nullopt;
        }
        sha256_stream h;
        h.update(byte_view(*value));
        if (h.finish() != expect) {
          raise(alarm_kind::bad_proof, done.seq, "object bytes do not match attested hash");
          return std::nullopt;
        }
        return vicos_result{vicos_result::kind::value, std::move(*value), {}};
      }
    }
    throw std::logic_error("unreachable");
  }

  void raise(alarm_kind k, std::uint64_t seq, std::string ctx) {
    if (!alarm_) alarm_ = alarm_info{k, seq, std::move(ctx)};
  }

  bytes make_nonce() {
    if (cfg_.nonce_seed == 0) return random_bytes(nonce_len);
    bytes n(nonce_len);
    for (auto& b : n) b = static_cast<std::uint8_t>(nonce_rng_());
    return n;
  }

 public:
  static bytes prefix_of(const bytes& key) {
    bytes p = key;
    p.push_back(key_separator);
    return p;
  }

  static bytes translate(const bytes& key, const bytes& nonce) {
    bytes t = prefix_of(key);
    bytes hex = to_bytes(to_hex(byte_view(nonce)));
    t.insert(t.end(), hex.begin(), hex.end());
    return t;
  }

  static bytes encode_record(const bytes& nonce, const digest& object_hash) {
    byte_writer w;
    w.blob(byte_view(nonce));
    w.raw(view(object_hash));
    return w.take();
  }

  static std::optional<std::pair<bytes, digest>> decode_record(const bytes& raw) {
    try {
      byte_reader r{byte_view(raw)};
      bytes nonce = r.blob();
      digest h = digest_from(byte_view(r.raw(32)));
      r.finish();
      if (nonce.size() != nonce_len) return std::nullopt;
      return {{std::move(nonce), h}};
    } catch (const decode_error&) {
      return std::nullopt;
    }
  }

 private:
  vicos_config cfg_;
  cos_backend* cos_;
  aip aip_;
  std::mt19937_64 nonce_rng_;
  std::optional<in_flight_op> pending_;
  std::optional<alarm_info> alarm_;
};

}  // namespace vicos
