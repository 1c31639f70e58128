#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "vicos/ads.hpp"
#include "vicos/fault.hpp"
#include "vicos/wire.hpp"

namespace vicos {

struct aip_client_config {
  client_id id = 1;
  /// Skip the passive phase for queries; replies then carry an explicit
  /// reference to the last state-modifying operation's authenticator.
  bool query_fast_path = false;
  /// Accept committed-status marks on pending entries and ignore verified
  /// aborted operations when testing compatibility.
  bool prune_aborted = false;
};

/// Client side of the integrity protocol: one serialized state machine per
/// client.  `begin_invoke` starts the active phase of one operation; every
/// inbound server message goes through `on_message`, which yields the
/// messages to send back and, for a reply, the verified operation result.
///
/// The client keeps no service state, only its hash chain over the global
/// operation sequence, the status map of operations it committed, and the
/// per-operation bookkeeping for the passive phase.  Every failed check
/// raises a sticky fault alarm, after which the client refuses all work.
template <class Ads>
  requires authenticated_data_structure<Ads>
class aip_client_core {
 public:
  using w = wire<Ads>;
  using enc = aip_encoding<Ads>;
  using operation = typename Ads::operation;
  using response = typename Ads::response;
  using compat_relation = std::function<bool(const operation&, const operation&)>;

  struct completion {
    response resp;
    std::uint64_t seq = 0;
    op_status status = op_status::success;
  };

  struct step_result {
    std::vector<bytes> to_send;
    std::optional<completion> completed;
  };

  /// Entry of the client's cleared view, for offline consistency checks.
  struct view_entry {
    bytes op_encoding;
    client_id client = 0;
    op_status status = op_status::success;
    bool operator==(const view_entry&) const = default;
  };

  struct own_op_record {
    std::uint64_t seq = 0;
    operation op;
    op_status status = op_status::success;
    response resp;
  };

  aip_client_core(aip_client_config cfg, const keyring* keys,
                  compat_relation compat = {})
      : cfg_(cfg), keys_(keys), compat_(std::move(compat)) {
    if (!compat_) compat_ = [](const operation& p, const operation& c) {
      return Ads::compatible_pair(p, c);
    };
    chain_[0] = null_digest;
  }

  bool in_flight() const { return current_.has_value(); }
  bool alarmed() const { return alarm_.has_value(); }
  const alarm_info& alarm() const { return *alarm_; }
  client_id id() const { return cfg_.id; }

  const std::map<std::uint64_t, view_entry>& cleared_view() const { return view_; }
  const std::vector<own_op_record>& own_ops() const { return own_ops_; }

  /// Own operations still awaiting their background authentication round
  /// trip.  A correct client stays reachable until this drops to zero;
  /// abandoning it stalls the whole group's passive phase.
  std::size_t outstanding_passive() const { return awaiting_passive_.size(); }

  /// Starts the active phase; returns the encoded invoke message.
  bytes begin_invoke(const operation& op) {
    if (alarm_) throw fault_alarm(*alarm_);
    if (current_) throw std::logic_error("operation already in flight");
    current_ = op;
    signature tau =
        keys_->sign(cfg_.id, invoke_tag, byte_view(enc::invoke_payload(op, cfg_.id)));
    typename w::invoke_msg m{op, tau, cleared_};
    return w::encode(typename w::message(std::move(m)));
  }

  step_result on_message(byte_view raw) {
    if (alarm_) return {};
    typename w::message m;
    try {
      m = w::decode(raw);
    } catch (const decode_error& e) {
      raise(alarm_kind::protocol_order, 0, std::string("garbled server message: ") + e.what());
      return {};
    }
    step_result out;
    try {
      if (auto* reply = std::get_if<typename w::reply_msg>(&m)) {
        handle_reply(*reply, out);
      } else if (auto* ua = std::get_if<typename w::update_auth_msg>(&m)) {
        handle_update_auth(*ua, out);
      } else {
        raise(alarm_kind::protocol_order, 0, "unexpected message kind from server");
      }
    } catch (const check_failed&) {
      return {};  // alarm already recorded; nothing is sent
    }
    return out;
  }

 private:
  struct check_failed {};

  [[noreturn]] void fail(alarm_kind k, std::uint64_t seq, std::string ctx) {
    raise(k, seq, std::move(ctx));
    throw check_failed{};
  }

  void raise(alarm_kind k, std::uint64_t seq, std::string ctx) {
    if (!alarm_) alarm_ = alarm_info{k, seq, std::move(ctx)};
  }

  // hash chain --------------------------------------------------------

  bool extend_chain(const operation& op, std::uint64_t l, client_id j) {
    if (l == 0)  // the genesis record is pinned, never recomputed
      return op == Ads::genesis_operation() && j == genesis_client;
    auto prev = chain_.find(l - 1);
    if (prev == chain_.end())
      fail(alarm_kind::protocol_order, l, "hash chain entry missing below position");
    digest expect = enc::chain_entry(prev->second, op, l, j);
    auto [it, fresh] = chain_.emplace(l, expect);
    return fresh || it->second == expect;
  }

  const digest& chain_at(std::uint64_t l) {
    auto it = chain_.find(l);
    if (it == chain_.end())
      fail(alarm_kind::protocol_order, l, "hash chain entry unavailable");
    return it->second;
  }

  // active phase ------------------------------------------------------

  void handle_reply(const typename w::reply_msg& msg, step_result& out) {
    if (!current_)
      fail(alarm_kind::protocol_order, msg.seq, "reply without an operation in flight");

    check_view(msg);
    check_pending(msg.pending);

    const std::uint64_t t = msg.applied + msg.pending.size();
    if (msg.seq != t)
      fail(alarm_kind::protocol_order, msg.seq, "sequence number disagrees with pending list");

    // split pending into own successful operations (ending with the
    // current one) and the pending-other tail that gates compatibility
    std::vector<operation> mu;
    std::vector<const typename w::pending_record*> gamma;
    for (std::size_t k = 0; k < msg.pending.size(); ++k) {
      const auto& rec = msg.pending[k];
      const std::uint64_t l = msg.applied + k + 1;
      if (rec.client == cfg_.id) {
        if (k + 1 == msg.pending.size()) {
          mu.push_back(rec.op);
        } else {
          auto z = status_.find(l);
          if (z == status_.end())
            fail(alarm_kind::protocol_order, l, "own pending operation with unknown status");
          if (z->second == op_status::success) mu.push_back(rec.op);
        }
      } else {
        gamma.push_back(&rec);
      }
    }

    bool compatible = true;
    for (const auto* rec : gamma) {
      if (cfg_.prune_aborted && rec->committed &&
          rec->committed->first == op_status::aborted)
        continue;  // verified aborted; cannot conflict
      if (!compat_(rec->op, *current_)) {
        compatible = false;
        break;
      }
    }

    // the response and its proof cover only own operations, so they must
    // verify whether or not the pending-other tail forces an abort
    auto res = Ads::authexec(std::span<const operation>(mu), msg.alpha.authenticator,
                             msg.resp, msg.aux);
    if (!res.valid) fail(alarm_kind::bad_proof, t, "response verification failed");

    response result;
    op_status z;
    if (compatible) {
      z = op_status::success;
      result = msg.resp;
    } else {
      z = op_status::aborted;
      result = response::abort();
    }
    status_[t] = z;

    const digest& ht = chain_at(t);
    signature phi = keys_->sign(
        cfg_.id, commit_tag, byte_view(enc::commit_payload(t, *current_, cfg_.id, z, ht)));
    typename w::commit_msg cm{*current_, t, z, phi};
    out.to_send.push_back(w::encode(typename w::message(std::move(cm))));

    own_ops_.push_back(own_op_record{t, *current_, z, result});
    pending_auth_floor_[t] = last_auth_seq_;
    if (!cfg_.query_fast_path ||
        (z == op_status::success && !Ads::is_query(*current_)))
      awaiting_passive_.insert(t);
    current_.reset();
    out.completed = completion{std::move(result), t, z};

    collect_garbage();
  }

  void check_view(const typename w::reply_msg& msg) {
    const auto& delta = msg.cleared;
    const std::uint64_t b = msg.applied;
    if (delta.empty()) fail(alarm_kind::protocol_order, b, "empty cleared list");
    if (b < cleared_)
      fail(alarm_kind::protocol_order, b, "applied sequence number went backwards");

    // when fully up to date the server resends the record at position b
    // itself, so the list always has at least one verifiable entry; in
    // either shape the list ends exactly at the applied position
    const std::uint64_t first_pos = (b == cleared_) ? cleared_ : cleared_ + 1;
    if (first_pos + delta.size() - 1 != b)
      fail(alarm_kind::protocol_order, b, "cleared list does not end at the applied op");
    for (std::size_t k = 0; k < delta.size(); ++k) {
      const std::uint64_t l = first_pos + k;
      const auto& rec = delta[k];
      if (!extend_chain(rec.op, l, rec.client))
        fail(alarm_kind::hash_chain_mismatch, l, "cleared operation conflicts with view");
      if (!keys_->verify(rec.client, commit_tag,
                         byte_view(enc::commit_payload(l, rec.op, rec.client, rec.status,
                                                       chain_at(l))),
                         rec.commit_sig))
        fail(alarm_kind::bad_signature, l, "commit signature in cleared list");
      view_[l] = view_entry{Ads::encode_operation(rec.op), rec.client, rec.status};
    }

    // the signed authenticator: by default it belongs to the operation at
    // position b (the last cleared entry); with the query fast path the
    // server references the last state-modifying operation explicitly
    std::uint64_t auth_seq = b;
    const typename w::operation_record* auth_rec = &delta.back();
    if (cfg_.query_fast_path) {
      if (!msg.auth_ref)
        fail(alarm_kind::protocol_order, b, "missing authenticator reference");
      auth_seq = msg.auth_ref->first;
      auth_rec = &msg.auth_ref->second;
      if (auth_seq > b)
        fail(alarm_kind::protocol_order, auth_seq, "authenticator ahead of applied ops");
      if (auth_seq < last_auth_seq_)
        fail(alarm_kind::protocol_order, auth_seq, "authenticator reference went backwards");
      if (auth_seq > 0 &&
          !keys_->verify(auth_rec->client, commit_tag,
                         byte_view(enc::commit_payload(auth_seq, auth_rec->op,
                                                       auth_rec->client, auth_rec->status,
                                                       chain_at(auth_seq))),
                         auth_rec->commit_sig))
        fail(alarm_kind::bad_signature, auth_seq, "commit signature of authenticator ref");
    } else if (msg.auth_ref) {
      fail(alarm_kind::protocol_order, b, "unexpected authenticator reference");
    }

    if (!keys_->verify(auth_rec->client, auth_tag,
                       byte_view(enc::auth_payload(auth_rec->op, auth_seq,
                                                   chain_at(auth_seq),
                                                   msg.alpha.authenticator)),
                       msg.alpha.auth_sig))
      fail(alarm_kind::bad_signature, auth_seq, "authenticator signature");

    cleared_ = first_pos + delta.size() - 1;
    last_auth_seq_ = std::max(last_auth_seq_, auth_seq);
  }

  void check_pending(const std::vector<typename w::pending_record>& omega) {
    if (omega.empty()) fail(alarm_kind::bad_pending, cleared_, "empty pending list");
    for (std::size_t k = 0; k < omega.size(); ++k) {
      const std::uint64_t l = cleared_ + k + 1;
      const auto& rec = omega[k];
      if (!extend_chain(rec.op, l, rec.client))
        fail(alarm_kind::hash_chain_mismatch, l, "pending operation conflicts with view");
      if (!keys_->verify(rec.client, invoke_tag,
                         byte_view(enc::invoke_payload(rec.op, rec.client)), rec.invoke_sig))
        fail(alarm_kind::bad_signature, l, "invoke signature in pending list");
      if (rec.committed) {
        if (!cfg_.prune_aborted)
          fail(alarm_kind::protocol_order, l, "unexpected committed mark on pending entry");
        if (!keys_->verify(rec.client, commit_tag,
                           byte_view(enc::commit_payload(l, rec.op, rec.client,
                                                         rec.committed->first, chain_at(l))),
                           rec.committed->second))
          fail(alarm_kind::bad_signature, l, "commit signature on pending mark");
      }
    }
    const auto& last = omega.back();
    if (!(last.op == *current_) || last.client != cfg_.id)
      fail(alarm_kind::bad_pending, cleared_ + omega.size(),
           "pending list does not end with own operation");
  }

  // passive phase -----------------------------------------------------

  void handle_update_auth(const typename w::update_auth_msg& msg, step_result& out) {
    const std::uint64_t q = msg.seq;
    auto z = status_.find(q);
    if (z == status_.end())
      fail(alarm_kind::protocol_order, q, "authentication request for unknown operation");

    if (!keys_->verify(cfg_.id, commit_tag,
                       byte_view(enc::commit_payload(q, msg.op, cfg_.id, z->second,
                                                     chain_at(q))),
                       msg.commit_sig))
      fail(alarm_kind::bad_signature, q, "own commit signature in update-auth");

    if (cfg_.query_fast_path) {
      if (msg.prev_seq >= q)
        fail(alarm_kind::protocol_order, q, "predecessor not before operation");
      auto floor = pending_auth_floor_.find(q);
      if (floor != pending_auth_floor_.end() && msg.prev_seq < floor->second)
        fail(alarm_kind::protocol_order, q, "stale predecessor authenticator");
    } else if (msg.prev_seq + 1 != q) {
      fail(alarm_kind::protocol_order, q, "predecessor must be the previous position");
    }

    if (!keys_->verify(msg.prev_record.client, auth_tag,
                       byte_view(enc::auth_payload(msg.prev_record.op, msg.prev_seq,
                                                   chain_at(msg.prev_seq),
                                                   msg.prev_auth.authenticator)),
                       msg.prev_auth.auth_sig))
      fail(alarm_kind::bad_signature, q, "predecessor authenticator signature");

    digest next_auth = msg.prev_auth.authenticator;
    typename Ads::aux_data refresh_aux{};
    if (z->second == op_status::success) {
      std::vector<operation> ops{msg.op};
      auto res = Ads::authexec(std::span<const operation>(ops),
                               msg.prev_auth.authenticator, msg.resp, msg.aux);
      if (!res.valid)
        fail(alarm_kind::bad_proof, q, "authentication of own operation failed");
      next_auth = res.authenticator;
      refresh_aux = std::move(res.refresh_aux);
    } else {
      // an aborted operation carries no result; anything else is noise
      // from a misbehaving server
      if (Ads::encode_response(msg.resp) !=
              Ads::encode_response(typename Ads::response{}) ||
          Ads::encode_aux(msg.aux) != Ads::encode_aux(typename Ads::aux_data{}))
        fail(alarm_kind::protocol_order, q, "payload on an aborted operation");
    }

    signature psi = keys_->sign(
        cfg_.id, auth_tag,
        byte_view(enc::auth_payload(msg.op, q, chain_at(q), next_auth)));
    typename w::commit_auth_msg cm{next_auth, std::move(refresh_aux), psi};
    out.to_send.push_back(w::encode(typename w::message(std::move(cm))));
    pending_auth_floor_.erase(q);
    awaiting_passive_.erase(q);
  }

  // ---------------------------------------------------------------------

  void collect_garbage() {
    // passive phases at or below the cleared pointer have completed
    pending_auth_floor_.erase(pending_auth_floor_.begin(),
                              pending_auth_floor_.upper_bound(cleared_));
    awaiting_passive_.erase(awaiting_passive_.begin(),
                            awaiting_passive_.upper_bound(cleared_));
    // entries strictly below cleared_-1 are never consulted again; with
    // the fast path on, old chain entries may still authenticate a later
    // reference, so everything is kept (fine at this scale)
    if (cfg_.query_fast_path || cleared_ < 2) return;
    const std::uint64_t floor = cleared_ - 1;
    chain_.erase(chain_.begin(), chain_.lower_bound(floor));
    status_.erase(status_.begin(), status_.lower_bound(floor));
  }

  aip_client_config cfg_;
  const keyring* keys_;
  compat_relation compat_;

  std::uint64_t cleared_ = 0;  // c: sequence number of the last cleared op
  std::map<std::uint64_t, digest> chain_;       // H
  std::map<std::uint64_t, op_status> status_;   // Z
  std::optional<operation> current_;            // u
  std::uint64_t last_auth_seq_ = 0;
  std::map<std::uint64_t, std::uint64_t> pending_auth_floor_;
  std::set<std::uint64_t> awaiting_passive_;

  std::optional<alarm_info> alarm_;
  std::map<std::uint64_t, view_entry> view_;
  std::vector<own_op_record> own_ops_;
};

}  // namespace vicos
