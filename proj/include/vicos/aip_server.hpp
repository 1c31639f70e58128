#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "vicos/ads.hpp"
#include "vicos/wire.hpp"

namespace vicos {

struct aip_server_config {
  bool query_fast_path = false;
  bool prune_aborted = false;
  /// Maximum number of pending operations; further invokes are buffered
  /// until the passive phase catches up.
  std::size_t pending_limit = 128;
  /// Number of participating clients (ids 1..n).  Needed for garbage
  /// collection of the committed-operation map: an entry may only go away
  /// once every client has cleared past it.  Unset disables that GC.
  std::optional<client_id> client_count;
};

/// Server side of the integrity protocol.  A single serialized state
/// machine: transports may receive concurrently but must feed messages to
/// `on_message` one at a time (see intake_queue for the preferred order).
///
/// The server assigns the global operation order, answers invokes with the
/// cleared and pending lists, and drives the passive phase strictly in
/// sequence-number order.  It holds the only copy of the service state,
/// which it may update exclusively via refresh once the operation's client
/// has returned a signed authenticator.
template <class Ads>
  requires authenticated_data_structure<Ads>
class aip_server_core {
 public:
  using w = wire<Ads>;
  using enc = aip_encoding<Ads>;
  using operation = typename Ads::operation;

  struct outbound {
    client_id to = 0;
    bytes payload;
  };

  /// One applied operation, as written to the optional append-only log.
  struct applied_record {
    std::uint64_t seq = 0;
    typename w::operation_record record;
    typename w::auth_record auth;
  };
  using apply_hook = std::function<void(const applied_record&)>;

  aip_server_core(aip_server_config cfg, const keyring* keys, genesis<Ads> g)
      : cfg_(cfg), keys_(keys) {
    committed_[0] = g.record;
    auths_[0] = g.auth;
    state_ = Ads::initial_state();
  }

  void set_apply_hook(apply_hook h) { on_apply_ = std::move(h); }

  std::vector<outbound> on_message(client_id from, byte_view raw) {
    typename w::message m = w::decode(raw);  // decode_error propagates: drop caller
    std::vector<outbound> out;
    if (auto* inv = std::get_if<typename w::invoke_msg>(&m)) {
      handle_invoke(from, *inv, out);
    } else if (auto* cm = std::get_if<typename w::commit_msg>(&m)) {
      handle_commit(from, *cm, out);
    } else if (auto* ca = std::get_if<typename w::commit_auth_msg>(&m)) {
      handle_commit_auth(from, *ca, out);
    }
    // anything else is not a client message; ignore
    return out;
  }

  // introspection -----------------------------------------------------

  std::uint64_t last_assigned() const { return next_seq_; }
  std::uint64_t last_applied() const { return applied_; }
  std::size_t pending_count() const { return next_seq_ - applied_; }
  std::size_t buffered_invokes() const { return buffered_.size(); }

  /// The authentication round trip currently in flight, if any; used to
  /// retransmit towards a reconnecting client.
  const std::optional<outbound>& pending_update_auth() const { return last_update_auth_; }
  const typename Ads::state& state() const { return state_; }
  std::size_t committed_entries() const { return committed_.size(); }
  bool has_committed(std::uint64_t q) const { return committed_.count(q) != 0; }

  /// Replays one record from the append-only log at startup.
  void restore(const applied_record& rec) {
    if (rec.seq != applied_ + 1) throw std::logic_error("log replay out of order");
    committed_[rec.seq] = rec.record;
    auths_[rec.seq] = rec.auth;
    applied_ = next_seq_ = rec.seq;
    if (rec.record.status == op_status::success) {
      typename Ads::aux_data aux;
      aux.post_root = rec.auth.authenticator;
      Ads::refresh(state_, rec.record.op, aux);
      if (!Ads::is_query(rec.record.op)) modified_ = rec.seq;
    }
  }

 private:
  void handle_invoke(client_id from, const typename w::invoke_msg& m,
                     std::vector<outbound>& out) {
    if (keys_->can_verify() &&
        !keys_->verify(from, invoke_tag, byte_view(enc::invoke_payload(m.op, from)),
                       m.invoke_sig))
      return;  // a correct client never sends this; drop
    if (m.cleared > applied_) return;  // impossible for a correct client
    cleared_ptr_[from] = std::max(cleared_ptr_[from], m.cleared);

    if (pending_count() >= cfg_.pending_limit) {
      buffered_.push_back({from, m});
      return;
    }
    admit(from, m, out);
  }

  void admit(client_id from, const typename w::invoke_msg& m, std::vector<outbound>& out) {
    const std::uint64_t t = ++next_seq_;
    invoked_[t] = typename w::pending_record{m.op, m.invoke_sig, from, std::nullopt};

    typename w::reply_msg reply;
    reply.applied = applied_;
    reply.seq = t;

    // cleared list: everything this client missed, or a resend of the
    // record at the applied position when it missed nothing
    if (applied_ == m.cleared) {
      reply.cleared.push_back(committed_.at(applied_));
    } else {
      for (std::uint64_t l = m.cleared + 1; l <= applied_; ++l)
        reply.cleared.push_back(committed_.at(l));
    }

    // pending list: every invoked but not yet applied operation
    std::vector<operation> mu;
    for (std::uint64_t l = applied_ + 1; l <= t; ++l) {
      typename w::pending_record rec = invoked_.at(l);
      auto committed = committed_.find(l);
      if (cfg_.prune_aborted && committed != committed_.end())
        rec.committed = {committed->second.status, committed->second.commit_sig};
      if (rec.client == from) {
        if (l == t) {
          mu.push_back(rec.op);
        } else {
          // FIFO order guarantees the client committed this earlier op
          // before invoking the current one
          if (committed == committed_.end())
            throw std::logic_error("pending-self operation without commit record");
          if (committed->second.status == op_status::success) mu.push_back(rec.op);
        }
      }
      reply.pending.push_back(std::move(rec));
    }

    auto [resp, aux] = Ads::query(state_, std::span<const operation>(mu));
    reply.resp = std::move(resp);
    reply.aux = std::move(aux);

    if (cfg_.query_fast_path) {
      reply.alpha = auths_.at(modified_);
      reply.auth_ref = {modified_, committed_.at(modified_)};
    } else {
      reply.alpha = auths_.at(applied_);
    }

    out.push_back(outbound{from, w::encode(typename w::message(std::move(reply)))});
  }

  void handle_commit(client_id from, const typename w::commit_msg& m,
                     std::vector<outbound>& out) {
    if (m.seq == 0 || m.seq > next_seq_) return;
    committed_[m.seq] =
        typename w::operation_record{m.op, m.status, m.commit_sig, from};
    pump(out);
  }

  void handle_commit_auth(client_id from, const typename w::commit_auth_msg& m,
                          std::vector<outbound>& out) {
    if (!awaiting_auth_ || committed_.at(applied_ + 1).client != from) return;
    awaiting_auth_ = false;
    last_update_auth_.reset();
    applied_ += 1;
    auths_[applied_] = typename w::auth_record{m.authenticator, m.auth_sig};
    const auto& rec = committed_.at(applied_);
    if (rec.status == op_status::success) {
      Ads::refresh(state_, rec.op, m.aux);
      if (!Ads::is_query(rec.op)) modified_ = applied_;
    }
    if (on_apply_) on_apply_(applied_record{applied_, rec, auths_.at(applied_)});
    invoked_.erase(applied_);
    collect_garbage();
    pump(out);
  }

  /// Drives the passive phase in assigned order and admits buffered
  /// invokes as the pending count drops.
  void pump(std::vector<outbound>& out) {
    while (true) {
      auto next = committed_.find(applied_ + 1);
      if (next == committed_.end() || awaiting_auth_) break;
      const auto& rec = next->second;

      if (cfg_.query_fast_path &&
          (rec.status == op_status::aborted || Ads::is_query(rec.op))) {
        // no state change: apply immediately, no passive round trip
        applied_ += 1;
        if (on_apply_)
          on_apply_(applied_record{applied_, rec, auths_.at(modified_)});
        invoked_.erase(applied_);
        collect_garbage();
        continue;
      }

      typename w::update_auth_msg ua;
      ua.op = rec.op;
      ua.commit_sig = rec.commit_sig;
      ua.seq = applied_ + 1;
      if (rec.status == op_status::success) {
        std::vector<operation> single{rec.op};
        auto [resp, aux] = Ads::query(state_, std::span<const operation>(single));
        ua.resp = std::move(resp);
        ua.aux = std::move(aux);
      }
      const std::uint64_t prev = cfg_.query_fast_path ? modified_ : applied_;
      ua.prev_seq = prev;
      ua.prev_record = committed_.at(prev);
      ua.prev_auth = auths_.at(prev);
      outbound msg{rec.client, w::encode(typename w::message(std::move(ua)))};
      last_update_auth_ = msg;
      out.push_back(std::move(msg));
      awaiting_auth_ = true;
      break;
    }

    while (!buffered_.empty() && pending_count() < cfg_.pending_limit) {
      auto [from, m] = std::move(buffered_.front());
      buffered_.pop_front();
      admit(from, m, out);
    }
  }

  void collect_garbage() {
    // authenticators: only the applied and last-modified positions are
    // ever served again
    const std::uint64_t keep_auth = std::min(applied_, modified_);
    auths_.erase(auths_.begin(), auths_.lower_bound(keep_auth));

    // committed records: needed until every client cleared past them
    if (!cfg_.client_count) return;
    std::uint64_t floor = applied_;
    for (client_id i = 1; i <= *cfg_.client_count; ++i) {
      auto it = cleared_ptr_.find(i);
      floor = std::min(floor, it == cleared_ptr_.end() ? 0 : it->second);
    }
    floor = std::min({floor, modified_});
    committed_.erase(committed_.begin(), committed_.lower_bound(floor));
  }

  aip_server_config cfg_;
  const keyring* keys_;

  std::uint64_t next_seq_ = 0;  // t: last assigned sequence number
  std::uint64_t applied_ = 0;   // b: last applied sequence number
  std::uint64_t modified_ = 0;  // d: last state-modifying applied op
  bool awaiting_auth_ = false;  // update-auth for applied_+1 is in flight
  std::optional<outbound> last_update_auth_;

  std::map<std::uint64_t, typename w::pending_record> invoked_;     // I
  std::map<std::uint64_t, typename w::operation_record> committed_; // O
  std::map<std::uint64_t, typename w::auth_record> auths_;          // A
  typename Ads::state state_;                                       // s

  std::deque<std::pair<client_id, typename w::invoke_msg>> buffered_;
  std::map<client_id, std::uint64_t> cleared_ptr_;
  apply_hook on_apply_;
};

}  // namespace vicos
