#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "vicos/adict.hpp"
#include "vicos/aip_client.hpp"

namespace vicos {

/// One completed operation as observed at a client, with logical
/// timestamps for real-time ordering (invoke happened-before response).
struct kvs_event {
  enum class op : std::uint8_t { put = 0, get = 1, del = 2, list = 3 };

  client_id client = 0;
  std::uint64_t invoke_ts = 0;
  std::uint64_t response_ts = 0;

  op kind = op::put;
  bytes key;
  bytes value;  // put argument

  bool aborted = false;
  bool found = false;           // get: value present
  bytes got_value;              // get
  std::vector<bytes> got_keys;  // list
};

enum class lin_verdict : std::uint8_t { linearizable, not_linearizable, inconclusive };

/// Exhaustive linearizability check against a plain map, in the style of
/// Wing & Gong: pick any pending operation whose invocation precedes every
/// unlinearized response, apply it, compare outputs, backtrack on
/// mismatch.  Memoizes (linearized-set, state) pairs; gives up with
/// `inconclusive` once the node budget is exhausted, which is distinct
/// from a refutation.
class linearizability_checker {
 public:
  explicit linearizability_checker(std::size_t node_budget = 2'000'000)
      : budget_(node_budget) {}

  lin_verdict check(std::vector<kvs_event> events) {
    events_ = std::move(events);
    std::sort(events_.begin(), events_.end(), [](const kvs_event& a, const kvs_event& b) {
      return a.invoke_ts < b.invoke_ts;
    });
    if (events_.size() > 512) return lin_verdict::inconclusive;
    nodes_ = 0;
    memo_.clear();
    std::vector<bool> done(events_.size(), false);
    std::map<bytes, bytes> state;
    exhausted_ = false;
    bool ok = search(done, 0, state);
    if (ok) return lin_verdict::linearizable;
    return exhausted_ ? lin_verdict::inconclusive : lin_verdict::not_linearizable;
  }

 private:
  bool search(std::vector<bool>& done, std::size_t n_done, std::map<bytes, bytes>& state) {
    if (n_done == events_.size()) return true;
    if (++nodes_ > budget_) {
      exhausted_ = true;
      return false;
    }
    if (!memo_.emplace(fingerprint(done, state)).second) return false;

    // an operation may linearize next only if no unlinearized operation
    // responded before it was invoked
    std::uint64_t min_response = UINT64_MAX;
    for (std::size_t i = 0; i < events_.size(); ++i)
      if (!done[i]) min_response = std::min(min_response, events_[i].response_ts);

    for (std::size_t i = 0; i < events_.size(); ++i) {
      if (done[i]) continue;
      const kvs_event& e = events_[i];
      if (e.invoke_ts > min_response) break;  // sorted by invoke_ts

      if (e.aborted) {
        // aborted operations take no effect
        done[i] = true;
        if (search(done, n_done + 1, state)) return true;
        done[i] = false;
        continue;
      }

      switch (e.kind) {
        case kvs_event::op::put: {
          auto it = state.find(e.key);
          bytes saved;
          bool existed = it != state.end();
          if (existed) saved = it->second;
          state[e.key] = e.value;
          done[i] = true;
          if (search(done, n_done + 1, state)) return true;
          done[i] = false;
          if (existed)
            state[e.key] = saved;
          else
            state.erase(e.key);
          break;
        }
        case kvs_event::op::del: {
          auto it = state.find(e.key);
          bytes saved;
          bool existed = it != state.end();
          if (existed) {
            saved = it->second;
            state.erase(it);
          }
          done[i] = true;
          if (search(done, n_done + 1, state)) return true;
          done[i] = false;
          if (existed) state[e.key] = saved;
          break;
        }
        case kvs_event::op::get: {
          auto it = state.find(e.key);
          bool matches = it == state.end() ? !e.found : (e.found && it->second == e.got_value);
          if (!matches) continue;
          done[i] = true;
          if (search(done, n_done + 1, state)) return true;
          done[i] = false;
          break;
        }
        case kvs_event::op::list: {
          if (e.got_keys.size() != state.size()) continue;
          bool matches = true;
          std::size_t k = 0;
          for (const auto& [key, v] : state)
            if (e.got_keys[k++] != key) {
              matches = false;
              break;
            }
          if (!matches) continue;
          done[i] = true;
          if (search(done, n_done + 1, state)) return true;
          done[i] = false;
          break;
        }
      }
    }
    return false;
  }

  digest fingerprint(const std::vector<bool>& done, const std::map<bytes, bytes>& state) {
    byte_writer w;
    std::uint64_t acc = 0;
    for (std::size_t i = 0; i < done.size(); ++i) {
      acc = acc << 1 | (done[i] ? 1 : 0);
      if (i % 64 == 63) {
        w.u64(acc);
        acc = 0;
      }
    }
    w.u64(acc);
    for (const auto& [k, v] : state) {
      w.blob(byte_view(k));
      w.blob(byte_view(v));
    }
    return sha256(w);
  }

  std::vector<kvs_event> events_;
  std::size_t budget_;
  std::size_t nodes_ = 0;
  bool exhausted_ = false;
  std::set<digest> memo_;
};

inline lin_verdict check_linearizable(std::vector<kvs_event> events,
                                      std::size_t node_budget = 2'000'000) {
  return linearizability_checker(node_budget).check(std::move(events));
}

/// Everything one client has accepted about the global operation order:
/// its cleared view plus the operations it executed itself.
struct client_observation {
  client_id id = 0;
  std::map<std::uint64_t, aip_client_core<adict>::view_entry> cleared;
  std::vector<aip_client_core<adict>::own_op_record> own;
};

inline client_observation observe(const aip_client_core<adict>& c) {
  return client_observation{c.id(), c.cleared_view(), c.own_ops()};
}

/// Fork-linearizability of recorded views:
///  (1) every client's cleared view is a contiguous prefix that replays
///      correctly against the dictionary semantics, including the
///      responses of the client's own operations; and
///  (2) for any position present in two views with the same operation,
///      the two views agree on every earlier position — diverged views
///      never rejoin.
inline bool check_fork_linearizable(const std::vector<client_observation>& obs) {
  for (const client_observation& o : obs) {
    // the view is a contiguous prefix; position 0 (the well-known genesis
    // record) only appears for clients that cleared from the very start
    if (!o.cleared.empty() && o.cleared.begin()->first > 1) return false;
    std::uint64_t expect = o.cleared.empty() ? 0 : o.cleared.begin()->first;
    for (const auto& [l, e] : o.cleared)
      if (l != expect++) return false;

    std::map<std::uint64_t, const aip_client_core<adict>::own_op_record*> own_at;
    for (const auto& rec : o.own) own_at[rec.seq] = &rec;

    adict::state replay;
    for (const auto& [l, e] : o.cleared) {
      if (l == 0) continue;  // genesis
      adict::operation op = adict::decode_operation(byte_view(e.op_encoding));
      adict::response expect_resp;
      switch (op.kind) {
        case adict::op_kind::get: {
          auto it = replay.entries.find(op.key);
          expect_resp = it == replay.entries.end()
                            ? adict::response::none()
                            : adict::response::of_value(it->second.value);
          break;
        }
        case adict::op_kind::list: {
          std::vector<bytes> keys;
          for (const auto& [k, v] : replay.entries) keys.push_back(k);
          expect_resp = adict::response::of_keys(std::move(keys));
          break;
        }
        default:
          expect_resp = adict::response::none();
      }
      if (e.status == op_status::success) adict::apply(replay, op);

      auto mine = own_at.find(l);
      if (mine != own_at.end()) {
        const auto& rec = *mine->second;
        if (!(rec.op == op)) return false;
        if (rec.status != e.status) return false;
        if (rec.status == op_status::success && !(rec.resp == expect_resp)) return false;
      }
    }
  }

  // pairwise prefix agreement
  for (std::size_t a = 0; a < obs.size(); ++a) {
    for (std::size_t b = a + 1; b < obs.size(); ++b) {
      const auto& va = obs[a].cleared;
      const auto& vb = obs[b].cleared;
      std::uint64_t diverged_at = UINT64_MAX;
      for (const auto& [l, ea] : va) {
        auto it = vb.find(l);
        if (it == vb.end()) continue;
        if (ea == it->second) {
          if (l > diverged_at) return false;  // views rejoined after diverging
        } else if (l < diverged_at) {
          diverged_at = l;
        }
      }
    }
  }
  return true;
}

}  // namespace vicos
