#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "vicos/aip_server.hpp"
#include "vicos/cos.hpp"
#include "vicos/history.hpp"
#include "vicos/transport.hpp"
#include "vicos/vicos_client.hpp"

namespace vicos {

/// One object-store operation in a scripted workload.
struct vicos_op {
  enum class kind : std::uint8_t { put = 0, get = 1, del = 2, list = 3 };
  kind k = kind::get;
  bytes key;
  bytes value;

  static vicos_op put(bytes key, bytes value) {
    return {kind::put, std::move(key), std::move(value)};
  }
  static vicos_op get(bytes key) { return {kind::get, std::move(key), {}}; }
  static vicos_op del(bytes key) { return {kind::del, std::move(key), {}}; }
  static vicos_op list() { return {kind::list, {}, {}}; }
};

struct sim_config {
  std::uint64_t seed = 1;
  unsigned n_clients = 2;
  bool query_fast_path = false;
  bool prune_aborted = false;
  std::size_t pending_limit = 128;
  /// Swap the compatibility relation for the commutativity baseline.
  bool commutative_mode = false;
  /// Scheduler steps a client stays busy after completing an operation,
  /// modeling the object transfer time that dominates real deployments.
  /// Zero saturates the server: the pending window then runs at its limit
  /// and most contended reads abort.
  std::uint64_t client_busy_steps = 0;
  std::size_t max_steps = 50'000'000;
};

/// Deterministic in-process execution of clients and server(s): a seeded
/// scheduler picks one enabled event per step (deliver a message to the
/// server, deliver a message to a client, or let an idle client start its
/// next scripted operation), so every interleaving is reproducible from
/// the seed.  Fault injection hooks sit on both message directions, and
/// the server can be forked into diverging instances, which is exactly the
/// power a malicious server has.
class sim {
 public:
  using server_t = aip_server_core<adict>;

  /// Message interposition for adversarial scenarios.  Mutations operate
  /// on encoded bytes; `inject` entries are queued right after the
  /// (possibly mutated) message.  Returning false drops the message.
  struct interposer {
    virtual ~interposer() = default;
    virtual bool server_to_client(sim&, client_id to, bytes& msg,
                                  std::vector<bytes>& inject) {
      (void)to, (void)msg, (void)inject;
      return true;
    }
    virtual bool client_to_server(sim&, client_id from, bytes& msg) {
      (void)from, (void)msg;
      return true;
    }
  };

  explicit sim(sim_config cfg, const keyring* keys = nullptr) : cfg_(cfg), rng_(cfg.seed) {
    if (keys) {
      keys_ = keys;
    } else {
      owned_keys_ = keyring::make_mac(cfg.n_clients);
      keys_ = &owned_keys_;
    }
    aip_server_config scfg;
    scfg.query_fast_path = cfg.query_fast_path;
    scfg.prune_aborted = cfg.prune_aborted;
    scfg.pending_limit = cfg.pending_limit;
    scfg.client_count = cfg.n_clients;
    servers_.emplace_back(scfg, keys_, genesis<adict>::make(*keys_));

    agents_.resize(cfg.n_clients + 1);  // 1-based client ids
    to_server_.resize(cfg.n_clients + 1);
    to_client_.resize(cfg.n_clients + 1);
    route_.assign(cfg.n_clients + 1, 0);
    for (client_id i = 1; i <= cfg.n_clients; ++i) {
      vicos_config ccfg;
      ccfg.id = i;
      ccfg.query_fast_path = cfg.query_fast_path;
      ccfg.prune_aborted = cfg.prune_aborted;
      ccfg.nonce_seed = cfg.seed * 1000003 + i;
      if (cfg.commutative_mode)
        ccfg.compat = [](const adict::operation& p, const adict::operation& c) {
          return adict::commuting_pair(p, c);
        };
      agents_[i].core = std::make_unique<vicos_client_core>(ccfg, keys_, &cos_);
    }
  }

  // setup ---------------------------------------------------------------

  void push_ops(client_id i, std::vector<vicos_op> ops) {
    auto& s = agents_.at(i).script;
    for (auto& op : ops) s.push_back(std::move(op));
  }

  void set_interposer(interposer* ip) { interposer_ = ip; }

  /// Clones the given server instance and reroutes `moved` clients to the
  /// clone: each partition continues against its own copy of the history.
  std::size_t fork_server(const std::vector<client_id>& moved, std::size_t from = 0) {
    servers_.push_back(servers_.at(from));
    std::size_t idx = servers_.size() - 1;
    for (client_id c : moved) route_.at(c) = idx;
    return idx;
  }

  void set_route(client_id c, std::size_t server_idx) { route_.at(c) = server_idx; }

  // execution -----------------------------------------------------------

  /// Runs until no event is enabled or the step cap is hit.  Returns the
  /// number of executed steps.
  std::size_t run(std::size_t max_steps = 0) {
    if (max_steps == 0) max_steps = cfg_.max_steps;
    std::size_t steps = 0;
    while (steps < max_steps && step()) ++steps;
    return steps;
  }

  /// Executes one scheduler event; false when the system is quiescent.
  bool step() {
    // enabled events, in a fixed enumeration order
    enum class ev_kind { server, client, start };
    struct ev {
      ev_kind k;
      std::size_t idx;
    };
    std::vector<ev> events;
    for (std::size_t s = 0; s < servers_.size(); ++s)
      if (server_has_input(s)) events.push_back({ev_kind::server, s});
    for (client_id i = 1; i <= cfg_.n_clients; ++i)
      if (!to_client_[i].empty()) events.push_back({ev_kind::client, i});
    for (client_id i = 1; i <= cfg_.n_clients; ++i) {
      auto& a = agents_[i];
      // priority-mailbox rule on the client side: inbound completion
      // traffic (update-auth) is handled before new work starts, which
      // keeps the pending window from growing without bound
      if (!a.script.empty() && !a.core->in_flight() && !a.core->alarmed() &&
          to_client_[i].empty() && now_ >= a.busy_until)
        events.push_back({ev_kind::start, i});
    }
    if (events.empty()) return false;

    const ev& e = events[rng_() % events.size()];
    ++now_;
    switch (e.k) {
      case ev_kind::server:
        server_step(e.idx);
        break;
      case ev_kind::client:
        client_step(static_cast<client_id>(e.idx));
        break;
      case ev_kind::start:
        start_op(static_cast<client_id>(e.idx));
        break;
    }
    return true;
  }

  // results ---------------------------------------------------------------

  std::uint64_t now() const { return now_; }
  const std::vector<kvs_event>& history() const { return history_; }
  memory_cos& object_store() { return cos_; }
  server_t& server(std::size_t idx = 0) { return servers_.at(idx); }
  vicos_client_core& client(client_id i) { return *agents_.at(i).core; }
  const keyring& keys() const { return *keys_; }

  std::vector<std::pair<client_id, alarm_info>> alarms() const {
    std::vector<std::pair<client_id, alarm_info>> out;
    for (client_id i = 1; i <= cfg_.n_clients; ++i)
      if (agents_[i].core->alarmed()) out.push_back({i, agents_[i].core->alarm()});
    return out;
  }

  std::vector<client_observation> observations() const {
    std::vector<client_observation> out;
    for (client_id i = 1; i <= cfg_.n_clients; ++i)
      out.push_back(observe(agents_[i].core->protocol()));
    return out;
  }

  std::uint64_t messages(msg_kind k) const { return msg_count_[static_cast<int>(k) - 1]; }
  std::uint64_t total_messages() const {
    std::uint64_t t = 0;
    for (auto c : msg_count_) t += c;
    return t;
  }

  /// Logical timestamp of the first raised alarm, if any.
  std::optional<std::uint64_t> first_alarm_at() const { return first_alarm_; }

 private:
  struct agent {
    std::unique_ptr<vicos_client_core> core;
    std::deque<vicos_op> script;
    // in-flight bookkeeping for the history record
    vicos_op current;
    std::uint64_t invoke_ts = 0;
    std::uint64_t busy_until = 0;
    std::chrono::steady_clock::time_point invoke_wall;
  };

  bool server_has_input(std::size_t s) const {
    for (client_id i = 1; i <= cfg_.n_clients; ++i)
      if (route_[i] == s && !to_server_[i].empty()) return true;
    return false;
  }

  void server_step(std::size_t s) {
    // intake preference: complete in-flight work before new work
    std::vector<client_id> candidates, high;
    for (client_id i = 1; i <= cfg_.n_clients; ++i) {
      if (route_[i] != s || to_server_[i].empty()) continue;
      candidates.push_back(i);
      try {
        if (high_priority(peek_kind(byte_view(to_server_[i].front())))) high.push_back(i);
      } catch (const decode_error&) {
      }
    }
    if (candidates.empty()) return;
    auto& pick_from = high.empty() ? candidates : high;
    client_id from = pick_from[rng_() % pick_from.size()];

    bytes msg = std::move(to_server_[from].front());
    to_server_[from].pop_front();
    std::vector<server_t::outbound> outs;
    try {
      outs = servers_[s].on_message(from, byte_view(msg));
    } catch (const decode_error&) {
      return;  // a correct server drops garbled input
    }
    for (auto& o : outs) send_to_client(o.to, std::move(o.payload));
  }

  void client_step(client_id i) {
    bytes msg = std::move(to_client_[i].front());
    to_client_[i].pop_front();

    std::vector<bytes> inject;
    if (interposer_ && !interposer_->server_to_client(*this, i, msg, inject)) {
      for (auto& extra : inject) to_client_[i].push_front(std::move(extra));
      return;  // dropped
    }
    for (auto it = inject.rbegin(); it != inject.rend(); ++it)
      to_client_[i].push_front(std::move(*it));

    auto& a = agents_[i];
    auto res = a.core->on_message(byte_view(msg));
    for (auto& out : res.to_send) send_to_server(i, std::move(out));
    if (a.core->alarmed() && !first_alarm_) first_alarm_ = now_;
    if (res.completed) record_completion(i, *res.completed);
  }

  void start_op(client_id i) {
    auto& a = agents_[i];
    vicos_op op = std::move(a.script.front());
    a.script.pop_front();
    a.current = op;
    a.invoke_ts = now_;
    a.invoke_wall = std::chrono::steady_clock::now();
    bytes msg;
    switch (op.k) {
      case vicos_op::kind::put:
        msg = a.core->begin_put(op.key, op.value);
        break;
      case vicos_op::kind::get:
        msg = a.core->begin_get(op.key);
        break;
      case vicos_op::kind::del:
        msg = a.core->begin_del(op.key);
        break;
      case vicos_op::kind::list:
        msg = a.core->begin_list();
        break;
    }
    send_to_server(i, std::move(msg));
  }

  void record_completion(client_id i, const vicos_result& r) {
    auto& a = agents_[i];
    a.busy_until = now_ + cfg_.client_busy_steps;
    kvs_event e;
    e.client = i;
    e.invoke_ts = a.invoke_ts;
    e.response_ts = now_;
    e.key = a.current.key;
    e.value = a.current.value;
    switch (a.current.k) {
      case vicos_op::kind::put: e.kind = kvs_event::op::put; break;
      case vicos_op::kind::get: e.kind = kvs_event::op::get; break;
      case vicos_op::kind::del: e.kind = kvs_event::op::del; break;
      case vicos_op::kind::list: e.kind = kvs_event::op::list; break;
    }
    e.aborted = r.aborted();
    if (r.k == vicos_result::kind::value) {
      e.found = true;
      e.got_value = r.value;
    } else if (r.k == vicos_result::kind::keys) {
      e.got_keys = r.keys;
    }
    latencies_us_.push_back(std::chrono::duration_cast<std::chrono::microseconds>(
                                std::chrono::steady_clock::now() - a.invoke_wall)
                                .count());
    history_.push_back(std::move(e));
  }

  void send_to_server(client_id from, bytes msg) {
    if (interposer_ && !interposer_->client_to_server(*this, from, msg)) return;
    count(msg);
    to_server_[from].push_back(std::move(msg));
  }

  void send_to_client(client_id to, bytes msg) {
    count(msg);
    to_client_[to].push_back(std::move(msg));
  }

  void count(const bytes& msg) {
    try {
      msg_count_[static_cast<int>(peek_kind(byte_view(msg))) - 1]++;
    } catch (const decode_error&) {
    }
  }

 public:
  const std::vector<long>& latencies_us() const { return latencies_us_; }

 private:
  sim_config cfg_;
  std::mt19937_64 rng_;
  keyring owned_keys_;
  const keyring* keys_ = nullptr;

  std::vector<server_t> servers_;
  std::vector<std::size_t> route_;
  std::vector<agent> agents_;
  std::vector<std::deque<bytes>> to_server_;
  std::vector<std::deque<bytes>> to_client_;
  memory_cos cos_;
  interposer* interposer_ = nullptr;

  std::uint64_t now_ = 0;
  std::uint64_t msg_count_[5] = {0, 0, 0, 0, 0};
  std::vector<kvs_event> history_;
  std::vector<long> latencies_us_;
  std::optional<std::uint64_t> first_alarm_;
};

}  // namespace vicos
