#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vicos/sim.hpp"

namespace vicos {

/// One interposition rule of an attack script: applied to the n-th
/// server-to-client message matching (client, kind).  Mutations decode the
/// message, alter one field, and re-encode, so attacks are modifications
/// of correct traffic rather than hand-built messages.
struct attack_rule {
  std::optional<client_id> client;
  std::optional<msg_kind> kind;
  std::size_t match_index = 0;

  enum class action : std::uint8_t { drop, modify, replay_alpha, raw_flip };
  action act = action::modify;

  enum class field : std::uint8_t {
    none,
    response_value,   // corrupt the returned response
    aux_path,         // corrupt proof material
    alpha_sig,        // strip the authenticator signature
    pending_order,    // swap the first two pending entries
    seqno,            // shift the assigned sequence number
    delta_status,     // flip the status of a cleared entry
    prev_auth,        // substitute a stale predecessor authenticator
  };
  field fld = field::none;
  std::uint64_t param = 0;
};

struct attack_script {
  std::string name;
  std::vector<attack_rule> rules;
};

/// Executes an attack script inside the simulator.  Also keeps a capture
/// log of authenticator records so replay rules can substitute genuinely
/// old (correctly signed) material.
class script_interposer : public sim::interposer {
 public:
  explicit script_interposer(attack_script script) : script_(std::move(script)) {}

  bool server_to_client(sim& s, client_id to, bytes& msg, std::vector<bytes>&) override {
    using w = wire<adict>;
    (void)s;
    msg_kind k;
    try {
      k = peek_kind(byte_view(msg));
    } catch (const decode_error&) {
      return true;
    }

    // capture authenticators before any rule may consume them
    if (k == msg_kind::reply) {
      try {
        auto m = w::decode(byte_view(msg));
        captured_alphas_.push_back(std::get<typename w::reply_msg>(m).alpha);
      } catch (const decode_error&) {
      }
    }

    bool keep = true;
    for (attack_rule& r : script_.rules) {
      if (r.client && *r.client != to) continue;
      if (r.kind && *r.kind != k) continue;
      std::size_t seen = seen_counts_[&r - script_.rules.data()]++;
      if (seen != r.match_index) continue;
      keep = apply(r, msg) && keep;
    }
    ++global_index_;
    return keep;
  }

  std::size_t raw_flip_target = 0;  // global s→c index for raw_flip rules

 private:
  bool apply(const attack_rule& r, bytes& msg) {
    using w = wire<adict>;
    if (r.act == attack_rule::action::drop) return false;
    if (r.act == attack_rule::action::raw_flip) {
      if (msg.empty()) return true;
      msg[r.param % msg.size()] ^= static_cast<std::uint8_t>(1u << (r.param % 8));
      return true;
    }

    typename w::message m;
    try {
      m = w::decode(byte_view(msg));
    } catch (const decode_error&) {
      return true;
    }

    if (r.act == attack_rule::action::replay_alpha) {
      if (captured_alphas_.empty()) return true;
      const auto& stale = captured_alphas_.front();
      if (auto* reply = std::get_if<typename w::reply_msg>(&m)) {
        if (reply->alpha == stale) return true;  // nothing stale yet
        reply->alpha = stale;
      } else if (auto* ua = std::get_if<typename w::update_auth_msg>(&m)) {
        if (ua->prev_auth == stale) return true;
        ua->prev_auth = stale;
      }
      msg = w::encode(m);
      return true;
    }

    // modify
    if (auto* reply = std::get_if<typename w::reply_msg>(&m)) {
      switch (r.fld) {
        case attack_rule::field::response_value:
          if (reply->resp.k == adict::response::kind::value && !reply->resp.value.empty())
            reply->resp.value[0] ^= 0x01;
          else if (reply->resp.k == adict::response::kind::keys && !reply->resp.keys.empty())
            reply->resp.keys[0].push_back('x');
          else
            reply->resp = adict::response::of_value(to_bytes("forged"));
          break;
        case attack_rule::field::aux_path:
          for (auto& step : reply->aux.steps) {
            if (!step.path.empty()) {
              step.path[0].sibling[0] ^= 0x01;
              break;
            }
            if (!step.snapshot.empty()) {
              step.snapshot[0].value_digest[0] ^= 0x01;
              break;
            }
            if (step.absence.k != adict::absence_proof::kind::empty) {
              step.absence.leaf.value_digest[0] ^= 0x01;
              break;
            }
          }
          break;
        case attack_rule::field::alpha_sig:
          reply->alpha.auth_sig.value.clear();
          break;
        case attack_rule::field::pending_order:
          if (reply->pending.size() >= 2) std::swap(reply->pending[0], reply->pending[1]);
          break;
        case attack_rule::field::seqno:
          reply->seq += (r.param ? r.param : 1);
          break;
        case attack_rule::field::delta_status: {
          auto& rec = reply->cleared.back();
          rec.status = rec.status == op_status::success ? op_status::aborted
                                                        : op_status::success;
          break;
        }
        default:
          break;
      }
    } else if (auto* ua = std::get_if<typename w::update_auth_msg>(&m)) {
      switch (r.fld) {
        case attack_rule::field::prev_auth:
          ua->prev_auth.authenticator[0] ^= 0x01;
          break;
        case attack_rule::field::response_value:
          if (ua->resp.k == adict::response::kind::value && !ua->resp.value.empty())
            ua->resp.value[0] ^= 0x01;
          break;
        case attack_rule::field::aux_path:
          for (auto& step : ua->aux.steps) {
            if (!step.snapshot.empty()) {
              step.snapshot[0].value_digest[0] ^= 0x01;
              break;
            }
            if (!step.path.empty()) {
              step.path[0].sibling[0] ^= 0x01;
              break;
            }
          }
          break;
        default:
          break;
      }
    }
    msg = w::encode(m);
    return true;
  }

  attack_script script_;
  std::map<std::size_t, std::size_t> seen_counts_;
  std::vector<typename wire<adict>::auth_record> captured_alphas_;
  std::size_t global_index_ = 0;
};

struct scenario_outcome {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<std::pair<client_id, alarm_info>> alarms;
  std::vector<kvs_event> history;
  std::vector<client_observation> observations;
  bool fork_consistent = true;
  lin_verdict prefix_verdict = lin_verdict::linearizable;
  /// A detection miss.  Views must stay fork-consistent unconditionally
  /// (each client stops recording at its alarm); and if nobody alarmed,
  /// the outputs must be linearizable outright.  Stale but fork-consistent
  /// reads before detection are exactly what the consistency notion
  /// permits, so they do not count.
  bool corrupted = false;
};

namespace detail {

inline void evaluate_outcome(sim& s, scenario_outcome& out) {
  out.alarms = s.alarms();
  out.observations = s.observations();
  std::uint64_t cutoff = s.first_alarm_at().value_or(UINT64_MAX);
  for (const kvs_event& e : s.history())
    if (e.response_ts <= cutoff) out.history.push_back(e);
  out.fork_consistent = check_fork_linearizable(out.observations);
  out.prefix_verdict = check_linearizable(out.history);
  out.corrupted = !out.fork_consistent ||
                  (out.alarms.empty() && out.prefix_verdict == lin_verdict::not_linearizable);
}

}  // namespace detail

/// Named catalog of scripted attacks.  Each entry builds its own small
/// workload (the attack's precondition) and runs the script against it.
/// The two fork scenarios reroute clients between diverging server
/// instances instead of mutating single messages.
inline std::vector<std::string> attack_catalog() {
  return {
      "response-tamper", "proof-swap",      "stale-auth-replay", "pending-reorder",
      "omission-fork",   "status-flip",     "signature-strip",   "seqno-skip",
      "split-view-fork", "cos-byte-flip",   "stale-update-auth",
  };
}

inline scenario_outcome run_attack(const std::string& name, std::uint64_t seed) {
  scenario_outcome out;
  out.name = name;
  out.seed = seed;

  sim_config cfg;
  cfg.seed = seed;
  cfg.n_clients = 3;
  sim s(cfg);

  auto k = [](int i) { return to_bytes("obj" + std::to_string(i)); };
  auto v = [](int i) { return to_bytes("payload-" + std::to_string(i)); };

  auto run_scripted = [&](attack_script script,
                          const std::function<void(sim&)>& workload_phases) {
    script_interposer ip(std::move(script));
    s.set_interposer(&ip);
    workload_phases(s);
    detail::evaluate_outcome(s, out);
  };

  if (name == "response-tamper") {
    run_scripted({name,
                  {{.client = 2,
                    .kind = msg_kind::reply,
                    .match_index = 0,
                    .act = attack_rule::action::modify,
                    .fld = attack_rule::field::response_value}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1))});
                   s.run();
                   s.push_ops(2, {vicos_op::get(k(1))});
                   s.run();
                 });
  } else if (name == "proof-swap") {
    run_scripted({name,
                  {{.client = 2,
                    .kind = msg_kind::reply,
                    .match_index = 0,
                    .act = attack_rule::action::modify,
                    .fld = attack_rule::field::aux_path}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1)), vicos_op::put(k(2), v(2))});
                   s.run();
                   s.push_ops(2, {vicos_op::get(k(1))});
                   s.run();
                 });
  } else if (name == "stale-auth-replay") {
    run_scripted({name,
                  {{.client = 3,
                    .kind = msg_kind::reply,
                    .match_index = 0,
                    .act = attack_rule::action::replay_alpha}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1))});
                   s.run();
                   s.push_ops(2, {vicos_op::put(k(2), v(2))});
                   s.run();
                   s.push_ops(3, {vicos_op::get(k(2))});
                   s.run();
                 });
  } else if (name == "pending-reorder") {
    // stall the passive phase of two foreign updates so they stay
    // pending, reorder them in the victim's first reply; the victim's
    // next operation sees the honest order and the chains collide
    attack_script script{name,
                         {{.client = 1,
                           .kind = msg_kind::update_auth,
                           .match_index = 0,
                           .act = attack_rule::action::drop},
                          {.client = 2,
                           .kind = msg_kind::update_auth,
                           .match_index = 0,
                           .act = attack_rule::action::drop},
                          {.client = 3,
                           .kind = msg_kind::reply,
                           .match_index = 0,
                           .act = attack_rule::action::modify,
                           .fld = attack_rule::field::pending_order}}};
    run_scripted(std::move(script), [&](sim& s) {
      s.push_ops(1, {vicos_op::put(k(1), v(1))});
      s.run();
      s.push_ops(2, {vicos_op::put(k(2), v(2))});
      s.run();
      s.push_ops(3, {vicos_op::get(k(3)), vicos_op::get(k(3))});
      s.run();
    });
  } else if (name == "status-flip") {
    run_scripted({name,
                  {{.client = 2,
                    .kind = msg_kind::reply,
                    .match_index = 0,
                    .act = attack_rule::action::modify,
                    .fld = attack_rule::field::delta_status}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1))});
                   s.run();
                   s.push_ops(2, {vicos_op::get(k(1))});
                   s.run();
                 });
  } else if (name == "signature-strip") {
    run_scripted({name,
                  {{.client = 2,
                    .kind = msg_kind::reply,
                    .match_index = 0,
                    .act = attack_rule::action::modify,
                    .fld = attack_rule::field::alpha_sig}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1))});
                   s.run();
                   s.push_ops(2, {vicos_op::get(k(1))});
                   s.run();
                 });
  } else if (name == "seqno-skip") {
    run_scripted({name,
                  {{.client = 1,
                    .kind = msg_kind::reply,
                    .match_index = 0,
                    .act = attack_rule::action::modify,
                    .fld = attack_rule::field::seqno,
                    .param = 2}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1))});
                   s.run();
                 });
  } else if (name == "stale-update-auth") {
    run_scripted({name,
                  {{.client = 2,
                    .kind = msg_kind::update_auth,
                    .match_index = 0,
                    .act = attack_rule::action::replay_alpha}}},
                 [&](sim& s) {
                   s.push_ops(1, {vicos_op::put(k(1), v(1))});
                   s.run();
                   s.push_ops(2, {vicos_op::put(k(2), v(2))});
                   s.run();
                 });
  } else if (name == "cos-byte-flip") {
    s.push_ops(1, {vicos_op::put(k(1), v(1))});
    s.run();
    for (auto& [key, val] : s.object_store().raw())
      if (!val.empty()) val[0] ^= 0x01;
    s.push_ops(2, {vicos_op::get(k(1))});
    s.run();
    detail::evaluate_outcome(s, out);
  } else if (name == "omission-fork") {
    // hide client 2's update from client 1, then let client 1 observe the
    // joined history again
    s.push_ops(1, {vicos_op::put(k(1), v(1))});
    s.push_ops(2, {vicos_op::put(k(2), v(2))});
    s.run();
    std::size_t shadow = s.fork_server({1});  // client 1 forks off
    s.push_ops(2, {vicos_op::put(k(2), v(3)), vicos_op::put(k(3), v(4))});  // hidden from 1
    s.push_ops(1, {vicos_op::get(k(2))});  // stale but consistent: no alarm yet
    s.run();
    (void)shadow;
    s.set_route(1, 0);  // rejoin
    s.push_ops(1, {vicos_op::get(k(3))});
    s.run();
    detail::evaluate_outcome(s, out);
  } else if (name == "split-view-fork") {
    // common prefix, full partition with progress on both sides, rejoin
    s.push_ops(1, {vicos_op::put(k(1), v(1))});
    s.push_ops(2, {vicos_op::put(k(2), v(2))});
    s.run();
    s.fork_server({1, 3});  // {1,3} vs {2}
    s.push_ops(1, {vicos_op::put(k(1), v(10))});
    s.push_ops(3, {vicos_op::get(k(1))});
    s.push_ops(2, {vicos_op::put(k(2), v(20)), vicos_op::put(k(4), v(21))});
    s.run();
    s.set_route(1, 0);
    s.set_route(3, 0);
    s.push_ops(1, {vicos_op::get(k(4))});
    s.push_ops(3, {vicos_op::get(k(4))});
    s.run();
    detail::evaluate_outcome(s, out);
  } else {
    throw std::invalid_argument("unknown attack: " + name);
  }
  return out;
}

/// The standard small multi-client workload used for generic scripted
/// scenarios and mutation fuzzing.
inline void push_standard_workload(sim& s, std::mt19937_64& wrng, unsigned n = 3) {
  for (client_id c = 1; c <= n; ++c) {
    std::vector<vicos_op> ops;
    for (int i = 0; i < 8; ++i) {
      bytes key = to_bytes("o" + std::to_string(wrng() % 4));
      switch (wrng() % 4) {
        case 0:
        case 1:
          ops.push_back(vicos_op::put(key, to_bytes("v" + std::to_string(wrng() % 100))));
          break;
        case 2:
          ops.push_back(vicos_op::get(key));
          break;
        default:
          ops.push_back(vicos_op::list());
          break;
      }
    }
    s.push_ops(c, std::move(ops));
  }
}

/// Runs a declarative script against the standard workload.
inline scenario_outcome run_script(const attack_script& script, std::uint64_t seed) {
  scenario_outcome out;
  out.name = script.name;
  out.seed = seed;
  sim_config cfg;
  cfg.seed = seed;
  cfg.n_clients = 3;
  sim s(cfg);
  script_interposer ip(script);
  s.set_interposer(&ip);
  std::mt19937_64 wrng(seed);
  push_standard_workload(s, wrng);
  s.run();
  detail::evaluate_outcome(s, out);
  return out;
}

// scenario files: {"name": .., "rules":[{"client":2,"kind":"reply",
// "match_index":0,"action":"modify","field":"seqno","param":1}, ..]}

inline attack_script script_from_json(const nlohmann::json& j) {
  attack_script script;
  script.name = j.value("name", "scenario");
  for (const auto& rj : j.at("rules")) {
    attack_rule r;
    if (rj.contains("client")) r.client = rj.at("client").get<client_id>();
    if (rj.contains("kind")) {
      static const std::map<std::string, msg_kind> kinds{
          {"invoke", msg_kind::invoke},
          {"reply", msg_kind::reply},
          {"commit", msg_kind::commit},
          {"update-auth", msg_kind::update_auth},
          {"commit-auth", msg_kind::commit_auth}};
      r.kind = kinds.at(rj.at("kind").get<std::string>());
    }
    r.match_index = rj.value("match_index", 0u);
    static const std::map<std::string, attack_rule::action> actions{
        {"drop", attack_rule::action::drop},
        {"modify", attack_rule::action::modify},
        {"replay-alpha", attack_rule::action::replay_alpha},
        {"raw-flip", attack_rule::action::raw_flip}};
    r.act = actions.at(rj.value("action", "modify"));
    static const std::map<std::string, attack_rule::field> fields{
        {"none", attack_rule::field::none},
        {"response-value", attack_rule::field::response_value},
        {"aux-path", attack_rule::field::aux_path},
        {"alpha-sig", attack_rule::field::alpha_sig},
        {"pending-order", attack_rule::field::pending_order},
        {"seqno", attack_rule::field::seqno},
        {"delta-status", attack_rule::field::delta_status},
        {"prev-auth", attack_rule::field::prev_auth}};
    r.fld = fields.at(rj.value("field", "none"));
    r.param = rj.value("param", 0u);
    script.rules.push_back(r);
  }
  return script;
}

/// Flips one seeded-random byte in one seeded-random server-to-client
/// message of an otherwise honest multi-client run.  The soundness
/// condition is: either some client alarms, or every datum returned is
/// still consistent (the mutation was inconsequential).  Returning
/// corrupted data without an alarm is a detection miss.
inline scenario_outcome run_random_mutation(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);

  auto build_workload = [&](sim& s, std::mt19937_64& wrng) {
    push_standard_workload(s, wrng);
  };

  // pass 1: honest run to learn the message count
  std::uint64_t honest_msgs;
  {
    sim_config cfg;
    cfg.seed = seed;
    cfg.n_clients = 3;
    sim s(cfg);
    std::mt19937_64 wrng(seed);
    build_workload(s, wrng);
    s.run();
    honest_msgs = s.messages(msg_kind::reply) + s.messages(msg_kind::update_auth);
  }
  if (honest_msgs == 0) honest_msgs = 1;

  // pass 2: same run with one byte flipped in the chosen message
  struct flip_interposer : sim::interposer {
    std::size_t target = 0, seen = 0, byte_rand = 0;
    bool server_to_client(sim&, client_id, bytes& msg, std::vector<bytes>&) override {
      if (seen++ == target && !msg.empty())
        msg[byte_rand % msg.size()] ^= static_cast<std::uint8_t>(1u << (byte_rand % 8));
      return true;
    }
  };

  scenario_outcome out;
  out.name = "random-mutation";
  out.seed = seed;
  sim_config cfg;
  cfg.seed = seed;
  cfg.n_clients = 3;
  sim s(cfg);
  flip_interposer ip;
  ip.target = rng() % honest_msgs;
  ip.byte_rand = rng();
  s.set_interposer(&ip);
  std::mt19937_64 wrng(seed);
  build_workload(s, wrng);
  s.run();
  detail::evaluate_outcome(s, out);
  return out;
}

}  // namespace vicos
