#include "vicos/aip_client.hpp"
#include "vicos/aip_server.hpp"

#include <catch2/catch.hpp>
#include <deque>
#include <random>

#include "../support/naive_kvs.hpp"

using namespace vicos;
using testing::naive_kvs;
using op = adict::operation;
using client_t = aip_client_core<adict>;
using server_t = aip_server_core<adict>;
using w = wire<adict>;

namespace {

// Direct client/server wiring with synchronous delivery and full control
// over individual messages where a test needs it.
struct testbed {
  keyring keys = keyring::make_mac(8);
  server_t server;
  std::vector<std::unique_ptr<client_t>> clients;  // 1-based
  std::vector<std::optional<client_t::completion>> last;
  std::uint64_t sent[5] = {0, 0, 0, 0, 0};

  explicit testbed(unsigned n, aip_server_config scfg = {}, aip_client_config ccfg = {},
                   client_t::compat_relation rel = {})
      : server(scfg, &keys, genesis<adict>::make(keys)) {
    clients.resize(n + 1);
    last.resize(n + 1);
    for (client_id i = 1; i <= n; ++i) {
      aip_client_config c = ccfg;
      c.id = i;
      clients[i] = std::make_unique<client_t>(c, &keys, rel);
    }
  }

  void count(const bytes& m) { sent[static_cast<int>(peek_kind(byte_view(m))) - 1]++; }
  std::uint64_t total_sent() const {
    std::uint64_t t = 0;
    for (auto c : sent) t += c;
    return t;
  }

  // delivers server outbound messages and everything they trigger
  void settle(std::vector<server_t::outbound> outs) {
    std::deque<server_t::outbound> q(outs.begin(), outs.end());
    while (!q.empty()) {
      auto [to, payload] = q.front();
      q.pop_front();
      count(payload);
      auto res = clients[to]->on_message(byte_view(payload));
      if (res.completed) last[to] = res.completed;
      for (auto& m : res.to_send) {
        count(m);
        for (auto& o : server.on_message(to, byte_view(m))) q.push_back(std::move(o));
      }
    }
  }

  client_t::completion invoke(client_id i, const op& o) {
    last[i].reset();
    bytes inv = clients[i]->begin_invoke(o);
    count(inv);
    settle(server.on_message(i, byte_view(inv)));
    REQUIRE(last[i].has_value());
    return *last[i];
  }
};

// mutate an encoded message through decode/encode
template <class F>
bytes mutate(const bytes& raw, F&& f) {
  auto m = w::decode(byte_view(raw));
  f(m);
  return w::encode(m);
}

}  // namespace

TEST_CASE("single client, fresh system: put completes at position 1") {
  testbed t(1);
  auto done = t.invoke(1, op::make_put(to_bytes("k"), to_bytes("v")));
  CHECK(done.seq == 1);
  CHECK(done.status == op_status::success);
  CHECK(done.resp.k == adict::response::kind::none);
  CHECK(t.server.last_assigned() == 1);
  CHECK(t.server.last_applied() == 1);  // passive phase ran to completion
  CHECK(t.server.state().entries.count(to_bytes("k")) == 1);

  // exactly five messages for the one operation
  CHECK(t.total_sent() == 5);
}

TEST_CASE("an incompatible pending-other operation aborts the current one") {
  testbed t(2);
  // client 1's put(x) stays pending: its reply is not delivered yet
  bytes inv1 = t.clients[1]->begin_invoke(op::make_put(to_bytes("x"), to_bytes("v")));
  auto reply1 = t.server.on_message(1, byte_view(inv1));
  REQUIRE(reply1.size() == 1);

  SECTION("get of the same key aborts") {
    auto done = t.invoke(2, op::make_get(to_bytes("x")));
    CHECK(done.status == op_status::aborted);
    CHECK(done.resp.is_abort());
  }
  SECTION("list aborts") {
    auto done = t.invoke(2, op::make_list());
    CHECK(done.status == op_status::aborted);
  }
  SECTION("get of a different key proceeds") {
    auto done = t.invoke(2, op::make_get(to_bytes("y")));
    CHECK(done.status == op_status::success);
    CHECK(done.resp.k == adict::response::kind::none);
  }
  SECTION("a write proceeds: puts are compatible with every pending op") {
    auto done = t.invoke(2, op::make_put(to_bytes("x"), to_bytes("w")));
    CHECK(done.status == op_status::success);
  }

  // client 1 completes untouched either way
  t.settle(std::move(reply1));
  REQUIRE(t.last[1].has_value());
  CHECK(t.last[1]->status == op_status::success);
}

TEST_CASE("a pending read never blocks a write") {
  testbed t(2);
  bytes inv1 = t.clients[1]->begin_invoke(op::make_get(to_bytes("x")));
  auto reply1 = t.server.on_message(1, byte_view(inv1));
  auto done = t.invoke(2, op::make_put(to_bytes("x"), to_bytes("v")));
  CHECK(done.status == op_status::success);
  t.settle(std::move(reply1));
  CHECK(t.last[1]->status == op_status::success);
}

TEST_CASE("own aborted pending op is excluded from verification") {
  testbed t(2);
  // client 2's put(y) pends for the whole test
  bytes inv2 = t.clients[2]->begin_invoke(op::make_put(to_bytes("y"), to_bytes("v")));
  auto held = t.server.on_message(2, byte_view(inv2));

  // client 1: get(y) aborts against the pending put
  auto a = t.invoke(1, op::make_get(to_bytes("y")));
  CHECK(a.status == op_status::aborted);

  // client 1's next operation verifies with the aborted one skipped
  auto b = t.invoke(1, op::make_put(to_bytes("z"), to_bytes("w")));
  CHECK(b.status == op_status::success);
  CHECK_FALSE(t.clients[1]->alarmed());
}

TEST_CASE("verified aborted marks stop pending operations from conflicting") {
  // needs the commutativity relation: under plain compatibility, writes
  // never abort, so aborted pending operations are always queries and
  // conflict with nothing anyway
  auto commut = [](const op& a, const op& b) { return adict::commuting_pair(a, b); };

  auto scenario = [&](bool prune) {
    aip_server_config scfg;
    scfg.prune_aborted = prune;
    aip_client_config ccfg;
    ccfg.prune_aborted = prune;
    testbed t(3, scfg, ccfg, commut);

    // put1 pends uncommitted while put2 (same key) aborts against it
    bytes inv1 = t.clients[1]->begin_invoke(op::make_put(to_bytes("x"), to_bytes("1")));
    auto held = t.server.on_message(1, byte_view(inv1));
    auto r2 = t.invoke(2, op::make_put(to_bytes("x"), to_bytes("2")));
    REQUIRE(r2.status == op_status::aborted);

    // finish put1's active and passive phases by hand, holding back the
    // authentication request for the aborted op so it stays pending
    auto res1 = t.clients[1]->on_message(byte_view(held[0].payload));
    REQUIRE(res1.completed);
    auto ua1 = t.server.on_message(1, byte_view(res1.to_send[0]));
    REQUIRE(ua1.size() == 1);
    auto ca1 = t.clients[1]->on_message(byte_view(ua1[0].payload));
    auto ua2 = t.server.on_message(1, byte_view(ca1.to_send[0]));
    REQUIRE(t.server.last_applied() == 1);
    REQUIRE(ua2.size() == 1);  // held: the aborted put2 stays pending

    // the pending window now holds only the committed-aborted put2;
    // whether a same-key put may proceed is exactly the pruning question
    auto r3 = t.invoke(3, op::make_put(to_bytes("x"), to_bytes("3")));
    for (client_id c = 1; c <= 3; ++c) REQUIRE_FALSE(t.clients[c]->alarmed());
    return r3.status;
  };

  CHECK(scenario(true) == op_status::success);
  CHECK(scenario(false) == op_status::aborted);
}

TEST_CASE("empty cleared list raises an alarm") {
  testbed t(1);
  bytes inv = t.clients[1]->begin_invoke(op::make_put(to_bytes("k"), to_bytes("v")));
  auto outs = t.server.on_message(1, byte_view(inv));
  bytes bad = mutate(outs[0].payload, [](w::message& m) {
    std::get<w::reply_msg>(m).cleared.clear();
  });
  t.clients[1]->on_message(byte_view(bad));
  REQUIRE(t.clients[1]->alarmed());
  CHECK(t.clients[1]->alarm().kind == alarm_kind::protocol_order);
}

TEST_CASE("a cleared list not ending at the applied position raises protocol-order") {
  testbed t(2);
  t.invoke(1, op::make_put(to_bytes("k"), to_bytes("v")));
  bytes inv = t.clients[2]->begin_invoke(op::make_get(to_bytes("k")));
  auto outs = t.server.on_message(2, byte_view(inv));
  bytes bad = mutate(outs[0].payload, [](w::message& m) {
    auto& reply = std::get<w::reply_msg>(m);
    reply.cleared.push_back(reply.cleared.back());  // overshoot the applied op
  });
  t.clients[2]->on_message(byte_view(bad));
  REQUIRE(t.clients[2]->alarmed());
  CHECK(t.clients[2]->alarm().kind == alarm_kind::protocol_order);
}

TEST_CASE("tampered status in a cleared entry fails the commit signature") {
  testbed t(2);
  t.invoke(1, op::make_put(to_bytes("k"), to_bytes("v")));
  bytes inv = t.clients[2]->begin_invoke(op::make_get(to_bytes("k")));
  auto outs = t.server.on_message(2, byte_view(inv));
  bytes bad = mutate(outs[0].payload, [](w::message& m) {
    std::get<w::reply_msg>(m).cleared.back().status = op_status::aborted;
  });
  t.clients[2]->on_message(byte_view(bad));
  REQUIRE(t.clients[2]->alarmed());
  CHECK(t.clients[2]->alarm().kind == alarm_kind::bad_signature);
}

TEST_CASE("pending list not ending with the own operation raises bad-pending") {
  testbed t(2);
  t.invoke(1, op::make_put(to_bytes("k"), to_bytes("v")));
  bytes inv = t.clients[2]->begin_invoke(op::make_get(to_bytes("k")));
  auto outs = t.server.on_message(2, byte_view(inv));
  bytes bad = mutate(outs[0].payload, [](w::message& m) {
    std::get<w::reply_msg>(m).pending.pop_back();
  });
  t.clients[2]->on_message(byte_view(bad));
  REQUIRE(t.clients[2]->alarmed());
  CHECK(t.clients[2]->alarm().kind == alarm_kind::bad_pending);
}

TEST_CASE("a shifted sequence number raises protocol-order") {
  testbed t(1);
  bytes inv = t.clients[1]->begin_invoke(op::make_put(to_bytes("k"), to_bytes("v")));
  auto outs = t.server.on_message(1, byte_view(inv));
  bytes bad =
      mutate(outs[0].payload, [](w::message& m) { std::get<w::reply_msg>(m).seq += 2; });
  t.clients[1]->on_message(byte_view(bad));
  REQUIRE(t.clients[1]->alarmed());
  CHECK(t.clients[1]->alarm().kind == alarm_kind::protocol_order);
}

TEST_CASE("garbled server bytes are a detected fault") {
  testbed t(1);
  bytes inv = t.clients[1]->begin_invoke(op::make_put(to_bytes("k"), to_bytes("v")));
  auto outs = t.server.on_message(1, byte_view(inv));
  bytes bad = outs[0].payload;
  bad.resize(bad.size() / 2);
  t.clients[1]->on_message(byte_view(bad));
  CHECK(t.clients[1]->alarmed());

  bytes empty;
  client_t fresh({.id = 1}, &t.keys);
  fresh.on_message(byte_view(empty));
  CHECK(fresh.alarmed());
}

TEST_CASE("reordered pending entries collide with the recorded chain") {
  testbed t(3);
  // two foreign updates pend (their update-auths are withheld), then the
  // victim sees them reordered once and honestly afterwards
  bytes inv1 = t.clients[1]->begin_invoke(op::make_put(to_bytes("a"), to_bytes("1")));
  auto r1 = t.server.on_message(1, byte_view(inv1));
  bytes inv2 = t.clients[2]->begin_invoke(op::make_put(to_bytes("b"), to_bytes("2")));
  auto r2 = t.server.on_message(2, byte_view(inv2));

  bytes inv3 = t.clients[3]->begin_invoke(op::make_get(to_bytes("c")));
  auto r3 = t.server.on_message(3, byte_view(inv3));
  bytes swapped = mutate(r3[0].payload, [](w::message& m) {
    auto& pending = std::get<w::reply_msg>(m).pending;
    REQUIRE(pending.size() == 3);
    std::swap(pending[0], pending[1]);
  });
  auto res = t.clients[3]->on_message(byte_view(swapped));
  REQUIRE(res.completed);  // fresh chain entries: nothing to collide with yet
  CHECK_FALSE(t.clients[3]->alarmed());
  for (auto& m : res.to_send) t.server.on_message(3, byte_view(m));

  bytes inv3b = t.clients[3]->begin_invoke(op::make_get(to_bytes("c")));
  auto r3b = t.server.on_message(3, byte_view(inv3b));
  t.clients[3]->on_message(byte_view(r3b[0].payload));
  REQUIRE(t.clients[3]->alarmed());
  CHECK(t.clients[3]->alarm().kind == alarm_kind::hash_chain_mismatch);
}

TEST_CASE("passive phase proceeds strictly in sequence order") {
  testbed t(2);
  // both clients finish their active phases, but their commits reach the
  // server out of order
  bytes inv1 = t.clients[1]->begin_invoke(op::make_put(to_bytes("a"), to_bytes("1")));
  auto r1 = t.server.on_message(1, byte_view(inv1));
  bytes inv2 = t.clients[2]->begin_invoke(op::make_put(to_bytes("b"), to_bytes("2")));
  auto r2 = t.server.on_message(2, byte_view(inv2));

  auto res1 = t.clients[1]->on_message(byte_view(r1[0].payload));
  auto res2 = t.clients[2]->on_message(byte_view(r2[0].payload));
  REQUIRE(res1.completed);
  REQUIRE(res2.completed);

  // commit for position 2 first: held, no update-auth yet
  auto outs = t.server.on_message(2, byte_view(res2.to_send[0]));
  CHECK(outs.empty());
  CHECK(t.server.last_applied() == 0);

  // commit for position 1 unblocks both, in order
  outs = t.server.on_message(1, byte_view(res1.to_send[0]));
  REQUIRE(outs.size() == 1);
  CHECK(outs[0].to == 1);
  t.settle(std::move(outs));
  CHECK(t.server.last_applied() == 2);

  // duplicate commit is idempotent
  auto dup = t.server.on_message(1, byte_view(res1.to_send[0]));
  CHECK(dup.empty());
  CHECK(t.server.last_applied() == 2);
}

TEST_CASE("update-auth carries the new root for a successful update") {
  testbed t(1);
  bytes inv = t.clients[1]->begin_invoke(op::make_put(to_bytes("k"), to_bytes("v")));
  auto replies = t.server.on_message(1, byte_view(inv));
  auto res = t.clients[1]->on_message(byte_view(replies[0].payload));
  REQUIRE(res.completed);
  auto uas = t.server.on_message(1, byte_view(res.to_send[0]));
  REQUIRE(uas.size() == 1);

  auto res2 = t.clients[1]->on_message(byte_view(uas[0].payload));
  REQUIRE(res2.to_send.size() == 1);
  auto ca = std::get<w::commit_auth_msg>(w::decode(byte_view(res2.to_send[0])));

  // independent recomputation of the expected one-leaf root
  adict::state expect;
  adict::apply(expect, op::make_put(to_bytes("k"), to_bytes("v")));
  CHECK(ca.authenticator == adict::root_of(adict::frontier_of(expect)));
}

TEST_CASE("update-auth for an aborted operation leaves the authenticator unchanged") {
  testbed t(2);
  bytes inv1 = t.clients[1]->begin_invoke(op::make_put(to_bytes("x"), to_bytes("v")));
  auto held = t.server.on_message(1, byte_view(inv1));

  // client 2 aborts against the pending put
  bytes inv2 = t.clients[2]->begin_invoke(op::make_get(to_bytes("x")));
  auto r2 = t.server.on_message(2, byte_view(inv2));
  auto res2 = t.clients[2]->on_message(byte_view(r2[0].payload));
  REQUIRE(res2.completed);
  REQUIRE(res2.completed->status == op_status::aborted);
  auto none = t.server.on_message(2, byte_view(res2.to_send[0]));
  CHECK(none.empty());  // position 1 not committed yet

  // client 1 finishes; then the aborted op at position 2 authenticates
  auto res1 = t.clients[1]->on_message(byte_view(held[0].payload));
  auto ua1 = t.server.on_message(1, byte_view(res1.to_send[0]));
  REQUIRE(ua1.size() == 1);
  auto resa = t.clients[1]->on_message(byte_view(ua1[0].payload));
  auto one_key_root =
      std::get<w::commit_auth_msg>(w::decode(byte_view(resa.to_send[0]))).authenticator;
  auto ua2 = t.server.on_message(1, byte_view(resa.to_send[0]));
  REQUIRE(ua2.size() == 1);
  CHECK(ua2[0].to == 2);

  auto resb = t.clients[2]->on_message(byte_view(ua2[0].payload));
  REQUIRE(resb.to_send.size() == 1);
  auto ca = std::get<w::commit_auth_msg>(w::decode(byte_view(resb.to_send[0])));
  CHECK(ca.authenticator == one_key_root);
}

TEST_CASE("a stale predecessor authenticator in update-auth is detected") {
  testbed t(1);
  t.invoke(1, op::make_put(to_bytes("a"), to_bytes("1")));

  bytes inv = t.clients[1]->begin_invoke(op::make_put(to_bytes("b"), to_bytes("2")));
  auto replies = t.server.on_message(1, byte_view(inv));
  auto res = t.clients[1]->on_message(byte_view(replies[0].payload));
  auto uas = t.server.on_message(1, byte_view(res.to_send[0]));
  REQUIRE(uas.size() == 1);
  bytes bad = mutate(uas[0].payload, [](w::message& m) {
    auto& ua = std::get<w::update_auth_msg>(m);
    ua.prev_auth.authenticator = adict::initial_authenticator();  // stale root
  });
  t.clients[1]->on_message(byte_view(bad));
  REQUIRE(t.clients[1]->alarmed());
  CHECK(t.clients[1]->alarm().kind == alarm_kind::bad_signature);
}

TEST_CASE("honest three-client run matches the naive replay and raises no alarm") {
  testbed t(3);
  naive_kvs oracle;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    client_id c = 1 + rng() % 3;
    op o = testing::random_op(rng, 8);
    auto done = t.invoke(c, o);
    // lock-step execution: nothing pending, nothing aborts
    REQUIRE(done.status == op_status::success);
    auto expect = oracle.apply(o);
    REQUIRE(done.resp == expect);
  }
  for (client_id c = 1; c <= 3; ++c) CHECK_FALSE(t.clients[c]->alarmed());
  REQUIRE(t.server.state().entries.size() == oracle.entries.size());
  for (auto& [k, v] : oracle.entries) CHECK(t.server.state().entries.at(k).value == v);
}

TEST_CASE("exactly five messages per operation with the fast path off") {
  testbed t(2);
  std::mt19937_64 rng(9);
  const int n = 20;
  for (int i = 0; i < n; ++i) t.invoke(1 + (i % 2), testing::random_op(rng, 6));
  CHECK(t.total_sent() == 5u * n);
}

TEST_CASE("fast path: three messages per query, five per update") {
  aip_server_config scfg;
  scfg.query_fast_path = true;
  aip_client_config ccfg;
  ccfg.query_fast_path = true;
  testbed t(2, scfg, ccfg);

  auto p = t.invoke(1, op::make_put(to_bytes("k"), to_bytes("v")));
  CHECK(p.status == op_status::success);
  CHECK(t.total_sent() == 5);

  auto g = t.invoke(2, op::make_get(to_bytes("k")));
  CHECK(g.status == op_status::success);
  CHECK(g.resp.value == to_bytes("v"));
  CHECK(t.total_sent() == 8);  // +3: invoke, reply, commit
  CHECK(t.server.last_applied() == 2);

  auto l = t.invoke(1, op::make_list());
  CHECK(l.resp.keys.size() == 1);
  CHECK(t.total_sent() == 11);

  auto p2 = t.invoke(2, op::make_put(to_bytes("k2"), to_bytes("v2")));
  CHECK(p2.status == op_status::success);
  CHECK(t.total_sent() == 16);
  CHECK_FALSE(t.clients[1]->alarmed());
  CHECK_FALSE(t.clients[2]->alarmed());
}

TEST_CASE("invoke past the pending limit is buffered, not replied") {
  aip_server_config scfg;
  scfg.pending_limit = 2;
  testbed t(3, scfg);

  bytes i1 = t.clients[1]->begin_invoke(op::make_put(to_bytes("a"), to_bytes("1")));
  bytes i2 = t.clients[2]->begin_invoke(op::make_put(to_bytes("b"), to_bytes("2")));
  bytes i3 = t.clients[3]->begin_invoke(op::make_put(to_bytes("c"), to_bytes("3")));
  auto r1 = t.server.on_message(1, byte_view(i1));
  auto r2 = t.server.on_message(2, byte_view(i2));
  CHECK(r1.size() == 1);
  CHECK(r2.size() == 1);

  auto r3 = t.server.on_message(3, byte_view(i3));
  CHECK(r3.empty());  // buffered
  CHECK(t.server.buffered_invokes() == 1);
  CHECK(t.server.pending_count() == 2);

  // completing client 1's operation end-to-end frees a slot; the buffered
  // invoke is admitted and replied
  auto res1 = t.clients[1]->on_message(byte_view(r1[0].payload));
  auto outs = t.server.on_message(1, byte_view(res1.to_send[0]));  // commit → update-auth
  REQUIRE(outs.size() == 1);
  auto resa = t.clients[1]->on_message(byte_view(outs[0].payload));
  auto after = t.server.on_message(1, byte_view(resa.to_send[0]));  // commit-auth
  bool replied3 = false;
  for (auto& o : after) replied3 |= (o.to == 3);
  CHECK(replied3);
  CHECK(t.server.buffered_invokes() == 0);
}

TEST_CASE("default pending limit matches the deployment value") {
  CHECK(aip_server_config{}.pending_limit == 128);
}

TEST_CASE("committed records are garbage collected once all clients cleared them") {
  aip_server_config scfg;
  scfg.client_count = 2;
  testbed t(2, scfg);
  for (int round = 0; round < 10; ++round) {
    t.invoke(1, op::make_put(to_bytes("k" + std::to_string(round)), to_bytes("v")));
    t.invoke(2, op::make_get(to_bytes("k" + std::to_string(round))));
  }
  // 20 operations plus genesis would be 21 entries without collection
  CHECK(t.server.committed_entries() < 10);
  CHECK(t.server.has_committed(t.server.last_applied()));
}

TEST_CASE("restoring from the applied log reproduces the state") {
  testbed t(2);
  std::vector<server_t::applied_record> log;
  t.server.set_apply_hook([&](const server_t::applied_record& r) { log.push_back(r); });

  t.invoke(1, op::make_put(to_bytes("a"), to_bytes("1")));
  t.invoke(2, op::make_put(to_bytes("b"), to_bytes("2")));
  t.invoke(1, op::make_del(to_bytes("a")));
  REQUIRE(log.size() == 3);

  server_t restored({}, &t.keys, genesis<adict>::make(t.keys));
  for (const auto& r : log) restored.restore(r);
  CHECK(restored.last_applied() == 3);
  CHECK(restored.state() == t.server.state());

  // a fresh client can work against the restored server
  client_t fresh({.id = 2}, &t.keys);
  bytes inv = fresh.begin_invoke(op::make_get(to_bytes("b")));
  auto outs = restored.on_message(2, byte_view(inv));
  REQUIRE(outs.size() == 1);
  auto res = fresh.on_message(byte_view(outs[0].payload));
  REQUIRE(res.completed);
  CHECK(res.completed->resp.value == to_bytes("2"));
}

TEST_CASE("alarmed clients refuse further operations") {
  testbed t(1);
  bytes inv = t.clients[1]->begin_invoke(op::make_put(to_bytes("k"), to_bytes("v")));
  auto outs = t.server.on_message(1, byte_view(inv));
  bytes bad = mutate(outs[0].payload, [](w::message& m) {
    std::get<w::reply_msg>(m).alpha.auth_sig.value.clear();
  });
  t.clients[1]->on_message(byte_view(bad));
  REQUIRE(t.clients[1]->alarmed());
  CHECK(t.clients[1]->alarm().kind == alarm_kind::bad_signature);
  CHECK_THROWS_AS(t.clients[1]->begin_invoke(op::make_list()), fault_alarm);
  // even the honest reply is now refused
  auto res = t.clients[1]->on_message(byte_view(outs[0].payload));
  CHECK(res.to_send.empty());
  CHECK_FALSE(res.completed);
}
