#include "vicos/adict.hpp"

#include <catch2/catch.hpp>
#include <random>

#include "../support/naive_kvs.hpp"

using namespace vicos;
using testing::naive_kvs;
using op = adict::operation;

namespace {

// One step of a proper authenticated execution: server-side query, client
// verification, server-side refresh.  Returns the verified response.
struct pipeline {
  adict::state state = adict::initial_state();
  digest auth = adict::initial_authenticator();

  adict::response run(const op& o) {
    std::vector<op> ops{o};
    auto [resp, aux] = adict::query(state, ops);
    auto res = adict::authexec(ops, auth, resp, aux);
    REQUIRE(res.valid);
    auth = res.authenticator;
    adict::refresh(state, o, res.refresh_aux);
    return resp;
  }
};

// Independent recomputation of the two-leaf tree root, spelled out from
// the leaf formula: hash(key || value-digest || successor).
digest two_leaf_root_oracle() {
  auto leaf = [](const char* key, const char* value, const char* succ) {
    byte_writer w;
    w.u8(0x00);
    w.blob(to_bytes(key));
    w.blob(view(sha256(byte_view(to_bytes(value)))));
    w.u8(succ ? 1 : 0);
    w.blob(succ ? to_bytes(succ) : bytes{});
    return sha256(w);
  };
  byte_writer inner;
  inner.u8(0x01);
  inner.raw(view(leaf("a", "1", "b")));
  inner.raw(view(leaf("b", "2", nullptr)));
  return sha256(inner);
}

}  // namespace

TEST_CASE("list on an empty dictionary verifies against the empty root") {
  adict::state s0 = adict::initial_state();
  std::vector<op> ops{op::make_list()};
  auto [resp, aux] = adict::query(s0, ops);
  REQUIRE(resp.k == adict::response::kind::keys);
  CHECK(resp.keys.empty());
  auto res = adict::authexec(ops, adict::initial_authenticator(), resp, aux);
  CHECK(res.valid);
  CHECK(res.authenticator == adict::initial_authenticator());
}

TEST_CASE("get on an empty dictionary proves absence against the empty root") {
  adict::state s0 = adict::initial_state();
  std::vector<op> ops{op::make_get(to_bytes("k"))};
  auto [resp, aux] = adict::query(s0, ops);
  CHECK(resp.k == adict::response::kind::none);
  auto res = adict::authexec(ops, adict::initial_authenticator(), resp, aux);
  CHECK(res.valid);
  CHECK(res.authenticator == adict::initial_authenticator());
}

TEST_CASE("read-your-write within one operation sequence") {
  adict::state s0 = adict::initial_state();
  std::vector<op> ops{op::make_put(to_bytes("k"), to_bytes("v")), op::make_get(to_bytes("k"))};
  auto [resp, aux] = adict::query(s0, ops);
  REQUIRE(resp.k == adict::response::kind::value);
  CHECK(resp.value == to_bytes("v"));
  auto res = adict::authexec(ops, adict::initial_authenticator(), resp, aux);
  CHECK(res.valid);
  // state itself is untouched by query
  CHECK(s0.entries.empty());
}

TEST_CASE("two-leaf tree root matches the hand-computed value") {
  pipeline p;
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  p.run(op::make_put(to_bytes("b"), to_bytes("2")));
  CHECK(p.auth == two_leaf_root_oracle());

  // a verified get against that root
  std::vector<op> ops{op::make_get(to_bytes("a"))};
  auto [resp, aux] = adict::query(p.state, ops);
  CHECK(resp.value == to_bytes("1"));
  CHECK(adict::authexec(ops, p.auth, resp, aux).valid);
}

TEST_CASE("list returns keys in canonical order with a verifiable proof") {
  pipeline p;
  p.run(op::make_put(to_bytes("c"), to_bytes("3")));
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  p.run(op::make_put(to_bytes("b"), to_bytes("2")));

  std::vector<op> ops{op::make_list()};
  auto [resp, aux] = adict::query(p.state, ops);
  REQUIRE(resp.k == adict::response::kind::keys);
  CHECK(resp.keys == std::vector<bytes>{to_bytes("a"), to_bytes("b"), to_bytes("c")});
  CHECK(adict::authexec(ops, p.auth, resp, aux).valid);

  SECTION("a list response missing one key fails verification") {
    auto bad = resp;
    bad.keys.erase(bad.keys.begin() + 1);
    CHECK_FALSE(adict::authexec(ops, p.auth, bad, aux).valid);
  }
}

TEST_CASE("insert between existing keys verifies against brute-force roots") {
  pipeline p;
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  p.run(op::make_put(to_bytes("c"), to_bytes("3")));
  digest before = p.auth;

  std::vector<op> ops{op::make_put(to_bytes("b"), to_bytes("2"))};
  auto [resp, aux] = adict::query(p.state, ops);
  REQUIRE(aux.steps.size() == 1);
  CHECK(aux.steps[0].k == adict::proof_step::kind::put_insert);
  // the snapshot covers the pre-insert tree, including the predecessor leaf
  REQUIRE(aux.steps[0].snapshot.size() == 2);
  CHECK(aux.steps[0].snapshot[0].key == to_bytes("a"));
  CHECK(adict::root_of(aux.steps[0].snapshot) == before);

  auto res = adict::authexec(ops, before, resp, aux);
  REQUIRE(res.valid);

  // brute-force recomputation of the post-insert root
  adict::frontier f = aux.steps[0].snapshot;
  f.insert(f.begin() + 1,
           adict::frontier_entry{to_bytes("b"), sha256(byte_view(to_bytes("2")))});
  CHECK(res.authenticator == adict::root_of(f));
}

TEST_CASE("delete of an absent key is a verified no-op") {
  pipeline p;
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  digest before = p.auth;

  auto resp = p.run(op::make_del(to_bytes("zz")));
  CHECK(resp.k == adict::response::kind::none);
  CHECK(p.auth == before);
  CHECK(p.state.entries.size() == 1);
}

TEST_CASE("put then delete of the same key restores the prior root") {
  pipeline p;
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  p.run(op::make_put(to_bytes("b"), to_bytes("2")));
  digest before = p.auth;
  p.run(op::make_put(to_bytes("m"), to_bytes("x")));
  p.run(op::make_del(to_bytes("m")));
  CHECK(p.auth == before);
}

TEST_CASE("refresh of a query leaves the root unchanged") {
  pipeline p;
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  digest before = p.auth;
  p.run(op::make_get(to_bytes("a")));
  p.run(op::make_list());
  CHECK(p.auth == before);
}

TEST_CASE("root is a pure function of the contents") {
  std::vector<std::pair<bytes, bytes>> kv;
  for (int i = 0; i < 9; ++i)
    kv.emplace_back(to_bytes("key" + std::to_string(i)), to_bytes("v" + std::to_string(i)));

  std::mt19937_64 rng(3);
  digest reference{};
  for (int round = 0; round < 6; ++round) {
    std::shuffle(kv.begin(), kv.end(), rng);
    pipeline p;
    for (auto& [k, v] : kv) p.run(op::make_put(k, v));
    if (round == 0)
      reference = p.auth;
    else
      CHECK(p.auth == reference);
  }
}

TEST_CASE("random replay agrees with the naive map oracle") {
  std::mt19937_64 rng(17);
  pipeline p;
  naive_kvs oracle;
  for (int i = 0; i < 300; ++i) {
    op o = testing::random_op(rng, 16);
    auto got = p.run(o);
    auto expect = oracle.apply(o);
    REQUIRE(got == expect);
  }
  // final states agree
  REQUIRE(p.state.entries.size() == oracle.entries.size());
  for (const auto& [k, v] : oracle.entries) {
    REQUIRE(p.state.entries.count(k) == 1);
    CHECK(p.state.entries.at(k).value == v);
  }
}

TEST_CASE("absence proofs are sound over all small trees") {
  std::vector<bytes> universe{to_bytes("a"), to_bytes("c"), to_bytes("e"),
                              to_bytes("g"), to_bytes("i")};
  std::vector<bytes> probes{to_bytes("0"), to_bytes("a"), to_bytes("b"), to_bytes("c"),
                            to_bytes("d"), to_bytes("e"), to_bytes("f"), to_bytes("g"),
                            to_bytes("h"), to_bytes("i"), to_bytes("z")};

  for (unsigned mask = 0; mask < (1u << universe.size()); ++mask) {
    adict::state s;
    for (std::size_t i = 0; i < universe.size(); ++i)
      if (mask & (1u << i)) adict::apply(s, op::make_put(universe[i], to_bytes("v")));
    digest root = adict::root_of(adict::frontier_of(s));
    auto f = adict::frontier_of(s);

    for (const bytes& k : probes) {
      bool present = s.entries.count(k) != 0;
      if (!present) {
        CHECK(adict::check_absence(adict::absence_for(s, k), k, root));
      }
      // no honestly-derivable absence proof may verify for a present key;
      // try every leaf in every proof shape
      if (present) {
        adict::absence_proof empty;
        empty.k = adict::absence_proof::kind::empty;
        CHECK_FALSE(adict::check_absence(empty, k, root));
        for (std::size_t i = 0; i < f.size(); ++i) {
          adict::leaf_payload leaf{f[i].key, f[i].value_digest, adict::successor_at(f, i)};
          for (auto kind :
               {adict::absence_proof::kind::leftmost, adict::absence_proof::kind::gap}) {
            adict::absence_proof attempt;
            attempt.k = kind;
            attempt.leaf = leaf;
            attempt.path = adict::path_at(f, i);
            CHECK_FALSE(adict::check_absence(attempt, k, root));
          }
        }
      }
    }
  }
}

TEST_CASE("tampered responses and proofs fail verification") {
  pipeline p;
  for (int i = 0; i < 4; ++i)
    p.run(op::make_put(to_bytes("key" + std::to_string(i)), to_bytes("v" + std::to_string(i))));

  std::vector<op> get0{op::make_get(to_bytes("key0"))};
  auto [resp, aux] = adict::query(p.state, get0);
  REQUIRE(adict::authexec(get0, p.auth, resp, aux).valid);

  SECTION("flipped response bit") {
    auto bad = resp;
    bad.value[0] ^= 1;
    CHECK_FALSE(adict::authexec(get0, p.auth, bad, aux).valid);
  }

  SECTION("proof swapped with another key's path") {
    std::vector<op> get1{op::make_get(to_bytes("key1"))};
    auto [resp1, aux1] = adict::query(p.state, get1);
    CHECK_FALSE(adict::authexec(get0, p.auth, resp, aux1).valid);
    CHECK_FALSE(adict::authexec(get1, p.auth, resp1, aux).valid);
  }

  SECTION("truncated proof path") {
    auto bad = aux;
    REQUIRE(!bad.steps[0].path.empty());
    bad.steps[0].path.pop_back();
    CHECK_FALSE(adict::authexec(get0, p.auth, resp, bad).valid);
  }

  SECTION("stale root after an update") {
    digest stale = p.auth;
    p.run(op::make_put(to_bytes("key0"), to_bytes("fresh")));
    auto [resp2, aux2] = adict::query(p.state, get0);
    // proof against the new state does not verify under the stale root
    CHECK_FALSE(adict::authexec(get0, stale, resp2, aux2).valid);
    // replaying the old proof against the new root fails too
    CHECK_FALSE(adict::authexec(get0, p.auth, resp, aux).valid);
  }

  SECTION("absence claimed for a present key") {
    adict::aux_data forged;
    adict::proof_step s;
    s.op_index = 0;
    s.k = adict::proof_step::kind::get_absent;
    s.absence = adict::absence_for(p.state, to_bytes("key0"));
    forged.steps.push_back(s);
    CHECK_FALSE(adict::authexec(get0, p.auth, adict::response::none(), forged).valid);
  }
}

TEST_CASE("compatibility relation matches the published table") {
  bytes x = to_bytes("x"), y = to_bytes("y");
  auto put_x = op::make_put(x, to_bytes("v")), put_y = op::make_put(y, to_bytes("v"));
  auto get_x = op::make_get(x), get_y = op::make_get(y);
  auto del_x = op::make_del(x), del_y = op::make_del(y);
  auto list = op::make_list();

  // pending first, current second
  CHECK_FALSE(adict::compatible_pair(put_x, get_x));
  CHECK(adict::compatible_pair(put_x, put_x));
  CHECK(adict::compatible_pair(del_x, get_y));
  CHECK_FALSE(adict::compatible_pair(put_x, list));
  CHECK(adict::compatible_pair(get_x, put_x));  // reads never block writes
  CHECK(adict::compatible_pair(list, list));

  std::vector<op> grid{put_x, put_y, get_x, get_y, del_x, del_y, list};
  int incompatible = 0;
  for (const op& first : grid)
    for (const op& second : grid)
      if (!adict::compatible_pair(first, second)) ++incompatible;
  CHECK(incompatible == 8);
}

TEST_CASE("commutativity is strictly stronger than compatibility") {
  bytes x = to_bytes("x"), y = to_bytes("y");
  std::vector<op> grid{op::make_put(x, to_bytes("v")), op::make_put(y, to_bytes("v")),
                       op::make_get(x),                op::make_get(y),
                       op::make_del(x),                op::make_del(y),
                       op::make_list()};

  int non_commuting = 0;
  for (const op& a : grid)
    for (const op& b : grid) {
      if (!adict::commuting_pair(a, b)) ++non_commuting;
      // commuting implies compatible
      if (adict::commuting_pair(a, b)) CHECK(adict::compatible_pair(a, b));
    }
  CHECK(non_commuting == 22);

  CHECK_FALSE(adict::commuting_pair(op::make_put(x, to_bytes("v")), op::make_get(x)));
  CHECK_FALSE(adict::commuting_pair(op::make_get(x), op::make_put(x, to_bytes("v"))));
  CHECK(adict::commuting_pair(op::make_get(x), op::make_get(y)));
}

TEST_CASE("operation, response, and aux encodings round trip deterministically") {
  pipeline p;
  p.run(op::make_put(to_bytes("a"), to_bytes("1")));
  p.run(op::make_put(to_bytes("b"), to_bytes("2")));

  std::vector<op> ops{op::make_put(to_bytes("c"), to_bytes("3")), op::make_list()};
  auto [resp, aux] = adict::query(p.state, ops);

  for (const op& o : ops) {
    bytes enc = adict::encode_operation(o);
    CHECK(adict::encode_operation(o) == enc);
    CHECK(adict::decode_operation(byte_view(enc)) == o);
  }
  bytes er = adict::encode_response(resp);
  CHECK(adict::decode_response(byte_view(er)) == resp);
  bytes ea = adict::encode_aux(aux);
  CHECK(adict::encode_aux(aux) == ea);
  CHECK(adict::decode_aux(byte_view(ea)) == aux);

  CHECK_THROWS_AS(adict::decode_operation(byte_view{}), decode_error);
  bytes trailing = er;
  trailing.push_back(0);
  CHECK_THROWS_AS(adict::decode_response(byte_view(trailing)), decode_error);
}
