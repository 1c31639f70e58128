#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "vicos/ads.hpp"
#include "vicos/bytes.hpp"
#include "vicos/crypto.hpp"

namespace vicos {

/// Authenticated dictionary: a key-value map plus a hash tree over the
/// keys in canonical (bytewise lexicographic) sort order.
///
/// Every leaf hashes its key, the digest of its value, and the key of the
/// successor leaf; the last leaf carries a distinguished infinity marker.
/// Binding the successor key into the leaf is what authenticates the
/// *absence* of a key.  The tree shape is the canonical balanced split
/// (left subtree spans the largest power of two below the leaf count), so
/// the root is a pure function of the map contents and all parties agree
/// on it regardless of insertion order.
///
/// Proof material:
///  - get:        leaf path (membership) or a gap/leftmost/empty proof
///                (absence).
///  - put on an existing key: the leaf path; the value swap keeps the
///                shape, so the verifier splices the new leaf hash along
///                the same path.
///  - put of a new key / del: the full frontier (sorted keys plus value
///                digests), from which the verifier recomputes both the
///                old and the new root.  Structural inserts reshape the
///                canonical tree, so a single path does not determine the
///                new root; shipping the frontier is fine at this scale.
///  - list:       the frontier; doubles as the response's proof.
struct adict {
  // ---------------------------------------------------------------- types

  enum class op_kind : std::uint8_t { genesis = 0, put = 1, get = 2, del = 3, list = 4 };

  struct operation {
    op_kind kind = op_kind::genesis;
    bytes key;
    bytes value;

    static operation make_put(bytes k, bytes v) {
      return {op_kind::put, std::move(k), std::move(v)};
    }
    static operation make_get(bytes k) { return {op_kind::get, std::move(k), {}}; }
    static operation make_del(bytes k) { return {op_kind::del, std::move(k), {}}; }
    static operation make_list() { return {op_kind::list, {}, {}}; }

    bool operator==(const operation&) const = default;
  };

  struct response {
    enum class kind : std::uint8_t { none = 0, value = 1, keys = 2, abort = 3 };

    kind k = kind::none;
    bytes value;               // kind::value
    std::vector<bytes> keys;   // kind::keys

    static response none() { return {}; }
    static response of_value(bytes v) { return {kind::value, std::move(v), {}}; }
    static response of_keys(std::vector<bytes> ks) { return {kind::keys, {}, std::move(ks)}; }
    static response abort() { return {kind::abort, {}, {}}; }

    bool is_abort() const { return k == kind::abort; }
    bool operator==(const response&) const = default;
  };

  struct path_step {
    bool sibling_on_right = false;
    digest sibling{};
    bool operator==(const path_step&) const = default;
  };
  using tree_path = std::vector<path_step>;

  struct frontier_entry {
    bytes key;
    digest value_digest{};
    bool operator==(const frontier_entry&) const = default;
  };
  using frontier = std::vector<frontier_entry>;

  /// Payload of one leaf as shipped in proofs.
  struct leaf_payload {
    bytes key;
    digest value_digest{};
    std::optional<bytes> successor;  // nullopt = infinity marker
    bool operator==(const leaf_payload&) const = default;
  };

  struct absence_proof {
    enum class kind : std::uint8_t { empty = 0, leftmost = 1, gap = 2 };
    kind k = kind::empty;
    leaf_payload leaf;  // unused for empty
    tree_path path;
    bool operator==(const absence_proof&) const = default;
  };

  struct proof_step {
    enum class kind : std::uint8_t {
      get_found = 1,
      get_absent = 2,
      put_replace = 3,
      put_insert = 4,
      del_frontier = 5,
      del_absent = 6,
      list_all = 7,
    };
    kind k = kind::get_found;
    std::uint32_t op_index = 0;

    // get_found / put_replace
    std::optional<bytes> successor;
    tree_path path;
    digest old_value_digest{};  // put_replace only

    // get_absent / del_absent
    absence_proof absence;

    // put_insert / del_frontier / list_all
    frontier snapshot;

    bool operator==(const proof_step&) const = default;
  };

  /// Proof payload: one step per state-changing prefix operation plus the
  /// final operation.  Pure prefix queries carry no step (their responses
  /// were verified when those operations completed).  `post_root` is
  /// filled by authexec for the refresh path.
  struct aux_data {
    std::vector<proof_step> steps;
    std::optional<digest> post_root;
    bool operator==(const aux_data&) const = default;
  };

  struct stored_value {
    bytes value;
    digest value_digest{};
  };

  struct state {
    std::map<bytes, stored_value> entries;

    bool operator==(const state& o) const {
      if (entries.size() != o.entries.size()) return false;
      auto it = o.entries.begin();
      for (const auto& [k, v] : entries) {
        if (it->first != k || it->second.value != v.value) return false;
        ++it;
      }
      return true;
    }
  };

  // ------------------------------------------------------------- hashing

  static digest leaf_hash(const bytes& key, const digest& value_digest,
                          const std::optional<bytes>& successor) {
    byte_writer w;
    w.u8(0x00);
    w.blob(byte_view(key));
    w.blob(view(value_digest));
    w.u8(successor ? 1 : 0);
    w.blob(successor ? byte_view(*successor) : byte_view{});
    return sha256(w);
  }

  static digest leaf_hash(const leaf_payload& p) {
    return leaf_hash(p.key, p.value_digest, p.successor);
  }

  static digest inner_hash(const digest& left, const digest& right) {
    byte_writer w;
    w.u8(0x01);
    w.raw(view(left));
    w.raw(view(right));
    return sha256(w);
  }

  static digest empty_root() {
    byte_writer w;
    w.u8(0x02);
    return sha256(w);
  }

  static std::optional<bytes> successor_at(const frontier& f, std::size_t i) {
    return i + 1 < f.size() ? std::optional<bytes>(f[i + 1].key) : std::nullopt;
  }

  static digest leaf_hash_at(const frontier& f, std::size_t i) {
    return leaf_hash(f[i].key, f[i].value_digest, successor_at(f, i));
  }

  static digest root_of(const frontier& f) {
    if (f.empty()) return empty_root();
    std::vector<digest> hashes(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) hashes[i] = leaf_hash_at(f, i);
    return root_of_hashes(hashes, 0, hashes.size());
  }

  static tree_path path_at(const frontier& f, std::size_t index) {
    std::vector<digest> hashes(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) hashes[i] = leaf_hash_at(f, i);
    tree_path path;
    path_of_hashes(hashes, 0, hashes.size(), index, path);
    return path;
  }

  static digest root_from_path(digest leaf, const tree_path& path) {
    for (const path_step& s : path)
      leaf = s.sibling_on_right ? inner_hash(leaf, s.sibling) : inner_hash(s.sibling, leaf);
    return leaf;
  }

  // ----------------------------------------------------------- ads hooks

  static state initial_state() { return {}; }
  static digest initial_authenticator() { return empty_root(); }
  static operation genesis_operation() { return {}; }

  static bool is_query(const operation& op) {
    return op.kind == op_kind::get || op.kind == op_kind::list;
  }

  static std::pair<response, aux_data> query(const state& s,
                                             std::span<const operation> ops) {
    state scratch = s;
    aux_data aux;
    response last;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const operation& op = ops[i];
      const bool is_last = i + 1 == ops.size();
      switch (op.kind) {
        case op_kind::get:
          if (is_last) {
            proof_step step;
            step.op_index = static_cast<std::uint32_t>(i);
            auto it = scratch.entries.find(op.key);
            if (it != scratch.entries.end()) {
              step.k = proof_step::kind::get_found;
              auto f = frontier_of(scratch);
              std::size_t idx = index_of(f, op.key);
              step.successor = successor_at(f, idx);
              step.path = path_at(f, idx);
              last = response::of_value(it->second.value);
            } else {
              step.k = proof_step::kind::get_absent;
              step.absence = absence_for(scratch, op.key);
              last = response::none();
            }
            aux.steps.push_back(std::move(step));
          } else {
            auto it = scratch.entries.find(op.key);
            last = it != scratch.entries.end() ? response::of_value(it->second.value)
                                               : response::none();
          }
          break;
        case op_kind::put: {
          proof_step step;
          step.op_index = static_cast<std::uint32_t>(i);
          auto f = frontier_of(scratch);
          auto it = scratch.entries.find(op.key);
          if (it != scratch.entries.end()) {
            std::size_t idx = index_of(f, op.key);
            step.k = proof_step::kind::put_replace;
            step.old_value_digest = f[idx].value_digest;
            step.successor = successor_at(f, idx);
            step.path = path_at(f, idx);
          } else {
            step.k = proof_step::kind::put_insert;
            step.snapshot = std::move(f);
          }
          aux.steps.push_back(std::move(step));
          apply(scratch, op);
          last = response::none();
          break;
        }
        case op_kind::del: {
          proof_step step;
          step.op_index = static_cast<std::uint32_t>(i);
          if (scratch.entries.count(op.key)) {
            step.k = proof_step::kind::del_frontier;
            step.snapshot = frontier_of(scratch);
            aux.steps.push_back(std::move(step));
            apply(scratch, op);
          } else {
            step.k = proof_step::kind::del_absent;
            step.absence = absence_for(scratch, op.key);
            aux.steps.push_back(std::move(step));
          }
          last = response::none();
          break;
        }
        case op_kind::list: {
          std::vector<bytes> keys;
          for (const auto& [k, v] : scratch.entries) keys.push_back(k);
          if (is_last) {
            proof_step step;
            step.op_index = static_cast<std::uint32_t>(i);
            step.k = proof_step::kind::list_all;
            step.snapshot = frontier_of(scratch);
            aux.steps.push_back(std::move(step));
          }
          last = response::of_keys(std::move(keys));
          break;
        }
        case op_kind::genesis:
          last = response::none();
          break;
      }
    }
    return {std::move(last), std::move(aux)};
  }

  static authexec_result<aux_data> authexec(std::span<const operation> ops, const digest& a,
                                            const response& r, const aux_data& aux) {
    authexec_result<aux_data> fail{};
    if (ops.empty() || r.is_abort()) return fail;

    digest cur = a;
    std::size_t next_step = 0;
    for (std::size_t i = 0; i < ops.size(); ++i) {
      const operation& op = ops[i];
      const bool is_last = i + 1 == ops.size();
      if (!is_last && is_query(op)) continue;  // verified when it completed

      if (next_step >= aux.steps.size()) return fail;
      const proof_step& step = aux.steps[next_step++];
      if (step.op_index != i) return fail;

      switch (op.kind) {
        case op_kind::get: {
          if (!is_last) return fail;
          if (step.k == proof_step::kind::get_found) {
            if (r.k != response::kind::value) return fail;
            digest leaf = leaf_hash(op.key, sha256(byte_view(r.value)), step.successor);
            if (root_from_path(leaf, step.path) != cur) return fail;
          } else if (step.k == proof_step::kind::get_absent) {
            if (r.k != response::kind::none) return fail;
            if (!check_absence(step.absence, op.key, cur)) return fail;
          } else {
            return fail;
          }
          break;
        }
        case op_kind::put: {
          if (is_last && r.k != response::kind::none) return fail;
          digest new_value = sha256(byte_view(op.value));
          if (step.k == proof_step::kind::put_replace) {
            digest old_leaf = leaf_hash(op.key, step.old_value_digest, step.successor);
            if (root_from_path(old_leaf, step.path) != cur) return fail;
            digest new_leaf = leaf_hash(op.key, new_value, step.successor);
            cur = root_from_path(new_leaf, step.path);
          } else if (step.k == proof_step::kind::put_insert) {
            if (root_of(step.snapshot) != cur) return fail;
            if (find_key(step.snapshot, op.key)) return fail;  // must be absent
            frontier next = step.snapshot;
            auto pos = std::lower_bound(next.begin(), next.end(), op.key,
                                        [](const frontier_entry& e, const bytes& k) {
                                          return e.key < k;
                                        });
            next.insert(pos, frontier_entry{op.key, new_value});
            cur = root_of(next);
          } else {
            return fail;
          }
          break;
        }
        case op_kind::del: {
          if (is_last && r.k != response::kind::none) return fail;
          if (step.k == proof_step::kind::del_frontier) {
            if (root_of(step.snapshot) != cur) return fail;
            auto idx = find_key(step.snapshot, op.key);
            if (!idx) return fail;
            frontier next = step.snapshot;
            next.erase(next.begin() + static_cast<std::ptrdiff_t>(*idx));
            cur = root_of(next);
          } else if (step.k == proof_step::kind::del_absent) {
            if (!check_absence(step.absence, op.key, cur)) return fail;
          } else {
            return fail;
          }
          break;
        }
        case op_kind::list: {
          if (!is_last || step.k != proof_step::kind::list_all) return fail;
          if (r.k != response::kind::keys) return fail;
          if (root_of(step.snapshot) != cur) return fail;
          if (r.keys.size() != step.snapshot.size()) return fail;
          for (std::size_t k = 0; k < r.keys.size(); ++k)
            if (r.keys[k] != step.snapshot[k].key) return fail;
          break;
        }
        case op_kind::genesis:
          return fail;
      }
    }
    if (next_step != aux.steps.size()) return fail;  // unconsumed proof material

    authexec_result<aux_data> ok;
    ok.authenticator = cur;
    ok.refresh_aux.post_root = cur;
    ok.valid = true;
    return ok;
  }

  static void refresh(state& s, const operation& op, const aux_data& aux) {
    apply(s, op);
    if (aux.post_root && *aux.post_root != root_of(frontier_of(s)))
      throw std::logic_error("adict refresh diverged from authenticated root");
  }

  /// Table of write-read conflicts: a pending put or del makes a get of
  /// the same key or a list incompatible; everything else is compatible.
  static bool compatible_pair(const operation& pending, const operation& current) {
    if (pending.kind != op_kind::put && pending.kind != op_kind::del) return true;
    if (current.kind == op_kind::list) return false;
    if (current.kind == op_kind::get && current.key == pending.key) return false;
    return true;
  }

  /// Commutativity of two operations: both execution orders must yield the
  /// same final state and the same responses on every state.  Strictly
  /// smaller than compatibility; used by the baseline benchmark mode.
  static bool commuting_pair(const operation& a, const operation& b) {
    auto writes = [](const operation& o) {
      return o.kind == op_kind::put || o.kind == op_kind::del;
    };
    if (!writes(a) && !writes(b)) return true;  // two queries always commute
    if (a.kind == op_kind::list || b.kind == op_kind::list) {
      // a list next to any put does not commute (the put may add a key);
      // a list next to a del does not commute (the del may remove one).
      const operation& other = a.kind == op_kind::list ? b : a;
      return !writes(other);
    }
    if (a.kind == op_kind::put && b.kind == op_kind::put) return a.key != b.key;
    if (writes(a) && writes(b)) {
      // put/del or del/del
      if (a.kind == op_kind::del && b.kind == op_kind::del) return true;
      return a.key != b.key;
    }
    // exactly one write, one keyed query (get)
    const operation& w = writes(a) ? a : b;
    const operation& q = writes(a) ? b : a;
    return w.key != q.key;
  }

  // ------------------------------------------------------------ encoding

  static bytes encode_operation(const operation& op) {
    byte_writer w;
    w.u8(static_cast<std::uint8_t>(op.kind));
    w.blob(byte_view(op.key));
    w.blob(byte_view(op.value));
    return w.take();
  }

  static operation decode_operation(byte_view raw) {
    byte_reader r(raw);
    operation op = read_operation(r);
    r.finish();
    return op;
  }

  static bytes encode_response(const response& resp) {
    byte_writer w;
    write_response(w, resp);
    return w.take();
  }

  static response decode_response(byte_view raw) {
    byte_reader r(raw);
    response resp = read_response(r);
    r.finish();
    return resp;
  }

  static bytes encode_aux(const aux_data& aux) {
    byte_writer w;
    write_aux(w, aux);
    return w.take();
  }

  static aux_data decode_aux(byte_view raw) {
    byte_reader r(raw);
    aux_data aux = read_aux(r);
    r.finish();
    return aux;
  }

  // Stream-style helpers used by the wire module.
  static void write_operation(byte_writer& w, const operation& op) {
    w.u8(static_cast<std::uint8_t>(op.kind));
    w.blob(byte_view(op.key));
    w.blob(byte_view(op.value));
  }

  static operation read_operation(byte_reader& r) {
    operation op;
    std::uint8_t k = r.u8();
    if (k > 4) throw decode_error("unknown operation kind");
    op.kind = static_cast<op_kind>(k);
    op.key = r.blob();
    op.value = r.blob();
    return op;
  }

  static void write_response(byte_writer& w, const response& resp) {
    w.u8(static_cast<std::uint8_t>(resp.k));
    w.blob(byte_view(resp.value));
    w.u32(static_cast<std::uint32_t>(resp.keys.size()));
    for (const bytes& k : resp.keys) w.blob(byte_view(k));
  }

  static response read_response(byte_reader& r) {
    response resp;
    std::uint8_t k = r.u8();
    if (k > 3) throw decode_error("unknown response kind");
    resp.k = static_cast<response::kind>(k);
    resp.value = r.blob();
    std::uint32_t n = r.u32();
    resp.keys.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) resp.keys.push_back(r.blob());
    return resp;
  }

  static void write_aux(byte_writer& w, const aux_data& aux) {
    w.u32(static_cast<std::uint32_t>(aux.steps.size()));
    for (const proof_step& s : aux.steps) {
      w.u32(s.op_index);
      w.u8(static_cast<std::uint8_t>(s.k));
      switch (s.k) {
        case proof_step::kind::get_found:
          write_opt_key(w, s.successor);
          write_path(w, s.path);
          break;
        case proof_step::kind::put_replace:
          w.raw(view(s.old_value_digest));
          write_opt_key(w, s.successor);
          write_path(w, s.path);
          break;
        case proof_step::kind::get_absent:
        case proof_step::kind::del_absent:
          write_absence(w, s.absence);
          break;
        case proof_step::kind::put_insert:
        case proof_step::kind::del_frontier:
        case proof_step::kind::list_all:
          write_frontier(w, s.snapshot);
          break;
      }
    }
    w.u8(aux.post_root ? 1 : 0);
    if (aux.post_root) w.raw(view(*aux.post_root));
  }

  static aux_data read_aux(byte_reader& r) {
    aux_data aux;
    std::uint32_t n = r.u32();
    aux.steps.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      proof_step s;
      s.op_index = r.u32();
      std::uint8_t k = r.u8();
      if (k < 1 || k > 7) throw decode_error("unknown proof step kind");
      s.k = static_cast<proof_step::kind>(k);
      switch (s.k) {
        case proof_step::kind::get_found:
          s.successor = read_opt_key(r);
          s.path = read_path(r);
          break;
        case proof_step::kind::put_replace:
          s.old_value_digest = digest_from(byte_view(r.raw(32)));
          s.successor = read_opt_key(r);
          s.path = read_path(r);
          break;
        case proof_step::kind::get_absent:
        case proof_step::kind::del_absent:
          s.absence = read_absence(r);
          break;
        case proof_step::kind::put_insert:
        case proof_step::kind::del_frontier:
        case proof_step::kind::list_all:
          s.snapshot = read_frontier(r);
          break;
      }
      aux.steps.push_back(std::move(s));
    }
    if (r.u8()) aux.post_root = digest_from(byte_view(r.raw(32)));
    return aux;
  }

  // ------------------------------------------------------------- helpers

  static frontier frontier_of(const state& s) {
    frontier f;
    f.reserve(s.entries.size());
    for (const auto& [k, v] : s.entries) f.push_back(frontier_entry{k, v.value_digest});
    return f;
  }

  static void apply(state& s, const operation& op) {
    if (op.kind == op_kind::put)
      s.entries[op.key] = stored_value{op.value, sha256(byte_view(op.value))};
    else if (op.kind == op_kind::del)
      s.entries.erase(op.key);
  }

  static std::optional<std::size_t> find_key(const frontier& f, const bytes& key) {
    auto it = std::lower_bound(f.begin(), f.end(), key,
                               [](const frontier_entry& e, const bytes& k) { return e.key < k; });
    if (it == f.end() || it->key != key) return std::nullopt;
    return static_cast<std::size_t>(it - f.begin());
  }

  static std::size_t index_of(const frontier& f, const bytes& key) {
    auto idx = find_key(f, key);
    if (!idx) throw std::logic_error("key not in frontier");
    return *idx;
  }

  static absence_proof absence_for(const state& s, const bytes& key) {
    absence_proof p;
    auto f = frontier_of(s);
    if (f.empty()) {
      p.k = absence_proof::kind::empty;
      return p;
    }
    auto it = std::lower_bound(f.begin(), f.end(), key,
                               [](const frontier_entry& e, const bytes& k) { return e.key < k; });
    if (it == f.begin()) {
      // key sorts before every leaf; prove the first leaf is leftmost
      p.k = absence_proof::kind::leftmost;
      p.leaf = leaf_payload{f[0].key, f[0].value_digest, successor_at(f, 0)};
      p.path = path_at(f, 0);
    } else {
      std::size_t pred = static_cast<std::size_t>(it - f.begin()) - 1;
      p.k = absence_proof::kind::gap;
      p.leaf = leaf_payload{f[pred].key, f[pred].value_digest, successor_at(f, pred)};
      p.path = path_at(f, pred);
    }
    return p;
  }

  static bool check_absence(const absence_proof& p, const bytes& key, const digest& root) {
    switch (p.k) {
      case absence_proof::kind::empty:
        return root == empty_root();
      case absence_proof::kind::leftmost: {
        if (!(key < p.leaf.key)) return false;
        // all-left positions have every sibling on the right
        for (const path_step& s : p.path)
          if (!s.sibling_on_right) return false;
        return root_from_path(leaf_hash(p.leaf), p.path) == root;
      }
      case absence_proof::kind::gap: {
        if (!(p.leaf.key < key)) return false;
        if (p.leaf.successor && !(key < *p.leaf.successor)) return false;
        return root_from_path(leaf_hash(p.leaf), p.path) == root;
      }
    }
    return false;
  }

 private:
  static digest root_of_hashes(const std::vector<digest>& hashes, std::size_t lo,
                               std::size_t hi) {
    if (hi - lo == 1) return hashes[lo];
    std::size_t split = largest_pow2_below(hi - lo);
    return inner_hash(root_of_hashes(hashes, lo, lo + split),
                      root_of_hashes(hashes, lo + split, hi));
  }

  static digest path_of_hashes(const std::vector<digest>& hashes, std::size_t lo,
                               std::size_t hi, std::size_t index, tree_path& path) {
    if (hi - lo == 1) return hashes[lo];
    std::size_t split = largest_pow2_below(hi - lo);
    if (index < lo + split) {
      digest left = path_of_hashes(hashes, lo, lo + split, index, path);
      digest right = root_of_hashes(hashes, lo + split, hi);
      path.push_back(path_step{true, right});
      return inner_hash(left, right);
    }
    digest right = path_of_hashes(hashes, lo + split, hi, index, path);
    digest left = root_of_hashes(hashes, lo, lo + split);
    path.push_back(path_step{false, left});
    return inner_hash(left, right);
  }

  static std::size_t largest_pow2_below(std::size_t n) {
    std::size_t p = 1;
    while (p * 2 < n) p *= 2;
    return p;
  }

  static void write_opt_key(byte_writer& w, const std::optional<bytes>& k) {
    w.u8(k ? 1 : 0);
    w.blob(k ? byte_view(*k) : byte_view{});
  }

  static std::optional<bytes> read_opt_key(byte_reader& r) {
    bool has = r.u8() != 0;
    bytes k = r.blob();
    if (!has) {
      if (!k.empty()) throw decode_error("non-empty absent successor");
      return std::nullopt;
    }
    return k;
  }

  static void write_path(byte_writer& w, const tree_path& p) {
    w.u32(static_cast<std::uint32_t>(p.size()));
    for (const path_step& s : p) {
      w.u8(s.sibling_on_right ? 1 : 0);
      w.raw(view(s.sibling));
    }
  }

  static tree_path read_path(byte_reader& r) {
    std::uint32_t n = r.u32();
    tree_path p;
    p.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      path_step s;
      s.sibling_on_right = r.u8() != 0;
      s.sibling = digest_from(byte_view(r.raw(32)));
      p.push_back(s);
    }
    return p;
  }

  static void write_frontier(byte_writer& w, const frontier& f) {
    w.u32(static_cast<std::uint32_t>(f.size()));
    for (const frontier_entry& e : f) {
      w.blob(byte_view(e.key));
      w.raw(view(e.value_digest));
    }
  }

  static frontier read_frontier(byte_reader& r) {
    std::uint32_t n = r.u32();
    frontier f;
    f.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
      frontier_entry e;
      e.key = r.blob();
      e.value_digest = digest_from(byte_view(r.raw(32)));
      f.push_back(std::move(e));
    }
    return f;
  }

  static void write_leaf(byte_writer& w, const leaf_payload& l) {
    w.blob(byte_view(l.key));
    w.raw(view(l.value_digest));
    write_opt_key(w, l.successor);
  }

  static leaf_payload read_leaf(byte_reader& r) {
    leaf_payload l;
    l.key = r.blob();
    l.value_digest = digest_from(byte_view(r.raw(32)));
    l.successor = read_opt_key(r);
    return l;
  }

  static void write_absence(byte_writer& w, const absence_proof& p) {
    w.u8(static_cast<std::uint8_t>(p.k));
    if (p.k != absence_proof::kind::empty) {
      write_leaf(w, p.leaf);
      write_path(w, p.path);
    }
  }

  static absence_proof read_absence(byte_reader& r) {
    absence_proof p;
    std::uint8_t k = r.u8();
    if (k > 2) throw decode_error("unknown absence proof kind");
    p.k = static_cast<absence_proof::kind>(k);
    if (p.k != absence_proof::kind::empty) {
      p.leaf = read_leaf(r);
      p.path = read_path(r);
    }
    return p;
  }
};

static_assert(authenticated_data_structure<adict>);

}  // namespace vicos
