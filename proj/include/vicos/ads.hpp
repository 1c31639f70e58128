#pragma once

#include <concepts>
#include <span>
#include <utility>

#include "vicos/bytes.hpp"
#include "vicos/crypto.hpp"

namespace vicos {

/// Status of a committed operation.
enum class op_status : std::uint8_t { success = 0, aborted = 1 };

/// Result of verifying a response against the current authenticator.
/// `valid` is the only failure channel; when true, `authenticator` is the
/// digest of the post-state and `refresh_aux` is what the server needs to
/// apply the operation.
template <class Aux>
struct authexec_result {
  digest authenticator{};
  Aux refresh_aux{};
  bool valid = false;
};

/// The authenticated-data-structure contract the integrity protocol is
/// generic over.  An implementation supplies an opaque server-side state,
/// a short authenticator (digest of the state), per-operation proof
/// material, and a compatibility relation over operations.
///
///  - query:    evaluate an operation sequence against a state without
///              mutating it; returns the last response plus proof material
///              sufficient for authexec to verify every step.
///  - authexec: verify a response and its proofs against an authenticator;
///              on success yields the post-state authenticator.
///  - refresh:  apply one operation to the server state.
///  - compatible_pair: the write-read-conflict relation; a pending
///              sequence is compatible with an operation iff every pair is.
///
/// All functions are pure given their inputs; implementations must be safe
/// to move between threads but need not support concurrent mutation.
template <class A>
concept authenticated_data_structure = requires(
    const typename A::state& s, typename A::state& ms, const typename A::operation& op,
    std::span<const typename A::operation> ops, const digest& a,
    const typename A::response& r, const typename A::aux_data& aux, byte_view raw) {
  typename A::state;
  typename A::operation;
  typename A::response;
  typename A::aux_data;

  { A::initial_state() } -> std::same_as<typename A::state>;
  { A::initial_authenticator() } -> std::same_as<digest>;
  { A::genesis_operation() } -> std::same_as<typename A::operation>;
  { A::is_query(op) } -> std::same_as<bool>;

  { A::query(s, ops) } -> std::same_as<std::pair<typename A::response, typename A::aux_data>>;
  {
    A::authexec(ops, a, r, aux)
  } -> std::same_as<authexec_result<typename A::aux_data>>;
  { A::refresh(ms, op, aux) } -> std::same_as<void>;
  { A::compatible_pair(op, op) } -> std::same_as<bool>;

  { A::encode_operation(op) } -> std::same_as<bytes>;
  { A::decode_operation(raw) } -> std::same_as<typename A::operation>;
  { A::encode_response(r) } -> std::same_as<bytes>;
  { A::decode_response(raw) } -> std::same_as<typename A::response>;
  { A::encode_aux(aux) } -> std::same_as<bytes>;
  { A::decode_aux(raw) } -> std::same_as<typename A::aux_data>;
};

/// Pairwise fold of the compatibility relation over a pending sequence,
/// the shape used by both the client and the tests.
template <class Op, class Rel>
bool sequence_compatible(std::span<const Op> pending, const Op& current, Rel&& rel) {
  for (const Op& p : pending)
    if (!rel(p, current)) return false;
  return true;
}

}  // namespace vicos
