#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vicos {

/// Classification of a failed protocol assertion.  Any of these means the
/// server (or the object store) misbehaved; the raising client refuses all
/// further operations.
enum class alarm_kind : std::uint8_t {
  hash_chain_mismatch,  // an operation conflicts with the recorded view
  bad_signature,        // a commit/auth/invoke signature failed to verify
  bad_proof,            // authexec rejected a response, or object bytes mismatch
  bad_pending,          // the pending list is malformed or ends with a foreign op
  protocol_order,       // structural violation: bad lengths, unknown entries, garbled bytes
};

inline const char* to_string(alarm_kind k) {
  switch (k) {
    case alarm_kind::hash_chain_mismatch: return "hash-chain-mismatch";
    case alarm_kind::bad_signature: return "bad-signature";
    case alarm_kind::bad_proof: return "bad-proof";
    case alarm_kind::bad_pending: return "bad-pending";
    case alarm_kind::protocol_order: return "protocol-order";
  }
  return "?";
}

struct alarm_info {
  alarm_kind kind = alarm_kind::protocol_order;
  std::uint64_t seq = 0;
  std::string context;
};

struct fault_alarm : std::runtime_error {
  alarm_info info;

  explicit fault_alarm(alarm_info i)
      : std::runtime_error(std::string("integrity violation detected: ") +
                           to_string(i.kind) + " at seq " + std::to_string(i.seq) +
                           (i.context.empty() ? "" : ": " + i.context)),
        info(std::move(i)) {}
};

/// Backend or transport failure; distinct from an integrity fault.
struct storage_error : std::runtime_error {
  explicit storage_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vicos
