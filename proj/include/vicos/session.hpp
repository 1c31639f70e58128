#pragma once

#include <condition_variable>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include "vicos/transport.hpp"
#include "vicos/vicos_client.hpp"

namespace vicos {

/// Retry policy for aborted operations: the caller decides whether to
/// retry at all; the protocol only reports the abort.
struct retry_policy {
  int attempts = 3;
  std::chrono::milliseconds initial_delay{10};
  double multiplier = 2.0;
  std::uint64_t jitter_seed = 0;  // 0: seeded from the system RNG
};

/// Runs an operation, retrying after jittered exponential backoff while
/// it aborts.  Returns the last result (which may still be an abort).
template <class F>
vicos_result with_retry(F&& op, retry_policy policy = {}) {
  std::mt19937_64 rng(policy.jitter_seed ? policy.jitter_seed
                                         : std::random_device{}());
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  double delay_ms = static_cast<double>(policy.initial_delay.count());
  vicos_result r = op();
  for (int attempt = 1; attempt < policy.attempts && r.aborted(); ++attempt) {
    std::this_thread::sleep_for(
        std::chrono::duration<double, std::milli>(delay_ms * jitter(rng)));
    delay_ms *= policy.multiplier;
    r = op();
  }
  return r;
}

/// Blocking object-store client over a duplex channel to the server.  A
/// background receiver keeps the passive protocol phase moving while the
/// caller is between operations; operations themselves block their caller
/// for the active phase only.  One operation at a time per session;
/// concurrency comes from running several sessions.
///
/// Integrity violations surface as fault_alarm, transport or backend
/// problems as storage_error; aborts are ordinary results.
class vicos_session {
 public:
  vicos_session(vicos_config cfg, const keyring* keys, cos_backend* cos,
                std::unique_ptr<duplex> channel)
      : core_(cfg, keys, cos), cos_(cos), channel_(std::move(channel)) {
    receiver_ = std::thread([this] { receive_loop(); });
  }

  ~vicos_session() {
    try {
      drain(5000);
    } catch (...) {
    }
    channel_->close();
    if (receiver_.joinable()) receiver_.join();
  }

  /// Waits until this client's background authentication work is done.
  /// Call before going offline: an abandoned passive phase stalls the
  /// whole group until this client returns.
  bool drain(long timeout_ms = 10000) {
    std::unique_lock lock(mu_);
    auto settled = [this] {
      return core_.protocol().outstanding_passive() == 0 || core_.alarmed() ||
             channel_->closed();
    };
    if (timeout_ms < 0)
      cv_.wait(lock, settled);
    else if (!cv_.wait_for(lock, std::chrono::milliseconds(timeout_ms), settled))
      return false;
    return core_.protocol().outstanding_passive() == 0;
  }

  vicos_result put(bytes key, bytes value) {
    return run([&] { return core_.begin_put(std::move(key), std::move(value)); });
  }
  vicos_result get(bytes key) {
    return run([&] { return core_.begin_get(std::move(key)); });
  }
  vicos_result del(bytes key) {
    return run([&] { return core_.begin_del(std::move(key)); });
  }
  vicos_result list() {
    return run([&] { return core_.begin_list(); });
  }
  vicos_result stat(bytes key) {
    return run([&] { return core_.begin_stat(std::move(key)); });
  }

  bool alarmed() const { return core_.alarmed(); }
  const alarm_info& alarm() const { return core_.alarm(); }

  /// Object-store keys not referenced by any current dictionary record:
  /// leftovers of replaced versions, deletes, and failed abort
  /// compensations.  Assumes no writers are concurrently active (a
  /// maintenance window); a racing put's fresh object would look like an
  /// orphan here.
  std::vector<bytes> find_orphans() {
    std::set<bytes> live;
    vicos_result keys = list();
    if (keys.aborted()) throw storage_error("listing aborted; retry the sweep");
    for (const bytes& key : keys.keys) {
      vicos_result rec = stat(key);
      if (rec.aborted()) throw storage_error("record fetch aborted; retry the sweep");
      if (rec.k != vicos_result::kind::value) continue;  // deleted meanwhile
      auto parsed = vicos_client_core::decode_record(rec.value);
      if (!parsed) continue;  // alarm already raised by the core
      live.insert(vicos_client_core::translate(key, parsed->first));
    }
    std::vector<bytes> orphans;
    for (const bytes& cos_key : cos_->list())
      if (!live.count(cos_key)) orphans.push_back(cos_key);
    return orphans;
  }

  std::size_t gc_orphans() {
    auto orphans = find_orphans();
    for (const bytes& key : orphans) cos_->del(key);
    return orphans.size();
  }

 private:
  template <class Begin>
  vicos_result run(Begin&& begin) {
    std::unique_lock lock(mu_);
    if (core_.alarmed()) throw fault_alarm(core_.alarm());
    completed_.reset();
    bytes invoke = begin();  // may throw fault_alarm / storage_error
    channel_->send(byte_view(invoke));
    cv_.wait(lock, [this] {
      return completed_.has_value() || core_.alarmed() || channel_->closed();
    });
    if (completed_) return std::move(*completed_);
    if (core_.alarmed()) throw fault_alarm(core_.alarm());
    throw storage_error("connection to server lost");
  }

  void receive_loop() {
    while (true) {
      auto msg = channel_->receive(-1);
      std::unique_lock lock(mu_);
      if (!msg) {
        if (channel_->closed()) {
          cv_.notify_all();
          return;
        }
        continue;
      }
      auto step = core_.on_message(byte_view(*msg));
      for (const bytes& out : step.to_send) {
        try {
          channel_->send(byte_view(out));
        } catch (const storage_error&) {
        }
      }
      if (step.completed) completed_ = std::move(step.completed);
      cv_.notify_all();  // completions, alarms, and passive-phase progress
    }
  }

  vicos_client_core core_;
  cos_backend* cos_;
  std::unique_ptr<duplex> channel_;
  std::thread receiver_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::optional<vicos_result> completed_;
};

}  // namespace vicos
