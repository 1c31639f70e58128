#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "vicos/bytes.hpp"
#include "vicos/crypto.hpp"
#include "vicos/fault.hpp"
#include "vicos/wire.hpp"

namespace vicos {

/// Server-side intake ordering: messages that complete in-flight work
/// (commit, update-auth, commit-auth) are dequeued before messages that
/// start new work (invoke, reply).  FIFO within a class, so the per-client
/// send order the protocol relies on is preserved.  Channels themselves
/// stay strictly FIFO; the preference lives only here.
class intake_queue {
 public:
  struct item {
    client_id from = 0;
    bytes payload;
    msg_kind kind = msg_kind::invoke;
  };

  void push(client_id from, bytes payload) {
    msg_kind k = peek_kind(byte_view(payload));
    auto& q = high_priority(k) ? high_ : low_;
    q.push_back(item{from, std::move(payload), k});
  }

  std::optional<item> pop() {
    auto& q = !high_.empty() ? high_ : low_;
    if (q.empty()) return std::nullopt;
    item it = std::move(q.front());
    q.pop_front();
    trace_.push_back(it.kind);
    return it;
  }

  bool empty() const { return high_.empty() && low_.empty(); }
  std::size_t size() const { return high_.size() + low_.size(); }

  /// Order in which messages were handed to the protocol, for assertions.
  const std::vector<msg_kind>& dequeue_trace() const { return trace_; }

 private:
  std::deque<item> high_;
  std::deque<item> low_;
  std::vector<msg_kind> trace_;
};

/// One endpoint of a reliable, FIFO, duplex message channel between a
/// client and the server.  Messages are delivered exactly once, in send
/// order, per direction.  Disconnection surfaces as channel-closed
/// (receive returns nullopt with closed() true).
class duplex {
 public:
  virtual ~duplex() = default;
  virtual void send(byte_view msg) = 0;
  /// Blocks up to `timeout_ms` (-1 = forever).  nullopt on timeout or close.
  virtual std::optional<bytes> receive(long timeout_ms) = 0;
  virtual void close() = 0;
  virtual bool closed() const = 0;
};

namespace detail {

struct inproc_shared {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<bytes> dir[2];  // [0]: a→b, [1]: b→a
  bool closed = false;
};

class inproc_endpoint final : public duplex {
 public:
  inproc_endpoint(std::shared_ptr<inproc_shared> s, int side) : s_(std::move(s)), side_(side) {}

  void send(byte_view msg) override {
    std::lock_guard lock(s_->mu);
    if (s_->closed) throw storage_error("channel closed");
    s_->dir[side_].emplace_back(msg.begin(), msg.end());
    s_->cv.notify_all();
  }

  std::optional<bytes> receive(long timeout_ms) override {
    std::unique_lock lock(s_->mu);
    auto& q = s_->dir[1 - side_];
    auto ready = [&] { return !q.empty() || s_->closed; };
    if (timeout_ms < 0)
      s_->cv.wait(lock, ready);
    else if (!s_->cv.wait_for(lock, std::chrono::milliseconds(timeout_ms), ready))
      return std::nullopt;
    if (q.empty()) return std::nullopt;  // closed
    bytes out = std::move(q.front());
    q.pop_front();
    return out;
  }

  void close() override {
    std::lock_guard lock(s_->mu);
    s_->closed = true;
    s_->cv.notify_all();
  }

  bool closed() const override {
    std::lock_guard lock(s_->mu);
    return s_->closed;
  }

 private:
  std::shared_ptr<inproc_shared> s_;
  int side_;
};

}  // namespace detail

inline std::pair<std::unique_ptr<duplex>, std::unique_ptr<duplex>> make_inproc_pair() {
  auto shared = std::make_shared<detail::inproc_shared>();
  return {std::make_unique<detail::inproc_endpoint>(shared, 0),
          std::make_unique<detail::inproc_endpoint>(shared, 1)};
}

}  // namespace vicos
