#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "vicos/adict.hpp"
#include "vicos/aip_server.hpp"
#include "vicos/transport.hpp"

namespace vicos {

/// Runs one protocol server over attachable duplex channels: a reader
/// thread per connection feeds a priority intake queue, and a single
/// protocol thread consumes it, so every protocol step executes atomically
/// with respect to all others.  Works over in-process pairs and TCP
/// connections alike.
class vicos_service {
 public:
  using server_t = aip_server_core<adict>;

  vicos_service(aip_server_config cfg, const keyring* keys, genesis<adict> g)
      : core_(cfg, keys, std::move(g)) {}

  ~vicos_service() { stop(); }

  server_t& core() { return core_; }

  void start() {
    bool expected = false;
    if (!running_.compare_exchange_strong(expected, true)) return;
    loop_ = std::thread([this] { protocol_loop(); });
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      if (!running_) return;
      running_ = false;
      for (auto& [id, conn] : conns_) conn.channel->close();
      cv_.notify_all();
    }
    if (loop_.joinable()) loop_.join();
    std::vector<std::thread> readers;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, conn] : conns_)
        if (conn.reader.joinable()) readers.push_back(std::move(conn.reader));
      conns_.clear();
    }
    for (auto& t : readers) t.join();
  }

  /// Takes ownership of a connection for the given client; replaces any
  /// previous connection of the same client.  If an authentication round
  /// trip was in flight towards this client, it is retransmitted.
  void attach(client_id id, std::unique_ptr<duplex> channel) {
    std::unique_lock lock(mu_);
    auto old = conns_.find(id);
    std::thread stale_reader;
    if (old != conns_.end()) {
      old->second.channel->close();
      stale_reader = std::move(old->second.reader);
      conns_.erase(old);
    }
    connection conn;
    conn.channel = std::move(channel);
    duplex* ch = conn.channel.get();
    conn.reader = std::thread([this, id, ch] { reader_loop(id, ch); });
    conns_.emplace(id, std::move(conn));
    lock.unlock();
    if (stale_reader.joinable()) stale_reader.join();
    resend_pending_auth(id);
  }

 private:
  struct connection {
    std::unique_ptr<duplex> channel;
    std::thread reader;
  };

  void reader_loop(client_id id, duplex* ch) {
    while (true) {
      auto msg = ch->receive(-1);
      if (!msg) {
        if (ch->closed()) return;
        continue;
      }
      std::lock_guard lock(mu_);
      if (!running_) return;
      try {
        intake_.push(id, std::move(*msg));
      } catch (const decode_error&) {
        continue;  // not even a classifiable message
      }
      cv_.notify_all();
    }
  }

  void protocol_loop() {
    while (true) {
      intake_queue::item item;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [this] { return !running_ || !intake_.empty(); });
        if (!running_ && intake_.empty()) return;
        item = *intake_.pop();
      }
      std::vector<server_t::outbound> outs;
      {
        std::lock_guard core_lock(core_mu_);
        try {
          outs = core_.on_message(item.from, byte_view(item.payload));
        } catch (const decode_error&) {
          continue;  // drop garbled input
        }
      }
      std::lock_guard lock(mu_);
      for (auto& o : outs) deliver_locked(o.to, o.payload);
    }
  }

  void deliver_locked(client_id to, const bytes& payload) {
    auto it = conns_.find(to);
    if (it == conns_.end()) return;  // client offline; passive retransmit on re-attach
    try {
      it->second.channel->send(byte_view(payload));
    } catch (const storage_error&) {
      it->second.channel->close();
    }
  }

  // lock order is always core_mu_ before mu_
  void resend_pending_auth(client_id id) {
    std::optional<server_t::outbound> pending;
    {
      std::lock_guard core_lock(core_mu_);
      pending = core_.pending_update_auth();
    }
    if (!pending || pending->to != id) return;
    std::lock_guard lock(mu_);
    deliver_locked(id, pending->payload);
  }

  server_t core_;
  std::mutex core_mu_;
  std::mutex mu_;
  std::condition_variable cv_;
  intake_queue intake_;
  std::map<client_id, connection> conns_;
  std::atomic<bool> running_{false};
  std::thread loop_;
};

}  // namespace vicos
