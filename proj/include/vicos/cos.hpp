#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "vicos/bytes.hpp"
#include "vicos/fault.hpp"

namespace vicos {

/// Cloud object store: the untrusted bulk-bytes backend.  A flat key-value
/// namespace with atomic per-operation semantics; integrity of its
/// contents is established end to end by the client, never assumed here.
/// `del_prefix` removes every key with the given prefix; the client uses
/// it to clean the nonce-translated versions of an object key.
class cos_backend {
 public:
  virtual ~cos_backend() = default;
  virtual void put(const bytes& key, byte_view value) = 0;
  virtual std::optional<bytes> get(const bytes& key) = 0;
  virtual void del(const bytes& key) = 0;
  virtual std::vector<bytes> list() = 0;
  virtual void del_prefix(const bytes& prefix) = 0;
};

class memory_cos final : public cos_backend {
 public:
  void put(const bytes& key, byte_view value) override {
    std::lock_guard lock(mu_);
    objects_[key] = bytes(value.begin(), value.end());
  }

  std::optional<bytes> get(const bytes& key) override {
    std::lock_guard lock(mu_);
    auto it = objects_.find(key);
    if (it == objects_.end()) return std::nullopt;
    return it->second;
  }

  void del(const bytes& key) override {
    std::lock_guard lock(mu_);
    objects_.erase(key);
  }

  std::vector<bytes> list() override {
    std::lock_guard lock(mu_);
    std::vector<bytes> keys;
    keys.reserve(objects_.size());
    for (const auto& [k, v] : objects_) keys.push_back(k);
    return keys;
  }

  void del_prefix(const bytes& prefix) override {
    std::lock_guard lock(mu_);
    auto it = objects_.lower_bound(prefix);
    while (it != objects_.end() && it->first.size() >= prefix.size() &&
           std::equal(prefix.begin(), prefix.end(), it->first.begin()))
      it = objects_.erase(it);
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return objects_.size();
  }

  /// Test hook: raw mutable access for tamper scenarios.
  std::map<bytes, bytes>& raw() { return objects_; }

 private:
  mutable std::mutex mu_;
  std::map<bytes, bytes> objects_;
};

/// One file per object under a directory; file names are the hex of the
/// object key, so prefix deletion is a directory scan.
class fs_cos final : public cos_backend {
 public:
  explicit fs_cos(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw storage_error("cannot create object directory: " + ec.message());
  }

  void put(const bytes& key, byte_view value) override {
    auto tmp = dir_ / (to_hex(byte_view(key)) + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw storage_error("cannot write object");
      out.write(reinterpret_cast<const char*>(value.data()),
                static_cast<std::streamsize>(value.size()));
      if (!out) throw storage_error("short object write");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path_for(key), ec);
    if (ec) throw storage_error("cannot finalize object: " + ec.message());
  }

  std::optional<bytes> get(const bytes& key) override {
    std::ifstream in(path_for(key), std::ios::binary);
    if (!in) return std::nullopt;
    bytes value((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return value;
  }

  void del(const bytes& key) override {
    std::error_code ec;
    std::filesystem::remove(path_for(key), ec);
  }

  std::vector<bytes> list() override {
    std::vector<bytes> keys;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
      if (!entry.is_regular_file()) continue;
      std::string name = entry.path().filename().string();
      if (name.ends_with(".tmp")) continue;
      try {
        keys.push_back(from_hex(name));
      } catch (const std::invalid_argument&) {
        // foreign file in the directory; not ours
      }
    }
    std::sort(keys.begin(), keys.end());
    return keys;
  }

  void del_prefix(const bytes& prefix) override {
    for (const bytes& key : list())
      if (key.size() >= prefix.size() &&
          std::equal(prefix.begin(), prefix.end(), key.begin()))
        del(key);
  }

 private:
  std::filesystem::path path_for(const bytes& key) const {
    return dir_ / to_hex(byte_view(key));
  }

  std::filesystem::path dir_;
};

}  // namespace vicos
