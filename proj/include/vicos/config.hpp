#pragma once

#include <filesystem>
#include <fstream>
#include <optional>

#include <nlohmann/json.hpp>

#include "vicos/adict.hpp"
#include "vicos/crypto.hpp"
#include "vicos/fault.hpp"
#include "vicos/wire.hpp"

namespace vicos {

/// Key material and genesis records as stored on disk.
///
/// Client file (mac mode):    {"mode":"mac","shared_key":"<hex>"}
/// Client file (public-key):  {"mode":"public-key",
///                             "clients":{"0":{"public":"..","private":".."},..}}
/// Server file: verification material only (none in mac mode), plus the
/// genesis records every deployment needs:
///                            {.., "genesis":{"record":"<hex>","auth":"<hex>"}}
struct group_config {
  keyring keys;
  std::optional<genesis<adict>> gen;
};

namespace detail {

inline bytes encode_genesis_record(const typename wire<adict>::operation_record& r) {
  byte_writer w;
  wire<adict>::write_record(w, r);
  return w.take();
}

inline bytes encode_genesis_auth(const typename wire<adict>::auth_record& a) {
  byte_writer w;
  wire<adict>::write_auth(w, a);
  return w.take();
}

}  // namespace detail

inline nlohmann::json to_json(const keyring& keys, bool include_private) {
  nlohmann::json j;
  if (keys.mode() == sig_scheme::mac) {
    j["mode"] = "mac";
    if (include_private && !keys.shared_mac_key().empty())
      j["shared_key"] = to_hex(byte_view(keys.shared_mac_key()));
  } else {
    j["mode"] = "public-key";
    nlohmann::json clients = nlohmann::json::object();
    for (const auto& [id, pub] : keys.public_keys()) {
      nlohmann::json entry;
      entry["public"] = to_hex(byte_view(pub));
      if (include_private) {
        auto it = keys.private_keys().find(id);
        if (it != keys.private_keys().end())
          entry["private"] = to_hex(byte_view(it->second));
      }
      clients[std::to_string(id)] = std::move(entry);
    }
    j["clients"] = std::move(clients);
  }
  return j;
}

inline keyring keyring_from_json(const nlohmann::json& j) {
  keyring keys;
  std::string mode = j.at("mode").get<std::string>();
  if (mode == "mac") {
    if (j.contains("shared_key"))
      keys.set_shared_mac_key(from_hex(j.at("shared_key").get<std::string>()));
    // else: mac-mode verifier file — no key, verification is skipped
  } else if (mode == "public-key") {
    for (const auto& [id_str, entry] : j.at("clients").items()) {
      client_id id = static_cast<client_id>(std::stoul(id_str));
      std::optional<bytes> priv, pub;
      if (entry.contains("public")) pub = from_hex(entry.at("public").get<std::string>());
      if (entry.contains("private")) priv = from_hex(entry.at("private").get<std::string>());
      keys.set_keys(id, std::move(priv), std::move(pub));
    }
  } else {
    throw std::invalid_argument("unknown signature mode: " + mode);
  }
  return keys;
}

inline void save_group_config(const std::filesystem::path& path, const keyring& keys,
                              bool include_private,
                              const std::optional<genesis<adict>>& gen = std::nullopt) {
  nlohmann::json j = to_json(keys, include_private);
  if (gen) {
    j["genesis"] = {{"record", to_hex(byte_view(detail::encode_genesis_record(gen->record)))},
                    {"auth", to_hex(byte_view(detail::encode_genesis_auth(gen->auth)))}};
  }
  std::ofstream out(path);
  if (!out) throw storage_error("cannot write config file: " + path.string());
  out << j.dump(2) << '\n';
}

inline group_config load_group_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw storage_error("cannot read config file: " + path.string());
  nlohmann::json j = nlohmann::json::parse(in);
  group_config cfg;
  cfg.keys = keyring_from_json(j);
  if (j.contains("genesis")) {
    genesis<adict> g;
    {
      bytes raw = from_hex(j.at("genesis").at("record").get<std::string>());
      byte_reader r{byte_view(raw)};
      g.record = wire<adict>::read_record(r);
      r.finish();
    }
    {
      bytes raw = from_hex(j.at("genesis").at("auth").get<std::string>());
      byte_reader r{byte_view(raw)};
      g.auth = wire<adict>::read_auth(r);
      r.finish();
    }
    cfg.gen = std::move(g);
  }
  return cfg;
}

/// Generates fresh group key material and writes the two deployment
/// files: clients.json (signing material for every client including the
/// genesis signer) and server.json (verification material plus genesis).
inline void generate_group(const std::filesystem::path& dir, sig_scheme mode,
                           client_id n_clients) {
  keyring keys = mode == sig_scheme::mac ? keyring::make_mac(n_clients)
                                         : keyring::make_public_key(n_clients);
  auto gen = genesis<adict>::make(keys);
  std::filesystem::create_directories(dir);
  save_group_config(dir / "clients.json", keys, /*include_private=*/true, gen);
  save_group_config(dir / "server.json", keys.verifier_only(), /*include_private=*/false,
                    gen);
}

}  // namespace vicos
