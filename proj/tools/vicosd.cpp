// vicosd: the integrity-protocol server.  Listens for client connections,
// orders their operations, and drives the passive authentication phase.
// The server holds no signing keys; everything it serves is verified on
// the client side.

#include <CLI11.hpp>
#include <csignal>
#include <fstream>
#include <iostream>

#include "vicos/config.hpp"
#include "vicos/service.hpp"
#include "vicos/tcp.hpp"

using namespace vicos;

namespace {

vicos_service* g_service = nullptr;
tcp_listener* g_listener = nullptr;

void handle_signal(int) {
  if (g_listener) g_listener->close();
}

using applied_record = aip_server_core<adict>::applied_record;

bytes encode_applied(const applied_record& r) {
  byte_writer w;
  w.u64(r.seq);
  wire<adict>::write_record(w, r.record);
  wire<adict>::write_auth(w, r.auth);
  return w.take();
}

std::size_t replay_log(const std::filesystem::path& path, aip_server_core<adict>& core) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return 0;
  std::size_t n = 0;
  while (true) {
    std::uint8_t hdr[4];
    if (!in.read(reinterpret_cast<char*>(hdr), 4)) break;
    std::size_t len = std::size_t(hdr[0]) << 24 | std::size_t(hdr[1]) << 16 |
                      std::size_t(hdr[2]) << 8 | std::size_t(hdr[3]);
    bytes payload(len);
    if (!in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(len)))
      break;  // torn tail entry: ignore
    byte_reader r{byte_view(payload)};
    applied_record rec;
    rec.seq = r.u64();
    rec.record = wire<adict>::read_record(r);
    rec.auth = wire<adict>::read_auth(r);
    r.finish();
    core.restore(rec);
    ++n;
  }
  return n;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vicosd: integrity and consistency verification server"};

  std::string listen = "0.0.0.0:7787";
  std::string keys_path;
  unsigned clients = 0;
  std::size_t pending_limit = 128;
  bool fast_path = false;
  bool prune_aborted = false;
  std::string log_path;

  app.add_option("--listen", listen, "listen address host:port")->capture_default_str();
  app.add_option("--keys", keys_path, "server key file (verification material + genesis)")
      ->required();
  app.add_option("--clients", clients,
                 "number of participating clients (enables record collection)");
  app.add_option("--pending-limit", pending_limit, "maximum pending operations")
      ->capture_default_str();
  app.add_flag("--fast-path", fast_path, "skip the passive phase for queries");
  app.add_flag("--prune-aborted", prune_aborted,
               "mark committed-aborted operations in pending lists");
  app.add_option("--log", log_path, "append-only log of applied operations");
  CLI11_PARSE(app, argc, argv);

  try {
    auto sep = listen.rfind(':');
    if (sep == std::string::npos) throw storage_error("listen address must be host:port");
    std::string host = listen.substr(0, sep);
    auto port = static_cast<std::uint16_t>(std::stoul(listen.substr(sep + 1)));

    group_config gc = load_group_config(keys_path);
    if (!gc.gen) throw storage_error("key file carries no genesis records");

    aip_server_config cfg;
    cfg.query_fast_path = fast_path;
    cfg.prune_aborted = prune_aborted;
    cfg.pending_limit = pending_limit;
    if (clients > 0) cfg.client_count = clients;

    vicos_service service(cfg, &gc.keys, *gc.gen);

    std::ofstream log_out;
    if (!log_path.empty()) {
      std::size_t replayed = replay_log(log_path, service.core());
      if (replayed > 0)
        std::cerr << "vicosd: replayed " << replayed << " applied operations from " << log_path
                  << "\n";
      log_out.open(log_path, std::ios::binary | std::ios::app);
      if (!log_out) throw storage_error("cannot open log for append: " + log_path);
      service.core().set_apply_hook([&log_out](const applied_record& r) {
        bytes payload = encode_applied(r);
        std::uint8_t hdr[4] = {static_cast<std::uint8_t>(payload.size() >> 24),
                               static_cast<std::uint8_t>(payload.size() >> 16),
                               static_cast<std::uint8_t>(payload.size() >> 8),
                               static_cast<std::uint8_t>(payload.size())};
        log_out.write(reinterpret_cast<char*>(hdr), 4);
        log_out.write(reinterpret_cast<const char*>(payload.data()),
                      static_cast<std::streamsize>(payload.size()));
        log_out.flush();
      });
    }

    tcp_listener listener(port, host);
    g_listener = &listener;
    g_service = &service;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);

    service.start();
    std::cerr << "vicosd: listening on " << host << ":" << listener.port() << "\n";

    while (auto conn = listener.accept()) {
      auto [channel, id] = std::move(*conn);
      if (id == genesis_client) continue;  // reserved id
      std::cerr << "vicosd: client " << id << " connected\n";
      service.attach(id, std::move(channel));
    }

    std::cerr << "vicosd: shutting down\n";
    service.stop();
  } catch (const std::exception& e) {
    std::cerr << "vicosd: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
