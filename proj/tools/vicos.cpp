// vicos: command-line object-store client with integrity verification.
// Object bytes go to a directory-backed store; the authenticated
// dictionary at the server holds each object's nonce and hash.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "vicos/config.hpp"
#include "vicos/session.hpp"
#include "vicos/tcp.hpp"

using namespace vicos;

namespace {

bytes read_input(const std::string& file, const std::string& inline_data) {
  if (!inline_data.empty()) return to_bytes(inline_data);
  if (file.empty() || file == "-") {
    bytes data((std::istreambuf_iterator<char>(std::cin)), std::istreambuf_iterator<char>());
    return data;
  }
  std::ifstream in(file, std::ios::binary);
  if (!in) throw storage_error("cannot read " + file);
  return bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_output(const std::string& file, const bytes& data) {
  if (file.empty() || file == "-") {
    std::cout.write(reinterpret_cast<const char*>(data.data()),
                    static_cast<std::streamsize>(data.size()));
    return;
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw storage_error("cannot write " + file);
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vicos: verified object storage client"};
  app.require_subcommand(1);

  std::string keys_path, server = "127.0.0.1:7787", cos_dir = "cos-objects";
  unsigned id = 0;
  bool fast_path = false, prune_aborted = false;
  int retries = 3;
  long retry_delay_ms = 10;

  app.add_option("--keys", keys_path, "client key file");
  app.add_option("--id", id, "client id (>= 1)");
  app.add_option("--server", server, "server address host:port")->capture_default_str();
  app.add_option("--cos-dir", cos_dir, "object store directory")->capture_default_str();
  app.add_flag("--fast-path", fast_path, "skip the passive phase for queries");
  app.add_flag("--prune-aborted", prune_aborted, "honor aborted marks in pending lists");
  app.add_option("--retries", retries, "attempts for aborted operations")
      ->capture_default_str();
  app.add_option("--retry-delay-ms", retry_delay_ms, "initial retry backoff")
      ->capture_default_str();

  // keygen
  auto* keygen = app.add_subcommand("keygen", "generate group key material");
  std::string out_dir = ".";
  std::string mode = "mac";
  unsigned n_clients = 4;
  keygen->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  keygen->add_option("--mode", mode, "mac or public-key")->capture_default_str();
  keygen->add_option("--clients", n_clients, "number of clients")->capture_default_str();

  std::string key_arg, file_arg, data_arg, out_arg;
  auto* put = app.add_subcommand("put", "store an object");
  put->add_option("key", key_arg)->required();
  put->add_option("file", file_arg, "input file (default stdin)");
  put->add_option("--data", data_arg, "inline value");

  auto* get = app.add_subcommand("get", "fetch and verify an object");
  get->add_option("key", key_arg)->required();
  get->add_option("-o,--output", out_arg, "output file (default stdout)");

  auto* del = app.add_subcommand("del", "delete an object");
  del->add_option("key", key_arg)->required();

  app.add_subcommand("list", "list all object keys");
  auto* gc = app.add_subcommand("gc-orphans", "remove unreferenced object versions");
  bool dry_run = false;
  gc->add_flag("--dry-run", dry_run, "only report orphans");

  CLI11_PARSE(app, argc, argv);

  try {
    if (keygen->parsed()) {
      sig_scheme scheme;
      if (mode == "mac")
        scheme = sig_scheme::mac;
      else if (mode == "public-key")
        scheme = sig_scheme::public_key;
      else
        throw storage_error("mode must be mac or public-key");
      generate_group(out_dir, scheme, n_clients);
      std::cerr << "wrote " << out_dir << "/clients.json and " << out_dir
                << "/server.json for " << n_clients << " clients\n";
      return 0;
    }

    if (keys_path.empty() || id == 0)
      throw storage_error("--keys and --id are required for store operations");

    group_config gc_cfg = load_group_config(keys_path);
    auto sep = server.rfind(':');
    if (sep == std::string::npos) throw storage_error("server address must be host:port");

    fs_cos cos{cos_dir};
    vicos_config cfg;
    cfg.id = id;
    cfg.query_fast_path = fast_path;
    cfg.prune_aborted = prune_aborted;
    auto channel = tcp_connect(server.substr(0, sep),
                               static_cast<std::uint16_t>(std::stoul(server.substr(sep + 1))),
                               id);
    vicos_session session(cfg, &gc_cfg.keys, &cos, std::move(channel));

    retry_policy policy;
    policy.attempts = retries;
    policy.initial_delay = std::chrono::milliseconds(retry_delay_ms);

    if (put->parsed()) {
      bytes value = read_input(file_arg, data_arg);
      auto r = with_retry(
          [&] { return session.put(to_bytes(key_arg), value); }, policy);
      if (r.aborted()) {
        std::cerr << "aborted by concurrent operations; retry later\n";
        return 3;
      }
      std::cerr << "stored " << key_arg << " (" << value.size() << " bytes)\n";
    } else if (get->parsed()) {
      auto r = with_retry([&] { return session.get(to_bytes(key_arg)); }, policy);
      if (r.aborted()) {
        std::cerr << "aborted by concurrent operations; retry later\n";
        return 3;
      }
      if (r.k == vicos_result::kind::absent) {
        std::cerr << key_arg << ": not found\n";
        return 2;
      }
      write_output(out_arg, r.value);
    } else if (del->parsed()) {
      auto r = with_retry([&] { return session.del(to_bytes(key_arg)); }, policy);
      if (r.aborted()) {
        std::cerr << "aborted by concurrent operations; retry later\n";
        return 3;
      }
      std::cerr << "deleted " << key_arg << "\n";
    } else if (app.get_subcommand("list")->parsed()) {
      auto r = with_retry([&] { return session.list(); }, policy);
      if (r.aborted()) {
        std::cerr << "aborted by concurrent operations; retry later\n";
        return 3;
      }
      for (const bytes& k : r.keys) std::cout << to_string(byte_view(k)) << "\n";
    } else if (gc->parsed()) {
      if (dry_run) {
        auto orphans = session.find_orphans();
        for (const bytes& k : orphans) std::cout << to_hex(byte_view(k)) << "\n";
        std::cerr << orphans.size() << " orphaned object versions\n";
      } else {
        std::cerr << "removed " << session.gc_orphans() << " orphaned object versions\n";
      }
    }
  } catch (const fault_alarm& a) {
    std::cerr << "INTEGRITY VIOLATION DETECTED: " << a.what() << "\n"
              << "do not trust further responses from this server\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "vicos: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
