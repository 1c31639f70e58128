#pragma once

#include <algorithm>
#include <chrono>
#include <sstream>
#include <string>

#include "vicos/sim.hpp"
#include "vicos/zipf.hpp"

namespace vicos {

struct workload_spec {
  enum class conflict_mode : std::uint8_t { compatible = 0, commutative = 1 };

  unsigned clients = 16;
  std::uint64_t objects = 64;
  std::size_t object_size = 10 * 1024;
  double read_ratio = 0.5;
  double zipf_theta = 0.0;
  std::uint64_t ops_per_client = 100;
  conflict_mode mode = conflict_mode::compatible;
  /// When positive, run for wall-clock time instead of a fixed op count:
  /// `warmup_s` of discarded work, then `duration_s` of measurement.
  double duration_s = 0;
  double warmup_s = 0;
  std::uint64_t seed = 1;
  bool query_fast_path = true;
  /// On by default: without it, aborted writes linger in the pending
  /// window and abort later reads for no reason, which skews the
  /// baseline comparison badly under contention.
  bool prune_aborted = true;
  /// Concurrency window: how many operations may pend at once.  In a real
  /// deployment the object transfer time keeps this small; the in-process
  /// run pins it via the server's pending limit instead.
  std::size_t pending_limit = 4;
  /// Extra scheduler steps a client stays busy after each operation.
  std::uint64_t client_busy_steps = 0;
};

struct op_stats {
  std::uint64_t count = 0;
  std::uint64_t success = 0;
  std::uint64_t aborts = 0;
  long p50_us = 0, p95_us = 0, p99_us = 0;

  double success_rate() const { return count ? double(success) / double(count) : 1.0; }
};

struct run_stats {
  op_stats reads, writes, total;
  /// Selector decisions per rank (1-based); in timed mode this covers all
  /// generated operations, including warm-up.
  std::vector<std::uint64_t> object_histogram;
  double duration_s = 0;
  double throughput_bytes_s = 0;
  std::uint64_t messages = 0;

  std::string csv() const {
    std::ostringstream out;
    out << "op-kind,count,success,abort,p50_us,p95_us,p99_us,throughput_bytes_s\n";
    auto row = [&](const char* k, const op_stats& s) {
      out << k << ',' << s.count << ',' << s.success << ',' << s.aborts << ',' << s.p50_us
          << ',' << s.p95_us << ',' << s.p99_us << ',' << std::uint64_t(throughput_bytes_s)
          << '\n';
    };
    row("read", reads);
    row("write", writes);
    row("total", total);
    return out.str();
  }
};

/// Drives the workload against an in-process deployment: one simulated
/// client per configured client, object selection by the Zipf generator,
/// reads and writes classified as success or abort exactly as the
/// protocol decides them.  Any fault alarm during this benign run is a
/// hard failure.  Latency and throughput are measured and reported but
/// are hardware-bound; correctness assertions belong to the success-rate
/// columns only.
inline run_stats run_bench(const workload_spec& spec) {
  if (spec.objects < 1) throw std::invalid_argument("bench: need at least one object");

  sim_config cfg;
  cfg.seed = spec.seed;
  cfg.n_clients = spec.clients;
  cfg.query_fast_path = spec.query_fast_path;
  cfg.prune_aborted = spec.prune_aborted;
  cfg.commutative_mode = spec.mode == workload_spec::conflict_mode::commutative;
  cfg.pending_limit = spec.pending_limit;
  cfg.client_busy_steps = spec.client_busy_steps;
  sim s(cfg);

  run_stats stats;
  stats.object_histogram.assign(spec.objects + 1, 0);

  zipf_generator zipf(spec.objects, spec.zipf_theta);
  std::vector<std::mt19937_64> rngs(spec.clients + 1);
  for (client_id c = 1; c <= spec.clients; ++c)
    rngs[c].seed(spec.seed * 7919 + c);  // per-client deterministic stream

  auto next_batch = [&](client_id c, std::uint64_t count) {
    auto& rng = rngs[c];
    std::vector<vicos_op> ops;
    ops.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t rank = zipf.next(rng);
      stats.object_histogram[rank]++;
      bytes key = to_bytes("obj-" + std::to_string(rank));
      bool is_read = std::uniform_real_distribution<double>(0, 1)(rng) < spec.read_ratio;
      if (is_read) {
        ops.push_back(vicos_op::get(key));
      } else {
        bytes value(spec.object_size);
        std::uint64_t fill = rng();
        for (std::size_t b = 0; b < value.size(); ++b)
          value[b] = static_cast<std::uint8_t>(fill >> (8 * (b % 8)));
        ops.push_back(vicos_op::put(key, std::move(value)));
      }
    }
    return ops;
  };

  auto t0 = std::chrono::steady_clock::now();
  std::size_t measure_from = 0;
  if (spec.duration_s > 0) {
    // timed mode: feed work in slices until warm-up plus measurement have
    // elapsed; only completions after the warm-up count
    bool warm = spec.warmup_s <= 0;
    while (true) {
      double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (!warm && elapsed >= spec.warmup_s) {
        warm = true;
        measure_from = s.history().size();
        t0 = std::chrono::steady_clock::now();
        elapsed = 0;
      }
      if (warm && elapsed >= spec.duration_s) break;
      for (client_id c = 1; c <= spec.clients; ++c) s.push_ops(c, next_batch(c, 20));
      s.run();
    }
  } else {
    for (client_id c = 1; c <= spec.clients; ++c)
      s.push_ops(c, next_batch(c, spec.ops_per_client));
    s.run();
  }
  stats.duration_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!s.alarms().empty()) {
    const auto& [c, a] = s.alarms().front();
    throw fault_alarm(a);
  }

  std::vector<long> read_lat, write_lat;
  std::uint64_t moved_bytes = 0;
  const auto& hist = s.history();
  for (std::size_t i = measure_from; i < hist.size(); ++i) {
    const kvs_event& e = hist[i];
    op_stats& bucket = e.kind == kvs_event::op::get ? stats.reads : stats.writes;
    bucket.count++;
    if (e.aborted)
      bucket.aborts++;
    else
      bucket.success++;
    if (!e.aborted) {
      if (e.kind == kvs_event::op::put) moved_bytes += e.value.size();
      if (e.kind == kvs_event::op::get && e.found) moved_bytes += e.got_value.size();
    }
    (e.kind == kvs_event::op::get ? read_lat : write_lat).push_back(s.latencies_us()[i]);
  }
  auto quantiles = [](std::vector<long>& v, op_stats& st) {
    if (v.empty()) return;
    std::sort(v.begin(), v.end());
    st.p50_us = v[v.size() * 50 / 100];
    st.p95_us = v[std::min(v.size() - 1, v.size() * 95 / 100)];
    st.p99_us = v[std::min(v.size() - 1, v.size() * 99 / 100)];
  };
  quantiles(read_lat, stats.reads);
  quantiles(write_lat, stats.writes);

  stats.total.count = stats.reads.count + stats.writes.count;
  stats.total.success = stats.reads.success + stats.writes.success;
  stats.total.aborts = stats.reads.aborts + stats.writes.aborts;
  std::vector<long> all(read_lat);
  all.insert(all.end(), write_lat.begin(), write_lat.end());
  quantiles(all, stats.total);

  stats.messages = s.total_messages();
  stats.throughput_bytes_s =
      stats.duration_s > 0 ? double(moved_bytes) / stats.duration_s : 0;
  return stats;
}

}  // namespace vicos
