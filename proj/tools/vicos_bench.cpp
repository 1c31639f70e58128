// vicos-bench: workload generator and statistics reporter for the
// in-process deployment.  Reproduces the conflicting-operations
// experiment: read/write mixes over a fixed object set with Zipf-selected
// keys, comparing the compatibility relation against the stricter
// commutativity baseline.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "vicos/bench.hpp"

using namespace vicos;

namespace {

void report(std::ostream& out, const workload_spec& spec, const run_stats& stats,
            bool with_header) {
  if (with_header)
    out << "mode,theta,op-kind,count,success,abort,p50_us,p95_us,p99_us,"
           "throughput_bytes_s\n";
  const char* mode =
      spec.mode == workload_spec::conflict_mode::compatible ? "compatible" : "commutative";
  auto row = [&](const char* kind, const op_stats& s) {
    out << mode << ',' << spec.zipf_theta << ',' << kind << ',' << s.count << ','
        << s.success << ',' << s.aborts << ',' << s.p50_us << ',' << s.p95_us << ','
        << s.p99_us << ',' << std::uint64_t(stats.throughput_bytes_s) << '\n';
  };
  row("read", stats.reads);
  row("write", stats.writes);
  row("total", stats.total);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vicos-bench: conflict and throughput experiments"};

  workload_spec spec;
  std::string mode = "compatible";
  std::string csv_path;
  bool sweep = false;

  app.add_option("--clients", spec.clients)->capture_default_str();
  app.add_option("--objects", spec.objects)->capture_default_str();
  app.add_option("--object-size", spec.object_size)->capture_default_str();
  app.add_option("--read-ratio", spec.read_ratio)->capture_default_str();
  app.add_option("--theta", spec.zipf_theta, "Zipf factor in [0,1)")->capture_default_str();
  app.add_option("--ops", spec.ops_per_client, "operations per client")
      ->capture_default_str();
  app.add_option("--duration", spec.duration_s,
                 "measure for this many seconds instead of a fixed op count");
  app.add_option("--warmup", spec.warmup_s, "discarded warm-up seconds (timed mode)");
  app.add_option("--pending-limit", spec.pending_limit, "concurrency window")
      ->capture_default_str();
  app.add_option("--mode", mode, "compatible or commutative")->capture_default_str();
  app.add_option("--seed", spec.seed)->capture_default_str();
  bool no_fast_path = false;
  app.add_flag("--no-fast-path", no_fast_path, "run the full passive phase for queries");
  app.add_option("--csv", csv_path, "write CSV here instead of stdout");
  app.add_flag("--sweep", sweep,
               "run both modes over theta in {0, 0.5, 0.75, 0.99} (the conflict experiment)");
  CLI11_PARSE(app, argc, argv);

  spec.query_fast_path = !no_fast_path;

  try {
    std::ofstream file;
    if (!csv_path.empty()) {
      file.open(csv_path, std::ios::trunc);
      if (!file) throw storage_error("cannot write " + csv_path);
    }
    std::ostream& out = csv_path.empty() ? std::cout : file;

    if (sweep) {
      bool header = true;
      for (double theta : {0.0, 0.5, 0.75, 0.99}) {
        for (auto m : {workload_spec::conflict_mode::compatible,
                       workload_spec::conflict_mode::commutative}) {
          workload_spec s = spec;
          s.zipf_theta = theta;
          s.mode = m;
          run_stats stats = run_bench(s);
          report(out, s, stats, header);
          header = false;
          std::cerr << (m == workload_spec::conflict_mode::compatible ? "compatible "
                                                                      : "commutative")
                    << " theta=" << theta
                    << ": write success " << stats.writes.success << "/"
                    << stats.writes.count << ", read success " << stats.reads.success << "/"
                    << stats.reads.count << ", " << stats.duration_s << " s\n";
        }
      }
      return 0;
    }

    if (mode == "commutative")
      spec.mode = workload_spec::conflict_mode::commutative;
    else if (mode != "compatible")
      throw storage_error("mode must be compatible or commutative");

    run_stats stats = run_bench(spec);
    report(out, spec, stats, true);
    std::cerr << "ops " << stats.total.count << " success " << stats.total.success
              << " abort " << stats.total.aborts << " in " << stats.duration_s << " s, "
              << stats.messages << " protocol messages\n";
  } catch (const std::exception& e) {
    std::cerr << "vicos-bench: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
