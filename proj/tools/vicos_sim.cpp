// vicos-sim: runs adversarial scenarios against the in-process deployment
// and reports what the clients detected.  Scenario outcomes serve as
// regression traces for the attack catalog.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "vicos/attacks.hpp"
#include "vicos/fault.hpp"

using namespace vicos;

namespace {

nlohmann::json outcome_json(const scenario_outcome& out) {
  nlohmann::json j;
  j["scenario"] = out.name;
  j["seed"] = out.seed;
  j["alarms"] = nlohmann::json::array();
  for (const auto& [c, a] : out.alarms)
    j["alarms"].push_back({{"client", c},
                           {"kind", to_string(a.kind)},
                           {"seq", a.seq},
                           {"context", a.context}});
  j["fork_consistent"] = out.fork_consistent;
  j["corrupted"] = out.corrupted;
  j["completed_ops"] = out.history.size();
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vicos-sim: adversarial scenario runner"};
  app.require_subcommand(1);

  app.add_subcommand("list", "list the attack catalog");

  auto* run = app.add_subcommand("run", "run one scenario");
  std::string name;
  std::uint64_t seed = 1;
  run->add_option("scenario", name, "scenario name, or 'all'")->required();
  run->add_option("--seed", seed)->capture_default_str();

  auto* script = app.add_subcommand("script", "run a declarative scenario file");
  std::string script_path;
  std::uint64_t script_seed = 1;
  script->add_option("file", script_path, "scenario JSON")->required();
  script->add_option("--seed", script_seed)->capture_default_str();

  auto* fuzz = app.add_subcommand("fuzz", "randomized message mutations over honest runs");
  std::uint64_t count = 100;
  std::uint64_t base_seed = 1;
  fuzz->add_option("--count", count)->capture_default_str();
  fuzz->add_option("--seed", base_seed)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.get_subcommand("list")->parsed()) {
      for (const auto& n : attack_catalog()) std::cout << n << "\n";
      return 0;
    }
    if (run->parsed()) {
      nlohmann::json results = nlohmann::json::array();
      bool all_detected = true;
      for (const auto& n : attack_catalog()) {
        if (name != "all" && name != n) continue;
        scenario_outcome out = run_attack(n, seed);
        all_detected &= !out.alarms.empty() && !out.corrupted;
        results.push_back(outcome_json(out));
      }
      if (results.empty()) throw std::invalid_argument("unknown scenario: " + name);
      std::cout << (results.size() == 1 ? results[0].dump(2) : results.dump(2)) << "\n";
      return all_detected ? 0 : 5;
    }
    if (script->parsed()) {
      std::ifstream in(script_path);
      if (!in) throw storage_error("cannot read scenario file: " + script_path);
      scenario_outcome out =
          run_script(script_from_json(nlohmann::json::parse(in)), script_seed);
      std::cout << outcome_json(out).dump(2) << "\n";
      return out.corrupted ? 5 : 0;
    }
    if (fuzz->parsed()) {
      std::uint64_t alarmed = 0, misses = 0;
      for (std::uint64_t s = 0; s < count; ++s) {
        scenario_outcome out = run_random_mutation(base_seed + s);
        if (!out.alarms.empty()) ++alarmed;
        if (out.corrupted) {
          ++misses;
          std::cout << outcome_json(out).dump(2) << "\n";
        }
      }
      std::cerr << "fuzz: " << count << " mutations, " << alarmed << " detected, " << misses
                << " silent corruptions\n";
      return misses == 0 ? 0 : 5;
    }
  } catch (const std::exception& e) {
    std::cerr << "vicos-sim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
