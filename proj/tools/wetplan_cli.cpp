// wetplan: charging-schedule planner and Monte-Carlo simulator for a
// multi-antenna power beacon charging IoT devices over RF.

#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wetplan/wetplan.hpp"

namespace {

using namespace wetplan;

struct CommonOptions {
  std::string config_path;
  std::string curve_path;
  std::string strategies;
  std::string out_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
  std::optional<int> n_antennas;
};

void add_common_flags(CLI::App* cmd, CommonOptions* opts, const std::string& default_out) {
  cmd->add_option("--config", opts->config_path, "scenario config file (flat key = value)");
  cmd->add_option("--seed", opts->seed, "master seed override");
  cmd->add_option("--trials", opts->trials, "Monte-Carlo trials override");
  cmd->add_option("--strategies", opts->strategies,
                  "comma-separated strategies (order-agnostic, order-aware, all-at-once)");
  cmd->add_option("--n-antennas", opts->n_antennas, "antenna count override (perfect square)");
  cmd->add_option("--curve", opts->curve_path, "harvesting curve CSV override");
  if (!default_out.empty())
    cmd->add_option("--out", opts->out_path, "output CSV path (default " + default_out + ")");
}

Scenario make_scenario(const CommonOptions& opts) {
  Scenario sc = opts.config_path.empty() ? Scenario{} : load_scenario(opts.config_path);
  if (opts.seed) sc.seed = *opts.seed;
  if (opts.trials) sc.trials = *opts.trials;
  if (opts.n_antennas) sc.n_antennas = *opts.n_antennas;
  sc.validate();
  return sc;
}

EhModel make_model(const CommonOptions& opts) {
  return opts.curve_path.empty() ? EhModel::from_fit() : EhModel::from_csv(opts.curve_path);
}

std::vector<Strategy> make_strategies(const std::string& csv, const std::string& fallback) {
  const std::string source = csv.empty() ? fallback : csv;
  std::vector<Strategy> out;
  std::istringstream in(source);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(parse_strategy(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw ConfigError("strategies: none given");
  return out;
}

std::string f9(double v) { return detail::format_sig9(v); }

int run_plan(const CommonOptions& opts) {
  const Scenario sc = make_scenario(opts);
  const EhModel eh = make_model(opts);
  const auto strategies = make_strategies(opts.strategies, "order-aware");
  if (strategies.size() != 1)
    throw ConfigError("strategies: the plan command takes exactly one strategy");
  const Strategy strategy = strategies.front();

  const ArrayGeometry geom = ArrayGeometry::square(sc.n_antennas);
  std::vector<Eigen::VectorXcd> channels;
  for (std::size_t d = 0; d < sc.positions_m.size(); ++d) {
    auto rng = substream_engine(sc.seed, 0, d);
    channels.push_back(sample_channel(geom, DevicePlacement{sc.positions_m[d]}, sc.kappa, rng).h);
  }

  ChargingPlan plan;
  switch (strategy) {
    case Strategy::kOrderAgnostic:
      plan = plan_order_agnostic(channels, sc.demands_j, sc.tau_max_s, eh);
      break;
    case Strategy::kOrderAware:
      plan = plan_order_aware(channels, sc.demands_j, sc.tau_max_s, eh);
      break;
    case Strategy::kAllAtOnce:
      plan = plan_all_at_once(channels, sc.demands_j, sc.tau_max_s, eh);
      break;
  }
  const HarvestReport report = realized_harvest(plan, channels, eh);

  std::cout << "scenario: devices=" << sc.positions_m.size() << " n_antennas=" << sc.n_antennas
            << " kappa=" << f9(sc.kappa) << " tau_max_s=" << f9(sc.tau_max_s)
            << " seed=" << sc.seed << "\n";
  std::cout << "strategy: " << strategy_name(strategy) << "\n";
  std::cout << "slot,device,power_w,power_dbm,duration_s\n";
  for (std::size_t i = 0; i < plan.slots.size(); ++i) {
    const Slot& slot = plan.slots[i];
    std::cout << i + 1 << ','
              << (slot.device < 0 ? std::string("shared") : std::to_string(slot.device)) << ','
              << f9(slot.beam.power_w) << ','
              << (slot.beam.power_w > 0.0 ? f9(watts_to_dbm(slot.beam.power_w))
                                          : std::string("-inf"))
              << ',' << f9(slot.duration_s) << (slot.pre_charged ? ",pre-charged" : "") << "\n";
  }
  std::cout << "total_duration_s: " << f9(plan.total_duration_s()) << "\n";
  std::cout << "pb_energy_j: " << f9(report.pb_energy_j) << "\n";
  std::cout << "device,demand_j,harvested_j\n";
  for (std::size_t s = 0; s < sc.demands_j.size(); ++s)
    std::cout << s << ',' << f9(sc.demands_j[s]) << ',' << f9(report.harvested_j[s]) << "\n";
  std::cout << "feasible: " << (report.feasible ? "yes" : "no") << "\n";
  return 0;
}

int run_sweep(const CommonOptions& opts, bool alpha_sweep) {
  const Scenario sc = make_scenario(opts);
  const EhModel eh = make_model(opts);
  const auto strategies =
      make_strategies(opts.strategies, "order-agnostic,order-aware,all-at-once");
  const std::string out_path =
      opts.out_path.empty() ? (alpha_sweep ? "sweep_alpha.csv" : "sweep_tau.csv")
                            : opts.out_path;
  const std::vector<SweepResult> results =
      alpha_sweep ? run_sweep_alpha(sc, default_alpha_grid(), strategies, eh)
                  : run_sweep_tau(sc, default_tau_grid(), strategies, eh);
  emit_csv(results, out_path);
  std::cout << "wrote " << out_path << " (" << results.size() << " rows, " << sc.trials
            << " trials per point)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"charging-schedule planner and simulator for RF wireless energy transfer"};
  app.require_subcommand(1);

  CommonOptions plan_opts, tau_opts, alpha_opts;
  CLI::App* plan_cmd =
      app.add_subcommand("plan", "plan one scenario with one strategy and print the result");
  add_common_flags(plan_cmd, &plan_opts, "");
  CLI::App* tau_cmd =
      app.add_subcommand("sweep-tau", "Monte-Carlo sweep over the deadline, CSV output");
  add_common_flags(tau_cmd, &tau_opts, "sweep_tau.csv");
  CLI::App* alpha_cmd = app.add_subcommand(
      "sweep-alpha", "Monte-Carlo sweep over the clustering factor, CSV output");
  add_common_flags(alpha_cmd, &alpha_opts, "sweep_alpha.csv");

  CLI11_PARSE(app, argc, argv);
  try {
    if (plan_cmd->parsed()) return run_plan(plan_opts);
    if (tau_cmd->parsed()) return run_sweep(tau_opts, false);
    return run_sweep(alpha_opts, true);
  } catch (const wetplan::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << " (minimum feasible deadline "
              << wetplan::detail::format_sig9(e.threshold_s()) << " s)\n";
    return 1;
  } catch (const wetplan::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
