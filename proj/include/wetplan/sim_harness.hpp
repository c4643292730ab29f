#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "wetplan/channel.hpp"
#include "wetplan/errors.hpp"
#include "wetplan/rng.hpp"
#include "wetplan/scheduler.hpp"

namespace wetplan {

/// Monte-Carlo experiment description. Defaults are the three-device
/// reference layout: a 16-antenna array, Rician factor 10, 4 mJ demands and
/// an 8 s deadline.
struct Scenario {
  int n_antennas = 16;
  double kappa = 10.0;
  std::vector<Eigen::Vector3d> positions_m = {Eigen::Vector3d(0.0, -5.0, 0.0),
                                              Eigen::Vector3d(5.0, 0.0, -5.0),
                                              Eigen::Vector3d(10.0, 10.0, 5.0)};
  std::vector<double> demands_j = {4e-3, 4e-3, 4e-3};
  double tau_max_s = 8.0;
  int trials = 500;
  std::uint64_t seed = 1;

  void validate() const {
    ArrayGeometry::square(n_antennas);  // throws with the field name
    if (positions_m.size() != demands_j.size())
      throw ConfigError("positions_m/demands_j: lengths differ (" +
                        std::to_string(positions_m.size()) + " vs " +
                        std::to_string(demands_j.size()) + ")");
    if (positions_m.empty()) throw ConfigError("positions_m: need at least one device");
    for (const auto& v : positions_m)
      if (!(v.norm() > 0.0)) throw ConfigError("positions_m: device at the array origin");
    for (double e : demands_j)
      if (!(e > 0.0)) throw ConfigError("demands_j: demands must be positive");
    if (!(tau_max_s > 0.0)) throw ConfigError("tau_max_s: must be positive");
    if (kappa < 0.0) throw ConfigError("kappa: must be non-negative");
    if (trials < 1) throw ConfigError("trials: must be at least 1");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Splits "a, b, [c, d]" at top-level commas.
inline std::vector<std::string> split_top_level(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char ch : s) {
    if (ch == '[') ++depth;
    if (ch == ']') --depth;
    if (ch == ',' && depth == 0) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  const std::string last = trim(cur);
  if (!last.empty() || !out.empty()) out.push_back(last);
  return out;
}

inline std::string expect_bracketed(const std::string& key, const std::string& value) {
  if (value.size() < 2 || value.front() != '[' || value.back() != ']')
    throw ConfigError(key + ": expected an array in brackets");
  return trim(value.substr(1, value.size() - 2));
}

inline double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
}

inline long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected an integer, got '" + value + "'");
  }
}

inline void parallel_for(std::size_t count, int threads,
                         const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  unsigned n_workers = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  n_workers = static_cast<unsigned>(std::min<std::size_t>(n_workers, count));
  if (n_workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(n_workers);
  for (unsigned i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string format_sig9(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace detail

/// Parses the flat key-value scenario format. Unknown keys and malformed
/// values are reported with the field name; an empty config yields the
/// default scenario.
inline Scenario parse_scenario_text(const std::string& text) {
  Scenario sc;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key == "n_antennas") {
      sc.n_antennas = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "kappa") {
      sc.kappa = detail::parse_double(key, value);
    } else if (key == "tau_max_s") {
      sc.tau_max_s = detail::parse_double(key, value);
    } else if (key == "trials") {
      sc.trials = static_cast<int>(detail::parse_int(key, value));
    } else if (key == "seed") {
      sc.seed = static_cast<std::uint64_t>(detail::parse_int(key, value));
    } else if (key == "demands_j") {
      sc.demands_j.clear();
      for (const auto& item : detail::split_top_level(detail::expect_bracketed(key, value)))
        sc.demands_j.push_back(detail::parse_double(key, item));
    } else if (key == "positions_m") {
      sc.positions_m.clear();
      for (const auto& item : detail::split_top_level(detail::expect_bracketed(key, value))) {
        const auto coords = detail::split_top_level(detail::expect_bracketed(key, item));
        if (coords.size() != 3)
          throw ConfigError("positions_m: each position needs exactly 3 coordinates");
        sc.positions_m.emplace_back(detail::parse_double(key, coords[0]),
                                    detail::parse_double(key, coords[1]),
                                    detail::parse_double(key, coords[2]));
      }
    } else {
      throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  sc.validate();
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("scenario config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

/// Moves every device toward the cluster point [2.5, 2.5, 2.5] by the
/// convex factor alpha.
inline Scenario interpolate_positions(const Scenario& sc, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("interpolate_positions: alpha must lie in [0, 1]");
  const Eigen::Vector3d cluster(2.5, 2.5, 2.5);
  Scenario out = sc;
  for (auto& v : out.positions_m) v = (1.0 - alpha) * v + alpha * cluster;
  return out;
}

/// Per-strategy, per-trial transmit energies for one scenario point.
/// Infeasible trials carry no value. Fading draws are a pure function of
/// (seed, trial, device), so strategies see identical channels and reruns
/// are identical for any worker count.
struct TrialTable {
  std::vector<Strategy> strategies;
  std::vector<std::vector<std::optional<double>>> pb_energy_j;  // [strategy][trial]
};

inline TrialTable run_trials(const Scenario& sc, const std::vector<Strategy>& strategies,
                             const EhModel& eh, int threads = 0) {
  sc.validate();
  TrialTable table;
  table.strategies = strategies;
  table.pb_energy_j.assign(strategies.size(),
                           std::vector<std::optional<double>>(static_cast<std::size_t>(sc.trials)));
  const ArrayGeometry geom = ArrayGeometry::square(sc.n_antennas);
  const std::size_t n_dev = sc.positions_m.size();
  const bool wants_all_at_once =
      std::find(strategies.begin(), strategies.end(), Strategy::kAllAtOnce) != strategies.end();

  detail::parallel_for(static_cast<std::size_t>(sc.trials), threads, [&](std::size_t trial) {
    std::vector<Eigen::VectorXcd> channels(n_dev);
    for (std::size_t d = 0; d < n_dev; ++d) {
      auto rng = substream_engine(sc.seed, trial, d);
      channels[d] = sample_channel(geom, DevicePlacement{sc.positions_m[d]}, sc.kappa, rng).h;
    }
    std::optional<AllAtOnceDirection> direction;
    if (wants_all_at_once) direction = all_at_once_direction(channels, sc.demands_j);
    for (std::size_t si = 0; si < strategies.size(); ++si) {
      try {
        ChargingPlan plan;
        switch (strategies[si]) {
          case Strategy::kOrderAgnostic:
            plan = plan_order_agnostic(channels, sc.demands_j, sc.tau_max_s, eh);
            break;
          case Strategy::kOrderAware:
            plan = plan_order_aware(channels, sc.demands_j, sc.tau_max_s, eh);
            break;
          case Strategy::kAllAtOnce:
            plan = plan_all_at_once(channels, sc.demands_j, sc.tau_max_s, eh, *direction);
            break;
        }
        table.pb_energy_j[si][trial] = pb_energy(plan);
      } catch (const InfeasibleError&) {
        table.pb_energy_j[si][trial] = std::nullopt;
      }
    }
  });
  return table;
}

/// Aggregated statistics of one sweep point. Means and standard errors are
/// computed over the feasible trials only.
struct SweepResult {
  std::string sweep_var;
  double sweep_value = 0.0;
  Strategy strategy = Strategy::kOrderAgnostic;
  double mean_pb_energy_j = std::numeric_limits<double>::quiet_NaN();
  double stderr_j = std::numeric_limits<double>::quiet_NaN();
  double feasible_rate = 0.0;
  int n_feasible = 0;
  int n_trials = 0;
};

namespace detail {

inline SweepResult summarize(const std::string& sweep_var, double sweep_value, Strategy strategy,
                             const std::vector<std::optional<double>>& values) {
  SweepResult r;
  r.sweep_var = sweep_var;
  r.sweep_value = sweep_value;
  r.strategy = strategy;
  r.n_trials = static_cast<int>(values.size());
  double sum = 0.0;
  for (const auto& v : values)
    if (v) {
      ++r.n_feasible;
      sum += *v;
    }
  r.feasible_rate = r.n_trials > 0 ? static_cast<double>(r.n_feasible) / r.n_trials : 0.0;
  if (r.n_feasible > 0) {
    r.mean_pb_energy_j = sum / r.n_feasible;
    if (r.n_feasible > 1) {
      double ss = 0.0;
      for (const auto& v : values)
        if (v) ss += (*v - r.mean_pb_energy_j) * (*v - r.mean_pb_energy_j);
      r.stderr_j = std::sqrt(ss / (r.n_feasible - 1)) / std::sqrt(static_cast<double>(r.n_feasible));
    } else {
      r.stderr_j = 0.0;
    }
  }
  return r;
}

inline std::vector<SweepResult> sweep_over(const std::string& sweep_var,
                                           const std::vector<double>& grid,
                                           const std::vector<Strategy>& strategies,
                                           const std::function<Scenario(double)>& scenario_at,
                                           const EhModel& eh, int threads) {
  std::vector<SweepResult> out;
  for (double value : grid) {
    const TrialTable table = run_trials(scenario_at(value), strategies, eh, threads);
    for (std::size_t si = 0; si < strategies.size(); ++si)
      out.push_back(summarize(sweep_var, value, strategies[si], table.pb_energy_j[si]));
  }
  return out;
}

}  // namespace detail

/// 24 log-spaced deadlines bracketing both feasibility thresholds of the
/// default scenario.
inline std::vector<double> default_tau_grid() {
  std::vector<double> grid(24);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(grid.size() - 1);
    grid[i] = 0.3 * std::pow(12.0 / 0.3, f);
  }
  return grid;
}

inline std::vector<double> default_alpha_grid() {
  std::vector<double> grid(11);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.1 * static_cast<double>(i);
  grid.back() = 1.0;
  return grid;
}

inline std::vector<SweepResult> run_sweep_tau(const Scenario& sc,
                                              const std::vector<double>& tau_grid,
                                              const std::vector<Strategy>& strategies,
                                              const EhModel& eh, int threads = 0) {
  if (tau_grid.empty()) throw DomainError("run_sweep_tau: empty grid");
  for (std::size_t i = 1; i < tau_grid.size(); ++i)
    if (!(tau_grid[i] > tau_grid[i - 1]))
      throw DomainError("run_sweep_tau: grid must be strictly increasing");
  return detail::sweep_over("tau_max_s", tau_grid, strategies,
                            [&](double tau) {
                              Scenario point = sc;
                              point.tau_max_s = tau;
                              return point;
                            },
                            eh, threads);
}

inline std::vector<SweepResult> run_sweep_alpha(const Scenario& sc,
                                                const std::vector<double>& alpha_grid,
                                                const std::vector<Strategy>& strategies,
                                                const EhModel& eh, int threads = 0) {
  if (alpha_grid.empty()) throw DomainError("run_sweep_alpha: empty grid");
  for (double a : alpha_grid)
    if (!(a >= 0.0 && a <= 1.0)) throw DomainError("run_sweep_alpha: grid must lie in [0, 1]");
  return detail::sweep_over("alpha", alpha_grid, strategies,
                            [&](double alpha) { return interpolate_positions(sc, alpha); }, eh,
                            threads);
}

/// Writes the sweep CSV: header plus one row per (sweep value, strategy),
/// sweep value ascending then strategy name ascending, floats printed with
/// 9 significant digits. Reruns with identical inputs produce identical
/// bytes.
inline void emit_csv(const std::vector<SweepResult>& results, const std::string& path) {
  if (results.empty()) throw Error("emit_csv: no results to write");
  std::vector<SweepResult> rows = results;
  std::stable_sort(rows.begin(), rows.end(), [](const SweepResult& a, const SweepResult& b) {
    if (a.sweep_value != b.sweep_value) return a.sweep_value < b.sweep_value;
    return std::string(strategy_name(a.strategy)) < strategy_name(b.strategy);
  });
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_csv: cannot open '" + path + "'");
  out << "sweep_var,sweep_value,strategy,mean_pb_energy_j,stderr_j,feasible_rate,n_feasible,"
         "n_trials\n";
  for (const auto& r : rows) {
    out << r.sweep_var << ',' << detail::format_sig9(r.sweep_value) << ','
        << strategy_name(r.strategy) << ',' << detail::format_sig9(r.mean_pb_energy_j) << ','
        << detail::format_sig9(r.stderr_j) << ',' << detail::format_sig9(r.feasible_rate) << ','
        << r.n_feasible << ',' << r.n_trials << '\n';
  }
  out.flush();
  if (!out) throw IoError("emit_csv: write failed for '" + path + "'");
}

}  // namespace wetplan
