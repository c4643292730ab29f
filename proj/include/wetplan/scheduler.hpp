#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wetplan/beamforming.hpp"
#include "wetplan/eh_model.hpp"
#include "wetplan/errors.hpp"
#include "wetplan/gp_solver.hpp"

namespace wetplan {

enum class Strategy { kOrderAgnostic, kOrderAware, kAllAtOnce };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kOrderAgnostic: return "order-agnostic";
    case Strategy::kOrderAware: return "order-aware";
    case Strategy::kAllAtOnce: return "all-at-once";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  if (name == "order-agnostic") return Strategy::kOrderAgnostic;
  if (name == "order-aware") return Strategy::kOrderAware;
  if (name == "all-at-once") return Strategy::kAllAtOnce;
  throw ConfigError("strategies: unknown strategy '" + name +
                    "' (expected order-agnostic, order-aware or all-at-once)");
}

struct Slot {
  int device = -1;  // -1 for the shared all-at-once beam
  PhaseVector beam;
  double duration_s = 0.0;
  bool pre_charged = false;  // zero-duration slot, demand already met by pollution
};

struct ChargingPlan {
  Strategy strategy = Strategy::kOrderAgnostic;
  std::vector<Slot> slots;
  std::vector<double> demands_j;
  double tau_max_s = 0.0;

  double total_duration_s() const {
    double t = 0.0;
    for (const auto& s : slots) t += s.duration_s;
    return t;
  }
};

struct HarvestReport {
  std::vector<double> harvested_j;
  double pb_energy_j = 0.0;
  bool feasible = false;  // every demand met within 1e-9 J
};

/// Transmit energy of the plan, sum of duration * power over slots.
inline double pb_energy(const ChargingPlan& plan) {
  double e = 0.0;
  for (const auto& s : plan.slots) e += s.duration_s * s.beam.power_w;
  return e;
}

/// Full harvested-energy accounting: every device integrates every slot,
/// cross-terms included, through the measured harvesting curve.
inline HarvestReport realized_harvest(const ChargingPlan& plan,
                                      const std::vector<Eigen::VectorXcd>& channels,
                                      const EhModel& eh) {
  if (channels.size() != plan.demands_j.size())
    throw DomainError("realized_harvest: plan and channels cover different device sets");
  HarvestReport report;
  report.harvested_j.assign(channels.size(), 0.0);
  std::vector<Eigen::VectorXcd> weights;
  weights.reserve(plan.slots.size());
  for (const auto& slot : plan.slots) weights.push_back(slot.beam.realized_weights());
  for (std::size_t s = 0; s < channels.size(); ++s) {
    for (std::size_t k = 0; k < plan.slots.size(); ++k) {
      if (plan.slots[k].duration_s <= 0.0) continue;
      report.harvested_j[s] +=
          plan.slots[k].duration_s * eh.eval_measured(incident_power(channels[s], weights[k]));
    }
  }
  report.pb_energy_j = pb_energy(plan);
  report.feasible = true;
  for (std::size_t s = 0; s < channels.size(); ++s)
    if (report.harvested_j[s] < plan.demands_j[s] - 1e-9) report.feasible = false;
  return report;
}

inline double mrt_gain(const Eigen::VectorXcd& h) {
  const double l1 = h.lpNorm<1>();
  return l1 * l1 / static_cast<double>(h.size());
}

/// Time-division plan that ignores cross-slot harvesting: per-device
/// phase-aligned beams with powers/durations from the allocation solver.
inline ChargingPlan plan_order_agnostic(const std::vector<Eigen::VectorXcd>& channels,
                                        const std::vector<double>& demands_j, double tau_max_s,
                                        const EhModel& eh) {
  if (channels.size() != demands_j.size())
    throw DomainError("plan_order_agnostic: channels/demands size mismatch");
  std::vector<DeviceGpInstance> devices(channels.size());
  for (std::size_t s = 0; s < channels.size(); ++s)
    devices[s] = DeviceGpInstance{mrt_gain(channels[s]), demands_j[s]};
  const Allocation alloc =
      solve_p2(devices, eh.coefficients(), eh.max_efficiency_point(), eh.saturation_input_w(),
               tau_max_s);
  ChargingPlan plan;
  plan.strategy = Strategy::kOrderAgnostic;
  plan.demands_j = demands_j;
  plan.tau_max_s = tau_max_s;
  for (std::size_t s = 0; s < channels.size(); ++s) {
    Slot slot;
    slot.device = static_cast<int>(s);
    slot.beam = mrt_phases(channels[s]).with_power(alloc.power_w[s]);
    slot.duration_s = alloc.duration_s[s];
    plan.slots.push_back(std::move(slot));
  }
  return plan;
}

/// Device whose slot delivers the largest summed cross-harvest to the other
/// listed devices; ties go to the lowest device id.
inline int most_polluting(const std::vector<Slot>& slots,
                          const std::vector<Eigen::VectorXcd>& channels, const EhModel& eh) {
  if (slots.size() < 2) throw DomainError("most_polluting: need at least two devices");
  int best_device = -1;
  double best_pollution = -1.0;
  for (const auto& cand : slots) {
    const Eigen::VectorXcd w = cand.beam.realized_weights();
    double pollution = 0.0;
    for (const auto& other : slots) {
      if (other.device == cand.device) continue;
      pollution += cand.duration_s *
                   eh.eval_measured(incident_power(channels[static_cast<std::size_t>(other.device)], w));
    }
    if (pollution > best_pollution ||
        (pollution == best_pollution && cand.device < best_device)) {
      best_pollution = pollution;
      best_device = cand.device;
    }
  }
  return best_device;
}

/// Time-division plan that exploits cross-slot harvesting: schedules the
/// most polluting device first, discounts the remaining demands by the
/// pollution they receive, and re-tightens each pending allocation through
/// the inverse of the measured curve (never raising power; a slot whose
/// incident power would drop below the max-efficiency point is clamped to
/// it with a shortened duration). Devices fully charged by pollution get a
/// zero-duration slot.
inline ChargingPlan plan_order_aware(const std::vector<Eigen::VectorXcd>& channels,
                                     const std::vector<double>& demands_j, double tau_max_s,
                                     const EhModel& eh) {
  const ChargingPlan base = plan_order_agnostic(channels, demands_j, tau_max_s, eh);
  ChargingPlan plan;
  plan.strategy = Strategy::kOrderAware;
  plan.demands_j = demands_j;
  plan.tau_max_s = tau_max_s;

  std::vector<Slot> remaining = base.slots;  // sorted by device id
  std::vector<double> residual_demand = demands_j;
  const double w0 = eh.max_efficiency_point();
  const double g_at_w0 = eh.eval_measured(w0);
  const double plateau = eh.saturation_output_w();

  while (remaining.size() >= 2) {
    const int chosen = most_polluting(remaining, channels, eh);
    const auto chosen_it =
        std::find_if(remaining.begin(), remaining.end(),
                     [&](const Slot& s) { return s.device == chosen; });
    const Slot scheduled = *chosen_it;
    remaining.erase(chosen_it);
    plan.slots.push_back(scheduled);

    const Eigen::VectorXcd w = scheduled.beam.realized_weights();
    for (std::size_t idx = 0; idx < remaining.size();) {
      Slot& slot = remaining[idx];
      const std::size_t dev = static_cast<std::size_t>(slot.device);
      const double pollution =
          scheduled.duration_s * eh.eval_measured(incident_power(channels[dev], w));
      residual_demand[dev] -= pollution;
      if (residual_demand[dev] <= 0.0) {
        Slot done = slot;
        done.duration_s = 0.0;
        done.beam = done.beam.with_power(0.0);
        done.pre_charged = true;
        plan.slots.push_back(std::move(done));
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(idx));
        continue;
      }
      if (pollution > 0.0) {
        const double required_dc = residual_demand[dev] / slot.duration_s;
        if (required_dc > plateau * (1.0 + 1e-12)) {
          std::ostringstream oss;
          oss << "required DC power " << required_dc << " W exceeds plateau " << plateau;
          throw NumericalError("plan_order_aware: demand update left the invertible range",
                               oss.str());
        }
        const double gain = mrt_gain(channels[dev]);
        const double incident = eh.inverse(std::min(required_dc, plateau));
        if (incident < w0) {
          slot.beam = slot.beam.with_power(w0 / gain);
          slot.duration_s = residual_demand[dev] / g_at_w0;
        } else {
          slot.beam = slot.beam.with_power(std::min(slot.beam.power_w, incident / gain));
        }
      }
      ++idx;
    }
  }
  for (const auto& slot : remaining) plan.slots.push_back(slot);

  if (plan.total_duration_s() > tau_max_s + 1e-9) {
    std::ostringstream oss;
    oss << "total duration " << plan.total_duration_s() << " s over deadline " << tau_max_s;
    throw NumericalError("plan_order_aware: deadline exceeded after updates", oss.str());
  }
  return plan;
}

struct AllAtOnceDirection {
  BeamDirection beam;
  double xi = 0.0;
};

/// Shared-beam direction for simultaneous charging (independent of the
/// deadline, so sweeps can reuse it across grid points).
inline AllAtOnceDirection all_at_once_direction(const std::vector<Eigen::VectorXcd>& channels,
                                                const std::vector<double>& demands_j) {
  const MaxMinSolution sol = solve_maxmin_sdp(channels, demands_j);
  return AllAtOnceDirection{extract_direction(sol.shared_beam_gram), sol.xi};
}

/// Single shared beam for the whole block: direction from the max-min
/// relaxation, then an exhaustive search over the duration for the
/// (power, duration) pair of least transmit energy. The power at a given
/// duration is set by the worst ratio of required input power to unit-power
/// incident power; durations whose required DC output exceeds the plateau
/// are skipped.
inline ChargingPlan plan_all_at_once(const std::vector<Eigen::VectorXcd>& channels,
                                     const std::vector<double>& demands_j, double tau_max_s,
                                     const EhModel& eh, const AllAtOnceDirection& direction,
                                     std::size_t tau_grid = 2000) {
  if (channels.size() != demands_j.size())
    throw DomainError("plan_all_at_once: channels/demands size mismatch");
  const double plateau = eh.saturation_output_w();
  double tau_lo = 0.0;
  for (double e : demands_j) tau_lo = std::max(tau_lo, e / plateau);
  if (tau_max_s < tau_lo * (1.0 - 1e-12))
    throw InfeasibleError("plan_all_at_once: deadline below the single-slot bound", tau_lo);
  tau_lo = std::min(tau_lo, tau_max_s);

  const Eigen::VectorXcd w_unit = direction.beam.direction.realized_weights();
  std::vector<double> incident_gain(channels.size());
  for (std::size_t s = 0; s < channels.size(); ++s)
    incident_gain[s] = incident_power(channels[s], w_unit);

  auto power_at = [&](double tau) -> std::optional<double> {
    double p = 0.0;
    for (std::size_t s = 0; s < channels.size(); ++s) {
      const double required_dc = demands_j[s] / tau;
      if (required_dc > plateau * (1.0 + 1e-9)) return std::nullopt;
      if (incident_gain[s] <= 0.0) return std::nullopt;
      p = std::max(p, eh.inverse(std::min(required_dc, plateau)) / incident_gain[s]);
    }
    return p;
  };
  auto objective = [&](double tau) {
    const auto p = power_at(tau);
    return p ? *p * tau : std::numeric_limits<double>::infinity();
  };

  const std::size_t grid = std::max<std::size_t>(2, tau_grid);
  double best_obj = std::numeric_limits<double>::infinity();
  double best_tau = tau_lo;
  std::size_t best_idx = 0;
  for (std::size_t i = 0; i < grid; ++i) {
    const double f = static_cast<double>(i) / static_cast<double>(grid - 1);
    const double tau = tau_lo * std::pow(tau_max_s / tau_lo, f);
    const double obj = objective(tau);
    if (obj < best_obj) {
      best_obj = obj;
      best_tau = tau;
      best_idx = i;
    }
  }
  if (!std::isfinite(best_obj))
    throw NumericalError("plan_all_at_once: no feasible duration on the search grid");

  // Golden-section refinement on the bracket around the best grid point.
  const auto grid_tau = [&](std::size_t i) {
    const double f = static_cast<double>(i) / static_cast<double>(grid - 1);
    return tau_lo * std::pow(tau_max_s / tau_lo, f);
  };
  double a = best_idx > 0 ? grid_tau(best_idx - 1) : tau_lo;
  double b = best_idx + 1 < grid ? grid_tau(best_idx + 1) : tau_max_s;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = objective(x1), f2 = objective(x2);
  for (int it = 0; it < 60 && (b - a) > 1e-6 * best_tau; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = objective(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = objective(x2);
    }
  }
  for (double cand : {x1, x2}) {
    const double obj = objective(cand);
    if (obj < best_obj) {
      best_obj = obj;
      best_tau = cand;
    }
  }

  const auto p_final = power_at(best_tau);
  if (!p_final)
    throw NumericalError("plan_all_at_once: refined duration infeasible");
  ChargingPlan plan;
  plan.strategy = Strategy::kAllAtOnce;
  plan.demands_j = demands_j;
  plan.tau_max_s = tau_max_s;
  Slot slot;
  slot.device = -1;
  slot.beam = direction.beam.direction.with_power(*p_final);
  slot.duration_s = best_tau;
  plan.slots.push_back(std::move(slot));
  return plan;
}

inline ChargingPlan plan_all_at_once(const std::vector<Eigen::VectorXcd>& channels,
                                     const std::vector<double>& demands_j, double tau_max_s,
                                     const EhModel& eh, std::size_t tau_grid = 2000) {
  return plan_all_at_once(channels, demands_j, tau_max_s, eh,
                          all_at_once_direction(channels, demands_j), tau_grid);
}

}  // namespace wetplan
