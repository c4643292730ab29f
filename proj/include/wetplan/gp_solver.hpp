#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "wetplan/eh_model.hpp"
#include "wetplan/errors.hpp"

namespace wetplan {

/// One device of the power/time allocation problem under phase-aligned
/// beamforming: incident power is p * gain with gain = ||h||_1^2 / N.
struct DeviceGpInstance {
  double gain = 0.0;      // dimensionless
  double demand_j = 0.0;  // J

  void validate() const {
    if (!(gain > 0.0)) throw DomainError("DeviceGpInstance: gain must be positive");
    if (!(demand_j > 0.0)) throw DomainError("DeviceGpInstance: demand must be positive");
  }
};

/// Constants of the per-device posynomial energy constraint. Stored with
/// the fit's signs (c2 > 0, c1 < 0, c0 < 0); the constraint itself uses
/// their magnitudes, see posynomial_lhs.
struct GpConstants {
  double c2 = 0.0;  // J
  double c1 = 0.0;  // 1/W
  double c0 = 0.0;  // W
};

inline GpConstants build_constants(const DeviceGpInstance& dev, const EhCoefficients& coeffs) {
  dev.validate();
  coeffs.validate();
  return GpConstants{dev.demand_j / (coeffs.a1 * dev.gain), coeffs.a2 * dev.gain / coeffs.a1,
                     coeffs.a0 / (coeffs.a1 * dev.gain)};
}

/// Left-hand side of the energy constraint in posynomial form:
///   c2/(tau*p) - c1*p - c0/p <= 1
/// which is algebraically equivalent to tau * fit(p*gain) >= demand.
inline double posynomial_lhs(const GpConstants& c, double power_w, double duration_s) {
  return c.c2 / (duration_s * power_w) - c.c1 * power_w - c.c0 / power_w;
}

/// Minimum deadline for time-division charging: every device needs at least
/// demand / g(saturation) seconds of dedicated beam time.
inline double feasibility_threshold(const std::vector<double>& demands_j, double g_sat_w) {
  if (!(g_sat_w > 0.0)) throw DomainError("feasibility_threshold: g_sat must be positive");
  double total = 0.0;
  for (double e : demands_j) total += e / g_sat_w;
  return total;
}

/// Per-device transmit powers and slot durations.
struct Allocation {
  std::vector<double> power_w;
  std::vector<double> duration_s;

  double total_duration_s() const {
    return std::accumulate(duration_s.begin(), duration_s.end(), 0.0);
  }
  double pb_energy_j() const {
    double e = 0.0;
    for (std::size_t i = 0; i < power_w.size(); ++i) e += power_w[i] * duration_s[i];
    return e;
  }
};

namespace detail {

struct BarrierEval {
  bool in_domain = false;
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

// Barrier-augmented objective in log variables x = [log p; log tau].
// Constraints: per-device posynomial energy bound, the saturation cap on
// the incident power, and the deadline sum. The max-efficiency lower bound
// on the incident power is omitted: every optimum satisfies it on its own
// (raising the power toward the max-efficiency point lowers both the
// transmit energy and the slot duration), and a barrier term on it would
// stand off the boundary by O(1/sqrt(t)) because the contact is tangential.
class P2Barrier {
 public:
  P2Barrier(const std::vector<DeviceGpInstance>& devices, const EhCoefficients& coeffs,
            double saturation_input_w, double tau_max_s)
      : s_(devices.size()), tau_max_(tau_max_s) {
    log_c2_.resize(s_);
    log_m1_.resize(s_);
    log_m0_.resize(s_);
    box_hi_.resize(s_);
    for (std::size_t i = 0; i < s_; ++i) {
      const GpConstants c = build_constants(devices[i], coeffs);
      log_c2_[i] = std::log(c.c2);
      log_m1_[i] = std::log(-c.c1);
      log_m0_[i] = std::log(-c.c0);
      box_hi_[i] = std::log(saturation_input_w / devices[i].gain);
    }
  }

  std::size_t n_constraints() const { return 2 * s_ + 1; }
  std::size_t dim() const { return 2 * s_; }

  double objective(const Eigen::VectorXd& x) const {
    double f = 0.0;
    for (std::size_t i = 0; i < s_; ++i) f += std::exp(x[pi(i)] + x[ti(i)]);
    return f;
  }

  BarrierEval eval(const Eigen::VectorXd& x, double t) const {
    BarrierEval out;
    out.grad = Eigen::VectorXd::Zero(dim());
    out.hess = Eigen::MatrixXd::Zero(dim(), dim());
    double f = 0.0;

    for (std::size_t i = 0; i < s_; ++i) {
      const double e = std::exp(x[pi(i)] + x[ti(i)]);
      f += t * e;
      out.grad[pi(i)] += t * e;
      out.grad[ti(i)] += t * e;
      out.hess(pi(i), pi(i)) += t * e;
      out.hess(pi(i), ti(i)) += t * e;
      out.hess(ti(i), pi(i)) += t * e;
      out.hess(ti(i), ti(i)) += t * e;
    }

    // Energy constraints: log-sum-exp of three affine terms <= 0.
    for (std::size_t i = 0; i < s_; ++i) {
      const double z1 = log_c2_[i] - x[pi(i)] - x[ti(i)];
      const double z2 = log_m1_[i] + x[pi(i)];
      const double z3 = log_m0_[i] - x[pi(i)];
      const double zmax = std::max({z1, z2, z3});
      const double w1 = std::exp(z1 - zmax);
      const double w2 = std::exp(z2 - zmax);
      const double w3 = std::exp(z3 - zmax);
      const double wsum = w1 + w2 + w3;
      const double a = zmax + std::log(wsum);
      if (!(a < 0.0)) return out;
      const double s1 = w1 / wsum, s2 = w2 / wsum, s3 = w3 / wsum;
      const double gp = -s1 + s2 - s3;
      const double gt = -s1;
      // sum_k sigma_k a_k a_k^T has entries pp = 1, pt = s1, tt = s1.
      const double hpp = 1.0 - gp * gp;
      const double hpt = s1 - gp * gt;
      const double htt = s1 - gt * gt;
      const double inv = 1.0 / (-a);
      const double inv2 = inv * inv;
      f += -std::log(-a);
      out.grad[pi(i)] += inv * gp;
      out.grad[ti(i)] += inv * gt;
      out.hess(pi(i), pi(i)) += inv * hpp + inv2 * gp * gp;
      out.hess(pi(i), ti(i)) += inv * hpt + inv2 * gp * gt;
      out.hess(ti(i), pi(i)) += inv * hpt + inv2 * gp * gt;
      out.hess(ti(i), ti(i)) += inv * htt + inv2 * gt * gt;
    }

    // Saturation cap on the incident power.
    for (std::size_t i = 0; i < s_; ++i) {
      const double d_hi = box_hi_[i] - x[pi(i)];
      if (!(d_hi > 0.0)) return out;
      f += -std::log(d_hi);
      out.grad[pi(i)] += 1.0 / d_hi;
      out.hess(pi(i), pi(i)) += 1.0 / (d_hi * d_hi);
    }

    // Deadline: log-sum-exp over log tau <= log tau_max.
    {
      double zmax = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < s_; ++i) zmax = std::max(zmax, x[ti(i)]);
      double wsum = 0.0;
      Eigen::VectorXd w(s_);
      for (std::size_t i = 0; i < s_; ++i) {
        w[static_cast<Eigen::Index>(i)] = std::exp(x[ti(i)] - zmax);
        wsum += w[static_cast<Eigen::Index>(i)];
      }
      const double d = zmax + std::log(wsum) - std::log(tau_max_);
      if (!(d < 0.0)) return out;
      const Eigen::VectorXd sig = w / wsum;
      const double inv = 1.0 / (-d);
      const double inv2 = inv * inv;
      f += -std::log(-d);
      for (std::size_t i = 0; i < s_; ++i) {
        out.grad[ti(i)] += inv * sig[static_cast<Eigen::Index>(i)];
        for (std::size_t j = 0; j < s_; ++j) {
          const double hij = (i == j ? sig[static_cast<Eigen::Index>(i)] : 0.0) -
                             sig[static_cast<Eigen::Index>(i)] * sig[static_cast<Eigen::Index>(j)];
          out.hess(ti(i), ti(j)) +=
              inv * hij + inv2 * sig[static_cast<Eigen::Index>(i)] * sig[static_cast<Eigen::Index>(j)];
        }
      }
    }

    out.value = f;
    out.in_domain = true;
    return out;
  }

  std::size_t pi(std::size_t i) const { return i; }
  std::size_t ti(std::size_t i) const { return s_ + i; }

 private:
  std::size_t s_;
  double tau_max_;
  std::vector<double> log_c2_, log_m1_, log_m0_, box_hi_;
};

}  // namespace detail

/// Minimum-energy power/time allocation for time-division charging:
///   min sum_s tau_s p_s  s.t. posynomial energy bound per device,
///   max-efficiency <= p_s*gain_s <= saturation, sum tau_s <= tau_max.
/// Convexified by the log change of variables and solved with a log-barrier
/// Newton method (backtracking line search, barrier parameter x10 per
/// stage, inner tolerance 1e-9 on the Newton decrement, outer stop at
/// duality measure 1e-8 relative to the objective).
inline Allocation solve_p2(const std::vector<DeviceGpInstance>& devices,
                           const EhCoefficients& coeffs, double max_eff_input_w,
                           double saturation_input_w, double tau_max_s) {
  coeffs.validate();
  if (!(tau_max_s > 0.0)) throw DomainError("solve_p2: deadline must be positive");
  Allocation out;
  if (devices.empty()) return out;
  for (const auto& d : devices) d.validate();

  const double g_sat = EhModel::fit_eval(coeffs, saturation_input_w);
  const double g_eff = EhModel::fit_eval(coeffs, max_eff_input_w);
  std::vector<double> demands(devices.size());
  for (std::size_t i = 0; i < devices.size(); ++i) demands[i] = devices[i].demand_j;
  const double threshold = feasibility_threshold(demands, g_sat);
  if (tau_max_s < threshold * (1.0 - 1e-12)) {
    std::ostringstream oss;
    oss << "solve_p2: deadline " << tau_max_s << " s below the feasibility threshold "
        << threshold << " s";
    throw InfeasibleError(oss.str(), threshold);
  }
  if (tau_max_s <= threshold * (1.0 + 1e-9)) {
    // Only the saturation operating point fits; no interior to search.
    const double squeeze = std::min(1.0, tau_max_s / threshold);
    for (const auto& d : devices) {
      out.power_w.push_back(saturation_input_w / d.gain);
      out.duration_s.push_back(squeeze * d.demand_j / g_sat);
    }
    return out;
  }

  const std::size_t s_count = devices.size();
  detail::P2Barrier barrier(devices, coeffs, saturation_input_w, tau_max_s);

  // Strictly feasible start: a common incident power between the saturation
  // and max-efficiency operating points, slot durations padded above the
  // energy equality and kept under the deadline.
  const double total_demand = std::accumulate(demands.begin(), demands.end(), 0.0);
  const double tau_flat = total_demand / g_eff;
  const double tau_target = 0.5 * (threshold + std::min(tau_max_s, tau_flat));
  const double g_required = total_demand / tau_target;
  const double incident0 = EhModel::fit_inverse(coeffs, g_required);
  const double pad = std::min(1e-3, 0.45 * (tau_max_s - tau_target) / tau_target);
  Eigen::VectorXd x(2 * s_count);
  for (std::size_t i = 0; i < s_count; ++i) {
    x[barrier.pi(i)] = std::log(incident0 / devices[i].gain);
    x[barrier.ti(i)] = std::log((1.0 + pad) * demands[i] / g_required);
  }

  const double m = static_cast<double>(barrier.n_constraints());
  double t = std::max(1.0, m / std::max(barrier.objective(x), 1e-12));
  const int max_stages = 60;
  for (int stage = 0; stage < max_stages; ++stage) {
    for (int inner = 0; inner < 120; ++inner) {
      const detail::BarrierEval ev = barrier.eval(x, t);
      if (!ev.in_domain)
        throw NumericalError("solve_p2: iterate left the feasible domain");
      Eigen::MatrixXd h = ev.hess;
      const double ridge = 1e-12 * std::max(1.0, h.diagonal().maxCoeff());
      h.diagonal().array() += ridge;
      const Eigen::VectorXd step = h.ldlt().solve(-ev.grad);
      const double decrement2 = -ev.grad.dot(step);
      if (!(decrement2 > 2e-9)) break;
      double alpha = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt) {
        const Eigen::VectorXd x_new = x + alpha * step;
        const detail::BarrierEval trial = barrier.eval(x_new, t);
        if (trial.in_domain && trial.value <= ev.value + 0.25 * alpha * ev.grad.dot(step)) {
          x = x_new;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    const double f_now = barrier.objective(x);
    if (m / t <= 1e-8 * std::max(1.0, f_now)) break;
    t *= 10.0;
    if (stage == max_stages - 1)
      throw NumericalError("solve_p2: barrier failed to reach the target duality measure",
                           "duality measure " + std::to_string(m / t));
  }

  out.power_w.resize(s_count);
  out.duration_s.resize(s_count);
  for (std::size_t i = 0; i < s_count; ++i) {
    out.power_w[i] = std::exp(x[barrier.pi(i)]);
    out.duration_s[i] = std::exp(x[barrier.ti(i)]);
    // Snap hairline undershoot of the max-efficiency bound; the energy
    // constraint only gains from the extra power.
    const double floor_p = max_eff_input_w / devices[i].gain;
    if (out.power_w[i] < floor_p) out.power_w[i] = floor_p;
  }
  return out;
}

/// Exhaustive log-grid minimizer of tau*p for a single device under the
/// same constraints as solve_p2; test oracle, independent of the barrier
/// solve path.
inline Allocation single_device_oracle(const DeviceGpInstance& device,
                                       const EhCoefficients& coeffs, double max_eff_input_w,
                                       double saturation_input_w, double tau_max_s,
                                       std::size_t grid = 2000) {
  device.validate();
  coeffs.validate();
  const double g_sat = EhModel::fit_eval(coeffs, saturation_input_w);
  const double tau_min = device.demand_j / g_sat;
  if (tau_max_s < tau_min * (1.0 - 1e-12))
    throw InfeasibleError("single_device_oracle: infeasible deadline", tau_min);

  const double p_lo = max_eff_input_w / device.gain;
  const double p_hi = saturation_input_w / device.gain;
  double best = std::numeric_limits<double>::infinity();
  double best_p = p_hi, best_tau = std::min(tau_min, tau_max_s);
  for (std::size_t i = 0; i < grid; ++i) {
    const double fp = grid == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(grid - 1);
    const double p = p_lo * std::pow(p_hi / p_lo, fp);
    for (std::size_t j = 0; j < grid; ++j) {
      const double ft = grid == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(grid - 1);
      const double tau = tau_min * std::pow(tau_max_s / tau_min, ft);
      if (tau * EhModel::fit_eval(coeffs, p * device.gain) < device.demand_j) continue;
      if (p * tau < best) {
        best = p * tau;
        best_p = p;
        best_tau = tau;
      }
    }
  }
  if (!std::isfinite(best)) {
    // Fall back to the saturation corner, feasible by the threshold check.
    best_p = p_hi;
    best_tau = std::min(tau_min, tau_max_s);
  }
  Allocation out;
  out.power_w = {best_p};
  out.duration_s = {best_tau};
  return out;
}

}  // namespace wetplan
