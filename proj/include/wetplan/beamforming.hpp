#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "wetplan/errors.hpp"

namespace wetplan {

/// Analog precoder: per-antenna phases plus a transmit power. The realized
/// weight vector has constant modulus sqrt(power/N) per entry.
struct PhaseVector {
  Eigen::VectorXd phases_rad;
  double power_w = 1.0;

  Eigen::VectorXcd realized_weights() const {
    const auto n = phases_rad.size();
    const double amplitude = std::sqrt(power_w / static_cast<double>(n));
    Eigen::VectorXcd w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = std::polar(amplitude, phases_rad[i]);
    return w;
  }

  PhaseVector with_power(double power_w_new) const { return {phases_rad, power_w_new}; }
};

/// |h^H w|^2.
inline double incident_power(const Eigen::VectorXcd& h, const Eigen::VectorXcd& w) {
  if (h.size() != w.size()) throw DomainError("incident_power: length mismatch");
  return std::norm(h.dot(w));
}

/// Phase-aligned (maximum ratio) precoder at unit power. Realized incident
/// power at transmit power p is (p/N)*||h||_1^2.
inline PhaseVector mrt_phases(const Eigen::VectorXcd& h) {
  Eigen::VectorXd phases(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    if (std::abs(h[i]) == 0.0)
      throw DegenerateChannelError("mrt_phases: zero channel entry at antenna " +
                                   std::to_string(i));
    phases[i] = std::arg(h[i]);
  }
  return PhaseVector{phases, 1.0};
}

/// Unit-trace Hermitian PSD matrix (validated on construction).
class PsdMatrix {
 public:
  explicit PsdMatrix(Eigen::MatrixXcd w) : w_(std::move(w)) {
    if (w_.rows() != w_.cols() || w_.rows() == 0)
      throw DomainError("PsdMatrix: matrix must be square and non-empty");
    const double scale = std::max(1.0, w_.cwiseAbs().maxCoeff());
    if ((w_ - w_.adjoint()).cwiseAbs().maxCoeff() > 1e-10 * scale)
      throw DomainError("PsdMatrix: matrix is not Hermitian");
    const double tr = w_.trace().real();
    if (std::abs(tr - 1.0) > 1e-9)
      throw DomainError("PsdMatrix: trace must equal 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(w_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-8 * tr)
      throw DomainError("PsdMatrix: matrix is not positive semidefinite");
  }

  const Eigen::MatrixXcd& matrix() const { return w_; }
  Eigen::Index size() const { return w_.rows(); }

 private:
  Eigen::MatrixXcd w_;
};

struct MaxMinSolution {
  double xi = 0.0;  // min_s tr(W H_s)/E_s of the returned W (exact certificate)
  PsdMatrix shared_beam_gram;
};

struct BeamDirection {
  PhaseVector direction;        // unit power, |w_n| = 1/sqrt(N)
  double eigenvalue_gap = 0.0;  // dominant minus second eigenvalue
  bool ambiguous = false;       // gap below 1e-9 * trace
};

namespace detail {

struct ReducedSpan {
  Eigen::MatrixXcd basis;                // N x r, orthonormal columns
  std::vector<Eigen::VectorXcd> h_red;   // reduced channels, r-dim
};

// Any optimal solution concentrates its trace on span{h_s}: projecting a
// feasible W onto the span preserves every tr(W H_s) and only frees trace,
// which can be rescaled to improve the objective. Solving in the r <= S
// dimensional span keeps the eigendecompositions tiny.
inline ReducedSpan reduce_to_span(const std::vector<Eigen::VectorXcd>& channels) {
  const Eigen::Index n = channels.front().size();
  std::vector<Eigen::VectorXcd> basis;
  for (const auto& h : channels) {
    Eigen::VectorXcd v = h;
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) v -= b.dot(v) * b;
    if (v.norm() > 1e-12 * h.norm()) basis.push_back(v.normalized());
  }
  ReducedSpan out;
  out.basis.resize(n, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t j = 0; j < basis.size(); ++j) out.basis.col(static_cast<Eigen::Index>(j)) = basis[j];
  out.h_red.reserve(channels.size());
  for (const auto& h : channels) out.h_red.push_back(out.basis.adjoint() * h);
  return out;
}

struct DualEval {
  double value = 0.0;
  Eigen::VectorXd subgrad;  // d value / d mu_s
};

// f(mu) = lambda_max(sum_s mu_s H_s / E_s) on the probability simplex; its
// minimum equals the optimum of the max-min problem (strong duality).
inline DualEval eval_dual(const Eigen::VectorXd& mu, const std::vector<Eigen::VectorXcd>& h_red,
                          const std::vector<double>& demands) {
  const auto r = h_red.front().size();
  const auto s_count = h_red.size();
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(r, r);
  for (std::size_t s = 0; s < s_count; ++s)
    m += (mu[static_cast<Eigen::Index>(s)] / demands[s]) * (h_red[s] * h_red[s].adjoint());
  m = ((m + m.adjoint()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
  const Eigen::VectorXcd u = es.eigenvectors().col(r - 1);
  DualEval out;
  out.value = es.eigenvalues()(r - 1);
  out.subgrad.resize(static_cast<Eigen::Index>(s_count));
  for (std::size_t s = 0; s < s_count; ++s)
    out.subgrad[static_cast<Eigen::Index>(s)] = std::norm(u.dot(h_red[s])) / demands[s];
  return out;
}

// 1-D dual (two devices): golden-section on the convex f(beta).
inline void dual_two_devices(const std::vector<Eigen::VectorXcd>& h_red,
                             const std::vector<double>& demands, double& f_best,
                             Eigen::VectorXd& mu_best) {
  auto value_at = [&](double beta) {
    Eigen::VectorXd mu(2);
    mu << beta, 1.0 - beta;
    return std::make_pair(eval_dual(mu, h_red, demands).value, mu);
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = 1.0;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  auto [f1, mu1] = value_at(x1);
  auto [f2, mu2] = value_at(x2);
  f_best = std::min(f1, f2);
  mu_best = f1 <= f2 ? mu1 : mu2;
  for (int it = 0; it < 80; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      mu2 = mu1;
      x1 = b - gr * (b - a);
      std::tie(f1, mu1) = value_at(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      mu1 = mu2;
      x2 = a + gr * (b - a);
      std::tie(f2, mu2) = value_at(x2);
    }
    if (f1 < f_best) { f_best = f1; mu_best = mu1; }
    if (f2 < f_best) { f_best = f2; mu_best = mu2; }
  }
  for (double beta : {0.0, 1.0}) {
    auto [f, mu] = value_at(beta);
    if (f < f_best) { f_best = f; mu_best = mu; }
  }
}

// Ellipsoid method over the simplex (S >= 3). Deterministic; each step is
// one r x r eigendecomposition.
inline void dual_ellipsoid(const std::vector<Eigen::VectorXcd>& h_red,
                           const std::vector<double>& demands, double& f_best,
                           Eigen::VectorXd& mu_best) {
  const int s_count = static_cast<int>(h_red.size());
  const int n = s_count - 1;
  Eigen::VectorXd c = Eigen::VectorXd::Constant(n, 1.0 / s_count);
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n, n);
  auto to_mu = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd mu(s_count);
    mu.head(n) = x;
    mu[n] = 1.0 - x.sum();
    return mu;
  };
  f_best = std::numeric_limits<double>::infinity();
  // Vertices give a valid starting upper bound.
  for (int s = 0; s < s_count; ++s) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(s_count);
    mu[s] = 1.0;
    const double f = eval_dual(mu, h_red, demands).value;
    if (f < f_best) { f_best = f; mu_best = mu; }
  }
  const int max_iters = 700 * n;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::VectorXd mu = to_mu(c);
    Eigen::VectorXd g(n);
    bool feasibility_cut = false;
    for (int i = 0; i < n && !feasibility_cut; ++i) {
      if (mu[i] < 0.0) {
        g = Eigen::VectorXd::Zero(n);
        g[i] = -1.0;
        feasibility_cut = true;
      }
    }
    if (!feasibility_cut && mu[n] < 0.0) {
      g = Eigen::VectorXd::Ones(n);
      feasibility_cut = true;
    }
    if (!feasibility_cut) {
      const DualEval ev = eval_dual(mu, h_red, demands);
      if (ev.value < f_best) { f_best = ev.value; mu_best = mu; }
      for (int i = 0; i < n; ++i) g[i] = ev.subgrad[i] - ev.subgrad[n];
      if (g.norm() == 0.0) break;
    }
    const Eigen::VectorXd pg = p * g;
    const double denom = g.dot(pg);
    if (!(denom > 0.0)) break;
    const Eigen::VectorXd gn = pg / std::sqrt(denom);
    c -= gn / (n + 1.0);
    p = (static_cast<double>(n) * n / (n * n - 1.0)) *
        (p - (2.0 / (n + 1.0)) * (gn * gn.transpose()));
    p = ((p + p.transpose()) / 2.0).eval();
    if (p.trace() < 1e-28) break;
  }
}

struct Recovery {
  Eigen::MatrixXcd x;  // m x m, PSD, unit trace after cleanup
  double max_constraint_gap = 0.0;
  bool converged = false;
};

// Dykstra alternating projections between the PSD cone and the affine set
// {tr X = 1, tr(X A_s) = xi_star E_s for the dual-support constraints}.
// Complementary slackness puts the optimal primal on exactly this face, and
// the affine projection is exact (small Gram system), which converges far
// faster than skimming a margin-thin inequality region.
inline Recovery recover_equality(const Eigen::MatrixXcd& u_cols,
                                 const std::vector<Eigen::VectorXcd>& h_red,
                                 const std::vector<double>& demands,
                                 const std::vector<std::size_t>& support, double xi_star,
                                 int max_iters) {
  const Eigen::Index m = u_cols.cols();
  const std::size_t k_eq = support.size() + 1;  // trace constraint first
  std::vector<Eigen::MatrixXcd> normals;
  std::vector<double> rhs;
  normals.push_back(Eigen::MatrixXcd::Identity(m, m));
  rhs.push_back(1.0);
  for (std::size_t s : support) {
    const Eigen::VectorXcd u = u_cols.adjoint() * h_red[s];
    normals.push_back(u * u.adjoint());
    rhs.push_back(xi_star * demands[s]);
  }
  Eigen::MatrixXd gram(k_eq, k_eq);
  for (std::size_t a = 0; a < k_eq; ++a)
    for (std::size_t b = 0; b < k_eq; ++b)
      gram(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
          (normals[a].adjoint() * normals[b]).trace().real();
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> gram_solver(gram);

  auto project_affine = [&](const Eigen::MatrixXcd& x) {
    Eigen::VectorXd residual(k_eq);
    for (std::size_t a = 0; a < k_eq; ++a)
      residual[static_cast<Eigen::Index>(a)] =
          (normals[a].adjoint() * x).trace().real() - rhs[a];
    const Eigen::VectorXd nu = gram_solver.solve(residual);
    Eigen::MatrixXcd out = x;
    for (std::size_t a = 0; a < k_eq; ++a) out -= nu[static_cast<Eigen::Index>(a)] * normals[a];
    return out;
  };
  auto project_psd = [&](const Eigen::MatrixXcd& x) {
    const Eigen::MatrixXcd sym = (x + x.adjoint()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(sym);
    const Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
    return Eigen::MatrixXcd(es.eigenvectors() * vals.asDiagonal() *
                            es.eigenvectors().adjoint());
  };

  Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(m, m) / static_cast<double>(m);
  Eigen::MatrixXcd corr = Eigen::MatrixXcd::Zero(m, m);
  Recovery out;
  for (int it = 0; it < max_iters; ++it) {
    const Eigen::MatrixXcd y = project_affine(x);
    const Eigen::MatrixXcd z = project_psd(y + corr);
    corr = y + corr - z;
    const double gap = (z - y).norm() / std::max(1.0, y.norm());
    x = z;
    if (gap < 1e-13) {
      out.converged = true;
      break;
    }
  }
  // Cleanup: exact PSD and unit trace.
  x = project_psd(x);
  const double tr = x.trace().real();
  if (tr > 0.0) x /= tr;
  out.x = x;
  double worst = 0.0;
  for (std::size_t a = 1; a < k_eq; ++a) {
    const double v = (normals[a].adjoint() * x).trace().real();
    if (rhs[a] > 0.0) worst = std::max(worst, std::abs(v - rhs[a]) / rhs[a]);
  }
  out.max_constraint_gap = worst;
  return out;
}

// Alternating projections onto {tr(X A_s) >= b_s} (halfspaces),
// {tr X = 1} and the PSD cone, restricted to the near-dominant eigenspace
// the optimal solution must live in by complementary slackness.
inline Recovery recover_on_face(const Eigen::MatrixXcd& u_cols,
                                const std::vector<Eigen::VectorXcd>& h_red,
                                const std::vector<double>& demands, double xi_target,
                                int max_iters) {
  const Eigen::Index m = u_cols.cols();
  const std::size_t s_count = h_red.size();
  std::vector<Eigen::VectorXcd> u_s(s_count);
  std::vector<double> a_norm2(s_count), b(s_count);
  for (std::size_t s = 0; s < s_count; ++s) {
    u_s[s] = u_cols.adjoint() * h_red[s];
    const double n2 = u_s[s].squaredNorm();
    a_norm2[s] = n2 * n2;  // ||u u^H||_F^2
    b[s] = xi_target * demands[s];
  }
  Eigen::MatrixXcd x = Eigen::MatrixXcd::Identity(m, m) / static_cast<double>(m);
  Recovery out;
  for (int it = 0; it < max_iters; ++it) {
    for (std::size_t s = 0; s < s_count; ++s) {
      if (a_norm2[s] == 0.0) continue;
      const double v = (u_s[s].adjoint() * x * u_s[s]).real()(0, 0);
      if (v < b[s]) x += ((b[s] - v) / a_norm2[s]) * (u_s[s] * u_s[s].adjoint());
    }
    x += ((1.0 - x.trace().real()) / static_cast<double>(m)) *
         Eigen::MatrixXcd::Identity(m, m);
    x = ((x + x.adjoint()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
    Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
    x = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
    double gap = std::abs(x.trace().real() - 1.0);
    for (std::size_t s = 0; s < s_count; ++s) {
      if (b[s] <= 0.0) continue;
      const double v = (u_s[s].adjoint() * x * u_s[s]).real()(0, 0);
      gap = std::max(gap, (b[s] - v) / b[s]);
    }
    out.max_constraint_gap = gap;
    if (gap < 1e-11) {
      out.converged = true;
      break;
    }
  }
  // Cleanup: exact PSD and unit trace.
  x = ((x + x.adjoint()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(x);
  Eigen::VectorXd vals = es.eigenvalues().cwiseMax(0.0);
  x = es.eigenvectors() * vals.asDiagonal() * es.eigenvectors().adjoint();
  const double tr = x.trace().real();
  if (tr > 0.0) x /= tr;
  out.x = x;
  return out;
}

}  // namespace detail

/// Max-min weighted incident power direction: maximizes xi subject to
/// tr(W H_s) >= xi E_s, tr W = 1, W >= 0 (the demand weights favor devices
/// that need more energy). Solved in the span of the channels via the dual
/// (min over the simplex of the largest eigenvalue), then the matrix is
/// recovered on the dominant eigenspace by alternating projections. The
/// returned xi is the exact minimum constraint ratio of the returned W and
/// is certified to be within 1e-6 relative of the optimum.
inline MaxMinSolution solve_maxmin_sdp(const std::vector<Eigen::VectorXcd>& channels,
                                       const std::vector<double>& demands_j) {
  if (channels.empty()) throw DomainError("solve_maxmin_sdp: need at least one device");
  if (channels.size() != demands_j.size())
    throw DomainError("solve_maxmin_sdp: channels/demands size mismatch");
  const Eigen::Index n = channels.front().size();
  for (const auto& h : channels) {
    if (h.size() != n) throw DomainError("solve_maxmin_sdp: channel length mismatch");
    if (h.norm() == 0.0) throw DegenerateChannelError("solve_maxmin_sdp: zero channel");
  }
  for (double e : demands_j)
    if (!(e > 0.0)) throw DomainError("solve_maxmin_sdp: demands must be positive");

  const detail::ReducedSpan red = detail::reduce_to_span(channels);
  const Eigen::Index r = red.basis.cols();
  const std::size_t s_count = channels.size();

  double f_best = 0.0;
  Eigen::VectorXd mu_best;
  if (s_count == 1) {
    f_best = red.h_red[0].squaredNorm() / demands_j[0];
    mu_best = Eigen::VectorXd::Ones(1);
  } else if (s_count == 2) {
    detail::dual_two_devices(red.h_red, demands_j, f_best, mu_best);
  } else {
    detail::dual_ellipsoid(red.h_red, demands_j, f_best, mu_best);
  }

  // Dominant eigenspace of the dual matrix at the minimizer.
  Eigen::MatrixXcd m_star = Eigen::MatrixXcd::Zero(r, r);
  for (std::size_t s = 0; s < s_count; ++s)
    m_star += (mu_best[static_cast<Eigen::Index>(s)] / demands_j[s]) *
              (red.h_red[s] * red.h_red[s].adjoint());
  m_star = ((m_star + m_star.adjoint()) / 2.0).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m_star);
  const double lam_max = es.eigenvalues()(r - 1);
  Eigen::Index m0 = 0;
  for (Eigen::Index i = 0; i < r; ++i)
    if (es.eigenvalues()(i) >= lam_max * (1.0 - 1e-8)) ++m0;

  std::vector<std::size_t> support;
  for (std::size_t s = 0; s < s_count; ++s)
    if (mu_best[static_cast<Eigen::Index>(s)] > 1e-8) support.push_back(s);

  double xi_ret = -1.0;
  Eigen::MatrixXcd w_ret;
  double last_gap = 0.0;
  auto consider = [&](const Eigen::MatrixXcd& u_cols, const detail::Recovery& rec) {
    last_gap = rec.max_constraint_gap;
    Eigen::MatrixXcd w = red.basis * u_cols * rec.x * u_cols.adjoint() * red.basis.adjoint();
    w = ((w + w.adjoint()) / 2.0).eval();
    const double tr = w.trace().real();
    if (!(tr > 0.0)) return;
    w /= tr;
    double xi = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < s_count; ++s)
      xi = std::min(xi, (channels[s].adjoint() * w * channels[s]).real()(0, 0) / demands_j[s]);
    if (xi > xi_ret) {
      xi_ret = xi;
      w_ret = w;
    }
  };
  for (Eigen::Index m = m0; m <= r && xi_ret < f_best * (1.0 - 1e-6); ++m) {
    const Eigen::MatrixXcd u_cols = es.eigenvectors().rightCols(m);
    consider(u_cols,
             detail::recover_equality(u_cols, red.h_red, demands_j, support, f_best, 20000));
    for (double margin : {1e-8, 3e-7}) {
      if (xi_ret >= f_best * (1.0 - 1e-6)) break;
      consider(u_cols, detail::recover_on_face(u_cols, red.h_red, demands_j,
                                               f_best * (1.0 - margin), 30000));
    }
  }
  if (!(xi_ret >= f_best * (1.0 - 1e-6))) {
    std::ostringstream oss;
    oss << "dual bound " << f_best << ", best recovered xi " << xi_ret
        << ", last projection gap " << last_gap;
    throw NumericalError("solve_maxmin_sdp: failed to certify the recovered solution",
                         oss.str());
  }
  return MaxMinSolution{xi_ret, PsdMatrix(std::move(w_ret))};
}

/// Phases of the dominant eigenvector, global phase fixed so the first
/// (non-negligible) entry is real non-negative. When the dominant eigenvalue
/// is degenerate (gap below 1e-9 * trace) the result is flagged ambiguous
/// and the candidate eigenvectors are tie-broken lexicographically.
inline BeamDirection extract_direction(const PsdMatrix& w) {
  const Eigen::Index n = w.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(w.matrix());
  const double trace = w.matrix().trace().real();
  const double lam_max = es.eigenvalues()(n - 1);
  const double gap = n >= 2 ? lam_max - es.eigenvalues()(n - 2) : lam_max;
  const bool ambiguous = gap < 1e-9 * trace;

  auto phase_normalized = [&](Eigen::VectorXcd v) {
    Eigen::Index ref = 0;
    while (ref < n - 1 && std::abs(v[ref]) <= 1e-12) ++ref;
    if (std::abs(v[ref]) > 0.0) v *= std::polar(1.0, -std::arg(v[ref]));
    return v;
  };
  auto lex_less = [&](const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (a[i].real() != b[i].real()) return a[i].real() < b[i].real();
      if (a[i].imag() != b[i].imag()) return a[i].imag() < b[i].imag();
    }
    return false;
  };

  Eigen::VectorXcd chosen = phase_normalized(es.eigenvectors().col(n - 1));
  if (ambiguous) {
    for (Eigen::Index i = 0; i < n - 1; ++i) {
      if (es.eigenvalues()(i) >= lam_max - 1e-9 * trace) {
        Eigen::VectorXcd cand = phase_normalized(es.eigenvectors().col(i));
        if (lex_less(cand, chosen)) chosen = cand;
      }
    }
  }
  Eigen::VectorXd phases(n);
  for (Eigen::Index i = 0; i < n; ++i) phases[i] = std::arg(chosen[i]);
  return BeamDirection{PhaseVector{phases, 1.0}, gap, ambiguous};
}

}  // namespace wetplan
