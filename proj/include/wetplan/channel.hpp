#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <random>

#include "wetplan/errors.hpp"
#include "wetplan/rng.hpp"

namespace wetplan {

/// Uniform rectangular array with sqrt(N) antennas per dimension and
/// half-wavelength spacing.
struct ArrayGeometry {
  int n_antennas = 0;
  int side = 0;

  static ArrayGeometry square(int n_antennas) {
    if (n_antennas <= 0)
      throw ConfigError("n_antennas: must be positive");
    const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n_antennas))));
    if (side * side != n_antennas)
      throw ConfigError("n_antennas: must be a perfect square, got " +
                        std::to_string(n_antennas));
    return ArrayGeometry{n_antennas, side};
  }
};

struct Angles {
  double elevation_rad = 0.0;  // polar angle from the +z array normal
  double azimuth_rad = 0.0;    // from +x in the x-y plane
};

/// Device location relative to the array at the origin.
struct DevicePlacement {
  Eigen::Vector3d position_m = Eigen::Vector3d::Zero();

  double distance_m() const { return position_m.norm(); }
};

/// Quasi-static channel draw for one device; amplitudes embed the path loss.
struct ChannelRealization {
  Eigen::VectorXcd h;
};

/// Large-scale gain 10^-1.6 * d^-2.7.
inline double path_loss(double distance_m) {
  if (!(distance_m > 0.0)) throw DomainError("path_loss: distance must be positive");
  return std::pow(10.0, -1.6) * std::pow(distance_m, -2.7);
}

inline Angles angles_from_position(const Eigen::Vector3d& position_m) {
  const double r = position_m.norm();
  if (!(r > 0.0)) throw DomainError("angles_from_position: position at the array origin");
  return Angles{std::acos(position_m.z() / r), std::atan2(position_m.y(), position_m.x())};
}

/// Line-of-sight steering vector of the URA as the Kronecker product
/// h_horizontal (x) h_vertical, with phase ramps pi*k*sin(theta)*sin(phi)
/// and pi*k*cos(theta).
inline Eigen::VectorXcd los_component(double elevation_rad, double azimuth_rad,
                                      const ArrayGeometry& geom) {
  constexpr double kPi = 3.14159265358979323846;
  const double ramp_h = kPi * std::sin(elevation_rad) * std::sin(azimuth_rad);
  const double ramp_v = kPi * std::cos(elevation_rad);
  Eigen::VectorXcd h(geom.n_antennas);
  for (int i = 0; i < geom.side; ++i)
    for (int j = 0; j < geom.side; ++j)
      h[i * geom.side + j] = std::polar(1.0, ramp_h * i + ramp_v * j);
  return h;
}

/// Rician draw
///   h = sqrt(kappa*beta/(1+kappa)) * h_los + sqrt(beta/(2(1+kappa))) * h_nlos,
/// where h_nlos entries have independent standard-normal real and imaginary
/// parts, so every entry satisfies E[|h_n|^2] = beta.
inline ChannelRealization sample_channel(const ArrayGeometry& geom,
                                         const DevicePlacement& placement, double kappa,
                                         std::mt19937_64& rng) {
  if (kappa < 0.0) throw DomainError("sample_channel: kappa must be non-negative");
  const double beta = path_loss(placement.distance_m());
  const Angles ang = angles_from_position(placement.position_m);
  const Eigen::VectorXcd los = los_component(ang.elevation_rad, ang.azimuth_rad, geom);
  const double los_scale = std::sqrt(kappa * beta / (1.0 + kappa));
  const double nlos_scale = std::sqrt(beta / (2.0 * (1.0 + kappa)));
  std::normal_distribution<double> unit_normal(0.0, 1.0);
  ChannelRealization out;
  out.h.resize(geom.n_antennas);
  for (int n = 0; n < geom.n_antennas; ++n) {
    const double re = unit_normal(rng);
    const double im = unit_normal(rng);
    out.h[n] = los_scale * los[n] + nlos_scale * std::complex<double>(re, im);
  }
  return out;
}

}  // namespace wetplan
