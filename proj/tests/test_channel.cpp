#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "wetplan/channel.hpp"

using namespace wetplan;
using Catch::Approx;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("array geometry must be square", "[channel]") {
  const ArrayGeometry g = ArrayGeometry::square(16);
  REQUIRE(g.n_antennas == 16);
  REQUIRE(g.side == 4);
  REQUIRE_THROWS_AS(ArrayGeometry::square(15), ConfigError);
  REQUIRE_THROWS_AS(ArrayGeometry::square(0), ConfigError);
}

TEST_CASE("path loss", "[channel]") {
  REQUIRE(path_loss(1.0) == Approx(0.025118864315095794).epsilon(1e-12));
  REQUIRE(path_loss(5.0) == Approx(3.256724252295233e-4).epsilon(1e-12));
  REQUIRE(path_loss(10.0) == Approx(5.01187233627272e-5).epsilon(1e-12));
  REQUIRE_THROWS_AS(path_loss(0.0), DomainError);
  REQUIRE_THROWS_AS(path_loss(-2.0), DomainError);
}

TEST_CASE("angles from position", "[channel]") {
  const Angles a1 = angles_from_position({0.0, 0.0, 1.0});
  REQUIRE(a1.elevation_rad == Approx(0.0).margin(1e-15));
  REQUIRE(a1.azimuth_rad == Approx(0.0).margin(1e-15));
  const Angles a2 = angles_from_position({1.0, 0.0, 0.0});
  REQUIRE(a2.elevation_rad == Approx(kPi / 2).epsilon(1e-12));
  REQUIRE(a2.azimuth_rad == Approx(0.0).margin(1e-15));
  const Angles a3 = angles_from_position({0.0, -5.0, 0.0});
  REQUIRE(a3.elevation_rad == Approx(kPi / 2).epsilon(1e-12));
  REQUIRE(a3.azimuth_rad == Approx(-kPi / 2).epsilon(1e-12));
  REQUIRE_THROWS_AS(angles_from_position({0.0, 0.0, 0.0}), DomainError);
}

TEST_CASE("line-of-sight steering vector", "[channel]") {
  // sin(phi) = 0 and cos(theta) = 0 kill both phase ramps.
  const Eigen::VectorXcd flat = los_component(kPi / 2, 0.0, ArrayGeometry::square(16));
  for (int n = 0; n < flat.size(); ++n) {
    REQUIRE(flat[n].real() == Approx(1.0).epsilon(1e-12));
    REQUIRE(flat[n].imag() == Approx(0.0).margin(1e-12));
  }

  // 2x2 case by hand: horizontal ramp pi, vertical ramp 0.
  const Eigen::VectorXcd h4 = los_component(kPi / 2, kPi / 2, ArrayGeometry::square(4));
  REQUIRE(h4[0].real() == Approx(1.0));
  REQUIRE(h4[1].real() == Approx(1.0));
  REQUIRE(h4[2].real() == Approx(-1.0));
  REQUIRE(h4[3].real() == Approx(-1.0));

  const Eigen::VectorXcd h = los_component(0.7, -1.3, ArrayGeometry::square(25));
  REQUIRE(h.size() == 25);
  for (int n = 0; n < h.size(); ++n) REQUIRE(std::abs(h[n]) == Approx(1.0).epsilon(1e-12));

  // Kronecker order: the horizontal component indexes the outer blocks.
  const ArrayGeometry g = ArrayGeometry::square(16);
  const double theta = 1.1, phi = 0.4;
  const Eigen::VectorXcd k = los_component(theta, phi, g);
  for (int i = 0; i < g.side; ++i) {
    for (int j = 0; j < g.side; ++j) {
      const std::complex<double> expected =
          std::polar(1.0, kPi * std::sin(theta) * std::sin(phi) * i) *
          std::polar(1.0, kPi * std::cos(theta) * j);
      REQUIRE(std::abs(k[i * g.side + j] - expected) < 1e-12);
    }
  }
}

TEST_CASE("rician sampling normalization", "[channel]") {
  const ArrayGeometry geom = ArrayGeometry::square(16);
  const DevicePlacement dev{Eigen::Vector3d(5.0, 0.0, -5.0)};
  const double beta = path_loss(dev.distance_m());

  SECTION("los limit") {
    auto rng = substream_engine(7, 0, 0);
    const ChannelRealization c = sample_channel(geom, dev, 1e12, rng);
    for (int n = 0; n < c.h.size(); ++n)
      REQUIRE(std::abs(c.h[n]) == Approx(std::sqrt(beta)).epsilon(1e-4));
  }

  SECTION("mean power matches the path loss") {
    for (double kappa : {0.0, 10.0}) {
      auto rng = substream_engine(11, 0, 0);
      double sum = 0.0;
      const int draws = 100000;
      for (int i = 0; i < draws; ++i) {
        const ChannelRealization c = sample_channel(geom, dev, kappa, rng);
        sum += c.h.squaredNorm();
      }
      const double mean_entry_power = sum / (static_cast<double>(draws) * geom.n_antennas);
      REQUIRE(mean_entry_power == Approx(beta).epsilon(0.02));
    }
  }

  SECTION("negative rician factor") {
    auto rng = substream_engine(1, 0, 0);
    REQUIRE_THROWS_AS(sample_channel(geom, dev, -0.5, rng), DomainError);
  }
}

TEST_CASE("substreams are deterministic and distinct", "[channel]") {
  const ArrayGeometry geom = ArrayGeometry::square(4);
  const DevicePlacement dev{Eigen::Vector3d(0.0, -5.0, 0.0)};
  auto rng_a = substream_engine(42, 3, 1);
  auto rng_b = substream_engine(42, 3, 1);
  const ChannelRealization a = sample_channel(geom, dev, 10.0, rng_a);
  const ChannelRealization b = sample_channel(geom, dev, 10.0, rng_b);
  for (int n = 0; n < a.h.size(); ++n) REQUIRE(a.h[n] == b.h[n]);

  REQUIRE(substream_seed(42, 3, 1) != substream_seed(42, 3, 2));
  REQUIRE(substream_seed(42, 3, 1) != substream_seed(42, 4, 1));
  REQUIRE(substream_seed(42, 3, 1) != substream_seed(43, 3, 1));
}
