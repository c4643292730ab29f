#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "wetplan/scheduler.hpp"

using namespace wetplan;
using Catch::Approx;

namespace {

constexpr double kMaxEffInputW = 0.002728304884169584;
constexpr double kFitAtMaxEffW = 0.001779806138204434;
constexpr double kFitAtSatW = 0.008022774329026922;

const EhModel& model() {
  static const EhModel m = EhModel::from_fit();
  return m;
}

// Mutually orthogonal channels with unit-modulus structure (DFT rows), so
// cross-slot incident powers vanish identically.
std::vector<Eigen::VectorXcd> dft_channels(const std::vector<double>& scales) {
  constexpr double kTwoPi = 6.283185307179586476925;
  const int n = 4;
  std::vector<Eigen::VectorXcd> out;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    Eigen::VectorXcd h(n);
    for (int k = 0; k < n; ++k)
      h[k] = scales[s] * std::polar(1.0, -kTwoPi * static_cast<double>(s * k) / n);
    out.push_back(h);
  }
  return out;
}

struct RandomInstance {
  std::vector<Eigen::VectorXcd> channels;
  std::vector<double> demands;
  double tau_max;
};

RandomInstance random_instance(std::mt19937_64& rng, int s_count, int n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomInstance inst;
  for (int s = 0; s < s_count; ++s) {
    const double scale = std::pow(10.0, -1.0 - 1.5 * unit(rng));
    inst.channels.push_back(testutil::random_channel(rng, n, scale));
    inst.demands.push_back(1e-3 + 5e-3 * unit(rng));
  }
  inst.tau_max =
      feasibility_threshold(inst.demands, kFitAtSatW) * (1.05 + 2.5 * unit(rng));
  return inst;
}

}  // namespace

TEST_CASE("pb energy of a plan", "[scheduler]") {
  ChargingPlan empty;
  REQUIRE(pb_energy(empty) == 0.0);

  ChargingPlan one;
  Slot slot;
  slot.device = 0;
  slot.beam = PhaseVector{Eigen::VectorXd::Zero(4), 2.0};
  slot.duration_s = 3.0;
  one.slots.push_back(slot);
  REQUIRE(pb_energy(one) == Approx(6.0).epsilon(1e-15));
}

TEST_CASE("realized harvest", "[scheduler]") {
  const EhModel& eh = model();

  SECTION("orthogonal time division has no cross terms") {
    const auto channels = dft_channels({0.06, 0.08, 0.05});
    const std::vector<double> demands = {4e-3, 4e-3, 4e-3};
    const ChargingPlan plan = plan_order_agnostic(channels, demands, 8.0, eh);
    const HarvestReport rep = realized_harvest(plan, channels, eh);
    for (std::size_t s = 0; s < channels.size(); ++s) {
      const double own = plan.slots[s].duration_s *
                         eh.eval_measured(incident_power(
                             channels[s], plan.slots[s].beam.realized_weights()));
      REQUIRE(rep.harvested_j[s] == Approx(own).epsilon(1e-12));
    }
    REQUIRE(rep.feasible);
  }

  SECTION("single device charged at the max-efficiency point") {
    std::mt19937_64 rng(3);
    const Eigen::VectorXcd h = testutil::random_channel(rng, 16, 0.02);
    const double gain = mrt_gain(h);
    ChargingPlan plan;
    plan.strategy = Strategy::kOrderAgnostic;
    plan.demands_j = {4e-3};
    plan.tau_max_s = 10.0;
    Slot slot;
    slot.device = 0;
    slot.beam = mrt_phases(h).with_power(kMaxEffInputW / gain);
    slot.duration_s = 4e-3 / kFitAtMaxEffW;
    plan.slots.push_back(slot);
    const HarvestReport rep = realized_harvest(plan, {h}, model());
    REQUIRE(rep.harvested_j[0] == Approx(4e-3).epsilon(1e-6));
    REQUIRE(rep.pb_energy_j == Approx(slot.beam.power_w * slot.duration_s).epsilon(1e-12));
  }

  SECTION("all-at-once integrates one slot for every device") {
    const auto channels = dft_channels({0.05, 0.05});
    ChargingPlan plan;
    plan.strategy = Strategy::kAllAtOnce;
    plan.demands_j = {1e-3, 1e-3};
    plan.tau_max_s = 4.0;
    Slot slot;
    slot.device = -1;
    slot.beam = mrt_phases(channels[0]).with_power(1.0);
    slot.duration_s = 2.0;
    plan.slots.push_back(slot);
    const HarvestReport rep = realized_harvest(plan, channels, model());
    const Eigen::VectorXcd w = slot.beam.realized_weights();
    for (int s = 0; s < 2; ++s)
      REQUIRE(rep.harvested_j[s] ==
              Approx(2.0 * model().eval_measured(incident_power(channels[s], w)))
                  .margin(1e-15));
  }

  SECTION("device-set mismatch") {
    ChargingPlan plan;
    plan.demands_j = {1e-3};
    REQUIRE_THROWS_AS(realized_harvest(plan, dft_channels({0.1, 0.1}), model()), DomainError);
  }
}

TEST_CASE("most polluting device", "[scheduler]") {
  const EhModel& eh = model();

  SECTION("orthogonal channels tie to the lowest id") {
    const auto channels = dft_channels({0.06, 0.06, 0.06});
    std::vector<Slot> slots(3);
    for (int s = 0; s < 3; ++s) {
      slots[s].device = s;
      slots[s].beam = mrt_phases(channels[s]).with_power(2.0);
      slots[s].duration_s = 1.0;
    }
    REQUIRE(most_polluting(slots, channels, eh) == 0);
  }

  SECTION("symmetric pair ties to the lowest id") {
    Eigen::VectorXcd h1(4), h2(4);
    h1 << 0.05, 0.025, 0.05, 0.05;
    h2 << 0.025, 0.05, 0.05, 0.05;
    std::vector<Slot> slots(2);
    for (int s = 0; s < 2; ++s) {
      slots[s].device = s;
      slots[s].beam = mrt_phases(s == 0 ? h1 : h2).with_power(3.0);
      slots[s].duration_s = 2.0;
    }
    REQUIRE(most_polluting(slots, {h1, h2}, eh) == 0);
  }

  SECTION("matches direct enumeration") {
    std::mt19937_64 rng(57);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<Eigen::VectorXcd> channels;
      std::vector<Slot> slots;
      for (int s = 0; s < 3; ++s) {
        channels.push_back(testutil::random_channel(rng, 4, 0.1));
        Slot slot;
        slot.device = s;
        slot.beam = mrt_phases(channels.back()).with_power(0.5 + 2.0 * unit(rng));
        slot.duration_s = 0.5 + 3.0 * unit(rng);
        slots.push_back(slot);
      }
      int expected = -1;
      double best = -1.0;
      for (int cand = 0; cand < 3; ++cand) {
        double pollution = 0.0;
        for (int other = 0; other < 3; ++other) {
          if (other == cand) continue;
          pollution += slots[cand].duration_s *
                       eh.eval_measured(incident_power(
                           channels[other], slots[cand].beam.realized_weights()));
        }
        if (pollution > best) {
          best = pollution;
          expected = cand;
        }
      }
      REQUIRE(most_polluting(slots, channels, eh) == expected);
    }
  }

  SECTION("needs two devices") {
    const auto channels = dft_channels({0.1});
    std::vector<Slot> slots(1);
    slots[0].device = 0;
    slots[0].beam = mrt_phases(channels[0]);
    REQUIRE_THROWS_AS(most_polluting(slots, channels, model()), DomainError);
  }
}

TEST_CASE("order-agnostic plan", "[scheduler]") {
  const EhModel& eh = model();
  std::mt19937_64 rng(71);
  std::vector<Eigen::VectorXcd> channels;
  for (int s = 0; s < 3; ++s) channels.push_back(testutil::random_channel(rng, 16, 0.02));
  const std::vector<double> demands = {4e-3, 4e-3, 4e-3};

  const ChargingPlan plan = plan_order_agnostic(channels, demands, 8.0, eh);
  REQUIRE(plan.slots.size() == 3);
  REQUIRE(plan.total_duration_s() <= 8.0 + 1e-9);
  for (std::size_t s = 0; s < channels.size(); ++s) {
    REQUIRE(plan.slots[s].device == static_cast<int>(s));
    const double incident =
        incident_power(channels[s], plan.slots[s].beam.realized_weights());
    REQUIRE(incident >= kMaxEffInputW * (1.0 - 1e-9));
    REQUIRE(incident <= eh.saturation_input_w() * (1.0 + 1e-9));
    const double own = plan.slots[s].duration_s * eh.eval_measured(incident);
    REQUIRE(own >= demands[s] - 1e-9);
  }

  REQUIRE_THROWS_AS(plan_order_agnostic(channels, demands, 0.5, eh), InfeasibleError);
}

TEST_CASE("order-aware plan", "[scheduler]") {
  const EhModel& eh = model();

  SECTION("orthogonal channels reproduce the order-agnostic allocation") {
    const auto channels = dft_channels({0.06, 0.08, 0.05});
    const std::vector<double> demands = {4e-3, 4e-3, 4e-3};
    const ChargingPlan agnostic = plan_order_agnostic(channels, demands, 8.0, eh);
    const ChargingPlan aware = plan_order_aware(channels, demands, 8.0, eh);
    REQUIRE(aware.slots.size() == 3);
    for (const auto& slot : aware.slots) {
      const auto& base = agnostic.slots[static_cast<std::size_t>(slot.device)];
      REQUIRE(slot.beam.power_w == Approx(base.beam.power_w).epsilon(1e-15));
      REQUIRE(slot.duration_s == Approx(base.duration_s).epsilon(1e-15));
      REQUIRE_FALSE(slot.pre_charged);
    }
    REQUIRE(pb_energy(aware) == Approx(pb_energy(agnostic)).epsilon(1e-15));
  }

  SECTION("identical co-located devices are pre-charged by the first slot") {
    std::mt19937_64 rng(83);
    const Eigen::VectorXcd h = testutil::random_channel(rng, 16, 0.05);
    const std::vector<Eigen::VectorXcd> channels = {h, h, h};
    const std::vector<double> demands = {4e-3, 4e-3, 4e-3};
    const ChargingPlan agnostic = plan_order_agnostic(channels, demands, 8.0, eh);
    const ChargingPlan aware = plan_order_aware(channels, demands, 8.0, eh);
    REQUIRE(pb_energy(aware) < pb_energy(agnostic));
    int pre_charged = 0;
    for (const auto& slot : aware.slots) pre_charged += slot.pre_charged ? 1 : 0;
    REQUIRE(pre_charged == 2);
    const HarvestReport rep = realized_harvest(aware, channels, eh);
    REQUIRE(rep.feasible);
  }

  SECTION("dominance and demand satisfaction on random instances") {
    std::mt19937_64 rng(97);
    for (int rep = 0; rep < 150; ++rep) {
      const RandomInstance inst = random_instance(rng, 2 + rep % 4, rep % 2 == 0 ? 4 : 16);
      const ChargingPlan agnostic =
          plan_order_agnostic(inst.channels, inst.demands, inst.tau_max, eh);
      const ChargingPlan aware = plan_order_aware(inst.channels, inst.demands, inst.tau_max, eh);
      REQUIRE(pb_energy(aware) <= pb_energy(agnostic) + 1e-9);
      REQUIRE(aware.total_duration_s() <= inst.tau_max + 1e-9);
      REQUIRE(realized_harvest(agnostic, inst.channels, eh).feasible);
      REQUIRE(realized_harvest(aware, inst.channels, eh).feasible);
    }
  }
}

TEST_CASE("all-at-once plan", "[scheduler]") {
  const EhModel& eh = model();

  SECTION("single device recovers the dedicated-beam optimum") {
    std::mt19937_64 rng(113);
    const Eigen::VectorXcd h = testutil::random_channel(rng, 16, 0.03);
    const double gain = mrt_gain(h);
    const ChargingPlan plan = plan_all_at_once({h}, {4e-3}, 60.0, eh);
    REQUIRE(plan.slots.size() == 1);
    const double incident = incident_power(h, plan.slots[0].beam.realized_weights());
    REQUIRE(incident == Approx(kMaxEffInputW).epsilon(1e-3));
    const Allocation oracle =
        single_device_oracle({gain, 4e-3}, eh.coefficients(), eh.max_efficiency_point(),
                             eh.saturation_input_w(), 60.0);
    REQUIRE(pb_energy(plan) == Approx(oracle.pb_energy_j()).epsilon(1e-3));
  }

  SECTION("deadline at the single-slot bound pins the worst device at saturation") {
    std::mt19937_64 rng(127);
    const Eigen::VectorXcd h = testutil::random_channel(rng, 16, 0.03);
    const double tau_lo = 4e-3 / eh.saturation_output_w();
    const ChargingPlan plan = plan_all_at_once({h}, {4e-3}, tau_lo, eh);
    REQUIRE(plan.slots[0].duration_s == Approx(tau_lo).epsilon(1e-12));
    const double incident = incident_power(h, plan.slots[0].beam.realized_weights());
    REQUIRE(incident == Approx(eh.saturation_input_w()).epsilon(1e-9));
    REQUIRE_THROWS_AS(plan_all_at_once({h}, {4e-3}, 0.9 * tau_lo, eh), InfeasibleError);
  }

  SECTION("demands are met for multi-device instances") {
    std::mt19937_64 rng(131);
    for (int rep = 0; rep < 25; ++rep) {
      const RandomInstance inst = random_instance(rng, 2 + rep % 3, 16);
      const ChargingPlan plan =
          plan_all_at_once(inst.channels, inst.demands, inst.tau_max, eh);
      REQUIRE(plan.slots.size() == 1);
      REQUIRE(plan.total_duration_s() <= inst.tau_max + 1e-9);
      REQUIRE(realized_harvest(plan, inst.channels, eh).feasible);
    }
  }
}

TEST_CASE("flat-regime transmit energy closed form", "[scheduler]") {
  const EhModel& eh = model();
  std::mt19937_64 rng(139);
  std::vector<Eigen::VectorXcd> channels;
  for (int s = 0; s < 3; ++s) channels.push_back(testutil::random_channel(rng, 16, 0.02));
  const std::vector<double> demands = {4e-3, 4e-3, 4e-3};
  double flat_deadline = 0.0;
  for (double e : demands) flat_deadline += e / kFitAtMaxEffW;
  const ChargingPlan plan = plan_order_agnostic(channels, demands, 2.0 * flat_deadline, eh);
  double expected = 0.0;
  for (std::size_t s = 0; s < channels.size(); ++s)
    expected += demands[s] * kMaxEffInputW / (kFitAtMaxEffW * mrt_gain(channels[s]));
  REQUIRE(pb_energy(plan) == Approx(expected).epsilon(1e-4));
}
