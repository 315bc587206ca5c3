#include <catch2/catch_amalgamated.hpp>

#include "bevdrive/control/brake_net.hpp"
#include "bevdrive/control/controller.hpp"
#include "bevdrive/microworld/recorder.hpp"
#include "oracles/collision_oracle.hpp"

using namespace bevdrive;

namespace {

std::vector<Vec2> straightPlan(double gap, int n = 10, double heading = 0.0) {
  std::vector<Vec2> tau;
  for (int k = 1; k <= n; ++k)
    tau.push_back(Vec2{gap * k, 0.0}.rotated(heading));
  return tau;
}

}  // namespace

TEST_CASE("lateral control: aim point straight ahead gives zero steer") {
  PidState pid(1.0, 0.5, 0.2);
  auto tau = straightPlan(1.0);
  CHECK(lateralControl(tau, pid, 0.1) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("lateral control: aim point 90 degrees left saturates positive") {
  // Hand evaluation: e = pi/2; fresh PID gives Kp*e + Ki*e*dt = 1.649...,
  // clipped to 1 with the positive-steers-left convention.
  PidState pid(1.0, 0.5, 0.2);
  std::vector<Vec2> tau;
  for (int k = 1; k <= 10; ++k) tau.push_back({0.0, 0.5 * k});
  const double steer = lateralControl(tau, pid, 0.1);
  CHECK(steer == Catch::Approx(1.0));
  CHECK(steer > 0.0);

  // Unclipped PID value check on the raw law.
  PidState fresh(1.0, 0.5, 0.2);
  const double raw = fresh.update(M_PI_2, 0.1);
  CHECK(raw == Catch::Approx(1.0 * M_PI_2 + 0.5 * M_PI_2 * 0.1));
}

TEST_CASE("lateral control: degenerate aim point steers zero") {
  PidState pid(1.0, 0.5, 0.2);
  std::vector<Vec2> tau(10, Vec2{0.0, 0.0});
  CHECK(lateralControl(tau, pid, 0.1) == 0.0);
  CHECK_THROWS(lateralControl(std::vector<Vec2>{{1, 0}}, pid, 0.1));
}

TEST_CASE("PID: integral growth and windup clamp") {
  PidState pid(0.0, 0.5, 0.0, 0.4);
  const double e = 1.0, dt = 0.1;
  double prev = 0.0;
  for (int i = 1; i <= 3; ++i) {
    const double out = pid.update(e, dt);
    CHECK(out - prev == Catch::Approx(0.5 * e * dt));
    prev = out;
  }
  for (int i = 0; i < 20; ++i) pid.update(e, dt);
  CHECK(pid.integral == Catch::Approx(0.4));  // clamped
}

TEST_CASE("PID linearity: scaling the error sequence scales the output") {
  Rng rng(8);
  std::vector<double> errors;
  for (int i = 0; i < 12; ++i) errors.push_back(rng.uniform(-0.4, 0.4));
  const double alpha = 2.5;
  PidState a(1.0, 0.5, 0.2, 1e9), b(1.0, 0.5, 0.2, 1e9);
  for (double e : errors) {
    const double ua = a.update(e, 0.1);
    const double ub = b.update(alpha * e, 0.1);
    CHECK(ub == Catch::Approx(alpha * ua).margin(1e-12));
  }
}

TEST_CASE("longitudinal control: target from gaps, coast, hard braking") {
  ControlConfig cfg;
  auto tau = straightPlan(1.0);
  CHECK(targetSpeedFromPlan(tau, cfg.waypoint_dt) == Catch::Approx(2.0));

  PidState pid(5.0, 0.5, 1.0);
  auto [thr, brk] = longitudinalControl(tau, 2.0, pid, 0.1, cfg);
  CHECK(thr == Catch::Approx(0.0).margin(1e-9));
  CHECK(brk == Catch::Approx(0.0).margin(1e-9));

  PidState pid2(5.0, 0.5, 1.0);
  std::vector<Vec2> stationary(10, Vec2{0.1, 0.0});
  auto [thr2, brk2] = longitudinalControl(stationary, 5.0, pid2, 0.1, cfg);
  CHECK(thr2 == 0.0);
  CHECK(brk2 > 0.0);
}

TEST_CASE("brake override rules") {
  VehicleControl c{0.1, 0.6, 0.2};
  auto o = brakeOverride(c, 0.9);
  CHECK(o.brake == Catch::Approx(0.9));
  CHECK(o.throttle == 0.0);

  auto unchanged = brakeOverride(c, 0.0);
  CHECK(unchanged.brake == Catch::Approx(0.2));
  CHECK(unchanged.throttle == Catch::Approx(0.6));

  VehicleControl hard{0.0, 0.0, 0.8};
  CHECK(brakeOverride(hard, 0.3).brake == Catch::Approx(0.8));

  // Override monotonicity: final brake non-decreasing in the score.
  double prev = -1.0;
  for (double s = 0.0; s <= 1.0; s += 0.05) {
    const double b = brakeOverride(c, s).brake;
    CHECK(b >= prev);
    prev = b;
  }
}

TEST_CASE("hard stop emits steer-held, zero throttle, full brake") {
  VehicleControl c{-0.4, 0.7, 0.1};
  auto h = hardStop(c);
  CHECK(h.steer == Catch::Approx(-0.4));
  CHECK(h.throttle == 0.0);
  CHECK(h.brake == 1.0);
}

namespace {

GateParticipant crossingParticipant(double lateral_offset) {
  // A vehicle to the ego's right heading +y, crossing the ego path.
  GateParticipant gp;
  gp.detection.pose = {{5.0 + lateral_offset, -5.0}, M_PI_2};
  gp.detection.extent = {2.25, 1.0};
  gp.detection.score = 0.9;
  gp.plans.likelihood.fill(0.0);
  gp.plans.likelihood[static_cast<int>(Command::kGoStraight)] = 1.0;
  for (int c = 0; c < kNumCommands; ++c)
    gp.plans.trajectories[c] = straightPlan(1.0);  // local +x = world +y
  return gp;
}

}  // namespace

TEST_CASE("collision gate: crossing, offset, threshold") {
  ControlConfig cfg;
  const Vec2 ego_extent{2.25, 1.0};
  auto ego_tau = straightPlan(1.0);  // ego heading +x at 2 m/s

  SECTION("synchronized crossing forces a hard stop") {
    // Other vehicle arrives at (5,0) at the same shared timestep as the ego.
    auto gp = crossingParticipant(0.0);
    CHECK(collisionGate(ego_tau, ego_extent, {gp}, cfg));
    // Dense oracle confirms an overlapping timestep exists.
    bool oracle_hit = false;
    for (std::size_t k = 0; k < ego_tau.size(); ++k) {
      OrientedRect a{{ego_tau[k], 0.0}, ego_extent.x + cfg.footprint_margin,
                     ego_extent.y + cfg.footprint_margin};
      const Vec2 wp = gp.detection.pose.toWorld(gp.plans.trajectories[2][k]);
      OrientedRect b{{wp, M_PI_2}, gp.detection.extent.x + cfg.footprint_margin,
                     gp.detection.extent.y + cfg.footprint_margin};
      oracle_hit = oracle_hit || oracles::rectsOverlapDense(a, b, 100);
    }
    CHECK(oracle_hit);
  }

  SECTION("parallel traffic 10 m to the side never triggers") {
    GateParticipant gp;
    gp.detection.pose = {{0.0, 10.0}, 0.0};
    gp.detection.extent = {2.25, 1.0};
    gp.plans.likelihood.fill(1.0 / kNumCommands);
    for (int c = 0; c < kNumCommands; ++c) gp.plans.trajectories[c] = straightPlan(1.0);
    CHECK(!collisionGate(ego_tau, ego_extent, {gp}, cfg));
  }

  SECTION("threshold 1.0 disqualifies every plan") {
    auto gp = crossingParticipant(0.0);
    ControlConfig strict = cfg;
    strict.likelihood_threshold = 1.0;
    CHECK(!collisionGate(ego_tau, ego_extent, {gp}, strict));
  }

  SECTION("ego's own detection is skipped") {
    auto gp = crossingParticipant(0.0);
    gp.detection.is_ego = true;
    CHECK(!collisionGate(ego_tau, ego_extent, {gp}, cfg));
  }
}

TEST_CASE("collision gate agrees exactly with the per-timestep overlap oracle") {
  Rng rng(99);
  ControlConfig cfg;
  const Vec2 ego_extent{2.25, 1.0};
  int trips = 0;
  for (int trial = 0; trial < 250; ++trial) {
    // Random ego plan and one random participant.
    std::vector<Vec2> ego_tau;
    Vec2 p{0, 0};
    double yaw = rng.uniform(-0.3, 0.3);
    for (int k = 0; k < 10; ++k) {
      yaw += rng.uniform(-0.15, 0.15);
      p = p + Vec2{rng.uniform(0.3, 1.8), 0.0}.rotated(yaw);
      ego_tau.push_back(p);
    }
    GateParticipant gp;
    gp.detection.pose = {{rng.uniform(-2.0, 14.0), rng.uniform(-8.0, 8.0)},
                         rng.uniform(-M_PI, M_PI)};
    gp.detection.extent = {rng.uniform(1.5, 2.5), rng.uniform(0.8, 1.2)};
    for (int c = 0; c < kNumCommands; ++c) {
      std::vector<Vec2> t;
      Vec2 q{0, 0};
      double a = rng.uniform(-0.3, 0.3);
      for (int k = 0; k < 10; ++k) {
        a += rng.uniform(-0.2, 0.2);
        q = q + Vec2{rng.uniform(0.2, 1.6), 0.0}.rotated(a);
        t.push_back(q);
      }
      gp.plans.trajectories[c] = t;
      gp.plans.likelihood[c] = rng.uniform(0.0, 0.4);
    }

    const bool gate = collisionGate(ego_tau, ego_extent, {gp}, cfg);

    // Independent oracle: corner/edge-exact overlap at each shared timestep
    // over the qualifying plans.
    bool oracle = false;
    for (int c = 0; c < kNumCommands && !oracle; ++c) {
      if (gp.plans.likelihood[c] <= cfg.likelihood_threshold) continue;
      const auto& their = gp.plans.trajectories[c];
      for (std::size_t k = 0; k < 10 && !oracle; ++k) {
        auto head = [&](const std::vector<Vec2>& tr, std::size_t i, double fb) {
          const Vec2 d = i + 1 < tr.size() ? tr[i + 1] - tr[i]
                                           : (i > 0 ? tr[i] - tr[i - 1] : Vec2{});
          return d.norm() < 1e-6 ? fb : std::atan2(d.y, d.x);
        };
        OrientedRect a{{ego_tau[k], head(ego_tau, k, 0.0)},
                       ego_extent.x + cfg.footprint_margin,
                       ego_extent.y + cfg.footprint_margin};
        const Vec2 wp = gp.detection.pose.toWorld(their[k]);
        OrientedRect b{{wp, wrapAngle(head(their, k, 0.0) + gp.detection.pose.yaw)},
                       gp.detection.extent.x + cfg.footprint_margin,
                       gp.detection.extent.y + cfg.footprint_margin};
        oracle = oracles::rectsOverlapExact(a, b);
      }
    }
    REQUIRE(gate == oracle);
    trips += gate;
  }
  CHECK(trips > 10);  // both outcomes exercised
}

TEST_CASE("brake classifier: overfit, range, red-light sensitivity") {
  Rng rng(123);
  const int n = 100;
  Tensor<float> feats({n, kNumPrivFeatures});
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    const bool red = rng.bernoulli(0.4);
    const bool hazard = rng.bernoulli(0.3);
    feats.at(i, kPfLightAhead) = red ? 1.0f : 0.0f;
    feats.at(i, kPfLightDist) = red ? static_cast<float>(rng.uniform(0.05, 0.5)) : 1.0f;
    feats.at(i, kPfLightRed) = red ? 1.0f : 0.0f;
    feats.at(i, kPfHazardAhead) = hazard ? 1.0f : 0.0f;
    feats.at(i, kPfHazardDist) = hazard ? static_cast<float>(rng.uniform(0.05, 0.4)) : 1.0f;
    feats.at(i, kPfLeadSpeed) = hazard ? 0.1f : 0.6f;
    feats.at(i, kPfEgoSpeed) = static_cast<float>(rng.uniform(0.0, 0.8));
    feats.at(i, kPfTtc) = hazard ? 0.15f : 1.0f;
    labels[i] = (red || hazard) ? 1 : 0;
  }

  BrakeNet<float> net(5);
  CHECK_THROWS(net.score(std::vector<float>(kNumPrivFeatures, 0.0f)));
  const double bce = net.fit(feats, labels, 400, 3e-3);
  CHECK(bce < 0.05);

  for (int i = 0; i < n; ++i) {
    std::vector<float> row(kNumPrivFeatures);
    for (int c = 0; c < kNumPrivFeatures; ++c) row[c] = feats.at(i, c);
    const double s = net.score(row);
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }

  // Flipping the red-light feature on a held frame raises the score.
  std::vector<float> clear(kNumPrivFeatures, 0.0f);
  clear[kPfLightDist] = 1.0f;
  clear[kPfHazardDist] = 1.0f;
  clear[kPfLeadSpeed] = 0.6f;
  clear[kPfEgoSpeed] = 0.5f;
  clear[kPfTtc] = 1.0f;
  std::vector<float> red = clear;
  red[kPfLightAhead] = 1.0f;
  red[kPfLightRed] = 1.0f;
  red[kPfLightDist] = 0.2f;
  CHECK(net.score(red) > net.score(clear));
}
