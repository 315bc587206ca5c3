#include <catch2/catch_amalgamated.hpp>

#include "bevdrive/core/random.hpp"
#include "bevdrive/geometry.hpp"
#include "oracles/collision_oracle.hpp"

using namespace bevdrive;

TEST_CASE("pose transforms round trip") {
  Pose2 pose{{3.0, -2.0}, 0.7};
  const Vec2 w{5.5, 1.25};
  const Vec2 l = pose.toLocal(w);
  const Vec2 back = pose.toWorld(l);
  CHECK(back.x == Catch::Approx(w.x));
  CHECK(back.y == Catch::Approx(w.y));
}

TEST_CASE("rotation convention: pi/2 maps (1,0) to (0,1)") {
  const Vec2 r = Vec2{1, 0}.rotated(M_PI_2);
  CHECK(r.x == Catch::Approx(0.0).margin(1e-12));
  CHECK(r.y == Catch::Approx(1.0));
}

TEST_CASE("SAT overlap agrees with the exact corner/edge oracle") {
  Rng rng(400);
  int overlaps = 0;
  for (int i = 0; i < 3000; ++i) {
    OrientedRect a{{{rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(-M_PI, M_PI)},
                   rng.uniform(0.4, 3.0), rng.uniform(0.3, 1.5)};
    OrientedRect b{{{rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(-M_PI, M_PI)},
                   rng.uniform(0.4, 3.0), rng.uniform(0.3, 1.5)};
    const bool sat = rectsOverlap(a, b);
    const bool exact = oracles::rectsOverlapExact(a, b);
    REQUIRE(sat == exact);
    overlaps += sat;
  }
  CHECK(overlaps > 100);  // both branches exercised
  CHECK(overlaps < 2900);
}

TEST_CASE("ray-segment intersection") {
  auto t = raySegment({0, 0}, {1, 0}, {{10, -5}, {10, 5}});
  REQUIRE(t.has_value());
  CHECK(*t == Catch::Approx(10.0));
  CHECK(!raySegment({0, 0}, {-1, 0}, {{10, -5}, {10, 5}}).has_value());
  CHECK(!raySegment({0, 0}, {0, 1}, {{10, -5}, {10, 5}}).has_value());
}

TEST_CASE("polyline arc length, sampling and projection") {
  Polyline p({{0, 0}, {10, 0}, {10, 10}});
  CHECK(p.length() == Catch::Approx(20.0));
  const Vec2 mid = p.sample(15.0);
  CHECK(mid.x == Catch::Approx(10.0));
  CHECK(mid.y == Catch::Approx(5.0));
  CHECK(p.project({4.0, 3.0}) == Catch::Approx(4.0));
  CHECK(p.project({12.0, 7.0}) == Catch::Approx(17.0));
  const Vec2 tan = p.tangent(15.0);
  CHECK(tan.y == Catch::Approx(1.0));
}

TEST_CASE("angle wrap") {
  CHECK(wrapAngle(3 * M_PI) == Catch::Approx(M_PI));
  CHECK(wrapAngle(-3 * M_PI) == Catch::Approx(M_PI));
  CHECK(wrapAngle(0.3) == Catch::Approx(0.3));
}
