#include <catch2/catch_amalgamated.hpp>

#include "bevdrive/perception/augment.hpp"
#include "bevdrive/perception/loss.hpp"
#include "oracles/gradcheck.hpp"

using namespace bevdrive;
using ad::Var;

namespace {

GridSpec deskGrid() { return {}; }

GridSpec tinyGrid() {
  GridSpec g;
  g.x_min = -8;
  g.x_max = 8;
  g.y_min = -8;
  g.y_max = 8;
  g.pillar = 0.5;
  g.channels = 64;
  return g;
}

Tensor<float> randomCloud(int n, Rng& rng, double span = 7.0) {
  Tensor<float> pts({n, 4});
  for (int i = 0; i < n; ++i) {
    pts.at(i, 0) = static_cast<float>(rng.uniform(-span, span));
    pts.at(i, 1) = static_cast<float>(rng.uniform(-span, span));
    pts.at(i, 2) = static_cast<float>(rng.uniform(0.0, 2.0));
    pts.at(i, 3) = 1.0f;
  }
  return pts;
}

Tensor<float> onehotScores(int n, int cls) {
  Tensor<float> s({n, 5});
  for (int i = 0; i < n; ++i) s.at(i, cls) = 1.0f;
  return s;
}

}  // namespace

TEST_CASE("point_paint concatenates scores and preserves order") {
  Tensor<float> pts({1, 4}, {1, 2, 0, 1});
  Tensor<float> sc({1, 5}, {0, 1, 0, 0, 0});
  auto painted = pointPaint(pts, sc);
  REQUIRE(painted.shape() == std::vector<int>({1, 9}));
  const float expect[9] = {1, 2, 0, 1, 0, 1, 0, 0, 0};
  for (int i = 0; i < 9; ++i) CHECK(painted[i] == expect[i]);

  auto empty = pointPaint(Tensor<float>({0, 4}), Tensor<float>({0, 5}));
  CHECK(empty.dim(0) == 0);

  Tensor<float> bad({1, 4});
  CHECK_THROWS(pointPaint(bad, Tensor<float>({1, 4})));

  Rng rng(2);
  auto cloud = randomCloud(20, rng);
  auto scores = onehotScores(20, 2);
  auto a = pointPaint(cloud, scores);
  // Permuting inputs permutes outputs identically (row i follows point i).
  Tensor<float> rev({20, 4}), rev_s({20, 5});
  for (int i = 0; i < 20; ++i)
    for (int c = 0; c < 4; ++c) rev.at(i, c) = cloud.at(19 - i, c);
  for (int i = 0; i < 20; ++i)
    for (int c = 0; c < 5; ++c) rev_s.at(i, c) = scores.at(19 - i, c);
  auto b = pointPaint(rev, rev_s);
  for (int i = 0; i < 20; ++i)
    for (int c = 0; c < 9; ++c) CHECK(b.at(i, c) == a.at(19 - i, c));
}

TEST_CASE("pillarize index arithmetic on the desk grid") {
  // row = floor((y+40)/0.5), col = floor((x+10)/0.5) for the desk ranges.
  GridSpec g = deskGrid();
  Tensor<float> pts({1, 4}, {0.1f, 0.1f, 0.0f, 1.0f});
  auto p = pillarize(pointPaint(pts, onehotScores(1, 2)), g);
  REQUIRE(p.pillarCount() == 1);
  CHECK(p.rows[0] == 80);
  CHECK(p.cols[0] == 20);

  Tensor<float> far({1, 4}, {75.0f, 0.0f, 0.0f, 1.0f});
  auto q = pillarize(pointPaint(far, onehotScores(1, 2)), g);
  CHECK(q.pillarCount() == 0);

  Tensor<float> two({2, 4}, {0.1f, 0.1f, 0.0f, 1.0f, 0.2f, 0.2f, 0.5f, 1.0f});
  auto r = pillarize(pointPaint(two, onehotScores(2, 2)), g);
  CHECK(r.pillarCount() == 1);
  CHECK(r.feats.dim(0) == 2);
}

TEST_CASE("pillarize matches a naive dense reference on random clouds") {
  Rng rng(5);
  GridSpec g = tinyGrid();
  for (int trial = 0; trial < 10; ++trial) {
    auto cloud = randomCloud(200, rng);
    auto painted = pointPaint(cloud, onehotScores(200, 1));
    auto sp = pillarize(painted, g, 64);

    // Dense reference: bucket every in-range point by cell.
    std::map<std::pair<int, int>, int> dense;
    for (int i = 0; i < 200; ++i) {
      const double x = cloud.at(i, 0), y = cloud.at(i, 1);
      if (!g.inRange(x, y)) continue;
      dense[{g.rowOf(y), g.colOf(x)}]++;
    }
    REQUIRE(sp.pillarCount() == static_cast<int>(dense.size()));
    std::map<std::pair<int, int>, int> sparse_counts;
    for (std::size_t i = 0; i < sp.seg.size(); ++i) {
      const int m = sp.seg[i];
      sparse_counts[{sp.rows[m], sp.cols[m]}]++;
    }
    CHECK(sparse_counts == dense);
  }
}

TEST_CASE("pillar cap keeps the nearest points deterministically") {
  GridSpec g = tinyGrid();
  const int n = 24;
  Tensor<float> pts({n, 4});
  for (int i = 0; i < n; ++i) {
    pts.at(i, 0) = 0.05f + 0.015f * i;  // all in one 0.5 m cell
    pts.at(i, 1) = 0.05f;
    pts.at(i, 3) = 1.0f;
  }
  auto painted = pointPaint(pts, onehotScores(n, 1));
  auto sp = pillarize(painted, g, 16);
  CHECK(sp.feats.dim(0) == 16);
  // Shuffled input keeps the same kept set (order within pillar is canonical).
  Rng rng(9);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  rng.shuffle(perm.begin(), perm.end());
  Tensor<float> shuffled({n, 4});
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 4; ++c) shuffled.at(i, c) = pts.at(perm[i], c);
  auto sp2 = pillarize(pointPaint(shuffled, onehotScores(n, 1)), g, 16);
  REQUIRE(sp2.feats.raw() == sp.feats.raw());
}

TEST_CASE("backbone output shape and empty-input bias response") {
  GridSpec g = deskGrid();
  PerceptionNet<float> net(g, 1234);
  auto empty = pillarize(Tensor<float>({0, 9}), g);
  auto f = net.features(empty);
  REQUIRE(f.value().shape() == std::vector<int>({1, 64, 80, 80}));
  for (std::int64_t i = 0; i < f.value().numel(); ++i)
    REQUIRE(std::isfinite(f.value()[i]));
}

TEST_CASE("backbone is invariant to point order and duplication in a pillar") {
  GridSpec g = tinyGrid();
  PerceptionNet<float> net(g, 99);
  Rng rng(12);
  auto cloud = randomCloud(60, rng);
  auto painted = pointPaint(cloud, onehotScores(60, 1));
  auto f1 = net.features(pillarize(painted, g));

  std::vector<int> perm(60);
  for (int i = 0; i < 60; ++i) perm[i] = i;
  rng.shuffle(perm.begin(), perm.end());
  Tensor<float> shuffled({60, 9});
  for (int i = 0; i < 60; ++i)
    for (int c = 0; c < 9; ++c) shuffled.at(i, c) = painted.at(perm[i], c);
  auto f2 = net.features(pillarize(shuffled, g));
  REQUIRE(f1.value().raw() == f2.value().raw());

  // Duplicating a point leaves the pillar's max-pooled feature unchanged.
  Tensor<float> dup({61, 9});
  for (int i = 0; i < 60; ++i)
    for (int c = 0; c < 9; ++c) dup.at(i, c) = painted.at(i, c);
  for (int c = 0; c < 9; ++c) dup.at(60, c) = painted.at(0, c);
  auto f3 = net.features(pillarize(dup, g, 64));
  auto f1b = net.features(pillarize(painted, g, 64));
  REQUIRE(f3.value().raw() == f1b.value().raw());
}

TEST_CASE("head maps shapes and sigmoid ranges") {
  GridSpec g = deskGrid();
  PerceptionNet<float> net(g, 7);
  Rng rng(13);
  auto cloud = randomCloud(120, rng, 30.0);
  auto f = net.features(pillarize(pointPaint(cloud, onehotScores(120, 2)), g));
  auto logits = net.heads(f);
  auto maps = materializeHeadMaps(logits);
  REQUIRE(maps.centerness_vehicle.shape() == std::vector<int>({160, 160}));
  REQUIRE(maps.sem_road.shape() == std::vector<int>({160, 160}));
  REQUIRE(maps.orientation.shape() == std::vector<int>({2, 160, 160}));
  for (std::int64_t i = 0; i < maps.centerness_vehicle.numel(); ++i) {
    REQUIRE(maps.centerness_vehicle[i] > 0.0f);
    REQUIRE(maps.centerness_vehicle[i] < 1.0f);
  }
}

TEST_CASE("decode: single bump, suppression, empty map") {
  GridSpec g = tinyGrid();
  const int H = g.rows(), W = g.cols();
  HeadMaps<float> maps;
  maps.centerness_vehicle = Tensor<float>({H, W});
  maps.centerness_pedestrian = Tensor<float>({H, W});
  maps.orientation = Tensor<float>({2, H, W});
  maps.box = Tensor<float>({2, H, W});
  maps.sem_road = Tensor<float>({H, W});
  maps.sem_solid = Tensor<float>({H, W});
  maps.sem_broken = Tensor<float>({H, W});
  for (std::int64_t i = 0; i < maps.orientation.numel() / 2; ++i)
    maps.orientation[maps.orientation.numel() / 2 + i] = 1.0f;  // cos = 1
  maps.box.fill(std::log(1.0f));

  SECTION("single gaussian bump yields exactly one box at its center") {
    maps.centerness_vehicle.at(16, 16) = 0.9f;
    maps.centerness_vehicle.at(16, 15) = 0.5f;
    maps.centerness_vehicle.at(16, 17) = 0.5f;
    auto dets = decodeDetections(maps, g, 0.3, 3);
    REQUIRE(dets.size() == 1);
    const Vec2 expect = g.cellCenter(16, 16);
    CHECK(dets[0].pose.p.x == Catch::Approx(expect.x));
    CHECK(dets[0].pose.p.y == Catch::Approx(expect.y));
    CHECK(dets[0].score == Catch::Approx(0.9));
  }

  SECTION("two bumps one cell apart are suppressed to one box") {
    maps.centerness_vehicle.at(10, 10) = 0.9f;
    maps.centerness_vehicle.at(10, 11) = 0.8f;
    auto dets = decodeDetections(maps, g, 0.3, 3);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].score == Catch::Approx(0.9));
  }

  SECTION("all-zero map decodes to an empty list") {
    auto dets = decodeDetections(maps, g, 0.3, 3);
    CHECK(dets.empty());
  }

  SECTION("threshold outside (0,1) rejected") {
    CHECK_THROWS(decodeDetections(maps, g, 1.5, 3));
  }

  SECTION("detection containing the ego anchor is flagged") {
    const int r0 = g.rowOf(0.0), c0 = g.colOf(0.0);
    maps.centerness_vehicle.at(r0, c0) = 0.9f;
    maps.box.at(0, r0, c0) = static_cast<float>(std::log(2.0));
    maps.box.at(1, r0, c0) = static_cast<float>(std::log(1.0));
    maps.centerness_vehicle.at(24, 24) = 0.8f;
    auto dets = decodeDetections(maps, g, 0.3, 3);
    REQUIRE(dets.size() == 2);
    int ego_count = 0;
    for (const auto& d : dets)
      if (d.is_ego) {
        ++ego_count;
        CHECK(d.rect().contains({0, 0}));
      }
    CHECK(ego_count == 1);
  }
}

TEST_CASE("splat-decode round trip recovers random box sets") {
  Rng rng(77);
  GridSpec g = deskGrid();
  int total = 0, recovered = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const int n = rng.uniformInt(1, 8);
    std::vector<OrientedBox> boxes;
    int guard = 0;
    while (static_cast<int>(boxes.size()) < n && ++guard < 200) {
      OrientedBox b;
      b.pose = {{rng.uniform(g.x_min + 4, g.x_max - 4),
                 rng.uniform(g.y_min + 4, g.y_max - 4)},
                rng.uniform(-M_PI, M_PI)};
      b.extent = {rng.uniform(1.8, 2.6), rng.uniform(0.8, 1.1)};
      b.cls = ActorClass::kVehicle;
      bool ok = true;
      for (const auto& o : boxes)
        if ((o.pose.p - b.pose.p).norm() < 3.0 * g.pillar) ok = false;
      if (ok) boxes.push_back(b);
    }
    auto t = splatDetectionTargets<float>(boxes, g);
    HeadMaps<float> maps;
    maps.centerness_vehicle = t.center_veh;
    maps.centerness_pedestrian = t.center_ped;
    maps.orientation = t.orient;
    maps.box = t.box;
    auto dets = decodeDetections(maps, g, 0.3, 3);
    for (const auto& b : boxes) {
      ++total;
      for (const auto& d : dets) {
        const double dc = (d.pose.p - b.pose.p).norm();
        const double dyaw = std::abs(wrapAngle(d.pose.yaw - b.pose.yaw));
        if (dc <= g.pillar && dyaw <= 0.1) {
          ++recovered;
          break;
        }
      }
    }
  }
  CHECK(static_cast<double>(recovered) / total >= 0.95);
}

TEST_CASE("perception loss values and gradients") {
  Rng rng(21);
  const int H = 8, W = 8;
  GridSpec g;
  g.x_min = 0;
  g.x_max = 4;
  g.y_min = 0;
  g.y_max = 4;
  g.pillar = 0.5;

  std::vector<OrientedBox> boxes;
  OrientedBox b;
  b.pose = {{1.2, 2.3}, 0.4};
  b.extent = {0.8, 0.5};
  boxes.push_back(b);
  auto det = splatDetectionTargets<double>(boxes, g);
  SemRasters sem;
  sem.road.init(H, W);
  sem.solid.init(H, W);
  sem.broken.init(H, W);
  for (int y = 2; y < 6; ++y)
    for (int x = 0; x < W; ++x) sem.road.set(y, x);
  auto sem_t = semTargetsFromRasters<double>(sem);

  SECTION("perfect predictions: BCE at saturation, reg L1 exactly zero") {
    HeadLogits<double> heads;
    auto logit = [&](const Tensor<double>& prob) {
      Tensor<double> t({1, 1, H, W});
      for (std::int64_t i = 0; i < prob.numel(); ++i) {
        const double p = std::clamp(static_cast<double>(prob[i]), 1e-7, 1.0 - 1e-7);
        t[i] = std::log(p / (1 - p));
      }
      return Var<double>::leaf(t, false);
    };
    heads.center_veh = logit(det.center_veh);
    heads.center_ped = logit(det.center_ped);
    heads.orient = Var<double>::leaf(det.orient.reshaped({1, 2, H, W}), false);
    heads.box = Var<double>::leaf(det.box.reshaped({1, 2, H, W}), false);
    Tensor<double> sem_logit({1, 3, H, W});
    for (std::int64_t i = 0; i < sem_t.numel(); ++i)
      sem_logit[i] = sem_t[i] > 0.5 ? 12.0 : -12.0;
    heads.sem = Var<double>::leaf(sem_logit, false);

    auto out = perceptionLoss(heads, det, sem_t);
    CHECK(out.l1_orient == 0.0);
    CHECK(out.l1_box == 0.0);
    CHECK(out.sem_bce < 1e-4);
    // Penalty-reduced focal keeps a small residual at soft gaussian cells.
    CHECK(out.focal < 0.05);
    CHECK(std::isfinite(out.focal));
  }

  SECTION("gradients w.r.t. every head logit match central finite differences") {
    auto mk = [&](std::vector<int> shape) {
      Tensor<double> t(shape);
      for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, 1.0);
      return Var<double>::leaf(t, true);
    };
    HeadLogits<double> heads;
    heads.center_veh = mk({1, 1, H, W});
    heads.center_ped = mk({1, 1, H, W});
    heads.orient = mk({1, 2, H, W});
    heads.box = mk({1, 2, H, W});
    heads.sem = mk({1, 3, H, W});
    auto fwd = [&] { return perceptionLoss(heads, det, sem_t).total; };
    CHECK(oracles::gradCheck<double>(heads.center_veh, fwd, rng).max_rel_err < 1e-4);
    CHECK(oracles::gradCheck<double>(heads.orient, fwd, rng).max_rel_err < 1e-4);
    CHECK(oracles::gradCheck<double>(heads.box, fwd, rng).max_rel_err < 1e-4);
    CHECK(oracles::gradCheck<double>(heads.sem, fwd, rng).max_rel_err < 1e-4);
  }

  SECTION("removing the ego box from the targets changes the loss") {
    OrientedBox ego;
    ego.pose = {{2.0, 2.0}, 0.0};
    ego.extent = {1.0, 0.5};
    ego.is_ego = true;
    std::vector<OrientedBox> with_ego = boxes;
    with_ego.push_back(ego);
    auto det_with = splatDetectionTargets<double>(with_ego, g);
    Tensor<double> t({1, 1, H, W});
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, 0.3);
    HeadLogits<double> heads;
    heads.center_veh = Var<double>::leaf(t, false);
    heads.center_ped = Var<double>::leaf(Tensor<double>({1, 1, H, W}), false);
    heads.orient = Var<double>::leaf(Tensor<double>({1, 2, H, W}), false);
    heads.box = Var<double>::leaf(Tensor<double>({1, 2, H, W}), false);
    heads.sem = Var<double>::leaf(Tensor<double>({1, 3, H, W}), false);
    const double with_loss = perceptionLoss(heads, det_with, sem_t).total.item();
    const double without_loss = perceptionLoss(heads, det, sem_t).total.item();
    CHECK(with_loss != without_loss);
  }

  SECTION("grid mismatch rejected") {
    HeadLogits<double> heads;
    heads.center_veh = Var<double>::leaf(Tensor<double>({1, 1, 4, 4}), false);
    heads.center_ped = Var<double>::leaf(Tensor<double>({1, 1, 4, 4}), false);
    heads.orient = Var<double>::leaf(Tensor<double>({1, 2, 4, 4}), false);
    heads.box = Var<double>::leaf(Tensor<double>({1, 2, 4, 4}), false);
    heads.sem = Var<double>::leaf(Tensor<double>({1, 3, 4, 4}), false);
    CHECK_THROWS(perceptionLoss(heads, det, sem_t));
  }
}

TEST_CASE("rotation augmentation") {
  GridSpec g = tinyGrid();
  Frame f;
  ActorState ego;
  ego.id = kEgoId;
  ego.pose = {{100.0, 50.0}, 0.3};
  f.actors.push_back(ego);
  ActorState other;
  other.id = 1;
  other.pose = {{104.0, 52.0}, 1.0};
  f.actors.push_back(other);
  f.points = Tensor<float>({1, 4}, {1.f, 0.f, 0.5f, 1.f});
  f.point_scores = Tensor<float>({1, 5});
  f.ego_goal = {3.0, 0.0};
  FutureTrack tr;
  tr.actor_id = 1;
  tr.waypoints = {other.pose.p + Vec2{1.0, 0.5}};
  f.futures.push_back(tr);
  f.sem_rasters.road.init(g.rows(), g.cols());
  f.sem_rasters.solid.init(g.rows(), g.cols());
  f.sem_rasters.broken.init(g.rows(), g.cols());

  SECTION("theta = 0 is the identity") {
    Frame r = rotationAugment(f, 0.0, g);
    CHECK(r.points.at(0, 0) == 1.0f);
    CHECK(r.actors[1].pose.p.x == Catch::Approx(other.pose.p.x));
    CHECK(r.ego_goal.x == Catch::Approx(3.0));
  }

  SECTION("theta = pi/2 maps point (1,0) to (0,1)") {
    Frame r = rotationAugment(f, M_PI_2, g);
    CHECK(r.points.at(0, 0) == Catch::Approx(0.0).margin(1e-6));
    CHECK(r.points.at(0, 1) == Catch::Approx(1.0).margin(1e-6));
    CHECK(r.ego_goal.x == Catch::Approx(0.0).margin(1e-9));
    CHECK(r.ego_goal.y == Catch::Approx(3.0));
    // Ego pose unchanged; other vehicle rotated about the ego.
    CHECK(r.actors[0].pose.p.x == Catch::Approx(100.0));
    const Vec2 rel_before = ego.pose.toLocal(other.pose.p);
    const Vec2 rel_after = ego.pose.toLocal(r.actors[1].pose.p);
    CHECK(rel_after.x == Catch::Approx(-rel_before.y));
    CHECK(rel_after.y == Catch::Approx(rel_before.x));
    // Future labels in the vehicle's own frame are invariant.
    const Vec2 local_before = other.pose.toLocal(f.futures[0].waypoints[0]);
    const Vec2 local_after = r.actors[1].pose.toLocal(r.futures[0].waypoints[0]);
    CHECK(local_after.x == Catch::Approx(local_before.x));
    CHECK(local_after.y == Catch::Approx(local_before.y));
  }

  SECTION("pillarize commutes with rotation within one cell") {
    Rng rng(31);
    Frame dense = f;
    dense.points = randomCloud(100, rng, 6.0);
    const double theta = 0.7;
    Frame rot = rotationAugment(dense, theta, g);
    // Per-point oracle: rotate coordinates, then index.
    for (int i = 0; i < 100; ++i) {
      const double x = dense.points.at(i, 0), y = dense.points.at(i, 1);
      const double rx = std::cos(theta) * x - std::sin(theta) * y;
      const double ry = std::sin(theta) * x + std::cos(theta) * y;
      if (!g.inRange(rx, ry)) continue;
      const int row_expect = g.rowOf(ry), col_expect = g.colOf(rx);
      const int row_got = g.rowOf(rot.points.at(i, 1));
      const int col_got = g.colOf(rot.points.at(i, 0));
      CHECK(std::abs(row_expect - row_got) <= 1);
      CHECK(std::abs(col_expect - col_got) <= 1);
    }
  }
}
