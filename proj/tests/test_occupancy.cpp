#include <doctest.h>

#include <cmath>
#include <random>

#include "riskplan/errors.hpp"
#include "riskplan/occupancy.hpp"

using namespace riskplan;

namespace {

VoxelGrid strip() { return VoxelGrid(Eigen::Vector3d::Zero(), 0.5, {20, 2, 2}); }

SonarScan beam_along_x(const Eigen::Vector3d& from, double range, double max_range = 10.0) {
  SonarScan scan;
  scan.position = from;
  scan.beams.push_back({Eigen::Vector3d::UnitX(), range, max_range});
  return scan;
}

Obstacle box(const Eigen::Vector3d& center, const Eigen::Vector3d& half) {
  Obstacle o;
  o.label = "box";
  o.center = center;
  o.half_extents = half;
  return o;
}

Waypoint waypoint(const std::string& id, const Eigen::Vector3d& p) {
  Waypoint w;
  w.id = id;
  w.position = p;
  return w;
}

// 10 x 5 x 2 m grid at 0.5 m with waypoints "far", "far2" and "near".
struct ExtractionFixture {
  VoxelGrid grid{Eigen::Vector3d::Zero(), 0.5, {20, 10, 4}};
  Scenario scenario;
  VoxelIndex blocked{10, 4, 1};  // spans [5, 5.5] x [2, 2.5] x [0.5, 1]

  ExtractionFixture() {
    scenario.waypoints = {waypoint("far", {1, 0.25, 0.75}), waypoint("far2", {9, 0.25, 0.75}),
                          waypoint("near", {4.6, 2.25, 0.75})};
    scenario.edges = {{"far", "far2", 0.0}, {"far", "near", 0.0}};
  }
};

}  // namespace

TEST_CASE("two hits at p_hit 0.7") {
  auto g = strip();
  const SensorModel model{0.7, 0.4};
  const auto scan = beam_along_x({0.1, 0.25, 0.25}, 0.3);
  integrate_scan(g, scan, model);
  integrate_scan(g, scan, model);
  CHECK(g.log_odds({0, 0, 0}) == doctest::Approx(1.6946).epsilon(1e-4));
  CHECK(g.occupancy({0, 0, 0}) == doctest::Approx(0.8448).epsilon(1e-4));
  CHECK(g.occupancy({0, 0, 0}) == doctest::Approx(0.49 / (0.49 + 0.09)).epsilon(1e-12));
}

TEST_CASE("hit then miss with a symmetric model returns exactly to the prior") {
  for (double p : {0.6, 0.65, 0.7, 0.8, 0.9}) {
    auto g = strip();
    const SensorModel model{p, 1.0 - p};
    integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 0.3), model);
    integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 0.7), model);
    CHECK(g.log_odds({0, 0, 0}) == 0.0);
    CHECK(g.occupancy({0, 0, 0}) == 0.5);
  }
}

TEST_CASE("one hundred hits saturate at the clamp") {
  auto g = strip();
  for (int i = 0; i < 100; ++i) integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 0.3));
  CHECK(g.log_odds({0, 0, 0}) == VoxelGrid::kLogOddsMax);
  CHECK(std::abs(g.occupancy({0, 0, 0}) - 1.0 / (1.0 + std::exp(-3.5))) < 1e-9);
}

TEST_CASE("a 3 m beam at 0.5 m resolution gives six misses and one hit") {
  auto g = strip();
  const SensorModel model{0.7, 0.4};
  integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 3.0), model);
  for (int x = 0; x < 6; ++x) CHECK(g.log_odds({x, 0, 0}) == doctest::Approx(std::log(0.4 / 0.6)));
  CHECK(g.log_odds({6, 0, 0}) == doctest::Approx(std::log(0.7 / 0.3)));
  for (int x = 7; x < 20; ++x) CHECK(g.log_odds({x, 0, 0}) == 0.0);
  CHECK(g.log_odds({0, 1, 0}) == 0.0);
}

TEST_CASE("a max-range beam records misses only and stops at the grid edge") {
  auto g = strip();
  integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 15.0, 15.0));
  for (int x = 0; x < 20; ++x) CHECK(g.log_odds({x, 0, 0}) < 0.0);
}

TEST_CASE("invalid sensor models and beams are rejected") {
  auto g = strip();
  CHECK_THROWS_AS(integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 1.0), {0.4, 0.3}), InvalidArgument);
  CHECK_THROWS_AS(integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 1.0), {0.7, 0.6}), InvalidArgument);
  CHECK_THROWS_AS(integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 0.0)), InvalidArgument);
  CHECK_THROWS_AS(integrate_scan(g, beam_along_x({0.1, 0.25, 0.25}, 11.0)), InvalidArgument);
  auto skew = beam_along_x({0.1, 0.25, 0.25}, 1.0);
  skew.beams[0].direction = {1, 1, 0};
  CHECK_THROWS_AS(integrate_scan(g, skew), InvalidArgument);
}

TEST_CASE("property: traversal visits face-adjacent voxels once each") {
  const VoxelGrid g(Eigen::Vector3d(-2, -2, -2), 0.5, {8, 8, 8});
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Vector3d a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    const auto cells = traverse(g, a, b);
    REQUIRE_FALSE(cells.empty());
    CHECK(cells.front() == *g.voxel_of(a));
    CHECK(cells.back() == *g.voxel_of(b));
    for (std::size_t i = 1; i < cells.size(); ++i) {
      int diff = 0;
      for (int k = 0; k < 3; ++k) diff += std::abs(cells[i][k] - cells[i - 1][k]);
      CHECK(diff == 1);
    }
  }
}

TEST_CASE("ray_box distances") {
  const auto o = box({4.5, 0, 0}, {0.5, 1, 1});
  REQUIRE(ray_box(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), o));
  CHECK(*ray_box(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitX(), o) == doctest::Approx(4.0));
  CHECK_FALSE(ray_box(Eigen::Vector3d::Zero(), -Eigen::Vector3d::UnitX(), o));
  CHECK_FALSE(ray_box(Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), o));
  CHECK(*ray_box(Eigen::Vector3d(4.5, 0, 0), Eigen::Vector3d::UnitX(), o) == 0.0);
}

TEST_CASE("synthesized scans hit the box, miss empty space and repeat under a seed") {
  const std::vector<Obstacle> obstacles{box({4.5, 0, 0}, {0.5, 1, 1})};
  const std::vector<Eigen::Isometry3d> path{Eigen::Isometry3d::Identity()};
  const auto fan = BeamFan::horizontal(5, 0.2, 20.0);
  std::mt19937_64 quiet(1);
  const auto exact = synthesize_scans(obstacles, path, fan, quiet, 0.0);
  REQUIRE(exact.size() == 1);
  CHECK(exact[0].beams[2].range == doctest::Approx(4.0));

  std::mt19937_64 empty_rng(1);
  for (const auto& b : synthesize_scans({}, path, fan, empty_rng, 0.05)[0].beams) CHECK(b.range == 20.0);

  std::mt19937_64 a(9), b(9), c(10);
  const auto x = synthesize_scans(obstacles, path, fan, a, 0.05);
  const auto y = synthesize_scans(obstacles, path, fan, b, 0.05);
  const auto z = synthesize_scans(obstacles, path, fan, c, 0.05);
  for (std::size_t i = 0; i < x[0].beams.size(); ++i) CHECK(x[0].beams[i].range == y[0].beams[i].range);
  CHECK(x[0].beams[2].range != z[0].beams[2].range);
}

TEST_CASE("beam fan spans the aperture symmetrically") {
  const auto fan = BeamFan::horizontal(3, 1.0, 5.0);
  REQUIRE(fan.directions.size() == 3);
  CHECK(std::atan2(fan.directions[0].y(), fan.directions[0].x()) == doctest::Approx(-0.5));
  CHECK(fan.directions[1].isApprox(Eigen::Vector3d::UnitX()));
  CHECK(std::atan2(fan.directions[2].y(), fan.directions[2].x()) == doctest::Approx(0.5));
}

TEST_CASE("extraction on an empty grid marks nothing") {
  ExtractionFixture f;
  const auto p = extract_problem(f.grid, f.scenario);
  CHECK(p.critical == std::vector<bool>{false, false, false});
  CHECK(p.edge_probability == std::vector<double>{0.0, 0.0});
}

TEST_CASE("a waypoint 0.4 m from a saturated voxel is critical at clearance 0.5") {
  ExtractionFixture f;
  f.grid.update(f.blocked, 10.0);
  ExtractionOptions opts;
  opts.clearance = 0.5;
  const auto p = extract_problem(f.grid, f.scenario, opts);
  CHECK(p.critical == std::vector<bool>{false, false, true});
  CHECK(p.edge_probability[0] == 0.0);
  CHECK(p.edge_probability[1] == doctest::Approx(0.3 * 1.0 / (1.0 + std::exp(-3.5))));

  opts.clearance = 0.3;
  CHECK(extract_problem(f.grid, f.scenario, opts).critical == std::vector<bool>{false, false, false});
}

TEST_CASE("edge probability is kappa times the worst nearby occupancy") {
  ExtractionFixture f;
  f.grid.update(f.blocked, log_odds_of(0.9));
  ExtractionOptions opts;
  opts.clearance = 0.5;
  opts.kappa = 0.3;
  const auto p = extract_problem(f.grid, f.scenario, opts);
  CHECK(p.edge_probability[1] == doctest::Approx(0.27));
  const auto applied = apply_extraction(f.scenario, p);
  CHECK(applied.edges[1].collision_probability == doctest::Approx(0.27));
  CHECK(applied.waypoints[2].critical);
}

TEST_CASE("voxels at or below tau_occ are free") {
  ExtractionFixture f;
  f.grid.update(f.blocked, 0.0);
  ExtractionOptions opts;
  opts.clearance = 0.5;
  const auto p = extract_problem(f.grid, f.scenario, opts);
  CHECK(p.critical == std::vector<bool>{false, false, false});
}

TEST_CASE("a waypoint inside an occupied voxel is rejected") {
  ExtractionFixture f;
  f.grid.update(f.blocked, 2.0);
  f.scenario.waypoints.push_back(waypoint("inside", {5.25, 2.25, 0.75}));
  CHECK_THROWS_AS(extract_problem(f.grid, f.scenario), WaypointInOccupiedVoxel);
  f.scenario.waypoints.back().position = {50, 0, 0};
  CHECK_THROWS_AS(extract_problem(f.grid, f.scenario), InvalidArgument);
}

TEST_CASE("grid csv lists only touched voxels") {
  auto g = strip();
  CHECK(grid_to_csv(g) == "ix,iy,iz,occupancy\n");
  g.update({3, 1, 0}, 2.0);
  CHECK(grid_to_csv(g) == "ix,iy,iz,occupancy\n3,1,0,0.880797\n");
}
