#include <cmath>
#include <random>

#include "doctest.h"
#include "hit/convex.hpp"
#include "hit/errors.hpp"
#include "hit/hierarchy.hpp"
#include "oracles.hpp"

using namespace hit;

TEST_SUITE("convex_field") {

TEST_CASE("occupancy matches the plain-double reference") {
  std::mt19937_64 rng(31);
  std::vector<ConvexParams> parts;
  for (int i = 0; i < 4; ++i) parts.push_back(oracle::random_convex(rng, 7));
  const auto pts = oracle::random_points(300, rng, 0.55);
  for (double sigma : {1.0, 10.0, kDefaultSigma}) {
    const Tensor occ = raw_occupancy(ConvexBatch::from_params(parts), points_tensor(pts), sigma);
    double worst = 0.0;
    for (std::size_t s = 0; s < parts.size(); ++s)
      for (std::size_t q = 0; q < pts.size(); ++q)
        worst = std::max(worst, std::abs(occ[s * pts.size() + q] - oracle::occupancy(parts[s], pts[q], sigma)));
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("rotation matrices are proper orthonormal") {
  std::mt19937_64 rng(4);
  const Tensor e = oracle::random_leaf({20, 3}, rng, -4, 4);
  const Tensor r = rotation_matrices(e);
  double worst = 0.0;
  for (std::size_t n = 0; n < 20; ++n) {
    const double* m = r.data().data() + n * 9;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += m[k * 3 + i] * m[k * 3 + j];
        worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
      }
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    CHECK(det == doctest::Approx(1.0).epsilon(1e-12));
    const auto ref = oracle::rotation({e[n * 3], e[n * 3 + 1], e[n * 3 + 2]});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(std::abs(ref[i][j] - m[i * 3 + j]) < 1e-14);
  }
  CHECK(worst < 1e-14);
}

TEST_CASE("normals normalize with a fallback for degenerate rows") {
  const Tensor raw = Tensor::from({2, 3}, {3.0, 0.0, 4.0, 0.0, 1e-12, 0.0}, true);
  const Tensor n = normalize_normals(raw);
  CHECK(n[0] == doctest::Approx(0.6));
  CHECK(n[2] == doctest::Approx(0.8));
  CHECK(n[3] == 0.0);
  CHECK(n[4] == 0.0);
  CHECK(n[5] == 1.0);
  reduce_sum(n).backward();
  CHECK(raw.grad()[3] == 0.0);
  CHECK(raw.grad()[4] == 0.0);
}

TEST_CASE("box occupancy is high inside and low outside") {
  const ConvexParams box = ConvexParams::box({0.1, 0.0, -0.1}, {0.2, 0.1, 0.15}, 200.0);
  CHECK(oracle::occupancy(box, {0.1, 0.0, -0.1}) > 0.999);
  CHECK(oracle::occupancy(box, {0.35, 0.0, -0.1}) < 1e-6);
  const Tensor occ = raw_occupancy(ConvexBatch::from_params(std::vector{box}),
                                   points_tensor(std::vector<Vec3>{{0.1, 0.0, -0.1}, {0.1, 0.2, -0.1}}));
  CHECK(occ[0] > 0.999);
  CHECK(occ[1] < 1e-6);
}

TEST_CASE("contained occupancy never exceeds the selected parent") {
  std::mt19937_64 rng(8);
  std::vector<ConvexParams> parents{oracle::random_convex(rng), oracle::random_convex(rng)};
  std::vector<ConvexParams> kids{oracle::random_convex(rng), oracle::random_convex(rng), oracle::random_convex(rng)};
  const auto pts = oracle::random_points(2000, rng, 0.55);
  const Tensor q = points_tensor(pts);
  const Tensor parent = raw_occupancy(ConvexBatch::from_params(parents), q);
  const Tensor onehot = straight_through_parent(oracle::random_leaf({3, 2}, rng));
  const Tensor child = contained_occupancy(raw_occupancy(ConvexBatch::from_params(kids), q), parent, onehot);
  const auto sel = row_argmax(onehot);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(child[s * pts.size() + i] <= parent[sel[s] * pts.size() + i]);
}

TEST_CASE("root selection leaves level-one occupancy untouched") {
  std::mt19937_64 rng(9);
  const Tensor raw = raw_occupancy(ConvexBatch::from_params(std::vector{oracle::random_convex(rng), oracle::random_convex(rng)}),
                                   points_tensor(oracle::random_points(100, rng)));
  const Tensor c = contained_occupancy(raw, root_occupancy(100), root_selector(2));
  CHECK(std::equal(raw.data().begin(), raw.data().end(), c.data().begin()));
}

TEST_CASE("level union is the pointwise max") {
  const Tensor c = Tensor::from({3, 2}, {0.1, 0.9, 0.7, 0.2, 0.3, 0.95});
  const Tensor u = level_union(c);
  CHECK(u[0] == 0.7);
  CHECK(u[1] == 0.95);
}

TEST_CASE("snapshot containment is the product down the tree") {
  std::mt19937_64 rng(12);
  HierarchySnapshot snap;
  snap.levels.push_back({{oracle::random_convex(rng), oracle::random_convex(rng)}, {kRootParent, kRootParent}});
  snap.levels.push_back({{oracle::random_convex(rng), oracle::random_convex(rng), oracle::random_convex(rng)}, {1, 0, 1}});
  const auto pts = oracle::random_points(200, rng);
  const OccupancyTable t = snap.contained(2, pts);
  double worst = 0.0;
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const auto& parent = snap.level(1).convexes[static_cast<std::size_t>(snap.level(2).parents[s])];
      const double want = oracle::occupancy(parent, pts[q]) * oracle::occupancy(snap.level(2).convexes[s], pts[q]);
      worst = std::max(worst, std::abs(t.at(s, q) - want));
    }
  CHECK(worst < 1e-12);
}

TEST_CASE("invalid convex parameters throw") {
  ConvexParams p = ConvexParams::box({0, 0, 0}, {0.1, 0.1, 0.1}, 10.0);
  CHECK_NOTHROW(p.validate());
  ConvexParams few = p;
  few.normals.resize(3);
  few.offsets.resize(3);
  CHECK_THROWS_AS(few.validate(), ConfigError);
  ConvexParams blunt = p;
  blunt.blend_sharpness = 0.0;
  CHECK_THROWS_AS(blunt.validate(), ConfigError);
  ConvexParams flat = p;
  flat.scale[1] = -1.0;
  CHECK_THROWS_AS(flat.validate(), ConfigError);
  HierarchySnapshot bad;
  bad.levels.push_back({{p}, {3}});
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("raw head output maps to positive sharpness and scale") {
  std::mt19937_64 rng(6);
  const Tensor raw = oracle::random_leaf({4, raw_width(5)}, rng, -30, 30);
  const ConvexBatch c = raw_to_convex(raw, 5);
  CHECK(c.parts() == 4);
  CHECK(c.planes() == 5);
  for (double b : c.blend.data()) CHECK(b > 0.0);
  for (double s : c.scale.data()) CHECK(s > 0.0);
}

}  // TEST_SUITE
