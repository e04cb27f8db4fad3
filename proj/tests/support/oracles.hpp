#pragma once

// Plain-double reference implementations used by the tests. Nothing in here
// goes through the tensor library, so agreement is an independent check.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "hit/convex.hpp"
#include "hit/tensor.hpp"

namespace oracle {

using hit::Vec3;

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logsumexp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

// R = Rz(a) * Ry(b) * Rx(c), built by multiplying the three matrices.
inline std::array<std::array<double, 3>, 3> rotation(const Vec3& e) {
  using M = std::array<std::array<double, 3>, 3>;
  const double a = e[0], b = e[1], c = e[2];
  const M rz{{{std::cos(a), -std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}}};
  const M ry{{{std::cos(b), 0, std::sin(b)}, {0, 1, 0}, {-std::sin(b), 0, std::cos(b)}}};
  const M rx{{{1, 0, 0}, {0, std::cos(c), -std::sin(c)}, {0, std::sin(c), std::cos(c)}}};
  auto mul = [](const M& x, const M& y) {
    M r{};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) r[i][j] += x[i][k] * y[k][j];
    return r;
  };
  return mul(mul(rz, ry), rx);
}

inline double occupancy(const hit::ConvexParams& p, const Vec3& x, double sigma = hit::kDefaultSigma) {
  const auto r = rotation(p.euler);
  Vec3 u{};
  for (int d = 0; d < 3; ++d) u[d] = (x[d] - p.translation[d]) / p.scale[d];
  Vec3 local{};  // R^T u
  for (int i = 0; i < 3; ++i)
    for (int k = 0; k < 3; ++k) local[i] += r[k][i] * u[k];
  std::vector<double> terms;
  for (std::size_t h = 0; h < p.planes(); ++h) {
    const auto& n = p.normals[h];
    terms.push_back(p.blend_sharpness * (n[0] * local[0] + n[1] * local[1] + n[2] * local[2] + p.offsets[h]));
  }
  return sigmoid(-sigma * logsumexp(terms));
}

inline double sq_dist(const Vec3& a, const Vec3& b) {
  double s = 0.0;
  for (int d = 0; d < 3; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
  return s;
}

// Mean nearest squared distance a -> b plus b -> a, brute force.
inline double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  auto directed = [](std::span<const Vec3> x, std::span<const Vec3> y) {
    double s = 0.0;
    for (const auto& p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y) best = std::min(best, sq_dist(p, q));
      s += best;
    }
    return s / static_cast<double>(x.size());
  };
  return directed(a, b) + directed(b, a);
}

// Column sums of A [rows, cols] and their squared deviation from the mean.
inline double balance(const std::vector<std::vector<double>>& a) {
  const std::size_t cols = a.front().size();
  std::vector<double> col(cols, 0.0);
  for (const auto& row : a)
    for (std::size_t c = 0; c < cols; ++c) col[c] += row[c];
  double mean = 0.0;
  for (double v : col) mean += v;
  mean /= static_cast<double>(cols);
  double s = 0.0;
  for (double v : col) s += (v - mean) * (v - mean);
  return s;
}

// Central-difference gradient of a scalar function of one leaf's data.
inline std::vector<double> numeric_gradient(const std::function<double()>& f, hit::Tensor leaf, double h = 1e-5) {
  auto x = leaf.mutable_data();
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double fp = f();
    x[i] = keep - h;
    const double fm = f();
    x[i] = keep;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(std::span<const double> a, std::span<const double> b, double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max({std::abs(a[i]), std::abs(b[i]), floor}));
  return worst;
}

inline hit::Tensor random_leaf(hit::Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(hit::shape_numel(shape));
  for (double& x : v) x = u(rng);
  return hit::Tensor::from(std::move(shape), std::move(v), true);
}

inline std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double half = 0.5) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

inline hit::ConvexParams random_convex(std::mt19937_64& rng, std::size_t planes = 6) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  hit::ConvexParams p;
  for (std::size_t h = 0; h < planes; ++h) {
    Vec3 v{n(rng), n(rng), n(rng)};
    const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    p.normals.push_back({v[0] / len, v[1] / len, v[2] / len});
    p.offsets.push_back(-0.1 - 0.3 * u(rng));
  }
  p.blend_sharpness = 2.0 + 10.0 * u(rng);
  p.euler = {3.0 * (u(rng) - 0.5), 3.0 * (u(rng) - 0.5), 3.0 * (u(rng) - 0.5)};
  p.translation = {0.4 * (u(rng) - 0.5), 0.4 * (u(rng) - 0.5), 0.4 * (u(rng) - 0.5)};
  p.scale = {0.5 + u(rng), 0.5 + u(rng), 0.5 + u(rng)};
  return p;
}

}  // namespace oracle
