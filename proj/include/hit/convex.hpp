#pragma once

// Smooth convex occupancy fields.
//
// A part is the intersection of H half-spaces {n_h . x~ + o_h <= 0} in its
// local frame x~ = R(E)^T ((x - t) / s), blended with a log-sum-exp:
//
//   Phi(x) = log sum_h exp(delta * (n_h . x~ + o_h)),   O~(x) = sigmoid(-sigma * Phi(x))
//
// R(E) uses intrinsic Z-Y-X Euler angles: R = Rz(E[0]) * Ry(E[1]) * Rx(E[2]).
// Children are nested in their parent multiplicatively:
//
//   O^_child(x) = O^_parent(x) * O~_child(x)

#include <random>
#include <span>
#include <vector>

#include "hit/point_cloud.hpp"
#include "hit/tensor.hpp"

namespace hit {

inline constexpr double kDefaultSigma = 75.0;
inline constexpr double kPositiveFloor = 1e-6;
inline constexpr double kDegenerateNormal = 1e-8;
inline constexpr Vec3 kFallbackNormal{0.0, 0.0, 1.0};

// Plain-value description of one convex, used for snapshots and fixtures.
struct ConvexParams {
  std::vector<Vec3> normals;    // H unit normals
  std::vector<double> offsets;  // H
  double blend_sharpness = 1.0;
  Vec3 euler{0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};
  Vec3 scale{1.0, 1.0, 1.0};

  std::size_t planes() const { return normals.size(); }
  // Throws ConfigError when the invariants (H >= 4, unit normals, positive
  // sharpness/scale) do not hold.
  void validate() const;

  // Axis-aligned box [center - half, center + half] as six planes.
  static ConvexParams box(const Vec3& center, const Vec3& half, double blend_sharpness);
};

// Differentiable parameters for N convexes with H planes each.
struct ConvexBatch {
  Tensor normals;      // [N, H, 3]
  Tensor offsets;      // [N, H]
  Tensor blend;        // [N, 1]
  Tensor euler;        // [N, 3]
  Tensor translation;  // [N, 3]
  Tensor scale;        // [N, 3]

  std::size_t parts() const { return offsets.size(0); }
  std::size_t planes() const { return offsets.size(1); }
  ConvexParams part(std::size_t i) const;

  // Constant (non-differentiable) batch; all parts must share H.
  static ConvexBatch from_params(std::span<const ConvexParams> parts);
};

// G_phi: feature -> hidden (ReLU) -> raw convex parameters.
struct ConvexHead {
  Tensor w1;  // [D, D]
  Tensor b1;  // [1, D]
  Tensor w2;  // [D, raw_width(H)]
  Tensor b2;  // [1, raw_width(H)]

  std::size_t planes() const;
  // Output biases start from well-spread normals and a wide soft blob
  // around the frame origin so every part is non-empty.
  static ConvexHead init(std::size_t latent_dim, std::size_t planes, std::mt19937_64& rng);
};

// 3H normals + H offsets + blend + 3 euler + 3 translation + 3 scale.
constexpr std::size_t raw_width(std::size_t planes) { return planes * 4 + 10; }

// Raw row layout: [normals (H*3) | offsets (H) | blend | euler (3) | translation (3) | scale (3)].
ConvexBatch raw_to_convex(const Tensor& raw, std::size_t planes);

// Applies G_phi to every row of features [N, D].
ConvexBatch features_to_convex(const Tensor& features, const ConvexHead& head);

// Row-wise L2 normalization of [..., 3]; rows with norm < 1e-8 become
// kFallbackNormal and receive no gradient.
Tensor normalize_normals(const Tensor& raw);

// [N, 3] Euler angles -> [N, 3, 3] rotation matrices.
Tensor rotation_matrices(const Tensor& euler);

// Occupancy of every part at every query: [N, Q].
Tensor raw_occupancy(const ConvexBatch& convexes, const Tensor& points, double sigma = kDefaultSigma);

// Selected parent occupancy sum_p onehot[s, p] * parent_contained[p, :]  -> [N, Q].
Tensor selected_parent_occupancy(const Tensor& parent_contained, const Tensor& parent_onehot_st);

// parent selection times child raw occupancy -> [N, Q].
Tensor contained_occupancy(const Tensor& child_raw, const Tensor& parent_contained,
                           const Tensor& parent_onehot_st);

// Root occupancy (1 everywhere) as a [1, Q] matrix and its [N, 1] selector.
Tensor root_occupancy(std::size_t queries);
Tensor root_selector(std::size_t parts);

// Pointwise max over parts: [N, Q] -> [Q].
Tensor level_union(const Tensor& contained);

// Occupancy queries with analytic ground truth (training only).
struct QueryBatch {
  std::vector<Vec3> points;
  std::vector<double> gt_occupancy;  // 0 or 1 per point

  std::size_t size() const { return points.size(); }
};

// Stacks points into a [Q, 3] constant tensor.
Tensor points_tensor(std::span<const Vec3> points);

}  // namespace hit
