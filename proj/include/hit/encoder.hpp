#pragma once

#include <cstdint>
#include <random>

#include "hit/point_cloud.hpp"
#include "hit/tensor.hpp"

namespace hit {

struct EncoderConfig {
  std::size_t resolution = 32;
  std::size_t latent_dim = 64;

  void validate() const;
};

// Per-point MLP 3 -> D -> D (ReLU between the layers).
struct EncoderParams {
  Tensor w1;  // [3, D]
  Tensor b1;  // [1, D]
  Tensor w2;  // [D, D]
  Tensor b2;  // [1, D]

  static EncoderParams init(const EncoderConfig& cfg, std::mt19937_64& rng);
};

// Flattened voxel grid Z0 of shape [R^3, D]; row = ix + R * (iy + R * iz).
struct FeatureGrid {
  Tensor features;
  std::size_t resolution = 0;
  std::size_t latent_dim = 0;
};

// floor((c + 0.5) * R) clamped to [0, R-1].
std::size_t voxel_coordinate(double c, std::size_t resolution);
std::size_t voxel_index(const Vec3& p, std::size_t resolution);

// Throws InputDomainError for points outside [-0.5, 0.5]^3 (or non-finite).
// The result is bit-identical under any permutation of the input points.
FeatureGrid encode(const PointCloud& pc, const EncoderParams& params, const EncoderConfig& cfg);

}  // namespace hit
