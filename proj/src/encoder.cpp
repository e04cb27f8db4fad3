#include "hit/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hit/errors.hpp"

namespace hit {

namespace {

Tensor gaussian(Shape shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

}  // namespace

void EncoderConfig::validate() const {
  if (resolution < 2) throw ConfigError("encoder resolution must be >= 2");
  if (latent_dim < 1) throw ConfigError("encoder latent_dim must be >= 1");
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const std::size_t d = cfg.latent_dim;
  EncoderParams p;
  // He-style scaling keeps ReLU activations O(1) for unit-cube inputs.
  p.w1 = gaussian({3, d}, std::sqrt(2.0 / 3.0) * 2.0, rng);
  p.b1 = gaussian({1, d}, 0.5, rng);
  p.w2 = gaussian({d, d}, std::sqrt(2.0 / static_cast<double>(d)), rng);
  p.b2 = Tensor::zeros({1, d}, true);
  return p;
}

std::size_t voxel_coordinate(double c, std::size_t resolution) {
  const double scaled = std::floor((c + 0.5) * static_cast<double>(resolution));
  if (scaled <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(scaled), resolution - 1);
}

std::size_t voxel_index(const Vec3& p, std::size_t resolution) {
  return voxel_coordinate(p[0], resolution) +
         resolution * (voxel_coordinate(p[1], resolution) +
                       resolution * voxel_coordinate(p[2], resolution));
}

FeatureGrid encode(const PointCloud& pc, const EncoderParams& params, const EncoderConfig& cfg) {
  cfg.validate();
  if (pc.points.empty()) throw InputDomainError("encode: empty point cloud");
  if (params.w1.shape() != Shape{3, cfg.latent_dim}) {
    throw DimensionError("encode: encoder weights " + shape_str(params.w1.shape()) +
                         " do not match latent_dim " + std::to_string(cfg.latent_dim));
  }
  for (const auto& p : pc.points)
    for (double c : p)
      if (!std::isfinite(c) || c < -0.5 || c > 0.5) {
        throw InputDomainError("encode: point (" + std::to_string(p[0]) + ", " +
                               std::to_string(p[1]) + ", " + std::to_string(p[2]) +
                               ") outside [-0.5, 0.5]^3");
      }

  // Canonical point order makes pooling sums independent of input order.
  std::vector<std::size_t> order(pc.points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return pc.points[a] < pc.points[b]; });

  std::vector<double> coords;
  coords.reserve(order.size() * 3);
  std::vector<std::size_t> cell;
  cell.reserve(order.size());
  for (std::size_t i : order) {
    const auto& p = pc.points[i];
    coords.insert(coords.end(), p.begin(), p.end());
    cell.push_back(voxel_index(p, cfg.resolution));
  }
  const Tensor x = Tensor::from({order.size(), 3}, std::move(coords));
  const Tensor hidden = relu(matmul(x, params.w1) + params.b1);
  const Tensor per_point = matmul(hidden, params.w2) + params.b2;
  const std::size_t cells = cfg.resolution * cfg.resolution * cfg.resolution;
  return FeatureGrid{segment_mean(per_point, cell, cells), cfg.resolution, cfg.latent_dim};
}

}  // namespace hit
