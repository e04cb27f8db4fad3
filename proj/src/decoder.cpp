#include "hit/decoder.hpp"

#include <cmath>

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

double DecoderConfig::scale() const { return 1.0 / std::sqrt(static_cast<double>(latent_dim)); }

void DecoderConfig::validate() const {
  if (parts_per_level.empty()) throw ConfigError("decoder needs at least one level");
  for (std::size_t n : parts_per_level)
    if (n == 0) throw ConfigError("parts_per_level entries must be positive");
  if (latent_dim == 0) throw ConfigError("latent_dim must be positive");
}

DecoderLevelParams DecoderLevelParams::init(std::size_t level, std::size_t parts,
                                            std::size_t latent_dim, std::mt19937_64& rng) {
  const double std = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  DecoderLevelParams p;
  p.codebook.level = level;
  p.codebook.codes = gaussian({parts, latent_dim}, std, rng);
  p.attention.w_q = gaussian({latent_dim, latent_dim}, std, rng);
  p.attention.w_k = gaussian({latent_dim, latent_dim}, std, rng);
  p.attention.w_v = gaussian({latent_dim, latent_dim}, std, rng);
  return p;
}

LevelState attend_level(const Tensor& prev, const Codebook& codebook, const AttentionWeights& weights) {
  if (prev.dim() != 2 || prev.size(0) == 0) {
    throw DimensionError("attend_level: previous features must be a non-empty matrix, got " +
                         shape_str(prev.shape()));
  }
  const std::size_t d = prev.size(1);
  for (const Tensor* w : {&weights.w_q, &weights.w_k, &weights.w_v}) {
    if (w->shape() != Shape{d, d}) {
      throw DimensionError("attend_level: projection " + shape_str(w->shape()) +
                           " does not match features " + shape_str(prev.shape()));
    }
  }
  if (codebook.codes.dim() != 2 || codebook.codes.size(1) != d) {
    throw DimensionError("attend_level: codebook " + shape_str(codebook.codes.shape()) +
                         " does not match features " + shape_str(prev.shape()));
  }
  const Tensor q = matmul(codebook.codes, weights.w_q);
  const Tensor k = matmul(prev, weights.w_k);
  const Tensor v = matmul(prev, weights.w_v);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  LevelState s;
  s.attention = softmax_rows(scale(matmul(q, transpose(k)), inv_sqrt_d));
  s.features = matmul(s.attention, v);
  s.parent_onehot_st = straight_through_parent(s.attention);
  s.parent_index = row_argmax(s.attention);
  return s;
}

std::vector<std::size_t> row_argmax(const Tensor& m) {
  if (m.dim() != 2) throw DimensionError("row_argmax: expected a matrix, got " + shape_str(m.shape()));
  const std::size_t rows = m.size(0), n = m.size(1);
  if (n == 0) throw DimensionError("row_argmax: empty rows");
  const auto d = m.data();
  std::vector<std::size_t> out(rows, 0);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t i = 1; i < n; ++i)
      if (d[r * n + i] > d[r * n + out[r]]) out[r] = i;
  return out;
}

Tensor straight_through_parent(const Tensor& rows) {
  const Tensor m = rows.dim() == 1 ? reshape(rows, {1, rows.size(0)}) : rows;
  const auto arg = row_argmax(m);
  const std::size_t n = m.size(1);
  std::vector<double> onehot(m.numel(), 0.0);
  for (std::size_t r = 0; r < arg.size(); ++r) onehot[r * n + arg[r]] = 1.0;
  Tensor out = Tensor::from_op("straight_through", m.shape(), std::move(onehot), {m}, [](Node& self) {
    auto& g = self.inputs[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
  return rows.dim() == 1 ? reshape(out, rows.shape()) : out;
}

std::vector<LevelState> decode_hierarchy(const FeatureGrid& grid, const DecoderConfig& cfg,
                                         std::span<const DecoderLevelParams> params) {
  cfg.validate();
  if (grid.latent_dim != cfg.latent_dim) {
    throw DimensionError("decode_hierarchy: grid latent_dim " + std::to_string(grid.latent_dim) +
                         " != decoder latent_dim " + std::to_string(cfg.latent_dim));
  }
  if (params.size() != cfg.levels()) {
    throw DimensionError("decode_hierarchy: " + std::to_string(params.size()) +
                         " level parameter sets for " + std::to_string(cfg.levels()) + " levels");
  }
  std::vector<LevelState> states;
  states.reserve(cfg.levels());
  const Tensor* prev = &grid.features;
  for (std::size_t l = 0; l < cfg.levels(); ++l) {
    if (params[l].codebook.codes.size(0) != cfg.parts_per_level[l]) {
      throw DimensionError("decode_hierarchy: level " + std::to_string(l + 1) + " codebook has " +
                           std::to_string(params[l].codebook.codes.size(0)) + " codes, config says " +
                           std::to_string(cfg.parts_per_level[l]));
    }
    states.push_back(attend_level(*prev, params[l].codebook, params[l].attention));
    prev = &states.back().features;
  }
  return states;
}

std::vector<TreeEdge> extract_tree(std::span<const LevelState> states) {
  if (states.empty()) throw DimensionError("extract_tree: no levels");
  std::vector<TreeEdge> edges;
  for (std::size_t l = 0; l < states.size(); ++l) {
    const std::size_t parts = states[l].features.size(0);
    for (std::size_t s = 0; s < parts; ++s) {
      const long parent = l == 0 ? kRootParent : static_cast<long>(states[l].parent_index[s]);
      edges.push_back({l + 1, s, parent});
    }
  }
  return edges;
}

}  // namespace hit
