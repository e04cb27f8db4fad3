#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hit/convex.hpp"
#include "hit/decoder.hpp"
#include "hit/encoder.hpp"
#include "hit/hierarchy.hpp"
#include "hit/objectives.hpp"

namespace hit {

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  std::size_t planes = 32;
  double sigma = kDefaultSigma;

  void validate() const;
};

struct LevelOutput {
  LevelState state;
  ConvexBatch convexes;
  Tensor raw;              // [N_l, Q]
  Tensor parent_selected;  // [N_l, Q], 1 for level 1
  Tensor contained;        // [N_l, Q]
  Tensor union_occupancy;  // [Q]
};

struct ForwardPass {
  FeatureGrid grid;
  std::vector<LevelOutput> levels;
};

using NamedTensor = std::pair<std::string, Tensor>;

class HitModel {
 public:
  static HitModel init(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Stable order; names are unique ("encoder.w1", "level2.codebook", ...).
  std::vector<NamedTensor> parameters() const;

  // Encoder + decoder + convex heads, no occupancy evaluation.
  std::pair<FeatureGrid, std::vector<std::pair<LevelState, ConvexBatch>>> decode(const PointCloud& pc) const;

  ForwardPass forward(const PointCloud& pc, std::span<const Vec3> queries) const;

  HierarchySnapshot snapshot(const PointCloud& pc) const;

  EncoderParams encoder;
  std::vector<DecoderLevelParams> decoder;
  std::vector<ConvexHead> heads;

 private:
  ModelConfig cfg_;
};

// Interior samples for the guide term come from gt-occupied queries, capped
// at `interior_cap` by seeded subsampling.
LossInputs make_loss_inputs(const ForwardPass& pass, const QueryBatch& queries, std::size_t interior_cap,
                            std::uint64_t seed);

}  // namespace hit
