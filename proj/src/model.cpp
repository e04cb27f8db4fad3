#include "hit/model.hpp"

#include <numeric>
#include <random>

#include "hit/errors.hpp"

namespace hit {

void ModelConfig::validate() const {
  encoder.validate();
  decoder.validate();
  if (encoder.latent_dim != decoder.latent_dim) {
    throw ConfigError("encoder and decoder latent_dim differ");
  }
  if (planes < 4) throw ConfigError("planes must be >= 4");
  if (!(sigma > 0.0)) throw ConfigError("sigma must be positive");
}

HitModel HitModel::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  HitModel m;
  m.cfg_ = cfg;
  m.encoder = EncoderParams::init(cfg.encoder, rng);
  for (std::size_t l = 0; l < cfg.decoder.levels(); ++l) {
    m.decoder.push_back(DecoderLevelParams::init(l + 1, cfg.decoder.parts_per_level[l], cfg.decoder.latent_dim, rng));
  }
  for (std::size_t l = 0; l < cfg.decoder.levels(); ++l) {
    m.heads.push_back(ConvexHead::init(cfg.decoder.latent_dim, cfg.planes, rng));
  }
  return m;
}

std::vector<NamedTensor> HitModel::parameters() const {
  std::vector<NamedTensor> out{{"encoder.w1", encoder.w1},
                               {"encoder.b1", encoder.b1},
                               {"encoder.w2", encoder.w2},
                               {"encoder.b2", encoder.b2}};
  for (std::size_t l = 0; l < decoder.size(); ++l) {
    const std::string p = "level" + std::to_string(l + 1) + ".";
    out.emplace_back(p + "codebook", decoder[l].codebook.codes);
    out.emplace_back(p + "w_q", decoder[l].attention.w_q);
    out.emplace_back(p + "w_k", decoder[l].attention.w_k);
    out.emplace_back(p + "w_v", decoder[l].attention.w_v);
    out.emplace_back(p + "head.w1", heads[l].w1);
    out.emplace_back(p + "head.b1", heads[l].b1);
    out.emplace_back(p + "head.w2", heads[l].w2);
    out.emplace_back(p + "head.b2", heads[l].b2);
  }
  return out;
}

std::pair<FeatureGrid, std::vector<std::pair<LevelState, ConvexBatch>>> HitModel::decode(
    const PointCloud& pc) const {
  FeatureGrid grid = encode(pc, encoder, cfg_.encoder);
  auto states = decode_hierarchy(grid, cfg_.decoder, decoder);
  std::vector<std::pair<LevelState, ConvexBatch>> levels;
  levels.reserve(states.size());
  for (std::size_t l = 0; l < states.size(); ++l) {
    ConvexBatch c = features_to_convex(states[l].features, heads[l]);
    levels.emplace_back(std::move(states[l]), std::move(c));
  }
  return {std::move(grid), std::move(levels)};
}

ForwardPass HitModel::forward(const PointCloud& pc, std::span<const Vec3> queries) const {
  auto [grid, decoded] = decode(pc);
  const Tensor pts = points_tensor(queries);
  ForwardPass pass;
  pass.grid = std::move(grid);
  Tensor parent_contained = root_occupancy(queries.size());
  for (std::size_t l = 0; l < decoded.size(); ++l) {
    auto& [state, convexes] = decoded[l];
    LevelOutput out;
    out.raw = raw_occupancy(convexes, pts, cfg_.sigma);
    const Tensor selector = l == 0 ? root_selector(convexes.parts()) : state.parent_onehot_st;
    out.parent_selected = selected_parent_occupancy(parent_contained, selector);
    out.contained = out.parent_selected * out.raw;
    out.union_occupancy = level_union(out.contained);
    parent_contained = out.contained;
    out.state = std::move(state);
    out.convexes = std::move(convexes);
    pass.levels.push_back(std::move(out));
  }
  return pass;
}

HierarchySnapshot HitModel::snapshot(const PointCloud& pc) const {
  NoGradGuard no_grad;
  auto [grid, decoded] = decode(pc);
  HierarchySnapshot snap;
  snap.sigma = cfg_.sigma;
  for (std::size_t l = 0; l < decoded.size(); ++l) {
    const auto& [state, convexes] = decoded[l];
    SnapshotLevel lv;
    for (std::size_t s = 0; s < convexes.parts(); ++s) {
      lv.convexes.push_back(convexes.part(s));
      lv.parents.push_back(l == 0 ? kRootParent : static_cast<long>(state.parent_index[s]));
    }
    snap.levels.push_back(std::move(lv));
  }
  return snap;
}

LossInputs make_loss_inputs(const ForwardPass& pass, const QueryBatch& queries, std::size_t interior_cap,
                            std::uint64_t seed) {
  LossInputs in;
  in.gt = Tensor::from({queries.size()}, queries.gt_occupancy);
  for (std::size_t l = 0; l < pass.levels.size(); ++l) {
    const auto& lv = pass.levels[l];
    in.unions.push_back(lv.union_occupancy);
    in.parent_selected.push_back(lv.parent_selected);
    in.raw.push_back(lv.raw);
    in.contained.push_back(lv.contained);
    in.centers.push_back(lv.convexes.translation);
    in.offsets.push_back(lv.convexes.offsets);
    if (l > 0) in.child_attention.push_back(lv.state.attention);
  }
  std::vector<Vec3> interior;
  for (std::size_t i = 0; i < queries.size(); ++i)
    if (queries.gt_occupancy[i] > 0.5) interior.push_back(queries.points[i]);
  if (interior.size() > interior_cap) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < interior_cap; ++i) {
      std::uniform_int_distribution<std::size_t> dist(i, interior.size() - 1);
      std::swap(interior[i], interior[dist(rng)]);
    }
    interior.resize(interior_cap);
  }
  in.interior = points_tensor(interior);
  return in;
}

}  // namespace hit
