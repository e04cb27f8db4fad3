#pragma once

// Hierarchical codebook decoder.
//
// Level l owns a learnable codebook C (N_l x D) and projections W_Q, W_K,
// W_V (D x D). Its codes query the previous level's features:
//
//   A_l = softmax_rows((C W_Q)(Z_{l-1} W_K)^T / sqrt(D)),   Z_l = A_l (Z_{l-1} W_V)
//
// Level 1 attends to the encoder grid tokens; level l > 1 attends to Z_{l-1}.
// Row s of A_l is a soft parent distribution for part s, its argmax (lowest
// index on ties) is the hard parent, and the straight-through one-hot uses
// the hard value forward and the soft row's gradient backward. Parts of
// level 1 hang off a virtual root (level 0) whose occupancy is 1 everywhere.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "hit/encoder.hpp"
#include "hit/tensor.hpp"

namespace hit {

struct DecoderConfig {
  std::vector<std::size_t> parts_per_level{4, 8, 16, 32};
  std::size_t latent_dim = 64;

  std::size_t levels() const { return parts_per_level.size(); }
  double scale() const;
  void validate() const;
};

struct Codebook {
  Tensor codes;  // [N_l, D], shared by every shape
  std::size_t level = 1;
};

struct AttentionWeights {
  Tensor w_q;  // [D, D]
  Tensor w_k;
  Tensor w_v;
};

struct DecoderLevelParams {
  Codebook codebook;
  AttentionWeights attention;

  static DecoderLevelParams init(std::size_t level, std::size_t parts, std::size_t latent_dim,
                                 std::mt19937_64& rng);
};

struct LevelState {
  Tensor features;          // Z_l [N_l, D]
  Tensor attention;         // A_l [N_l, N_prev]
  Tensor parent_onehot_st;  // [N_l, N_prev], exactly one-hot forward
  std::vector<std::size_t> parent_index;
};

LevelState attend_level(const Tensor& prev, const Codebook& codebook, const AttentionWeights& weights);

// Lowest-index argmax of every row of a [rows, n] matrix.
std::vector<std::size_t> row_argmax(const Tensor& m);

// Forward: one-hot at each row's argmax. Backward: identity onto `rows`.
Tensor straight_through_parent(const Tensor& rows);

std::vector<LevelState> decode_hierarchy(const FeatureGrid& grid, const DecoderConfig& cfg,
                                         std::span<const DecoderLevelParams> params);

inline constexpr long kRootParent = -1;

struct TreeEdge {
  std::size_t level = 1;  // child level (>= 1)
  std::size_t child = 0;
  long parent = kRootParent;  // index at level-1, or kRootParent

  bool operator==(const TreeEdge&) const = default;
};

// One edge per part; level-1 parts hang off the virtual root.
std::vector<TreeEdge> extract_tree(std::span<const LevelState> states);

}  // namespace hit
