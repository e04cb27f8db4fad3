#pragma once

// Training objective:
//
//   L = recon + l_contain * contain + l_cvxnet * (decomp + guide + loc) + l_balance * balance
//
// Every term is a per-level sum of per-query means so the weights do not
// depend on the number of queries.

#include <span>
#include <string>
#include <vector>

#include "hit/tensor.hpp"

namespace hit {

enum class ReconNorm { kSquared, kAbsolute };

struct LossWeights {
  double lambda_contain = 0.01;
  double lambda_cvxnet = 0.01;
  double lambda_balance = 0.01;
  double tau_overlap = 1.05;
  ReconNorm recon_norm = ReconNorm::kSquared;

  void validate() const;
};

// Sum over levels of mean_x (O(x) - union_l(x))^2 (or |.| for kAbsolute).
Tensor recon_loss(const Tensor& gt, std::span<const Tensor> level_unions,
                  ReconNorm norm = ReconNorm::kSquared);

// Sum over levels and children of mean_x (1 - O^_parent(x)) * O~_child(x).
// Each entry is [N_l, Q].
Tensor contain_loss(std::span<const Tensor> parent_selected, std::span<const Tensor> child_raw);

// Sum over levels of mean_x relu(sum_p O^_p(x) - tau)^2.
Tensor decomp_loss(std::span<const Tensor> contained, double tau);

// Two-sided Chamfer between convex centers [N, 3] and interior samples [S, 3].
Tensor guide_loss(const Tensor& centers, const Tensor& interior);

// sum over parts of mean over planes of offset^2; offsets is [N, H].
Tensor loc_loss(const Tensor& offsets);

// Sum over the given child-level attention matrices [N_child, N_parent] of
// the squared deviations of the column sums from their mean.
Tensor balance_loss(std::span<const Tensor> attention);

struct LossInputs {
  Tensor gt;                            // [Q]
  std::vector<Tensor> unions;           // per level [Q]
  std::vector<Tensor> parent_selected;  // per level [N_l, Q]
  std::vector<Tensor> raw;              // per level [N_l, Q]
  std::vector<Tensor> contained;        // per level [N_l, Q]
  std::vector<Tensor> centers;          // per level [N_l, 3]
  std::vector<Tensor> offsets;          // per level [N_l, H]
  std::vector<Tensor> child_attention;  // levels >= 2, [N_l, N_{l-1}]
  Tensor interior;                      // [S, 3]; may hold zero rows
};

struct LossReport {
  Tensor total;
  double recon = 0.0;
  double contain = 0.0;
  double decomp = 0.0;
  double guide = 0.0;
  double loc = 0.0;
  double balance = 0.0;
  std::vector<double> recon_per_level;
  bool guide_skipped = false;  // no interior samples available

  double cvxnet() const { return decomp + guide + loc; }
  // recon + lc*contain + lx*(decomp+guide+loc) + lb*balance, from the scalars.
  double weighted_sum(const LossWeights& w) const;
  // First non-finite term name, or empty.
  std::string first_nonfinite_term() const;
};

LossReport total_loss(const LossInputs& in, const LossWeights& w);

}  // namespace hit
