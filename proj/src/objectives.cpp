#include "hit/objectives.hpp"

#include <cmath>

#include "hit/errors.hpp"

namespace hit {

namespace {

Tensor zero() { return Tensor::scalar(0.0); }

Tensor accumulate(Tensor acc, const Tensor& term) { return acc.defined() ? acc + term : term; }

}  // namespace

void LossWeights::validate() const {
  if (lambda_contain < 0.0 || lambda_cvxnet < 0.0 || lambda_balance < 0.0) {
    throw ConfigError("loss weights must be non-negative");
  }
  if (tau_overlap < 1.0) throw ConfigError("tau_overlap must be >= 1");
}

Tensor recon_loss(const Tensor& gt, std::span<const Tensor> level_unions, ReconNorm norm) {
  Tensor total;
  for (const auto& u : level_unions) {
    if (u.shape() != gt.shape()) {
      throw DimensionError("recon_loss: union " + shape_str(u.shape()) + " vs ground truth " +
                           shape_str(gt.shape()));
    }
    const Tensor residual = gt - u;
    total = accumulate(total, reduce_mean(norm == ReconNorm::kSquared ? square(residual) : abs(residual)));
  }
  return total.defined() ? total : zero();
}

Tensor contain_loss(std::span<const Tensor> parent_selected, std::span<const Tensor> child_raw) {
  if (parent_selected.size() != child_raw.size()) {
    throw DimensionError("contain_loss: level count mismatch");
  }
  Tensor total;
  for (std::size_t l = 0; l < child_raw.size(); ++l) {
    const Tensor& raw = child_raw[l];
    if (raw.dim() != 2 || parent_selected[l].shape() != raw.shape()) {
      throw DimensionError("contain_loss: parent " + shape_str(parent_selected[l].shape()) + " vs child " +
                           shape_str(raw.shape()));
    }
    const Tensor leak = (1.0 - parent_selected[l]) * raw;
    total = accumulate(total, scale(reduce_sum(leak), 1.0 / static_cast<double>(raw.size(1))));
  }
  return total.defined() ? total : zero();
}

Tensor decomp_loss(std::span<const Tensor> contained, double tau) {
  Tensor total;
  for (const auto& c : contained) {
    if (c.dim() != 2) throw DimensionError("decomp_loss: expected [N, Q], got " + shape_str(c.shape()));
    const Tensor excess = relu(reduce_sum(c, 0) - tau);
    total = accumulate(total, reduce_mean(square(excess)));
  }
  return total.defined() ? total : zero();
}

Tensor guide_loss(const Tensor& centers, const Tensor& interior) {
  if (centers.dim() != 2 || centers.size(1) != 3 || interior.dim() != 2 || interior.size(1) != 3) {
    throw DimensionError("guide_loss: expected [N, 3] and [S, 3], got " + shape_str(centers.shape()) +
                         " and " + shape_str(interior.shape()));
  }
  const std::size_t n = centers.size(0), s = interior.size(0);
  if (n == 0 || s == 0) throw DimensionError("guide_loss: empty point set");
  const Tensor diff = reshape(centers, {n, 1, 3}) - reshape(interior, {1, s, 3});
  const Tensor dist = reduce_sum(square(diff), 2);  // [N, S]
  return reduce_mean(reduce_min(dist, 1)) + reduce_mean(reduce_min(dist, 0));
}

Tensor loc_loss(const Tensor& offsets) {
  if (offsets.dim() != 2 || offsets.size(1) == 0) {
    throw DimensionError("loc_loss: expected [N, H], got " + shape_str(offsets.shape()));
  }
  return reduce_sum(reduce_mean(square(offsets), 1));
}

Tensor balance_loss(std::span<const Tensor> attention) {
  Tensor total;
  for (const auto& a : attention) {
    if (a.dim() != 2) throw DimensionError("balance_loss: expected a matrix, got " + shape_str(a.shape()));
    const Tensor psi = reduce_sum(a, 0, true);  // [1, N_parent]
    const Tensor dev = psi - reduce_mean(psi);
    total = accumulate(total, reduce_sum(square(dev)));
  }
  return total.defined() ? total : zero();
}

double LossReport::weighted_sum(const LossWeights& w) const {
  return recon + w.lambda_contain * contain + w.lambda_cvxnet * cvxnet() + w.lambda_balance * balance;
}

std::string LossReport::first_nonfinite_term() const {
  const std::pair<const char*, double> terms[] = {{"recon", recon}, {"contain", contain}, {"decomp", decomp},
                                                  {"guide", guide}, {"loc", loc},         {"balance", balance}};
  for (const auto& [name, v] : terms)
    if (!std::isfinite(v)) return name;
  if (total.defined() && !std::isfinite(total.item())) return "total";
  return {};
}

LossReport total_loss(const LossInputs& in, const LossWeights& w) {
  w.validate();
  LossReport r;
  Tensor recon;
  for (const auto& u : in.unions) {
    const Tensor level = recon_loss(in.gt, std::span(&u, 1), w.recon_norm);
    r.recon_per_level.push_back(level.item());
    recon = accumulate(recon, level);
  }
  if (!recon.defined()) recon = zero();
  const Tensor contain = contain_loss(in.parent_selected, in.raw);
  const Tensor decomp = decomp_loss(in.contained, w.tau_overlap);

  Tensor guide;
  if (in.interior.defined() && in.interior.dim() == 2 && in.interior.size(0) > 0) {
    for (const auto& c : in.centers) guide = accumulate(guide, guide_loss(c, in.interior));
  } else {
    r.guide_skipped = true;
  }
  if (!guide.defined()) guide = zero();

  Tensor loc;
  for (const auto& o : in.offsets) loc = accumulate(loc, loc_loss(o));
  if (!loc.defined()) loc = zero();
  const Tensor balance = balance_loss(in.child_attention);

  r.recon = recon.item();
  r.contain = contain.item();
  r.decomp = decomp.item();
  r.guide = guide.item();
  r.loc = loc.item();
  r.balance = balance.item();
  r.total = recon + w.lambda_contain * contain + w.lambda_cvxnet * (decomp + guide + loc) +
            w.lambda_balance * balance;
  return r;
}

}  // namespace hit
