#include "hit/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "hit/errors.hpp"
#include "hit/geometry_io.hpp"
#include "hit/model.hpp"
#include "hit/objectives.hpp"
#include "hit/synthetic.hpp"

namespace hit {

namespace {

using Clock = std::chrono::steady_clock;

// Uniform entries in [lo, hi], pushed at least `gap` away from zero so
// relu/abs kinks stay outside the finite-difference step.
Tensor random_leaf(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0, double gap = 0.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) {
    x = u(rng);
    if (std::abs(x) < gap) x = x < 0.0 ? -gap : gap;
  }
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Random projection to a scalar so every output entry gets a distinct weight.
Tensor project(const Tensor& y, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> w(y.numel());
  for (double& x : w) x = u(rng);
  return reduce_sum(y * Tensor::from(y.shape(), std::move(w)));
}

double one_sided_mismatch(double fp, double f0, double fm, double h) {
  const double up = (fp - f0) / h, down = (f0 - fm) / h;
  return std::abs(up - down) / std::max({std::abs(up), std::abs(down), 1e-3});
}

CheckResult grad_result(const std::string& name, const GradCheckStats& s) {
  CheckResult r{name, s.max_rel_error < kGradTolerance, s.max_rel_error, kGradTolerance, {}};
  r.detail = std::to_string(s.checked) + " entries";
  if (s.kinks) r.detail += ", " + std::to_string(s.kinks) + " at ties";
  return r;
}

ModelConfig small_model(std::vector<std::size_t> parts, std::size_t planes, std::size_t dim) {
  ModelConfig cfg;
  cfg.encoder.resolution = 4;
  cfg.encoder.latent_dim = dim;
  cfg.decoder.latent_dim = dim;
  cfg.decoder.parts_per_level = std::move(parts);
  cfg.planes = planes;
  return cfg;
}

Tensor leaf_copy(const Tensor& t) {
  return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
}

std::vector<Vec3> random_points(std::size_t n, std::mt19937_64& rng, double half = 0.5) {
  std::uniform_real_distribution<double> u(-half, half);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

// Up to `keep` candidates where some part sits inside the sigmoid band, plus
// a few saturated ones; the paper sigma makes most random points flat.
std::vector<Vec3> band_points(const std::vector<ConvexBatch>& parts, const std::vector<Vec3>& candidates,
                              double sigma, std::size_t keep, std::size_t extra) {
  NoGradGuard no_grad;
  const Tensor pts = points_tensor(candidates);
  std::vector<std::vector<double>> occ;
  for (const auto& c : parts) {
    const Tensor o = raw_occupancy(c, pts, sigma);
    occ.emplace_back(o.data().begin(), o.data().end());
  }
  std::vector<Vec3> in_band, flat;
  for (std::size_t q = 0; q < candidates.size(); ++q) {
    bool band = false;
    for (std::size_t l = 0; l < parts.size() && !band; ++l)
      for (std::size_t s = 0; s < parts[l].parts() && !band; ++s) {
        const double v = occ[l][s * candidates.size() + q];
        band = v > 1e-3 && v < 1.0 - 1e-3;
      }
    if (band && in_band.size() < keep) in_band.push_back(candidates[q]);
    if (!band && flat.size() < extra) flat.push_back(candidates[q]);
  }
  in_band.insert(in_band.end(), flat.begin(), flat.end());
  return in_band;
}

}  // namespace

bool SuiteReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::string SuiteReport::format() const {
  std::ostringstream out;
  char buf[64];
  for (const auto& c : checks) {
    std::snprintf(buf, sizeof buf, "worst=%.3e tol=%.1e", c.worst, c.tolerance);
    out << (c.pass ? "PASS " : "FAIL ") << suite << '/' << c.name << ' ' << buf;
    if (!c.detail.empty()) out << " (" << c.detail << ')';
    out << '\n';
  }
  std::snprintf(buf, sizeof buf, "%.2fs", seconds);
  out << suite << ": " << (passed() ? "ok" : "FAILED") << " in " << buf << '\n';
  return out.str();
}

GradCheckStats check_gradients(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves, double h,
                               double floor) {
  for (auto leaf : leaves) leaf.zero_grad();
  const Tensor y = f();
  if (y.numel() != 1) throw DimensionError("check_gradients: function must return a scalar");
  y.backward();

  GradCheckStats s;
  NoGradGuard no_grad;
  for (auto leaf : leaves) {
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
    auto data = leaf.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double x = data[i];
      data[i] = x + h;
      const double fp = f().item();
      data[i] = x - h;
      const double fm = f().item();
      data[i] = x;
      const double numeric = (fp - fm) / (2.0 * h);
      const double rel = std::abs(analytic[i] - numeric) /
                         std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      ++s.checked;
      if (rel >= kGradTolerance && one_sided_mismatch(fp, f().item(), fm, h) > 0.5) {
        ++s.kinks;
        continue;
      }
      s.max_rel_error = std::max(s.max_rel_error, rel);
    }
  }
  return s;
}

SuiteReport verify_gradcheck(std::uint64_t seed) {
  const auto start = Clock::now();
  SuiteReport rep{"gradcheck", {}, 0.0};
  std::mt19937_64 rng(mix_seed(seed, 0x6c));

  struct Unary {
    const char* name;
    Tensor (*op)(const Tensor&);
    double lo, hi;
  };
  const Unary unary[] = {
      {"neg", [](const Tensor& x) { return neg(x); }, -1, 1},
      {"relu", [](const Tensor& x) { return relu(x); }, -1, 1},
      {"square", [](const Tensor& x) { return square(x); }, -1, 1},
      {"exp", [](const Tensor& x) { return exp(x); }, -1, 1},
      {"log", [](const Tensor& x) { return log(x); }, 0.2, 2},
      {"sqrt", [](const Tensor& x) { return sqrt(x); }, 0.2, 2},
      {"abs", [](const Tensor& x) { return abs(x); }, -1, 1},
      {"sin", [](const Tensor& x) { return sin(x); }, -3, 3},
      {"cos", [](const Tensor& x) { return cos(x); }, -3, 3},
      {"sigmoid", [](const Tensor& x) { return sigmoid(x); }, -4, 4},
      {"softplus", [](const Tensor& x) { return softplus(x); }, -4, 4},
      {"scale", [](const Tensor& x) { return scale(x, -2.5); }, -1, 1},
      {"add_scalar", [](const Tensor& x) { return add_scalar(x, 0.3); }, -1, 1},
      {"transpose", [](const Tensor& x) { return transpose(x); }, -1, 1},
      {"reduce_sum", [](const Tensor& x) { return reduce_sum(x); }, -1, 1},
      {"reduce_sum_axis0", [](const Tensor& x) { return reduce_sum(x, 0); }, -1, 1},
      {"reduce_sum_axis1", [](const Tensor& x) { return reduce_sum(x, 1, true); }, -1, 1},
      {"reduce_mean", [](const Tensor& x) { return reduce_mean(x); }, -1, 1},
      {"reduce_mean_axis1", [](const Tensor& x) { return reduce_mean(x, 1); }, -1, 1},
      {"reduce_max", [](const Tensor& x) { return reduce_max(x); }, -1, 1},
      {"reduce_max_axis0", [](const Tensor& x) { return reduce_max(x, 0); }, -1, 1},
      {"reduce_min_axis1", [](const Tensor& x) { return reduce_min(x, 1); }, -1, 1},
      {"logsumexp", [](const Tensor& x) { return logsumexp(x); }, -2, 2},
      {"softmax_rows", [](const Tensor& x) { return softmax_rows(x); }, -2, 2},
      {"reshape", [](const Tensor& x) { return reshape(x, {x.numel()}); }, -1, 1},
      {"slice", [](const Tensor& x) { return slice(x, 1, 1, 3); }, -1, 1},
  };
  for (const auto& u : unary) {
    const Tensor x = random_leaf({3, 4}, rng, u.lo, u.hi, 0.05);
    std::mt19937_64 prng(mix_seed(seed, 1));
    auto f = [&] {
      std::mt19937_64 r = prng;
      return project(u.op(x), r);
    };
    rep.checks.push_back(grad_result(u.name, check_gradients(f, {x})));
  }

  struct Binary {
    const char* name;
    Tensor (*op)(const Tensor&, const Tensor&);
    Shape a, b;
    double blo, bhi;
  };
  const Binary binary[] = {
      {"add_broadcast", [](const Tensor& a, const Tensor& b) { return a + b; }, {3, 4}, {1, 4}, -1, 1},
      {"sub_broadcast", [](const Tensor& a, const Tensor& b) { return a - b; }, {3, 4}, {3, 1}, -1, 1},
      {"mul_broadcast", [](const Tensor& a, const Tensor& b) { return a * b; }, {2, 3, 4}, {3, 1}, -1, 1},
      {"div", [](const Tensor& a, const Tensor& b) { return a / b; }, {3, 4}, {3, 4}, 0.5, 2},
      {"matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, {3, 4}, {4, 5}, -1, 1},
      {"bmm", [](const Tensor& a, const Tensor& b) { return bmm(a, b); }, {2, 3, 4}, {2, 4, 2}, -1, 1},
      {"concat0", [](const Tensor& a, const Tensor& b) { return concat({a, b}, 0); }, {2, 3}, {4, 3}, -1, 1},
      {"concat1", [](const Tensor& a, const Tensor& b) { return concat({a, b}, 1); }, {2, 3}, {2, 1}, -1, 1},
      {"broadcast_to", [](const Tensor& a, const Tensor& b) { return broadcast_to(a, {3, 4}) * b; }, {1, 4}, {3, 4}, -1, 1},
  };
  for (const auto& bop : binary) {
    const Tensor a = random_leaf(bop.a, rng);
    const Tensor b = random_leaf(bop.b, rng, bop.blo, bop.bhi);
    std::mt19937_64 prng(mix_seed(seed, 2));
    auto f = [&] {
      std::mt19937_64 r = prng;
      return project(bop.op(a, b), r);
    };
    rep.checks.push_back(grad_result(bop.name, check_gradients(f, {a, b})));
  }

  {
    const Tensor x = random_leaf({7, 3}, rng);
    const std::vector<std::size_t> seg{0, 2, 2, 1, 0, 2, 4};  // segment 3 stays empty
    std::mt19937_64 prng(mix_seed(seed, 3));
    auto f = [&] {
      std::mt19937_64 r = prng;
      return project(segment_mean(x, seg, 5), r);
    };
    rep.checks.push_back(grad_result("segment_mean", check_gradients(f, {x})));
  }
  {
    const Tensor x = random_leaf({2, 3, 3}, rng, -1, 1, 0.1);
    std::mt19937_64 prng(mix_seed(seed, 4));
    auto f = [&] {
      std::mt19937_64 r = prng;
      return project(normalize_normals(x), r);
    };
    rep.checks.push_back(grad_result("normalize_normals", check_gradients(f, {x})));
  }
  {
    const Tensor e = random_leaf({3, 3}, rng, -3, 3);
    std::mt19937_64 prng(mix_seed(seed, 5));
    auto f = [&] {
      std::mt19937_64 r = prng;
      return project(rotation_matrices(e), r);
    };
    rep.checks.push_back(grad_result("rotation_matrices", check_gradients(f, {e})));
  }

  // Occupancy with respect to every convex parameter, soft and paper sigma.
  for (double sigma : {1.0, kDefaultSigma}) {
    const std::size_t n = 2, hp = 6;
    const Tensor normals = random_leaf({n, hp, 3}, rng, -1, 1, 0.1);
    const Tensor offsets = random_leaf({n, hp}, rng, -0.4, -0.1);
    const Tensor blend = random_leaf({n, 1}, rng, 2.0, 6.0);
    const Tensor euler = random_leaf({n, 3}, rng, -1, 1);
    const Tensor trans = random_leaf({n, 3}, rng, -0.2, 0.2);
    const Tensor scl = random_leaf({n, 3}, rng, 0.6, 1.4);
    const Tensor pts = points_tensor(band_points(
        {ConvexBatch{normalize_normals(normals).detach(), offsets, blend, euler, trans, scl}},
        random_points(4000, rng, 0.5), sigma, 24, 6));
    std::mt19937_64 prng(mix_seed(seed, 6));
    auto f = [&] {
      ConvexBatch c{normalize_normals(normals), offsets, blend, euler, trans, scl};
      std::mt19937_64 r = prng;
      return project(raw_occupancy(c, pts, sigma), r);
    };
    rep.checks.push_back(grad_result(sigma == 1.0 ? "occupancy_sigma1" : "occupancy_sigma75",
                                     check_gradients(f, {normals, offsets, blend, euler, trans, scl})));
  }

  // Loss terms on a 2-level [2,3], H=6 model, differentiated with respect to
  // each level's convex parameters and the child attention.
  {
    const ModelConfig cfg = small_model({2, 3}, 6, 8);
    const HitModel model = HitModel::init(cfg, mix_seed(seed, 7));
    const SyntheticShape shape = generate_shape("table-4leg", mix_seed(seed, 8));
    const PointCloud pc = shape.sample_surface(64, mix_seed(seed, 9));
    QueryBatch qb;
    Tensor pts;

    struct LevelLeaves {
      Tensor normals, offsets, blend, euler, translation, scale, attention, onehot;
    };
    std::vector<LevelLeaves> lv;
    {
      NoGradGuard ng;
      auto [grid, decoded] = model.decode(pc);
      for (auto& [state, c] : decoded) {
        // Pull the blobs apart and soften them so every part sees nonzero gradient.
        LevelLeaves L{leaf_copy(c.normals), leaf_copy(c.offsets), leaf_copy(c.blend), leaf_copy(c.euler),
                      leaf_copy(c.translation), leaf_copy(c.scale), leaf_copy(state.attention),
                      Tensor::from(state.parent_onehot_st.shape(),
                                   std::vector<double>(state.parent_onehot_st.data().begin(),
                                                       state.parent_onehot_st.data().end()))};
        auto t = L.translation.mutable_data();
        std::uniform_real_distribution<double> u(-0.25, 0.25);
        for (double& x : t) x = u(rng);
        for (double& x : L.scale.mutable_data()) x = 1.0 + 0.2 * u(rng);
        for (double& x : L.blend.mutable_data()) x = 6.0 + u(rng);
        lv.push_back(L);
      }
      std::vector<ConvexBatch> fixed;
      for (const auto& L : lv)
        fixed.push_back({normalize_normals(L.normals), L.offsets, L.blend, L.euler, L.translation, L.scale});
      const QueryBatch pool = sample_queries(shape, 4000, mix_seed(seed, 10));
      qb.points = band_points(fixed, pool.points, cfg.sigma, 40, 8);
      for (const auto& p : qb.points) qb.gt_occupancy.push_back(shape.occupancy(p) ? 1.0 : 0.0);
      pts = points_tensor(qb.points);
    }
    const LossWeights w;
    auto build = [&](const std::function<Tensor(const LossInputs&)>& pick) {
      return [&, pick] {
        LossInputs in;
        in.gt = Tensor::from({qb.size()}, qb.gt_occupancy);
        Tensor parent = root_occupancy(qb.size());
        for (std::size_t l = 0; l < lv.size(); ++l) {
          const auto& L = lv[l];
          ConvexBatch c{normalize_normals(L.normals), L.offsets, L.blend, L.euler, L.translation, L.scale};
          const Tensor raw = raw_occupancy(c, pts, cfg.sigma);
          const Tensor sel = selected_parent_occupancy(parent, l == 0 ? root_selector(c.parts()) : L.onehot);
          const Tensor contained = sel * raw;
          in.unions.push_back(level_union(contained));
          in.parent_selected.push_back(sel);
          in.raw.push_back(raw);
          in.contained.push_back(contained);
          in.centers.push_back(L.translation);
          in.offsets.push_back(L.offsets);
          if (l > 0) in.child_attention.push_back(L.attention);
          parent = contained;
        }
        std::vector<Vec3> interior;
        for (std::size_t i = 0; i < qb.size(); ++i)
          if (qb.gt_occupancy[i] > 0.5) interior.push_back(qb.points[i]);
        in.interior = points_tensor(interior);
        return pick(in);
      };
    };
    std::vector<Tensor> leaves;
    for (const auto& L : lv)
      for (const auto& t : {L.normals, L.offsets, L.blend, L.euler, L.translation, L.scale}) leaves.push_back(t);
    leaves.push_back(lv[1].attention);

    rep.checks.push_back(grad_result("loss_recon", check_gradients(build([&](const LossInputs& in) {
      return recon_loss(in.gt, in.unions);
    }), leaves)));
    rep.checks.push_back(grad_result("loss_contain", check_gradients(build([&](const LossInputs& in) {
      return contain_loss(in.parent_selected, in.raw);
    }), leaves)));
    rep.checks.push_back(grad_result("loss_decomp", check_gradients(build([&](const LossInputs& in) {
      return decomp_loss(in.contained, 0.5);
    }), leaves)));
    rep.checks.push_back(grad_result("loss_guide", check_gradients(build([&](const LossInputs& in) {
      Tensor g = guide_loss(in.centers[0], in.interior);
      return g + guide_loss(in.centers[1], in.interior);
    }), leaves)));
    rep.checks.push_back(grad_result("loss_loc", check_gradients(build([&](const LossInputs& in) {
      return loc_loss(in.offsets[0]) + loc_loss(in.offsets[1]);
    }), leaves)));
    rep.checks.push_back(grad_result("loss_balance", check_gradients(build([&](const LossInputs& in) {
      return balance_loss(in.child_attention);
    }), leaves)));
    rep.checks.push_back(grad_result("loss_total", check_gradients(build([&](const LossInputs& in) {
      return total_loss(in, w).total;
    }), leaves)));
  }

  // End to end through encoder, attention and heads. The straight-through
  // selector is a surrogate gradient, so only level 1 (root-selected) terms
  // and the soft attention enter here.
  {
    const ModelConfig cfg = small_model({2, 3}, 6, 8);
    HitModel model = HitModel::init(cfg, mix_seed(seed, 11));
    const SyntheticShape shape = generate_shape("dumbbell", mix_seed(seed, 12));
    const PointCloud pc = shape.sample_surface(64, mix_seed(seed, 13));
    const QueryBatch qb = sample_queries(shape, 32, mix_seed(seed, 14));
    std::vector<Tensor> leaves;
    for (const auto& [name, t] : model.parameters()) leaves.push_back(t);
    auto f = [&] {
      const ForwardPass pass = model.forward(pc, qb.points);
      const LossInputs in = make_loss_inputs(pass, qb, 64, 0);
      const Tensor recon = recon_loss(in.gt, std::span(&in.unions[0], 1));
      return recon + guide_loss(in.centers[0], in.interior) + loc_loss(in.offsets[0]) +
             balance_loss(in.child_attention) + 0.1 * reduce_sum(square(pass.levels[1].state.features));
    };
    rep.checks.push_back(grad_result("model_end_to_end", check_gradients(f, leaves)));
  }

  rep.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

SuiteReport verify_invariants(std::uint64_t seed, std::size_t forwards, std::size_t queries) {
  const auto start = Clock::now();
  SuiteReport rep{"invariants", {}, 0.0};
  NoGradGuard no_grad;
  const std::vector<std::string> families{"table", "dumbbell", "lamp"};

  double worst_row = 0.0, worst_hot = 0.0;
  bool counts_ok = true, argmax_ok = true;
  for (std::size_t i = 0; i < forwards; ++i) {
    std::mt19937_64 rng(mix_seed(seed, 0x1a, i));
    std::uniform_int_distribution<std::size_t> parts(1, 6);
    std::vector<std::size_t> ppl(1 + i % 3);
    for (auto& p : ppl) p = parts(rng);
    const HitModel model = HitModel::init(small_model(ppl, 6, 8), mix_seed(seed, 0x1b, i));
    const SyntheticShape shape = generate_shape(families[i % families.size()], mix_seed(seed, 0x1c, i));
    const auto [grid, decoded] = model.decode(shape.sample_surface(128, mix_seed(seed, 0x1d, i)));
    for (std::size_t l = 0; l < decoded.size(); ++l) {
      const auto& st = decoded[l].first;
      counts_ok = counts_ok && st.features.size(0) == ppl[l] && decoded[l].second.parts() == ppl[l];
      const std::size_t n = st.attention.size(1);
      const auto a = st.attention.data();
      const auto h = st.parent_onehot_st.data();
      const auto arg = row_argmax(st.attention);
      for (std::size_t r = 0; r < st.attention.size(0); ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          sum += a[r * n + c];
          const double want = c == arg[r] ? 1.0 : 0.0;
          worst_hot = std::max(worst_hot, std::abs(h[r * n + c] - want));
        }
        worst_row = std::max(worst_row, std::abs(sum - 1.0));
        argmax_ok = argmax_ok && st.parent_index[r] == arg[r];
      }
    }
  }
  rep.checks.push_back({"attention_rows_stochastic", worst_row <= 1e-9, worst_row, 1e-9,
                        std::to_string(forwards) + " forwards"});
  rep.checks.push_back({"straight_through_one_hot", worst_hot == 0.0 && argmax_ok, worst_hot, 0.0, "exact"});
  rep.checks.push_back({"token_count_matches_codebook", counts_ok, counts_ok ? 0.0 : 1.0, 0.0, {}});

  {
    std::mt19937_64 rng(mix_seed(seed, 0x2a));
    const HitModel model = HitModel::init(small_model({3, 5, 7}, 8, 16), mix_seed(seed, 0x2b));
    const SyntheticShape shape = generate_shape("table", mix_seed(seed, 0x2c));
    const auto pts = random_points(queries, rng, 0.55);
    const ForwardPass pass = model.forward(shape.sample_surface(256, mix_seed(seed, 0x2d)), pts);
    std::size_t violations = 0;
    double worst = 0.0;
    for (std::size_t l = 1; l < pass.levels.size(); ++l) {
      const auto& lv = pass.levels[l];
      const auto c = lv.contained.data();
      const auto p = pass.levels[l - 1].contained.data();
      for (std::size_t s = 0; s < lv.contained.size(0); ++s) {
        const std::size_t par = lv.state.parent_index[s];
        for (std::size_t q = 0; q < pts.size(); ++q) {
          const double child = c[s * pts.size() + q], parent = p[par * pts.size() + q];
          if (child > parent) {
            ++violations;
            worst = std::max(worst, child - parent);
          }
        }
      }
    }
    rep.checks.push_back({"containment_child_le_parent", violations == 0, worst, 0.0,
                          std::to_string(queries) + " queries, " + std::to_string(violations) + " violations"});
    const auto raw = pass.levels[0].raw.data(), con = pass.levels[0].contained.data();
    std::size_t diff = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) diff += raw[i] != con[i];
    rep.checks.push_back({"root_level_contained_equals_raw", diff == 0, static_cast<double>(diff), 0.0, "bit-exact"});

    // Containment from a snapshot agrees with the differentiable forward.
    const HierarchySnapshot snap = model.snapshot(shape.sample_surface(256, mix_seed(seed, 0x2d)));
    const std::vector<Vec3> few(pts.begin(), pts.begin() + std::min<std::size_t>(pts.size(), 500));
    const OccupancyTable leaf = snap.contained(snap.level_count(), few);
    double gap = 0.0;
    const auto fwd = pass.levels.back().contained.data();
    for (std::size_t s = 0; s < leaf.parts; ++s)
      for (std::size_t q = 0; q < few.size(); ++q) gap = std::max(gap, std::abs(leaf.at(s, q) - fwd[s * pts.size() + q]));
    rep.checks.push_back({"snapshot_matches_forward", gap <= 1e-12, gap, 1e-12, {}});

    // Monotone maps of the leaf occupancies keep the segmentation. sqrt can
    // merge values one ulp apart, so near-ties are left out for it.
    const auto base = segment_points(leaf);
    OccupancyTable doubled = leaf, rooted = leaf;
    for (double& v : doubled.values) v *= 8.0;
    for (double& v : rooted.values) v = std::sqrt(v);
    std::size_t changed = segment_points(doubled) == base ? 0 : 1;
    const auto seg_root = segment_points(rooted);
    for (std::size_t q = 0; q < leaf.queries; ++q) {
      double top = -1.0, second = -1.0;
      for (std::size_t s = 0; s < leaf.parts; ++s) {
        const double v = leaf.at(s, q);
        if (v > top) {
          second = top;
          top = v;
        } else if (v > second) {
          second = v;
        }
      }
      if (top - second > 1e-9 && seg_root[q] != base[q]) ++changed;
    }
    rep.checks.push_back({"segmentation_monotone_covariant", changed == 0, static_cast<double>(changed), 0.0, {}});
  }
  rep.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

SuiteReport verify_oracle(std::uint64_t seed) {
  const auto start = Clock::now();
  SuiteReport rep{"oracle", {}, 0.0};
  NoGradGuard no_grad;
  (void)seed;

  {
    // Unit cube: six planes at distance 1/2, all responses equal at the center.
    const double delta = 4.0;
    const ConvexParams cube = ConvexParams::box({0.0, 0.0, 0.0}, {0.5, 0.5, 0.5}, delta);
    HierarchySnapshot snap;
    snap.levels.push_back({{cube}, {kRootParent}});
    const Vec3 center{0.0, 0.0, 0.0};
    const double got = snap.raw(1, std::span(&center, 1)).at(0, 0);
    double m = -delta * 0.5, lse = 0.0;
    for (int h = 0; h < 6; ++h) lse += std::exp(-delta * 0.5 - m);
    lse = m + std::log(lse);
    const double want = 1.0 / (1.0 + std::exp(kDefaultSigma * lse));
    rep.checks.push_back({"unit_cube_center_occupancy", std::abs(got - want) <= 1e-6, std::abs(got - want), 1e-6, {}});
  }
  {
    const double r = 0.4;
    ScalarField sphere = [r](std::span<const Vec3> pts) {
      std::vector<double> v;
      for (const auto& p : pts) v.push_back(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) < r ? 1.0 : 0.0);
      return v;
    };
    const std::size_t res = 64;
    const Mesh mesh = marching_cubes(sphere, res);
    const double cell = (Bounds{}.hi[0] - Bounds{}.lo[0]) / static_cast<double>(res - 1);
    double worst = 0.0;
    for (const auto& p : mesh.vertices) worst = std::max(worst, std::abs(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - r));
    rep.checks.push_back({"sphere_mc_radius", !mesh.empty() && worst < 2.0 * cell, worst, 2.0 * cell,
                          std::to_string(mesh.vertices.size()) + " vertices"});
    const long chi = mesh.euler_characteristic();
    rep.checks.push_back({"sphere_mc_euler_characteristic", chi == 2, static_cast<double>(chi), 2.0, {}});
  }
  {
    // Two disjoint cubes as a one-level snapshot against the analytic union.
    const Vec3 ca{-0.2, 0.0, 0.0}, cb{0.22, 0.05, 0.0}, half{0.15, 0.15, 0.15};
    HierarchySnapshot snap;
    snap.levels.push_back({{ConvexParams::box(ca, half, 400.0), ConvexParams::box(cb, half, 400.0)},
                           {kRootParent, kRootParent}});
    ScalarField analytic = [&](std::span<const Vec3> pts) {
      std::vector<double> v;
      for (const auto& p : pts) {
        auto in = [&](const Vec3& c) {
          return std::abs(p[0] - c[0]) <= half[0] && std::abs(p[1] - c[1]) <= half[1] && std::abs(p[2] - c[2]) <= half[2];
        };
        v.push_back(in(ca) || in(cb) ? 1.0 : 0.0);
      }
      return v;
    };
    const double iou = volumetric_iou(level_field(snap, 1), analytic, 64);
    rep.checks.push_back({"two_cube_union_iou", iou >= 0.95, iou, 0.95, "res 64"});

    std::vector<Vec3> pts;
    std::vector<int> truth;
    std::mt19937_64 rng(mix_seed(seed, 0x3a));
    std::uniform_real_distribution<double> u(-0.12, 0.12);
    for (int i = 0; i < 200; ++i) {
      const Vec3& c = i % 2 ? cb : ca;
      pts.push_back({c[0] + u(rng), c[1] + u(rng), c[2] + u(rng)});
      truth.push_back(i % 2);
    }
    const auto seg = segment_points(snap.contained(1, pts));
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < seg.size(); ++i) wrong += static_cast<int>(seg[i]) != truth[i];
    rep.checks.push_back({"two_cube_segmentation", wrong == 0, static_cast<double>(wrong), 0.0, "misassigned points"});
  }
  {
    auto cube_field = [](double h) {
      return ScalarField([h](std::span<const Vec3> pts) {
        std::vector<double> v;
        for (const auto& p : pts) v.push_back(std::max({std::abs(p[0]), std::abs(p[1]), std::abs(p[2])}) <= h ? 1.0 : 0.0);
        return v;
      });
    };
    const double iou = volumetric_iou(cube_field(0.2), cube_field(0.4), 40);
    rep.checks.push_back({"nested_cube_iou", std::abs(iou - 0.125) < 1e-12, std::abs(iou - 0.125), 1e-12, {}});
  }
  {
    // Nested containment: the child convex never exceeds its parent.
    HierarchySnapshot snap;
    snap.levels.push_back({{ConvexParams::box({0, 0, 0}, {0.3, 0.3, 0.3}, 20.0)}, {kRootParent}});
    snap.levels.push_back({{ConvexParams::box({0.2, 0, 0}, {0.3, 0.1, 0.1}, 20.0)}, {0}});
    std::mt19937_64 rng(mix_seed(seed, 0x3b));
    const auto pts = random_points(5000, rng, 0.55);
    const auto parent = snap.contained(1, pts), child = snap.contained(2, pts);
    std::size_t bad = 0;
    for (std::size_t q = 0; q < pts.size(); ++q) bad += child.at(0, q) > parent.at(0, q);
    rep.checks.push_back({"nested_cube_containment", bad == 0, static_cast<double>(bad), 0.0, {}});
  }
  {
    const double d = 0.37;
    const Tensor a = Tensor::from({1, 3}, {0.1, -0.2, 0.3});
    const Tensor b = Tensor::from({1, 3}, {0.1, -0.2, 0.3 + d});
    const double g = guide_loss(a, b).item();
    rep.checks.push_back({"guide_singletons", std::abs(g - 2 * d * d) <= 1e-12, std::abs(g - 2 * d * d), 1e-12, {}});
    const Tensor attn = Tensor::from({4, 2}, {1, 0, 1, 0, 1, 0, 1, 0});
    const double bal = balance_loss(std::span(&attn, 1)).item();
    rep.checks.push_back({"balance_concentrated", bal == 8.0, std::abs(bal - 8.0), 0.0, {}});
    const Tensor disjoint = Tensor::from({2, 4}, {1, 1, 0, 0, 0, 0, 1, 1});
    const double dec = decomp_loss(std::span(&disjoint, 1), 1.05).item();
    rep.checks.push_back({"decomp_disjoint", dec == 0.0, dec, 0.0, {}});
    const Vec3 pa{0, 0, 0}, pb{0, 0, d};
    const double cd = chamfer(std::span(&pa, 1), std::span(&pb, 1));
    rep.checks.push_back({"chamfer_singletons", std::abs(cd - 2 * d * d) <= 1e-15, std::abs(cd - 2 * d * d), 1e-15, {}});
  }
  rep.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

SuiteReport run_verify_suite(const std::string& name, std::uint64_t seed) {
  if (name == "gradcheck") return verify_gradcheck(seed);
  if (name == "invariants") return verify_invariants(seed);
  if (name == "oracle") return verify_oracle(seed);
  throw ConfigError("unknown verify suite '" + name + "' (expected gradcheck, invariants or oracle)");
}

}  // namespace hit
