#include "hit/convex.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "hit/errors.hpp"

namespace hit {

namespace {

// Initial blob: planes at unit distance, world scale 3, and the softest
// sharpness that still keeps points 0.5 out along every normal occupied.
constexpr double kInitOffset = -1.0;
constexpr double kInitScale = 3.0;
constexpr double kInitRadius = 0.5;

double inverse_softplus(double y) { return std::log(std::expm1(y)); }

std::vector<Vec3> fibonacci_sphere(std::size_t n) {
  std::vector<Vec3> out(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (std::size_t i = 0; i < n; ++i) {
    const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * static_cast<double>(i);
    out[i] = {r * std::cos(phi), y, r * std::sin(phi)};
  }
  return out;
}

// Smallest sharpness whose blob (planes at |offset| around the origin) is
// still occupied at `radius` along every normal direction.
double sharpness_for_radius(const std::vector<Vec3>& normals, double offset, double radius) {
  auto phi_at = [&](double delta) {
    double worst = -1e300;
    for (const auto& u : normals) {
      double s = 0.0;
      for (const auto& n : normals) {
        const double dot = n[0] * u[0] + n[1] * u[1] + n[2] * u[2];
        s += std::exp(delta * (radius * dot + offset));
      }
      worst = std::max(worst, std::log(s));
    }
    return worst;
  };
  double lo = 1e-3, hi = 1e3;
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    (phi_at(mid) < 0.0 ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

void ConvexParams::validate() const {
  if (normals.size() < 4) throw ConfigError("convex needs at least 4 planes");
  if (offsets.size() != normals.size()) throw ConfigError("convex offsets/normals size mismatch");
  for (const auto& n : normals) {
    const double len = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
    if (!std::isfinite(len) || std::fabs(len - 1.0) > 1e-9) throw ConfigError("convex normal is not unit length");
  }
  if (!(blend_sharpness > 0.0)) throw ConfigError("convex blend sharpness must be positive");
  for (double s : scale)
    if (!(s > kPositiveFloor * 0.5)) throw ConfigError("convex scale must be positive");
}

ConvexParams ConvexParams::box(const Vec3& center, const Vec3& half, double blend_sharpness) {
  ConvexParams p;
  p.blend_sharpness = blend_sharpness;
  p.translation = center;
  for (int axis = 0; axis < 3; ++axis)
    for (double sign : {1.0, -1.0}) {
      Vec3 n{0.0, 0.0, 0.0};
      n[axis] = sign;
      p.normals.push_back(n);
      p.offsets.push_back(-half[axis]);
    }
  return p;
}

ConvexParams ConvexBatch::part(std::size_t i) const {
  const std::size_t h = planes();
  ConvexParams p;
  p.normals.resize(h);
  p.offsets.resize(h);
  const auto n = normals.data();
  const auto o = offsets.data();
  for (std::size_t k = 0; k < h; ++k) {
    p.normals[k] = {n[(i * h + k) * 3], n[(i * h + k) * 3 + 1], n[(i * h + k) * 3 + 2]};
    p.offsets[k] = o[i * h + k];
  }
  p.blend_sharpness = blend.data()[i];
  for (int d = 0; d < 3; ++d) {
    p.euler[d] = euler.data()[i * 3 + d];
    p.translation[d] = translation.data()[i * 3 + d];
    p.scale[d] = scale.data()[i * 3 + d];
  }
  return p;
}

ConvexBatch ConvexBatch::from_params(std::span<const ConvexParams> parts) {
  if (parts.empty()) throw DimensionError("ConvexBatch: no parts");
  const std::size_t n = parts.size();
  const std::size_t h = parts.front().planes();
  std::vector<double> normals, offsets, blend, euler, translation, scale;
  for (const auto& p : parts) {
    if (p.planes() != h || p.offsets.size() != h) {
      throw DimensionError("ConvexBatch: parts must share the plane count");
    }
    for (const auto& nv : p.normals) normals.insert(normals.end(), nv.begin(), nv.end());
    offsets.insert(offsets.end(), p.offsets.begin(), p.offsets.end());
    blend.push_back(p.blend_sharpness);
    euler.insert(euler.end(), p.euler.begin(), p.euler.end());
    translation.insert(translation.end(), p.translation.begin(), p.translation.end());
    scale.insert(scale.end(), p.scale.begin(), p.scale.end());
  }
  return ConvexBatch{Tensor::from({n, h, 3}, std::move(normals)), Tensor::from({n, h}, std::move(offsets)),
                     Tensor::from({n, 1}, std::move(blend)),       Tensor::from({n, 3}, std::move(euler)),
                     Tensor::from({n, 3}, std::move(translation)), Tensor::from({n, 3}, std::move(scale))};
}

std::size_t ConvexHead::planes() const { return (w2.size(1) - 10) / 4; }

ConvexHead ConvexHead::init(std::size_t latent_dim, std::size_t planes, std::mt19937_64& rng) {
  const std::size_t width = raw_width(planes);
  std::normal_distribution<double> dist(0.0, 1.0);
  auto gaussian = [&](Shape shape, double stddev) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = stddev * dist(rng);
    return Tensor::from(std::move(shape), std::move(v), true);
  };
  ConvexHead head;
  head.w1 = gaussian({latent_dim, latent_dim}, std::sqrt(2.0 / static_cast<double>(latent_dim)));
  head.b1 = Tensor::zeros({1, latent_dim}, true);
  head.w2 = gaussian({latent_dim, width}, 0.1 / std::sqrt(static_cast<double>(latent_dim)));

  const auto dirs = fibonacci_sphere(planes);
  std::vector<double> bias(width, 0.0);
  for (std::size_t k = 0; k < planes; ++k)
    for (int d = 0; d < 3; ++d) bias[k * 3 + d] = dirs[k][d];
  for (std::size_t k = 0; k < planes; ++k) bias[planes * 3 + k] = kInitOffset;
  const double delta = sharpness_for_radius(dirs, kInitOffset, kInitRadius / kInitScale);
  bias[planes * 4] = inverse_softplus(delta);
  for (int d = 0; d < 3; ++d) bias[planes * 4 + 7 + d] = inverse_softplus(kInitScale);
  head.b2 = Tensor::from({1, width}, std::move(bias), true);
  return head;
}

Tensor normalize_normals(const Tensor& raw) {
  if (raw.dim() == 0 || raw.shape().back() != 3) {
    throw DimensionError("normalize_normals: expected [..., 3], got " + shape_str(raw.shape()));
  }
  const std::size_t rows = raw.numel() / 3;
  const auto x = raw.data();
  std::vector<double> out(x.size());
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* v = x.data() + r * 3;
    const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    norms[r] = len;
    for (int d = 0; d < 3; ++d) out[r * 3 + d] = len < kDegenerateNormal ? kFallbackNormal[d] : v[d] / len;
  }
  return Tensor::from_op("normalize_normals", raw.shape(), std::move(out), {raw},
                         [rows, norms = std::move(norms)](Node& self) {
                           auto& g = self.inputs[0]->grad_buffer();
                           for (std::size_t r = 0; r < rows; ++r) {
                             if (norms[r] < kDegenerateNormal) continue;
                             const double* y = self.data.data() + r * 3;
                             const double* gy = self.grad.data() + r * 3;
                             const double dot = y[0] * gy[0] + y[1] * gy[1] + y[2] * gy[2];
                             for (int d = 0; d < 3; ++d) g[r * 3 + d] += (gy[d] - y[d] * dot) / norms[r];
                           }
                         });
}

ConvexBatch raw_to_convex(const Tensor& raw, std::size_t planes) {
  if (raw.dim() != 2 || raw.size(1) != raw_width(planes)) {
    throw DimensionError("raw_to_convex: expected [N, " + std::to_string(raw_width(planes)) + "], got " +
                         shape_str(raw.shape()));
  }
  const std::size_t n = raw.size(0);
  const std::size_t h = planes;
  ConvexBatch c;
  c.normals = normalize_normals(reshape(slice(raw, 1, 0, h * 3), {n, h, 3}));
  c.offsets = slice(raw, 1, h * 3, h * 4);
  c.blend = add_scalar(softplus(slice(raw, 1, h * 4, h * 4 + 1)), kPositiveFloor);
  c.euler = slice(raw, 1, h * 4 + 1, h * 4 + 4);
  c.translation = slice(raw, 1, h * 4 + 4, h * 4 + 7);
  c.scale = add_scalar(softplus(slice(raw, 1, h * 4 + 7, h * 4 + 10)), kPositiveFloor);
  return c;
}

ConvexBatch features_to_convex(const Tensor& features, const ConvexHead& head) {
  if (features.dim() != 2 || features.size(1) != head.w1.size(0)) {
    throw DimensionError("features_to_convex: features " + shape_str(features.shape()) +
                         " do not match head " + shape_str(head.w1.shape()));
  }
  const Tensor hidden = relu(matmul(features, head.w1) + head.b1);
  return raw_to_convex(matmul(hidden, head.w2) + head.b2, head.planes());
}

Tensor rotation_matrices(const Tensor& euler) {
  if (euler.dim() != 2 || euler.size(1) != 3) {
    throw DimensionError("rotation_matrices: expected [N, 3], got " + shape_str(euler.shape()));
  }
  const std::size_t n = euler.size(0);
  const Tensor cz = cos(slice(euler, 1, 0, 1)), sz = sin(slice(euler, 1, 0, 1));
  const Tensor cy = cos(slice(euler, 1, 1, 2)), sy = sin(slice(euler, 1, 1, 2));
  const Tensor cx = cos(slice(euler, 1, 2, 3)), sx = sin(slice(euler, 1, 2, 3));
  const Tensor r = concat({cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,  //
                           sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,  //
                           -sy, cy * sx, cy * cx},
                          1);
  return reshape(r, {n, 3, 3});
}

Tensor raw_occupancy(const ConvexBatch& c, const Tensor& points, double sigma) {
  if (points.dim() != 2 || points.size(1) != 3) {
    throw DimensionError("raw_occupancy: points must be [Q, 3], got " + shape_str(points.shape()));
  }
  const std::size_t n = c.parts(), h = c.planes(), q = points.size(0);
  // Local coordinates as rows: x~^T = ((x - t) / s)^T R, so n . x~ = u^T (R n).
  const Tensor u = (reshape(points, {1, q, 3}) - reshape(c.translation, {n, 1, 3})) /
                   reshape(c.scale, {n, 1, 3});
  const Tensor frame = bmm(rotation_matrices(c.euler), transpose(c.normals));  // [N, 3, H]
  const Tensor response = bmm(u, frame) + reshape(c.offsets, {n, 1, h});     // [N, Q, H]
  const Tensor phi = logsumexp(response * reshape(c.blend, {n, 1, 1}));       // [N, Q]
  return sigmoid(scale(phi, -sigma));
}

Tensor selected_parent_occupancy(const Tensor& parent_contained, const Tensor& parent_onehot_st) {
  return matmul(parent_onehot_st, parent_contained);
}

Tensor contained_occupancy(const Tensor& child_raw, const Tensor& parent_contained,
                           const Tensor& parent_onehot_st) {
  const Tensor parent = selected_parent_occupancy(parent_contained, parent_onehot_st);
  if (parent.shape() != child_raw.shape()) {
    throw DimensionError("contained_occupancy: parent selection " + shape_str(parent.shape()) +
                         " vs child " + shape_str(child_raw.shape()));
  }
  return parent * child_raw;
}

Tensor root_occupancy(std::size_t queries) { return Tensor::full({1, queries}, 1.0); }
Tensor root_selector(std::size_t parts) { return Tensor::full({parts, 1}, 1.0); }

Tensor level_union(const Tensor& contained) {
  if (contained.dim() != 2 || contained.size(0) == 0) {
    throw DimensionError("level_union: expected non-empty [N, Q], got " + shape_str(contained.shape()));
  }
  return reduce_max(contained, 0);
}

Tensor points_tensor(std::span<const Vec3> points) {
  std::vector<double> v;
  v.reserve(points.size() * 3);
  for (const auto& p : points) v.insert(v.end(), p.begin(), p.end());
  return Tensor::from({points.size(), 3}, std::move(v));
}

}  // namespace hit
