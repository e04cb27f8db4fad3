#include "hit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "hit/errors.hpp"

namespace hit {

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Axis-aligned bounding box of a primitive.
void extend_bounds(const Primitive& p, Vec3& lo, Vec3& hi) {
  Vec3 half{};
  switch (p.kind) {
    case PrimitiveKind::kBox:
      half = p.size;
      break;
    case PrimitiveKind::kCylinder:
      half = {p.size[0], p.size[0], p.size[0]};
      half[p.axis] = p.size[1];
      break;
    case PrimitiveKind::kSphere:
      half = {p.size[0], p.size[0], p.size[0]};
      break;
  }
  for (int d = 0; d < 3; ++d) {
    lo[d] = std::min(lo[d], p.center[d] - half[d]);
    hi[d] = std::max(hi[d], p.center[d] + half[d]);
  }
}

// Uniformly rescales primitives into [-0.5, 0.5]^3 (bounding-box center,
// largest extent).
void normalize(SyntheticShape& s) {
  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (const auto& p : s.primitives) extend_bounds(p, lo, hi);
  double extent = 0.0;
  for (int d = 0; d < 3; ++d) extent = std::max(extent, hi[d] - lo[d]);
  for (auto& p : s.primitives) {
    for (int d = 0; d < 3; ++d) p.center[d] = (p.center[d] - 0.5 * (lo[d] + hi[d])) / extent;
    switch (p.kind) {
      case PrimitiveKind::kBox:
        for (double& v : p.size) v /= extent;
        break;
      case PrimitiveKind::kCylinder:
        p.size[0] /= extent;
        p.size[1] /= extent;
        break;
      case PrimitiveKind::kSphere:
        p.size[0] /= extent;
        break;
    }
  }
}

Primitive box(Vec3 c, Vec3 half, int label) { return {PrimitiveKind::kBox, c, half, 2, label}; }
Primitive cylinder(Vec3 c, double radius, double half_height, int axis, int label) {
  return {PrimitiveKind::kCylinder, c, {radius, half_height, 0.0}, axis, label};
}
Primitive sphere(Vec3 c, double radius, int label) { return {PrimitiveKind::kSphere, c, {radius, 0.0, 0.0}, 2, label}; }

SyntheticShape make_table(int legs, std::mt19937_64& rng) {
  SyntheticShape s;
  s.family = "table-" + std::to_string(legs) + "leg";
  const double height = uniform(rng, 0.45, 0.7);
  const double a = uniform(rng, 0.4, 0.55);
  const double b = uniform(rng, 0.3, 0.5);
  const double t = uniform(rng, 0.035, 0.06);
  const double r = uniform(rng, 0.04, 0.06);
  s.primitives.push_back(box({0.0, 0.0, height - t}, {a, b, t}, 0));
  const double under = height - 2.0 * t;
  const double leg_top = under + 0.01;
  const double phase = kPi / legs;
  for (int i = 0; i < legs; ++i) {
    const double ang = phase + 2.0 * kPi * i / legs;
    const Vec3 c{(a - r - 0.03) * std::cos(ang), (b - r - 0.03) * std::sin(ang), 0.5 * leg_top};
    s.primitives.push_back(cylinder(c, r, 0.5 * leg_top, 2, i + 1));
  }
  return s;
}

SyntheticShape make_dumbbell(std::mt19937_64& rng) {
  SyntheticShape s;
  s.family = "dumbbell";
  const double radius = uniform(rng, 0.16, 0.24);
  const double half_len = uniform(rng, 0.35, 0.5);
  const double bar = uniform(rng, 0.05, 0.08);
  s.primitives.push_back(sphere({-half_len, 0.0, 0.0}, radius, 0));
  s.primitives.push_back(sphere({half_len, 0.0, 0.0}, radius, 1));
  s.primitives.push_back(cylinder({0.0, 0.0, 0.0}, bar, half_len, 0, 2));
  return s;
}

SyntheticShape make_lamp(std::mt19937_64& rng) {
  SyntheticShape s;
  s.family = "lamp";
  const double base_r = uniform(rng, 0.2, 0.3);
  const double base_h = uniform(rng, 0.02, 0.04);
  const double pole_r = uniform(rng, 0.03, 0.045);
  const double height = uniform(rng, 0.6, 0.9);
  const double shade = uniform(rng, 0.15, 0.25);
  s.primitives.push_back(cylinder({0.0, 0.0, base_h}, base_r, base_h, 2, 0));
  s.primitives.push_back(cylinder({0.0, 0.0, 0.5 * height}, pole_r, 0.5 * height, 2, 1));
  s.primitives.push_back(sphere({0.0, 0.0, height}, shade, 2));
  return s;
}

const char* kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::kBox:
      return "box";
    case PrimitiveKind::kCylinder:
      return "cylinder";
    case PrimitiveKind::kSphere:
      return "sphere";
  }
  return "?";
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = splitmix(a);
  h = splitmix(h ^ b);
  h = splitmix(h ^ c);
  return splitmix(h ^ d);
}

bool Primitive::contains(const Vec3& p) const {
  switch (kind) {
    case PrimitiveKind::kBox:
      return std::fabs(p[0] - center[0]) <= size[0] && std::fabs(p[1] - center[1]) <= size[1] &&
             std::fabs(p[2] - center[2]) <= size[2];
    case PrimitiveKind::kCylinder: {
      double radial = 0.0;
      for (int d = 0; d < 3; ++d)
        if (d != axis) radial += (p[d] - center[d]) * (p[d] - center[d]);
      return radial <= size[0] * size[0] && std::fabs(p[axis] - center[axis]) <= size[1];
    }
    case PrimitiveKind::kSphere: {
      double r2 = 0.0;
      for (int d = 0; d < 3; ++d) r2 += (p[d] - center[d]) * (p[d] - center[d]);
      return r2 <= size[0] * size[0];
    }
  }
  return false;
}

double Primitive::surface_area() const {
  switch (kind) {
    case PrimitiveKind::kBox:
      return 8.0 * (size[0] * size[1] + size[1] * size[2] + size[0] * size[2]);
    case PrimitiveKind::kCylinder:
      return 2.0 * kPi * size[0] * (2.0 * size[1]) + 2.0 * kPi * size[0] * size[0];
    case PrimitiveKind::kSphere:
      return 4.0 * kPi * size[0] * size[0];
  }
  return 0.0;
}

Vec3 Primitive::sample_surface(std::mt19937_64& rng) const {
  switch (kind) {
    case PrimitiveKind::kBox: {
      const double areas[3] = {size[1] * size[2], size[0] * size[2], size[0] * size[1]};
      double pick = uniform(rng, 0.0, areas[0] + areas[1] + areas[2]);
      int axis_n = 0;
      while (axis_n < 2 && pick > areas[axis_n]) pick -= areas[axis_n++];
      Vec3 p{};
      for (int d = 0; d < 3; ++d) p[d] = center[d] + uniform(rng, -size[d], size[d]);
      p[axis_n] = center[axis_n] + (uniform(rng, 0.0, 1.0) < 0.5 ? -size[axis_n] : size[axis_n]);
      return p;
    }
    case PrimitiveKind::kCylinder: {
      const double side = 2.0 * size[1];
      const double cap = 0.5 * size[0];  // per-cap area / (2 pi r)
      const double u = uniform(rng, 0.0, side + 2.0 * cap);
      const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
      Vec3 p = center;
      const double ang = uniform(rng, 0.0, 2.0 * kPi);
      if (u < side) {
        p[a1] += size[0] * std::cos(ang);
        p[a2] += size[0] * std::sin(ang);
        p[axis] += uniform(rng, -size[1], size[1]);
      } else {
        const double rr = size[0] * std::sqrt(uniform(rng, 0.0, 1.0));
        p[a1] += rr * std::cos(ang);
        p[a2] += rr * std::sin(ang);
        p[axis] += u < side + cap ? -size[1] : size[1];
      }
      return p;
    }
    case PrimitiveKind::kSphere: {
      std::normal_distribution<double> n(0.0, 1.0);
      Vec3 v{n(rng), n(rng), n(rng)};
      const double len = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
      return {center[0] + size[0] * v[0] / len, center[1] + size[0] * v[1] / len, center[2] + size[0] * v[2] / len};
    }
  }
  return center;
}

bool SyntheticShape::occupancy(const Vec3& p) const { return label_of(p) >= 0; }

int SyntheticShape::label_of(const Vec3& p) const {
  for (const auto& prim : primitives)
    if (prim.contains(p)) return prim.label;
  return -1;
}

PointCloud SyntheticShape::sample_surface(std::size_t n, std::uint64_t seed) const {
  if (primitives.empty()) throw ConfigError("sample_surface: shape has no primitives");
  std::mt19937_64 rng(seed);
  std::vector<double> areas;
  for (const auto& p : primitives) areas.push_back(p.surface_area());
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  PointCloud pc;
  pc.points.reserve(n);
  pc.labels.reserve(n);
  std::size_t attempts = 0;
  while (pc.points.size() < n) {
    if (++attempts > 1000 * n + 1000) throw ConfigError("sample_surface: rejection sampling failed");
    const std::size_t i = pick(rng);
    Vec3 p = primitives[i].sample_surface(rng);
    bool buried = false;
    for (std::size_t j = 0; j < primitives.size() && !buried; ++j) buried = j != i && primitives[j].contains(p);
    if (buried) continue;
    for (double& c : p) c = std::clamp(c, -0.5, 0.5);
    pc.points.push_back(p);
    pc.labels.push_back(primitives[i].label);
  }
  return pc;
}

SyntheticShape generate_shape(const std::string& family, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SyntheticShape s;
  if (family == "table") {
    s = make_table(std::uniform_int_distribution<int>(3, 6)(rng), rng);
  } else if (family.starts_with("table-") && family.ends_with("leg") && family.size() == 10 &&
             family[6] >= '3' && family[6] <= '6') {
    s = make_table(family[6] - '0', rng);
  } else if (family == "dumbbell") {
    s = make_dumbbell(rng);
  } else if (family == "lamp") {
    s = make_lamp(rng);
  } else {
    throw ConfigError("unknown shape family '" + family + "'");
  }
  normalize(s);
  return s;
}

std::vector<SyntheticShape> generate_dataset(std::size_t n, const std::vector<std::string>& families,
                                             std::uint64_t seed) {
  if (n == 0) throw ConfigError("generate_dataset: n must be >= 1");
  if (families.empty()) throw ConfigError("generate_dataset: no families");
  std::vector<SyntheticShape> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_shape(families[i % families.size()], mix_seed(seed, i)));
  return out;
}

QueryBatch sample_queries(const SyntheticShape& shape, std::size_t q, std::uint64_t seed, double padding,
                          double jitter) {
  if (q < 2) throw ConfigError("sample_queries: q must be >= 2");
  std::mt19937_64 rng(seed);
  const std::size_t near = shape.has_surface_sampler() ? q / 2 : 0;
  QueryBatch batch;
  batch.points.reserve(q);
  const double lim = 0.5 + padding;
  for (std::size_t i = 0; i < q - near; ++i)
    batch.points.push_back({uniform(rng, -lim, lim), uniform(rng, -lim, lim), uniform(rng, -lim, lim)});
  if (near > 0) {
    const PointCloud surf = shape.sample_surface(near, mix_seed(seed, 0x5eed));
    std::normal_distribution<double> n(0.0, jitter);
    for (const auto& p : surf.points) {
      Vec3 x{};
      for (int d = 0; d < 3; ++d) x[d] = std::clamp(p[d] + n(rng), -lim, lim);
      batch.points.push_back(x);
    }
  }
  batch.gt_occupancy.reserve(q);
  for (const auto& p : batch.points) batch.gt_occupancy.push_back(shape.occupancy(p) ? 1.0 : 0.0);
  return batch;
}

void write_shape(const std::filesystem::path& path, const SyntheticShape& shape) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write shape file " + path.string());
  out << std::setprecision(17) << "hit-shape 1\nfamily " << shape.family << '\n';
  for (const auto& p : shape.primitives) {
    out << "primitive " << kind_name(p.kind) << ' ' << p.center[0] << ' ' << p.center[1] << ' ' << p.center[2]
        << ' ' << p.size[0] << ' ' << p.size[1] << ' ' << p.size[2] << ' ' << p.axis << ' ' << p.label << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

SyntheticShape read_shape(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open shape file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "hit-shape 1") {
    throw LoadError(path.string() + ": not a version-1 shape file");
  }
  SyntheticShape s;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "family") {
      ls >> s.family;
    } else if (key == "primitive") {
      std::string kind;
      Primitive p;
      ls >> kind >> p.center[0] >> p.center[1] >> p.center[2] >> p.size[0] >> p.size[1] >> p.size[2] >> p.axis >>
          p.label;
      if (!ls) throw LoadError(path.string() + ": malformed primitive line");
      if (kind == "box") {
        p.kind = PrimitiveKind::kBox;
      } else if (kind == "cylinder") {
        p.kind = PrimitiveKind::kCylinder;
      } else if (kind == "sphere") {
        p.kind = PrimitiveKind::kSphere;
      } else {
        throw LoadError(path.string() + ": unknown primitive '" + kind + "'");
      }
      s.primitives.push_back(p);
    } else {
      throw LoadError(path.string() + ": unknown key '" + key + "'");
    }
  }
  return s;
}

}  // namespace hit
