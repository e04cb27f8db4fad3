#include "hit/hierarchy.hpp"

#include <algorithm>
#include <string>

#include "hit/errors.hpp"

namespace hit {

namespace {

// Bounds the [N, Q, H] temporaries of raw_occupancy.
constexpr std::size_t kChunk = 8192;

}  // namespace

void HierarchySnapshot::validate() const {
  if (levels.empty()) throw ConfigError("snapshot has no levels");
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const auto& lv = levels[l];
    if (lv.convexes.empty()) throw ConfigError("snapshot level " + std::to_string(l + 1) + " is empty");
    if (lv.parents.size() != lv.convexes.size()) {
      throw ConfigError("snapshot level " + std::to_string(l + 1) + " parent count mismatch");
    }
    for (const auto& c : lv.convexes) c.validate();
    for (long p : lv.parents) {
      const bool ok = l == 0 ? p == kRootParent
                             : p >= 0 && static_cast<std::size_t>(p) < levels[l - 1].convexes.size();
      if (!ok) throw ConfigError("snapshot level " + std::to_string(l + 1) + " has an invalid parent link");
    }
  }
}

std::vector<TreeEdge> HierarchySnapshot::edges() const {
  std::vector<TreeEdge> out;
  for (std::size_t l = 0; l < levels.size(); ++l)
    for (std::size_t s = 0; s < levels[l].parents.size(); ++s) out.push_back({l + 1, s, levels[l].parents[s]});
  return out;
}

OccupancyTable HierarchySnapshot::raw(std::size_t level, std::span<const Vec3> points) const {
  const auto& lv = this->level(level);
  OccupancyTable t{lv.convexes.size(), points.size(), std::vector<double>(lv.convexes.size() * points.size())};
  if (points.empty()) return t;
  NoGradGuard no_grad;
  const ConvexBatch batch = ConvexBatch::from_params(lv.convexes);
  for (std::size_t begin = 0; begin < points.size(); begin += kChunk) {
    const std::size_t end = std::min(points.size(), begin + kChunk);
    const Tensor occ = raw_occupancy(batch, points_tensor(points.subspan(begin, end - begin)), sigma);
    const auto d = occ.data();
    const std::size_t w = end - begin;
    for (std::size_t p = 0; p < t.parts; ++p)
      std::copy_n(d.data() + p * w, w, t.values.data() + p * t.queries + begin);
  }
  return t;
}

OccupancyTable HierarchySnapshot::contained(std::size_t level, std::span<const Vec3> points) const {
  OccupancyTable current = raw(1, points);
  for (std::size_t l = 2; l <= level; ++l) {
    OccupancyTable child = raw(l, points);
    const auto& parents = this->level(l).parents;
    for (std::size_t s = 0; s < child.parts; ++s) {
      const auto p = static_cast<std::size_t>(parents[s]);
      for (std::size_t q = 0; q < child.queries; ++q)
        child.values[s * child.queries + q] = current.at(p, q) * child.values[s * child.queries + q];
    }
    current = std::move(child);
  }
  return current;
}

std::vector<double> HierarchySnapshot::level_union(std::size_t level, std::span<const Vec3> points) const {
  const OccupancyTable t = contained(level, points);
  std::vector<double> out(t.queries, 0.0);
  for (std::size_t q = 0; q < t.queries; ++q) {
    double m = t.at(0, q);
    for (std::size_t p = 1; p < t.parts; ++p) m = std::max(m, t.at(p, q));
    out[q] = m;
  }
  return out;
}

}  // namespace hit
