#pragma once

#include <span>
#include <vector>

#include "hit/convex.hpp"
#include "hit/decoder.hpp"

namespace hit {

// Dense [parts, queries] table of occupancy values.
struct OccupancyTable {
  std::size_t parts = 0;
  std::size_t queries = 0;
  std::vector<double> values;

  double at(std::size_t part, std::size_t query) const { return values[part * queries + query]; }
};

struct SnapshotLevel {
  std::vector<ConvexParams> convexes;
  std::vector<long> parents;  // kRootParent for level 1
};

// Materialized part tree of one shape. Levels are 1-based in the API;
// levels[0] holds the parts of level 1.
struct HierarchySnapshot {
  std::vector<SnapshotLevel> levels;
  double sigma = kDefaultSigma;

  std::size_t level_count() const { return levels.size(); }
  const SnapshotLevel& level(std::size_t l) const { return levels.at(l - 1); }

  // Throws ConfigError when parent links or convex parameters are invalid.
  void validate() const;
  std::vector<TreeEdge> edges() const;

  OccupancyTable raw(std::size_t level, std::span<const Vec3> points) const;
  // Occupancy nested in every ancestor, composed from the root downwards.
  OccupancyTable contained(std::size_t level, std::span<const Vec3> points) const;
  // max over the parts of `level`.
  std::vector<double> level_union(std::size_t level, std::span<const Vec3> points) const;
};

}  // namespace hit
