#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace hit {

using Vec3 = std::array<double, 3>;

// Points normalized to [-0.5, 0.5]^3; `labels` is either empty or holds one
// ground-truth part id per point (evaluation only).
struct PointCloud {
  std::vector<Vec3> points;
  std::vector<int> labels;

  std::size_t size() const { return points.size(); }
  bool has_labels() const { return !points.empty() && labels.size() == points.size(); }
};

// Centers the bounding box at the origin and divides by the largest extent.
PointCloud normalize_to_unit_cube(const PointCloud& pc);

// Uniform choice without replacement when n <= size(), with replacement
// otherwise. Labels follow their points.
PointCloud subsample(const PointCloud& pc, std::size_t n, std::uint64_t seed);

// Whitespace-separated "x y z [label]" lines. Lines starting with '#' are skipped.
PointCloud read_xyz(const std::filesystem::path& path);
void write_xyz(const std::filesystem::path& path, const PointCloud& pc);

}  // namespace hit
