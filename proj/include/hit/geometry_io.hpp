#pragma once

// Meshes, hierarchy export and evaluation metrics.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hit/hierarchy.hpp"
#include "hit/point_cloud.hpp"

namespace hit {

// Batched scalar field: one value per query point.
using ScalarField = std::function<std::vector<double>(std::span<const Vec3>)>;

// Axis-aligned sampling box; grid samples include both corners.
struct Bounds {
  Vec3 lo{-0.55, -0.55, -0.55};
  Vec3 hi{0.55, 0.55, 0.55};
};

// res^3 samples, x fastest.
struct SampleGrid {
  std::size_t res = 0;
  Bounds bounds;
  std::vector<double> values;

  double cell(int axis) const { return (bounds.hi[axis] - bounds.lo[axis]) / static_cast<double>(res - 1); }
  Vec3 point(std::size_t i, std::size_t j, std::size_t k) const;
  double at(std::size_t i, std::size_t j, std::size_t k) const { return values[i + res * (j + res * k)]; }
};

std::vector<Vec3> grid_points(std::size_t res, const Bounds& bounds);
SampleGrid sample_grid(const ScalarField& field, std::size_t res, const Bounds& bounds = {});

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool empty() const { return triangles.empty(); }
  // V - E + F over welded vertices.
  long euler_characteristic() const;
  // Signed volume from the divergence theorem; positive for outward winding.
  double signed_volume() const;
};

// Triangles wind outward (field > threshold is inside). Vertices on shared
// grid edges are welded.
Mesh marching_cubes(const SampleGrid& grid, double threshold = 0.5);
Mesh marching_cubes(const ScalarField& field, std::size_t res, double threshold = 0.5, const Bounds& bounds = {});

void write_obj(const std::filesystem::path& path, const Mesh& mesh, const std::string& comment = {});

// Argmax over parts per query, lowest index on ties.
std::vector<std::size_t> segment_points(const OccupancyTable& leaf_contained);

inline constexpr int kUnassigned = -1;

// Leaf code -> ground-truth label, kUnassigned for codes with no points.
struct LabelMap {
  std::vector<int> code_labels;

  int label(std::size_t code) const { return code < code_labels.size() ? code_labels[code] : kUnassigned; }
  std::vector<int> apply(std::span<const std::size_t> seg) const;
};

// Majority label per code; ties go to the lowest label id.
LabelMap associate_labels(std::span<const int> reference_labels, std::span<const std::size_t> seg,
                          std::size_t codes);

struct SegmentationScore {
  std::map<int, double> per_label;  // labels present in the ground truth
  double mean = 0.0;
};

SegmentationScore segmentation_iou(std::span<const int> pred, std::span<const int> gt);

// Voxel centers of a res^3 grid over `bounds`, both fields thresholded at 0.5.
// Two empty fields score 1.
double volumetric_iou(const ScalarField& a, const ScalarField& b, std::size_t res,
                      const Bounds& bounds = {{-0.5, -0.5, -0.5}, {0.5, 0.5, 0.5}});

// Sum of both directed mean nearest-neighbor squared distances.
double chamfer(std::span<const Vec3> a, std::span<const Vec3> b);

// Uniform samples on a triangle mesh (area weighted).
std::vector<Vec3> sample_mesh(const Mesh& mesh, std::size_t n, std::uint64_t seed);

// Contained occupancy of one part as a field.
ScalarField part_field(const HierarchySnapshot& snap, std::size_t level, std::size_t part);
// Max-union of a level as a field.
ScalarField level_field(const HierarchySnapshot& snap, std::size_t level);

struct TreeNode {
  std::size_t level = 1;
  std::size_t index = 0;
  long parent = kRootParent;
  bool has_mesh = false;
};

struct HierarchyTree {
  HierarchySnapshot snapshot;
  std::vector<TreeNode> nodes;
};

struct ExportOptions {
  std::size_t res = 64;
  double threshold = 0.5;
  Bounds bounds;
};

struct ExportSummary {
  std::vector<std::filesystem::path> meshes;
  std::filesystem::path tree;
  std::size_t skipped = 0;  // parts with an empty isosurface
  // Children whose mesh leaves the parent's box grown by two cells.
  std::vector<TreeNode> containment_violations;
};

// level<l>_part<i>.obj per non-empty part and hierarchy.tree.
ExportSummary export_hierarchy(const HierarchySnapshot& snap, const std::filesystem::path& dir,
                               const ExportOptions& opt = {});

// Tree text: "hit-tree 1", "sigma", "levels", then per part a node line
// "node level index parent mesh|empty H blend e0 e1 e2 t0 t1 t2 s0 s1 s2 omin omean omax"
// followed by H "plane nx ny nz o" lines, then "end".
std::string format_tree(const HierarchySnapshot& snap, std::span<const TreeNode> nodes);
HierarchyTree parse_tree(const std::string& text);
HierarchyTree read_tree(const std::filesystem::path& path);

}  // namespace hit
