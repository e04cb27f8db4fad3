#pragma once

// Procedural multi-part shapes with exact occupancy and part labels.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "hit/convex.hpp"
#include "hit/point_cloud.hpp"

namespace hit {

enum class PrimitiveKind { kBox, kCylinder, kSphere };

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kBox;
  Vec3 center{0.0, 0.0, 0.0};
  // Box: half extents. Cylinder: {radius, half height, unused}. Sphere: {radius, -, -}.
  Vec3 size{0.0, 0.0, 0.0};
  int axis = 2;  // cylinder axis
  int label = 0;

  bool contains(const Vec3& p) const;
  double surface_area() const;
  Vec3 sample_surface(std::mt19937_64& rng) const;
};

struct SyntheticShape {
  std::string family;
  std::vector<Primitive> primitives;

  bool occupancy(const Vec3& p) const;
  // Label of the first primitive containing p, or -1 outside.
  int label_of(const Vec3& p) const;
  std::size_t part_count() const { return primitives.size(); }
  bool has_surface_sampler() const { return !primitives.empty(); }

  // Labeled points on the boundary of the union (samples inside another
  // primitive are rejected).
  PointCloud sample_surface(std::size_t n, std::uint64_t seed) const;
};

// Known families: "table" (3-6 legs), "table-3leg" .. "table-6leg",
// "dumbbell", "lamp". Unknown names throw ConfigError.
SyntheticShape generate_shape(const std::string& family, std::uint64_t seed);

// Shape i uses families[i % families.size()] with a seed derived from (seed, i).
std::vector<SyntheticShape> generate_dataset(std::size_t n, const std::vector<std::string>& families,
                                             std::uint64_t seed);

// Half uniform in [-0.5 - padding, 0.5 + padding]^3, half on the surface
// plus Gaussian jitter. Shapes without a surface sampler get all-uniform queries.
QueryBatch sample_queries(const SyntheticShape& shape, std::size_t q, std::uint64_t seed,
                          double padding = 0.05, double jitter = 0.02);

void write_shape(const std::filesystem::path& path, const SyntheticShape& shape);
SyntheticShape read_shape(const std::filesystem::path& path);

// Deterministic seed mixing (splitmix64 over the inputs).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0, std::uint64_t d = 0);

}  // namespace hit
