#include "hit/point_cloud.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "hit/errors.hpp"

namespace hit {

PointCloud normalize_to_unit_cube(const PointCloud& pc) {
  PointCloud out = pc;
  if (pc.points.empty()) return out;
  Vec3 lo = pc.points.front();
  Vec3 hi = lo;
  for (const auto& p : pc.points)
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::min(lo[d], p[d]);
      hi[d] = std::max(hi[d], p[d]);
    }
  double extent = 0.0;
  for (int d = 0; d < 3; ++d) extent = std::max(extent, hi[d] - lo[d]);
  if (extent <= 0.0) extent = 1.0;
  for (auto& p : out.points)
    for (int d = 0; d < 3; ++d)
      p[d] = std::clamp((p[d] - 0.5 * (lo[d] + hi[d])) / extent, -0.5, 0.5);
  return out;
}

PointCloud subsample(const PointCloud& pc, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw ConfigError("subsample: n must be >= 1");
  if (pc.points.empty()) throw InputDomainError("subsample: empty point cloud");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> pick;
  pick.reserve(n);
  const std::size_t m = pc.points.size();
  if (n <= m) {
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> dist(i, m - 1);
      std::swap(idx[i], idx[dist(rng)]);
      pick.push_back(idx[i]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> dist(0, m - 1);
    for (std::size_t i = 0; i < n; ++i) pick.push_back(dist(rng));
  }
  PointCloud out;
  out.points.reserve(n);
  const bool labeled = pc.has_labels();
  for (std::size_t i : pick) {
    out.points.push_back(pc.points[i]);
    if (labeled) out.labels.push_back(pc.labels[i]);
  }
  return out;
}

PointCloud read_xyz(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open point file " + path.string());
  PointCloud pc;
  std::string line;
  std::size_t line_no = 0;
  bool any_label = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Vec3 p{};
    if (!(ls >> p[0] >> p[1] >> p[2])) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": expected x y z");
    }
    int label = 0;
    if (ls >> label) {
      any_label = true;
      pc.labels.push_back(label);
    } else if (any_label) {
      throw LoadError(path.string() + ":" + std::to_string(line_no) + ": missing label column");
    }
    pc.points.push_back(p);
  }
  if (!pc.labels.empty() && pc.labels.size() != pc.points.size()) {
    throw LoadError(path.string() + ": label column present on only some lines");
  }
  return pc;
}

void write_xyz(const std::filesystem::path& path, const PointCloud& pc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write point file " + path.string());
  out << std::setprecision(17);
  const bool labeled = pc.has_labels();
  for (std::size_t i = 0; i < pc.points.size(); ++i) {
    const auto& p = pc.points[i];
    out << p[0] << ' ' << p[1] << ' ' << p[2];
    if (labeled) out << ' ' << pc.labels[i];
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace hit
