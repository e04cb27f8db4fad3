#include "hit/geometry_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include "hit/errors.hpp"

namespace hit {

namespace {

#include "mc_tables.inc"

// Corner offsets in table order.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
// Each table edge as (start corner, axis); the edge runs in +axis.
constexpr int kEdge[12][2] = {{0, 0}, {1, 1}, {3, 0}, {0, 1}, {4, 0}, {5, 1},
                              {7, 0}, {4, 1}, {0, 2}, {1, 2}, {2, 2}, {3, 2}};

constexpr std::size_t kChunk = 65536;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void check_res(std::size_t res, const char* what) {
  if (res < 8) throw ConfigError(std::string(what) + ": resolution must be >= 8, got " + std::to_string(res));
}

std::vector<double> eval_chunked(const ScalarField& field, std::span<const Vec3> pts) {
  std::vector<double> out;
  out.reserve(pts.size());
  for (std::size_t b = 0; b < pts.size(); b += kChunk) {
    const auto part = field(pts.subspan(b, std::min(kChunk, pts.size() - b)));
    if (part.size() != std::min(kChunk, pts.size() - b)) throw DimensionError("field returned wrong value count");
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::pair<Vec3, Vec3> bbox(const std::vector<Vec3>& v) {
  Vec3 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max(),
          std::numeric_limits<double>::max()};
  Vec3 hi{-lo[0], -lo[1], -lo[2]};
  for (const auto& p : v)
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], p[a]);
      hi[a] = std::max(hi[a], p[a]);
    }
  return {lo, hi};
}

}  // namespace

Vec3 SampleGrid::point(std::size_t i, std::size_t j, std::size_t k) const {
  return {bounds.lo[0] + cell(0) * static_cast<double>(i), bounds.lo[1] + cell(1) * static_cast<double>(j),
          bounds.lo[2] + cell(2) * static_cast<double>(k)};
}

std::vector<Vec3> grid_points(std::size_t res, const Bounds& bounds) {
  SampleGrid g{res, bounds, {}};
  std::vector<Vec3> pts;
  pts.reserve(res * res * res);
  for (std::size_t k = 0; k < res; ++k)
    for (std::size_t j = 0; j < res; ++j)
      for (std::size_t i = 0; i < res; ++i) pts.push_back(g.point(i, j, k));
  return pts;
}

SampleGrid sample_grid(const ScalarField& field, std::size_t res, const Bounds& bounds) {
  check_res(res, "sample_grid");
  const auto pts = grid_points(res, bounds);
  return SampleGrid{res, bounds, eval_chunked(field, pts)};
}

long Mesh::euler_characteristic() const {
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  std::set<std::uint32_t> used;
  for (const auto& t : triangles)
    for (int e = 0; e < 3; ++e) {
      const auto a = t[e], b = t[(e + 1) % 3];
      edges.insert({std::min(a, b), std::max(a, b)});
      used.insert(a);
    }
  return static_cast<long>(used.size()) - static_cast<long>(edges.size()) + static_cast<long>(triangles.size());
}

double Mesh::signed_volume() const {
  double v = 0.0;
  for (const auto& t : triangles) {
    const Vec3 &a = vertices[t[0]], &b = vertices[t[1]], &c = vertices[t[2]];
    v += a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0]);
  }
  return v / 6.0;
}

Mesh marching_cubes(const SampleGrid& grid, double threshold) {
  check_res(grid.res, "marching_cubes");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("marching_cubes: threshold must be in (0, 1)");
  const std::size_t n = grid.res;
  if (grid.values.size() != n * n * n) throw DimensionError("marching_cubes: grid value count mismatch");

  Mesh mesh;
  std::vector<std::int64_t> edge_vertex(3 * n * n * n, -1);
  auto vertex_on = [&](std::size_t i, std::size_t j, std::size_t k, int axis) -> std::uint32_t {
    const std::size_t id = 3 * (i + n * (j + n * k)) + static_cast<std::size_t>(axis);
    if (edge_vertex[id] >= 0) return static_cast<std::uint32_t>(edge_vertex[id]);
    std::size_t i2 = i, j2 = j, k2 = k;
    (axis == 0 ? i2 : axis == 1 ? j2 : k2) += 1;
    const double va = grid.at(i, j, k), vb = grid.at(i2, j2, k2);
    const double t = std::abs(vb - va) < 1e-12 ? 0.5 : std::clamp((threshold - va) / (vb - va), 0.0, 1.0);
    const Vec3 a = grid.point(i, j, k), b = grid.point(i2, j2, k2);
    mesh.vertices.push_back({a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])});
    edge_vertex[id] = static_cast<std::int64_t>(mesh.vertices.size() - 1);
    return static_cast<std::uint32_t>(edge_vertex[id]);
  };

  for (std::size_t k = 0; k + 1 < n; ++k)
    for (std::size_t j = 0; j + 1 < n; ++j)
      for (std::size_t i = 0; i + 1 < n; ++i) {
        int cube = 0;
        for (int c = 0; c < 8; ++c)
          if (grid.at(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]) < threshold) cube |= 1 << c;
        if (kEdgeTable[cube] == 0) continue;
        std::uint32_t ids[12] = {};
        for (int e = 0; e < 12; ++e) {
          if (!(kEdgeTable[cube] & (1 << e))) continue;
          const int* c = kCorner[kEdge[e][0]];
          ids[e] = vertex_on(i + c[0], j + c[1], k + c[2], kEdge[e][1]);
        }
        for (int t = 0; kTriTable[cube][t] != -1; t += 3) {
          mesh.triangles.push_back({ids[kTriTable[cube][t]], ids[kTriTable[cube][t + 1]], ids[kTriTable[cube][t + 2]]});
        }
      }
  return mesh;
}

Mesh marching_cubes(const ScalarField& field, std::size_t res, double threshold, const Bounds& bounds) {
  return marching_cubes(sample_grid(field, res, bounds), threshold);
}

void write_obj(const std::filesystem::path& path, const Mesh& mesh, const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write mesh " + path.string());
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& v : mesh.vertices) out << "v " << fmt_short(v[0]) << ' ' << fmt_short(v[1]) << ' ' << fmt_short(v[2]) << '\n';
  for (const auto& t : mesh.triangles) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  if (!out) throw IoError("failed writing mesh " + path.string());
}

std::vector<std::size_t> segment_points(const OccupancyTable& leaf) {
  if (leaf.parts == 0) throw DimensionError("segment_points: no leaf parts");
  std::vector<std::size_t> seg(leaf.queries, 0);
  for (std::size_t q = 0; q < leaf.queries; ++q) {
    double best = leaf.at(0, q);
    for (std::size_t p = 1; p < leaf.parts; ++p)
      if (leaf.at(p, q) > best) {
        best = leaf.at(p, q);
        seg[q] = p;
      }
  }
  return seg;
}

std::vector<int> LabelMap::apply(std::span<const std::size_t> seg) const {
  std::vector<int> out;
  out.reserve(seg.size());
  for (std::size_t s : seg) out.push_back(label(s));
  return out;
}

LabelMap associate_labels(std::span<const int> reference_labels, std::span<const std::size_t> seg,
                          std::size_t codes) {
  if (reference_labels.size() != seg.size()) {
    throw DimensionError("associate_labels: " + std::to_string(reference_labels.size()) + " labels vs " +
                         std::to_string(seg.size()) + " segment ids");
  }
  if (reference_labels.empty()) throw InputDomainError("associate_labels: reference has no labeled points");
  std::vector<std::map<int, std::size_t>> counts(codes);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (seg[i] >= codes) throw DimensionError("associate_labels: code " + std::to_string(seg[i]) + " out of range");
    ++counts[seg[i]][reference_labels[i]];
  }
  LabelMap m{std::vector<int>(codes, kUnassigned)};
  for (std::size_t c = 0; c < codes; ++c) {
    std::size_t best = 0;
    for (const auto& [label, n] : counts[c])
      if (n > best) {
        best = n;
        m.code_labels[c] = label;
      }
  }
  return m;
}

SegmentationScore segmentation_iou(std::span<const int> pred, std::span<const int> gt) {
  if (pred.size() != gt.size()) {
    throw DimensionError("segmentation_iou: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(gt.size()) + " ground-truth labels");
  }
  std::map<int, std::pair<std::size_t, std::size_t>> counts;  // label -> (intersection, union)
  for (int g : gt) counts.try_emplace(g, 0, 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (pred[i] == gt[i]) {
      ++counts[gt[i]].first;
      ++counts[gt[i]].second;
    } else {
      ++counts[gt[i]].second;
      if (auto it = counts.find(pred[i]); it != counts.end()) ++it->second.second;
    }
  }
  SegmentationScore s;
  for (const auto& [label, c] : counts) s.per_label[label] = static_cast<double>(c.first) / static_cast<double>(c.second);
  double sum = 0.0;
  for (const auto& [label, v] : s.per_label) sum += v;
  s.mean = s.per_label.empty() ? 0.0 : sum / static_cast<double>(s.per_label.size());
  return s;
}

double volumetric_iou(const ScalarField& a, const ScalarField& b, std::size_t res, const Bounds& bounds) {
  check_res(res, "volumetric_iou");
  std::vector<Vec3> centers;
  centers.reserve(res * res * res);
  const double r = static_cast<double>(res);
  for (std::size_t k = 0; k < res; ++k)
    for (std::size_t j = 0; j < res; ++j)
      for (std::size_t i = 0; i < res; ++i) {
        const double idx[3] = {static_cast<double>(i), static_cast<double>(j), static_cast<double>(k)};
        Vec3 p;
        for (int d = 0; d < 3; ++d) p[d] = bounds.lo[d] + (idx[d] + 0.5) * (bounds.hi[d] - bounds.lo[d]) / r;
        centers.push_back(p);
      }
  const auto va = eval_chunked(a, centers), vb = eval_chunked(b, centers);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const bool ia = va[i] > 0.5, ib = vb[i] > 0.5;
    inter += ia && ib;
    uni += ia || ib;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  if (a.empty() || b.empty()) throw InputDomainError("chamfer: empty point set");
  auto directed = [](std::span<const Vec3> from, std::span<const Vec3> to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) {
        const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      sum += best;
    }
    return sum / static_cast<double>(from.size());
  };
  return directed(a, b) + directed(b, a);
}

std::vector<Vec3> sample_mesh(const Mesh& mesh, std::size_t n, std::uint64_t seed) {
  if (mesh.empty()) throw InputDomainError("sample_mesh: empty mesh");
  std::vector<double> areas;
  areas.reserve(mesh.triangles.size());
  for (const auto& t : mesh.triangles) {
    const Vec3 &a = mesh.vertices[t[0]], &b = mesh.vertices[t[1]], &c = mesh.vertices[t[2]];
    const Vec3 u{b[0] - a[0], b[1] - a[1], b[2] - a[2]}, v{c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    const Vec3 x{u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]};
    areas.push_back(std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]));
  }
  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<Vec3> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = mesh.triangles[pick(rng)];
    const double r1 = std::sqrt(u01(rng)), r2 = u01(rng);
    const double wa = 1.0 - r1, wb = r1 * (1.0 - r2), wc = r1 * r2;
    Vec3 p;
    for (int d = 0; d < 3; ++d)
      p[d] = wa * mesh.vertices[t[0]][d] + wb * mesh.vertices[t[1]][d] + wc * mesh.vertices[t[2]][d];
    out.push_back(p);
  }
  return out;
}

ScalarField part_field(const HierarchySnapshot& snap, std::size_t level, std::size_t part) {
  if (level < 1 || level > snap.level_count() || part >= snap.level(level).convexes.size()) {
    throw DimensionError("part_field: no part " + std::to_string(part) + " at level " + std::to_string(level));
  }
  return [&snap, level, part](std::span<const Vec3> pts) {
    const OccupancyTable t = snap.contained(level, pts);
    return std::vector<double>(t.values.begin() + static_cast<long>(part * t.queries),
                               t.values.begin() + static_cast<long>((part + 1) * t.queries));
  };
}

ScalarField level_field(const HierarchySnapshot& snap, std::size_t level) {
  if (level < 1 || level > snap.level_count()) throw DimensionError("level_field: no level " + std::to_string(level));
  return [&snap, level](std::span<const Vec3> pts) { return snap.level_union(level, pts); };
}

std::string format_tree(const HierarchySnapshot& snap, std::span<const TreeNode> nodes) {
  std::ostringstream out;
  out << "hit-tree 1\n";
  out << "sigma " << fmt(snap.sigma) << '\n';
  out << "levels " << snap.level_count() << '\n';
  std::size_t n = 0;
  for (std::size_t l = 1; l <= snap.level_count(); ++l) {
    const auto& lv = snap.level(l);
    for (std::size_t i = 0; i < lv.convexes.size(); ++i, ++n) {
      const auto& c = lv.convexes[i];
      const bool mesh = n < nodes.size() ? nodes[n].has_mesh : false;
      double omin = std::numeric_limits<double>::infinity(), omax = -omin, osum = 0.0;
      for (double o : c.offsets) {
        omin = std::min(omin, o);
        omax = std::max(omax, o);
        osum += o;
      }
      out << "node " << l << ' ' << i << ' ' << lv.parents[i] << ' ' << (mesh ? "mesh" : "empty") << ' '
          << c.planes() << ' ' << fmt(c.blend_sharpness);
      for (const auto* v : {&c.euler, &c.translation, &c.scale})
        for (double x : *v) out << ' ' << fmt(x);
      out << ' ' << fmt(omin) << ' ' << fmt(osum / static_cast<double>(c.planes())) << ' ' << fmt(omax) << '\n';
      for (std::size_t h = 0; h < c.planes(); ++h) {
        out << "plane " << fmt(c.normals[h][0]) << ' ' << fmt(c.normals[h][1]) << ' ' << fmt(c.normals[h][2]) << ' '
            << fmt(c.offsets[h]) << '\n';
      }
    }
  }
  out << "end\n";
  return out.str();
}

HierarchyTree parse_tree(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw LoadError(std::string("tree file truncated before ") + what);
    return std::istringstream(line);
  };
  {
    auto s = next("header");
    std::string magic;
    int version = 0;
    s >> magic >> version;
    if (magic != "hit-tree") throw LoadError("not a tree file");
    if (version != 1) throw LoadError("unsupported tree version " + std::to_string(version));
  }
  HierarchyTree tree;
  std::string key;
  {
    auto s = next("sigma");
    if (!(s >> key >> tree.snapshot.sigma) || key != "sigma") throw LoadError("tree file: bad sigma line");
  }
  std::size_t levels = 0;
  {
    auto s = next("levels");
    if (!(s >> key >> levels) || key != "levels" || levels == 0) throw LoadError("tree file: bad levels line");
  }
  tree.snapshot.levels.resize(levels);
  while (true) {
    auto s = next("end");
    s >> key;
    if (key == "end") break;
    if (key != "node") throw LoadError("tree file: unexpected line '" + line + "'");
    TreeNode node;
    std::string status;
    std::size_t planes = 0;
    ConvexParams c;
    double summary[3];
    s >> node.level >> node.index >> node.parent >> status >> planes >> c.blend_sharpness;
    for (auto* v : {&c.euler, &c.translation, &c.scale})
      for (double& x : *v) s >> x;
    s >> summary[0] >> summary[1] >> summary[2];
    if (!s || node.level < 1 || node.level > levels || (status != "mesh" && status != "empty")) {
      throw LoadError("tree file: bad node line '" + line + "'");
    }
    node.has_mesh = status == "mesh";
    for (std::size_t h = 0; h < planes; ++h) {
      auto p = next("plane");
      Vec3 nrm;
      double o = 0.0;
      if (!(p >> key >> nrm[0] >> nrm[1] >> nrm[2] >> o) || key != "plane") {
        throw LoadError("tree file: bad plane line '" + line + "'");
      }
      c.normals.push_back(nrm);
      c.offsets.push_back(o);
    }
    auto& lv = tree.snapshot.levels[node.level - 1];
    if (node.index != lv.convexes.size()) throw LoadError("tree file: nodes out of order at '" + line + "'");
    lv.convexes.push_back(std::move(c));
    lv.parents.push_back(node.parent);
    tree.nodes.push_back(node);
  }
  try {
    tree.snapshot.validate();
  } catch (const ConfigError& e) {
    throw LoadError(std::string("tree file: ") + e.what());
  }
  return tree;
}

HierarchyTree read_tree(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read tree " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_tree(ss.str());
  } catch (const LoadError& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
}

ExportSummary export_hierarchy(const HierarchySnapshot& snap, const std::filesystem::path& dir,
                               const ExportOptions& opt) {
  snap.validate();
  check_res(opt.res, "export_hierarchy");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  ExportSummary summary;
  std::vector<TreeNode> nodes;
  const auto pts = grid_points(opt.res, opt.bounds);
  const double slack = 2.0 * std::max({SampleGrid{opt.res, opt.bounds, {}}.cell(0),
                                       SampleGrid{opt.res, opt.bounds, {}}.cell(1),
                                       SampleGrid{opt.res, opt.bounds, {}}.cell(2)});
  std::vector<std::pair<Vec3, Vec3>> parent_boxes, boxes;
  std::vector<bool> parent_has, has;
  for (std::size_t l = 1; l <= snap.level_count(); ++l) {
    const OccupancyTable table = snap.contained(l, pts);
    const auto& lv = snap.level(l);
    boxes.assign(lv.convexes.size(), {});
    has.assign(lv.convexes.size(), false);
    for (std::size_t i = 0; i < lv.convexes.size(); ++i) {
      SampleGrid g{opt.res, opt.bounds,
                   std::vector<double>(table.values.begin() + static_cast<long>(i * table.queries),
                                       table.values.begin() + static_cast<long>((i + 1) * table.queries))};
      const Mesh mesh = marching_cubes(g, opt.threshold);
      TreeNode node{l, i, lv.parents[i], !mesh.empty()};
      nodes.push_back(node);
      if (mesh.empty()) {
        ++summary.skipped;
        continue;
      }
      const auto path = dir / ("level" + std::to_string(l) + "_part" + std::to_string(i) + ".obj");
      write_obj(path, mesh, "level " + std::to_string(l) + " part " + std::to_string(i) + " parent " +
                                std::to_string(lv.parents[i]));
      summary.meshes.push_back(path);
      boxes[i] = bbox(mesh.vertices);
      has[i] = true;
      if (l > 1) {
        const auto p = static_cast<std::size_t>(lv.parents[i]);
        bool inside = parent_has[p];
        for (int a = 0; inside && a < 3; ++a) {
          inside = boxes[i].first[a] >= parent_boxes[p].first[a] - slack &&
                   boxes[i].second[a] <= parent_boxes[p].second[a] + slack;
        }
        if (!inside) summary.containment_violations.push_back(node);
      }
    }
    parent_boxes = boxes;
    parent_has = has;
  }
  summary.tree = dir / "hierarchy.tree";
  std::ofstream out(summary.tree, std::ios::binary);
  if (!out) throw IoError("cannot write tree " + summary.tree.string());
  out << format_tree(snap, nodes);
  if (!out) throw IoError("failed writing tree " + summary.tree.string());
  return summary;
}

}  // namespace hit
