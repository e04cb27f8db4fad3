// hit: data generation, training, inference, export, evaluation, self-checks.
//
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hit/errors.hpp"
#include "hit/geometry_io.hpp"
#include "hit/model.hpp"
#include "hit/synthetic.hpp"
#include "hit/trainer.hpp"
#include "hit/verify.hpp"

namespace fs = std::filesystem;
using namespace hit;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

// --parts "2,4,8" and/or --levels N. With only --levels, level l gets 2^l parts.
void apply_hierarchy_flags(TrainConfig& cfg, const std::string& parts, std::size_t levels) {
  if (!parts.empty()) {
    set_train_config_value(cfg, "parts_per_level", parts);
    if (levels > 0 && cfg.model.decoder.levels() != levels) {
      throw UsageError("--levels " + std::to_string(levels) + " disagrees with --parts " + parts);
    }
  } else if (levels > 0) {
    std::vector<std::size_t> ppl;
    for (std::size_t l = 1; l <= levels; ++l) ppl.push_back(std::size_t{1} << l);
    cfg.model.decoder.parts_per_level = ppl;
  }
}

PointCloud load_points(const fs::path& path) {
  const PointCloud pc = read_xyz(path);
  for (const auto& p : pc.points)
    for (double c : p)
      if (c < -0.5 || c > 0.5) return normalize_to_unit_cube(pc);
  return pc;
}

HierarchySnapshot snapshot_from(const fs::path& ckpt, const fs::path& points) {
  const Checkpoint ck = load_checkpoint(ckpt);
  return ck.model.snapshot(load_points(points));
}

void print_export(const ExportSummary& s) {
  std::cout << "meshes " << s.meshes.size() << "\nempty_parts " << s.skipped << "\ntree " << s.tree.string()
            << '\n';
  for (const auto& n : s.containment_violations) {
    std::cerr << "warning: level " << n.level << " part " << n.index << " leaves its parent's box\n";
  }
}

int cmd_gen_data(const fs::path& out, std::uint64_t seed, std::size_t n, const std::string& families,
                 std::size_t points) {
  const auto shapes = generate_dataset(n, split_csv(families), seed);
  fs::create_directories(out);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "shape_%04zu", i);
    write_shape(out / (std::string(stem) + ".shape"), shapes[i]);
    write_xyz(out / (std::string(stem) + ".xyz"), shapes[i].sample_surface(points, mix_seed(seed, i, 0xda7a)));
  }
  std::cout << "wrote " << shapes.size() << " shapes to " << out.string() << '\n';
  return 0;
}

int cmd_train(const std::string& config, const fs::path& out, const std::optional<std::uint64_t>& seed,
              const std::string& parts, std::size_t levels, std::size_t steps, const std::string& resume) {
  TrainConfig cfg = config.empty() ? TrainConfig::desk() : read_train_config(config);
  if (seed) cfg.seed = *seed;
  apply_hierarchy_flags(cfg, parts, levels);
  if (steps > 0) cfg.max_steps = steps;
  cfg.validate();
  std::cerr << "seed=" << cfg.seed << " steps=" << cfg.total_steps() << '\n';
  if (resume.empty()) {
    const TrainOutputs res = train(cfg, out);
    std::cout << "log " << res.log.string() << "\ncheckpoint " << res.final_checkpoint.string() << '\n';
    return 0;
  }
  Checkpoint ck = load_checkpoint(resume, cfg.model);
  ck.config.max_steps = cfg.total_steps();
  const auto data =
      prepare_dataset(generate_dataset(ck.config.num_shapes, ck.config.families, ck.config.seed),
                      ck.config.surface_pool, ck.config.seed);
  fs::create_directories(out);
  std::ofstream log(out / "metrics.log", std::ios::app);
  train_until(ck, data, ck.config.total_steps(), [&](const StepMetrics& m, const Checkpoint& c) {
    log << format_metrics(m) << '\n';
    if (ck.config.checkpoint_every > 0 && c.step % ck.config.checkpoint_every == 0) {
      save_checkpoint(c, out / ("step_" + std::to_string(c.step) + ".ckpt"));
    }
  });
  save_checkpoint(ck, out / "final.ckpt");
  std::cout << "log " << (out / "metrics.log").string() << "\ncheckpoint " << (out / "final.ckpt").string() << '\n';
  return 0;
}

struct LevelScore {
  double chamfer = 0.0, iou = 0.0, seg = 0.0;
  std::size_t n = 0, seg_n = 0;
};

int cmd_eval(const fs::path& ckpt, const fs::path& dataset, const std::string& metrics, std::size_t res,
             std::uint64_t seed) {
  std::vector<std::string> wanted = split_csv(metrics);
  for (const auto& m : wanted)
    if (m != "iou" && m != "chamfer" && m != "seg") throw UsageError("unknown metric '" + m + "'");
  auto want = [&](const char* m) { return std::find(wanted.begin(), wanted.end(), m) != wanted.end(); };

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dataset))
    if (e.path().extension() == ".shape") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no .shape files in " + dataset.string());

  const Checkpoint ck = load_checkpoint(ckpt);
  const std::size_t levels = ck.model.config().decoder.levels();
  std::vector<LevelScore> score(levels);
  // One label association per family and level, from its first instance.
  std::map<std::pair<std::string, std::size_t>, LabelMap> assoc;
  std::cerr << "seed=" << seed << " res=" << res << '\n';

  for (std::size_t i = 0; i < files.size(); ++i) {
    const SyntheticShape shape = read_shape(files[i]);
    fs::path xyz = files[i];
    xyz.replace_extension(".xyz");
    const PointCloud pc = fs::exists(xyz) ? read_xyz(xyz) : shape.sample_surface(2048, mix_seed(seed, i));
    const HierarchySnapshot snap = ck.model.snapshot(pc);
    ScalarField truth = [&shape](std::span<const Vec3> pts) {
      std::vector<double> v;
      v.reserve(pts.size());
      for (const auto& p : pts) v.push_back(shape.occupancy(p) ? 1.0 : 0.0);
      return v;
    };
    const auto gt_surface = shape.sample_surface(2048, mix_seed(seed, i, 1));
    for (std::size_t l = 1; l <= levels; ++l) {
      auto& s = score[l - 1];
      ++s.n;
      if (want("iou")) s.iou += volumetric_iou(level_field(snap, l), truth, res);
      if (want("chamfer")) {
        const Mesh mesh = marching_cubes(level_field(snap, l), res);
        // An empty reconstruction scores as the distance to the origin.
        const std::vector<Vec3> recon = mesh.empty() ? std::vector<Vec3>{Vec3{0.0, 0.0, 0.0}}
                                                     : sample_mesh(mesh, 2048, mix_seed(seed, i, 2));
        s.chamfer += chamfer(recon, gt_surface.points);
      }
      if (want("seg") && gt_surface.has_labels()) {
        const auto seg = segment_points(snap.contained(l, gt_surface.points));
        const auto key = std::make_pair(shape.family, l);
        auto it = assoc.find(key);
        if (it == assoc.end())
          it = assoc.emplace(key, associate_labels(gt_surface.labels, seg, snap.level(l).convexes.size())).first;
        s.seg += segmentation_iou(it->second.apply(seg), gt_surface.labels).mean;
        ++s.seg_n;
      }
    }
  }

  std::printf("%-6s %-6s %-10s %-8s %-8s\n", "level", "parts", "chamfer", "vol_iou", "seg_iou");
  for (std::size_t l = 0; l < levels; ++l) {
    const auto& s = score[l];
    auto cell = [](bool on, double v, std::size_t n, const char* f) {
      char buf[32];
      if (!on || n == 0) return std::string("-");
      std::snprintf(buf, sizeof buf, f, v / static_cast<double>(n));
      return std::string(buf);
    };
    std::printf("%-6zu %-6zu %-10s %-8s %-8s\n", l + 1, ck.model.config().decoder.parts_per_level[l],
                cell(want("chamfer"), s.chamfer, s.n, "%.5f").c_str(), cell(want("iou"), s.iou, s.n, "%.4f").c_str(),
                cell(want("seg"), s.seg, s.seg_n, "%.4f").c_str());
  }
  std::printf("shapes %zu\n", files.size());
  return 0;
}

int cmd_verify(const std::string& suite, std::uint64_t seed) {
  const std::vector<std::string> suites =
      suite == "all" ? std::vector<std::string>{"gradcheck", "invariants", "oracle"} : std::vector<std::string>{suite};
  bool ok = true;
  for (const auto& s : suites) {
    const SuiteReport r = run_verify_suite(s, seed);
    std::cout << r.format();
    ok = ok && r.passed();
  }
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hit: hierarchical convex part decomposition"};
  app.require_subcommand(1);

  std::string config, ckpt, points, out, metrics = "iou,chamfer,seg", parts, families = "table,dumbbell", suite,
                                     tree, dataset, resume, suite_arg;
  std::uint64_t seed = 0;
  std::size_t levels = 0, res = 64, count = 100, npoints = 2048, steps = 0;

  auto* gen = app.add_subcommand("gen-data", "Write procedural shapes with labeled surface samples");
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--seed", seed, "Dataset seed")->capture_default_str();
  gen->add_option("--count", count, "Number of shapes")->capture_default_str();
  gen->add_option("--families", families, "Comma-separated families")->capture_default_str();
  gen->add_option("--points", npoints, "Surface samples per shape")->capture_default_str();

  auto* tr = app.add_subcommand("train", "Train on procedural shapes");
  tr->add_option("--config", config, "key = value config file (desk defaults otherwise)");
  tr->add_option("--out", out, "Output directory for metrics.log and checkpoints")->required();
  auto* seed_opt = tr->add_option("--seed", seed, "Overrides the config seed");
  tr->add_option("--parts", parts, "Parts per level, e.g. 2,4,8");
  tr->add_option("--levels", levels, "Level count (2^l parts at level l unless --parts is given)");
  tr->add_option("--steps", steps, "Overrides max_steps");
  tr->add_option("--resume", resume, "Continue from this checkpoint");

  auto* inf = app.add_subcommand("infer", "Encode a point cloud and export its part hierarchy");
  inf->add_option("--ckpt", ckpt, "Checkpoint")->required();
  inf->add_option("--points", points, "XYZ point cloud")->required();
  inf->add_option("--out", out, "Output directory")->required();
  inf->add_option("--res", res, "Marching cubes resolution")->capture_default_str();

  auto* ex = app.add_subcommand("export", "Mesh a hierarchy from a tree file or a checkpoint");
  ex->add_option("--tree", tree, "hierarchy.tree written by infer/export");
  ex->add_option("--ckpt", ckpt, "Checkpoint (with --points)");
  ex->add_option("--points", points, "XYZ point cloud (with --ckpt)");
  ex->add_option("--out", out, "Output directory")->required();
  ex->add_option("--res", res, "Marching cubes resolution")->capture_default_str();

  auto* ev = app.add_subcommand("eval", "Per-level Chamfer, volumetric IoU and segmentation IoU");
  ev->add_option("--ckpt", ckpt, "Checkpoint")->required();
  ev->add_option("--dataset", dataset, "Directory of .shape files (from gen-data)")->required();
  ev->add_option("--metrics", metrics, "Subset of iou,chamfer,seg")->capture_default_str();
  ev->add_option("--res", res, "Voxel / marching cubes resolution")->capture_default_str();
  ev->add_option("--seed", seed, "Sampling seed")->capture_default_str();

  auto* ver = app.add_subcommand("verify", "Run a self-check suite");
  ver->add_option("name", suite_arg, "gradcheck, invariants, oracle or all");
  ver->add_option("--suite", suite, "Same as the positional argument");
  ver->add_option("--seed", seed, "Fixture seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) return cmd_gen_data(out, seed, count, families, npoints);
    if (*tr) {
      return cmd_train(config, out, seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt, parts,
                       levels, steps, resume);
    }
    if (*inf) {
      const HierarchySnapshot snap = snapshot_from(ckpt, points);
      print_export(export_hierarchy(snap, out, {res, 0.5, {}}));
      return 0;
    }
    if (*ex) {
      if (tree.empty() == (ckpt.empty() || points.empty())) {
        throw UsageError("export needs either --tree or both --ckpt and --points");
      }
      const HierarchySnapshot snap = tree.empty() ? snapshot_from(ckpt, points) : read_tree(tree).snapshot;
      print_export(export_hierarchy(snap, out, {res, 0.5, {}}));
      return 0;
    }
    if (*ev) return cmd_eval(ckpt, dataset, metrics, res, seed);
    if (*ver) {
      if (!suite_arg.empty()) {
        if (!suite.empty() && suite != suite_arg) throw UsageError("conflicting suites " + suite + " and " + suite_arg);
        suite = suite_arg;
      }
      if (suite.empty()) throw UsageError("verify needs a suite (gradcheck, invariants, oracle or all)");
      if (suite != "all" && suite != "gradcheck" && suite != "invariants" && suite != "oracle") {
        throw UsageError("unknown suite '" + suite + "'");
      }
      return cmd_verify(suite, seed);
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
