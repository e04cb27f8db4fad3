#pragma once

// Desk-scale training on procedural shapes.
//
// Every random draw of step k (batch indices, point subsamples, queries,
// guide interior samples) is seeded from mix_seed(seed, k, ...) so a run
// resumed from a checkpoint at step k replays the uninterrupted run exactly.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "hit/model.hpp"
#include "hit/synthetic.hpp"

namespace hit {

struct TrainConfig {
  ModelConfig model;
  LossWeights weights;

  std::size_t max_steps = 2000;  // 0: derive from epochs
  std::size_t epochs = 0;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  std::size_t queries_per_shape = 1024;
  std::size_t points_per_shape = 1024;
  std::uint64_t seed = 0;

  std::size_t num_shapes = 100;
  std::vector<std::string> families{"table", "dumbbell"};
  std::size_t surface_pool = 4096;  // surface samples cached per shape
  std::size_t interior_cap = 256;
  double query_padding = 0.05;
  double query_jitter = 0.02;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  std::size_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::size_t validation_shapes = 4;

  // Levels [2,4,8], H=8, R=8, D=32.
  static TrainConfig desk();
  // Batch 32, lr 1e-4, 2048 points.
  static TrainConfig paper();

  std::size_t total_steps() const;
  void validate() const;
};

// Flat "key = value" text over the desk defaults; '#' starts a comment.
// Unknown keys throw ConfigError.
TrainConfig parse_train_config(std::istream& in);
TrainConfig read_train_config(const std::filesystem::path& path);
std::string format_train_config(const TrainConfig& cfg);
// Applies one key/value pair; throws ConfigError on unknown keys or bad values.
void set_train_config_value(TrainConfig& cfg, const std::string& key, const std::string& value);

struct TrainingShape {
  SyntheticShape shape;
  PointCloud surface;  // cached pool; per-step inputs are subsampled from it
};

std::vector<TrainingShape> prepare_dataset(const std::vector<SyntheticShape>& shapes, std::size_t pool,
                                           std::uint64_t seed);

struct AdamState {
  std::map<std::string, std::vector<double>> m;
  std::map<std::string, std::vector<double>> v;
};

struct Checkpoint {
  TrainConfig config;
  std::size_t step = 0;  // completed optimizer steps
  HitModel model;
  AdamState adam;
};

struct StepMetrics {
  std::size_t step = 0;  // 1-based index of the step just taken
  double lr = 0.0;
  double total = 0.0;
  double recon = 0.0;
  double contain = 0.0;
  double decomp = 0.0;
  double guide = 0.0;
  double loc = 0.0;
  double balance = 0.0;
};

// "step=.. lr=.. total=.. recon=.. contain=.. decomp=.. guide=.. loc=.. balance=.."
std::string format_metrics(const StepMetrics& m);
StepMetrics parse_metrics(const std::string& line);

Checkpoint init_checkpoint(const TrainConfig& cfg);

// Batch-mean loss and gradients for the given step; grads accumulate on the
// model parameters (callers zero them first).
StepMetrics accumulate_step(const Checkpoint& ck, const std::vector<TrainingShape>& data, std::size_t step);

// One Adam update using the gradients currently stored on the parameters.
void adam_update(Checkpoint& ck);

// Runs steps ck.step+1 .. until. Throws NumericError naming the first
// non-finite loss term.
void train_until(Checkpoint& ck, const std::vector<TrainingShape>& data, std::size_t until,
                 const std::function<void(const StepMetrics&, const Checkpoint&)>& on_step = {});

// Fixed validation slice: first `cfg.validation_shapes` shapes with queries
// seeded independently of the step stream. Returns the mean total loss.
double validation_loss(const Checkpoint& ck, const std::vector<TrainingShape>& data);

struct TrainOutputs {
  std::filesystem::path log;
  std::filesystem::path final_checkpoint;
};

// Full run writing <out>/metrics.log, <out>/step_<k>.ckpt at the configured
// cadence and <out>/final.ckpt.
TrainOutputs train(const TrainConfig& cfg, const std::filesystem::path& out);

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Additionally checks every tensor against the shapes implied by `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace hit
