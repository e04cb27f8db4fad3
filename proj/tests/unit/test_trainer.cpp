#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "hit/errors.hpp"
#include "hit/trainer.hpp"

using namespace hit;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny() {
  TrainConfig c = TrainConfig::desk();
  c.model.decoder.parts_per_level = {2, 3};
  c.model.decoder.latent_dim = c.model.encoder.latent_dim = 8;
  c.model.encoder.resolution = 4;
  c.model.planes = 6;
  c.num_shapes = 6;
  c.batch_size = 2;
  c.max_steps = 6;
  c.queries_per_shape = 64;
  c.points_per_shape = 64;
  c.surface_pool = 256;
  c.interior_cap = 32;
  c.validation_shapes = 2;
  c.seed = 5;
  return c;
}

std::vector<TrainingShape> data_for(const TrainConfig& c) {
  return prepare_dataset(generate_dataset(c.num_shapes, c.families, c.seed), c.surface_pool, c.seed);
}

bool same_params(const HitModel& a, const HitModel& b) {
  const auto pa = a.parameters(), pb = b.parameters();
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i].first != pb[i].first || pa[i].second.shape() != pb[i].second.shape()) return false;
    const auto x = pa[i].second.data(), y = pb[i].second.data();
    if (!std::equal(x.begin(), x.end(), y.begin())) return false;
  }
  return true;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hit_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("desk defaults") {
  const TrainConfig c = TrainConfig::desk();
  CHECK(c.model.decoder.parts_per_level == std::vector<std::size_t>{2, 4, 8});
  CHECK(c.model.planes == 8);
  CHECK(c.model.encoder.resolution == 8);
  CHECK(c.model.decoder.latent_dim == 32);
  CHECK(c.num_shapes == 100);
  CHECK(c.max_steps == 2000);
  CHECK(c.weights.lambda_contain == 0.01);
  CHECK(c.weights.tau_overlap == 1.05);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config text round-trips and rejects unknown keys") {
  TrainConfig c = tiny();
  c.weights.recon_norm = ReconNorm::kAbsolute;
  c.families = {"table-3leg", "lamp"};
  std::istringstream in(format_train_config(c));
  const TrainConfig back = parse_train_config(in);
  CHECK(format_train_config(back) == format_train_config(c));

  std::istringstream comments("# header\nmax_steps = 7   # trailing\n\nlearning_rate=0.01\n");
  const TrainConfig d = parse_train_config(comments);
  CHECK(d.max_steps == 7);
  CHECK(d.learning_rate == 0.01);
  CHECK(d.model.planes == 8);

  std::istringstream bad("warp_factor = 9\n");
  CHECK_THROWS_AS(parse_train_config(bad), ConfigError);
  std::istringstream neg("batch_size = -1\n");
  CHECK_THROWS_AS(parse_train_config(neg), ConfigError);
  std::istringstream noeq("max_steps 4\n");
  CHECK_THROWS_AS(parse_train_config(noeq), ConfigError);
}

TEST_CASE("metric lines round-trip") {
  StepMetrics m{12, 1e-3, 0.5, 0.4, 0.01, 0.02, 0.03, 0.04, 0.05};
  const StepMetrics back = parse_metrics(format_metrics(m));
  CHECK(back.step == 12);
  CHECK(back.total == m.total);
  CHECK(back.balance == m.balance);
  CHECK_THROWS(parse_metrics("step=1 nonsense"));
}

TEST_CASE("adam update matches the textbook step") {
  TrainConfig c = tiny();
  Checkpoint ck = init_checkpoint(c);
  auto params = ck.model.parameters();
  const std::vector<double> before(params[0].second.data().begin(), params[0].second.data().end());
  for (auto& [name, t] : params) {
    t.zero_grad();
    auto g = t.mutable_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = 0.1 * static_cast<double>(i % 5) - 0.2;
  }
  ck.step = 0;
  adam_update(ck);
  const auto after = ck.model.parameters()[0].second.data();
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double g = 0.1 * static_cast<double>(i % 5) - 0.2;
    const double m = (1 - c.beta1) * g / (1 - c.beta1), v = (1 - c.beta2) * g * g / (1 - c.beta2);
    CHECK(after[i] == doctest::Approx(before[i] - c.learning_rate * m / (std::sqrt(v) + c.eps)).epsilon(1e-12));
  }
}

TEST_CASE("same seed gives identical runs and resume replays exactly") {
  const TrainConfig c = tiny();
  const auto data = data_for(c);
  std::vector<std::string> log_a, log_b;
  Checkpoint a = init_checkpoint(c), b = init_checkpoint(c);
  train_until(a, data, 6, [&](const StepMetrics& m, const Checkpoint&) { log_a.push_back(format_metrics(m)); });
  train_until(b, data, 6, [&](const StepMetrics& m, const Checkpoint&) { log_b.push_back(format_metrics(m)); });
  CHECK(log_a == log_b);
  CHECK(same_params(a.model, b.model));

  const fs::path dir = scratch("resume");
  Checkpoint half = init_checkpoint(c);
  train_until(half, data, 3);
  save_checkpoint(half, dir / "half.ckpt");
  Checkpoint resumed = load_checkpoint(dir / "half.ckpt");
  CHECK(resumed.step == 3);
  CHECK(same_params(resumed.model, half.model));
  std::vector<std::string> tail;
  train_until(resumed, data, 6, [&](const StepMetrics& m, const Checkpoint&) { tail.push_back(format_metrics(m)); });
  CHECK(same_params(resumed.model, a.model));
  CHECK(std::vector<std::string>(log_a.begin() + 3, log_a.end()) == tail);
  fs::remove_all(dir);
}

TEST_CASE("train writes a log and a final checkpoint") {
  TrainConfig c = tiny();
  c.max_steps = 3;
  c.checkpoint_every = 2;
  const fs::path dir = scratch("train");
  const TrainOutputs out = train(c, dir);
  CHECK(fs::exists(out.final_checkpoint));
  CHECK(fs::exists(dir / "step_2.ckpt"));
  std::istringstream log(slurp(out.log));
  std::string line;
  std::size_t steps = 0;
  while (std::getline(log, line))
    if (line.rfind("step=", 0) == 0) ++steps;
  CHECK(steps == 3);
  const Checkpoint ck = load_checkpoint(out.final_checkpoint, c.model);
  CHECK(ck.step == 3);
  fs::remove_all(dir);
}

TEST_CASE("corrupt or mismatched checkpoints are rejected") {
  const TrainConfig c = tiny();
  const fs::path dir = scratch("corrupt");
  const Checkpoint ck = init_checkpoint(c);
  save_checkpoint(ck, dir / "ok.ckpt");
  const std::string bytes = slurp(dir / "ok.ckpt");
  {
    std::ofstream cut(dir / "cut.ckpt", std::ios::binary);
    cut << bytes.substr(0, bytes.size() / 2);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), LoadError);
  ModelConfig other = c.model;
  other.planes = 7;
  CHECK_THROWS_AS(load_checkpoint(dir / "ok.ckpt", other), LoadError);
  CHECK_THROWS(load_checkpoint(dir / "missing.ckpt"));
  fs::remove_all(dir);
}

TEST_CASE("validation loss ignores the step stream") {
  const TrainConfig c = tiny();
  const auto data = data_for(c);
  Checkpoint ck = init_checkpoint(c);
  const double v1 = validation_loss(ck, data);
  ck.step = 40;
  CHECK(validation_loss(ck, data) == v1);
  CHECK(std::isfinite(v1));
}

}  // TEST_SUITE
