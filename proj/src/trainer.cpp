#include "hit/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hit/errors.hpp"

namespace hit {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t to_count(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    x = std::stoull(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("config key '" + key + "': trailing characters in '" + v + "'");
  return static_cast<std::size_t>(x);
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("config key '" + key + "': trailing characters in '" + v + "'");
  return x;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

void require_finite_params(const HitModel& model, std::size_t step) {
  for (const auto& [name, t] : model.parameters())
    for (double x : t.data())
      if (!std::isfinite(x)) {
        throw NumericError("parameter " + name + " became non-finite at step " + std::to_string(step));
      }
}

// Seed streams.
enum Stream : std::uint64_t { kBatch = 1, kPoints = 2, kQueries = 3, kInterior = 4, kValidation = 5 };

double shape_loss(const Checkpoint& ck, const TrainingShape& item, std::uint64_t points_seed,
                  std::uint64_t query_seed, std::uint64_t interior_seed, StepMetrics& acc, double weight,
                  bool backward) {
  const TrainConfig& cfg = ck.config;
  const PointCloud pc = subsample(item.surface, cfg.points_per_shape, points_seed);
  const QueryBatch q =
      sample_queries(item.shape, cfg.queries_per_shape, query_seed, cfg.query_padding, cfg.query_jitter);
  const ForwardPass pass = ck.model.forward(pc, q.points);
  const LossReport rep = total_loss(make_loss_inputs(pass, q, cfg.interior_cap, interior_seed), cfg.weights);
  const std::string bad = rep.first_nonfinite_term();
  if (!bad.empty()) throw NumericError("non-finite loss term '" + bad + "'");
  if (backward) scale(rep.total, weight).backward();
  acc.total += weight * rep.total.item();
  acc.recon += weight * rep.recon;
  acc.contain += weight * rep.contain;
  acc.decomp += weight * rep.decomp;
  acc.guide += weight * rep.guide;
  acc.loc += weight * rep.loc;
  acc.balance += weight * rep.balance;
  return rep.total.item();
}

void write_le(std::ostream& out, double x) {
  auto bits = std::bit_cast<std::uint64_t>(x);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

double read_le64(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

double read_le32(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return static_cast<double>(std::bit_cast<float>(bits));
}

struct ManifestEntry {
  std::string name;
  std::string dtype;
  Shape shape;
  std::size_t offset = 0;
  std::size_t count = 0;
};

}  // namespace

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.model.decoder.parts_per_level = {2, 4, 8};
  c.model.decoder.latent_dim = 32;
  c.model.encoder.latent_dim = 32;
  c.model.encoder.resolution = 8;
  c.model.planes = 8;
  return c;
}

TrainConfig TrainConfig::paper() {
  TrainConfig c;
  c.batch_size = 32;
  c.learning_rate = 1e-4;
  c.queries_per_shape = 2048;
  c.points_per_shape = 2048;
  return c;
}

std::size_t TrainConfig::total_steps() const {
  if (max_steps > 0) return max_steps;
  const std::size_t per_epoch = (num_shapes + batch_size - 1) / batch_size;
  return epochs * per_epoch;
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  if (max_steps == 0 && epochs == 0) throw ConfigError("one of max_steps or epochs must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be positive");
  if (queries_per_shape < 2) throw ConfigError("queries_per_shape must be >= 2");
  if (points_per_shape == 0) throw ConfigError("points_per_shape must be positive");
  if (num_shapes == 0) throw ConfigError("num_shapes must be positive");
  if (families.empty()) throw ConfigError("families must be nonempty");
  if (surface_pool == 0) throw ConfigError("surface_pool must be positive");
  if (!(query_padding >= 0.0)) throw ConfigError("query_padding must be >= 0");
  if (!(query_jitter > 0.0)) throw ConfigError("query_jitter must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
}

void set_train_config_value(TrainConfig& c, const std::string& key, const std::string& v) {
  if (key == "max_steps") c.max_steps = to_count(key, v);
  else if (key == "epochs") c.epochs = to_count(key, v);
  else if (key == "batch_size") c.batch_size = to_count(key, v);
  else if (key == "learning_rate") c.learning_rate = to_real(key, v);
  else if (key == "queries_per_shape") c.queries_per_shape = to_count(key, v);
  else if (key == "points_per_shape") c.points_per_shape = to_count(key, v);
  else if (key == "seed") c.seed = to_count(key, v);
  else if (key == "num_shapes") c.num_shapes = to_count(key, v);
  else if (key == "families") c.families = split(v, ',');
  else if (key == "surface_pool") c.surface_pool = to_count(key, v);
  else if (key == "interior_cap") c.interior_cap = to_count(key, v);
  else if (key == "query_padding") c.query_padding = to_real(key, v);
  else if (key == "query_jitter") c.query_jitter = to_real(key, v);
  else if (key == "beta1") c.beta1 = to_real(key, v);
  else if (key == "beta2") c.beta2 = to_real(key, v);
  else if (key == "eps") c.eps = to_real(key, v);
  else if (key == "checkpoint_every") c.checkpoint_every = to_count(key, v);
  else if (key == "validation_shapes") c.validation_shapes = to_count(key, v);
  else if (key == "parts_per_level") {
    c.model.decoder.parts_per_level.clear();
    for (const auto& p : split(v, ',')) c.model.decoder.parts_per_level.push_back(to_count(key, p));
  } else if (key == "latent_dim") {
    c.model.decoder.latent_dim = c.model.encoder.latent_dim = to_count(key, v);
  } else if (key == "resolution") c.model.encoder.resolution = to_count(key, v);
  else if (key == "planes") c.model.planes = to_count(key, v);
  else if (key == "sigma") c.model.sigma = to_real(key, v);
  else if (key == "lambda_contain") c.weights.lambda_contain = to_real(key, v);
  else if (key == "lambda_cvxnet") c.weights.lambda_cvxnet = to_real(key, v);
  else if (key == "lambda_balance") c.weights.lambda_balance = to_real(key, v);
  else if (key == "tau_overlap") c.weights.tau_overlap = to_real(key, v);
  else if (key == "recon_norm") {
    if (v == "squared") c.weights.recon_norm = ReconNorm::kSquared;
    else if (v == "absolute") c.weights.recon_norm = ReconNorm::kAbsolute;
    else throw ConfigError("recon_norm must be 'squared' or 'absolute'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig parse_train_config(std::istream& in) {
  TrainConfig c = TrainConfig::desk();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    set_train_config_value(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

TrainConfig read_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_train_config(in);
}

std::string format_train_config(const TrainConfig& c) {
  std::ostringstream o;
  o << "max_steps = " << c.max_steps << '\n'
    << "epochs = " << c.epochs << '\n'
    << "batch_size = " << c.batch_size << '\n'
    << "learning_rate = " << fmt(c.learning_rate) << '\n'
    << "queries_per_shape = " << c.queries_per_shape << '\n'
    << "points_per_shape = " << c.points_per_shape << '\n'
    << "seed = " << c.seed << '\n'
    << "num_shapes = " << c.num_shapes << '\n'
    << "families = " << join(c.families) << '\n'
    << "surface_pool = " << c.surface_pool << '\n'
    << "interior_cap = " << c.interior_cap << '\n'
    << "query_padding = " << fmt(c.query_padding) << '\n'
    << "query_jitter = " << fmt(c.query_jitter) << '\n'
    << "beta1 = " << fmt(c.beta1) << '\n'
    << "beta2 = " << fmt(c.beta2) << '\n'
    << "eps = " << fmt(c.eps) << '\n'
    << "checkpoint_every = " << c.checkpoint_every << '\n'
    << "validation_shapes = " << c.validation_shapes << '\n'
    << "parts_per_level = " << join(c.model.decoder.parts_per_level) << '\n'
    << "latent_dim = " << c.model.decoder.latent_dim << '\n'
    << "resolution = " << c.model.encoder.resolution << '\n'
    << "planes = " << c.model.planes << '\n'
    << "sigma = " << fmt(c.model.sigma) << '\n'
    << "lambda_contain = " << fmt(c.weights.lambda_contain) << '\n'
    << "lambda_cvxnet = " << fmt(c.weights.lambda_cvxnet) << '\n'
    << "lambda_balance = " << fmt(c.weights.lambda_balance) << '\n'
    << "tau_overlap = " << fmt(c.weights.tau_overlap) << '\n'
    << "recon_norm = " << (c.weights.recon_norm == ReconNorm::kSquared ? "squared" : "absolute") << '\n';
  return o.str();
}

std::vector<TrainingShape> prepare_dataset(const std::vector<SyntheticShape>& shapes, std::size_t pool,
                                           std::uint64_t seed) {
  if (shapes.empty()) throw ConfigError("training data is empty");
  std::vector<TrainingShape> out;
  out.reserve(shapes.size());
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    out.push_back({shapes[i], shapes[i].sample_surface(pool, mix_seed(seed, i, 0x5af))});
  }
  return out;
}

std::string format_metrics(const StepMetrics& m) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "step=%zu lr=%.17g total=%.17g recon=%.17g contain=%.17g decomp=%.17g guide=%.17g loc=%.17g "
                "balance=%.17g",
                m.step, m.lr, m.total, m.recon, m.contain, m.decomp, m.guide, m.loc, m.balance);
  return buf;
}

StepMetrics parse_metrics(const std::string& line) {
  StepMetrics m;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw LoadError("malformed metric token '" + tok + "'");
    const std::string k = tok.substr(0, eq), v = tok.substr(eq + 1);
    if (k == "step") m.step = std::stoull(v);
    else if (k == "lr") m.lr = std::stod(v);
    else if (k == "total") m.total = std::stod(v);
    else if (k == "recon") m.recon = std::stod(v);
    else if (k == "contain") m.contain = std::stod(v);
    else if (k == "decomp") m.decomp = std::stod(v);
    else if (k == "guide") m.guide = std::stod(v);
    else if (k == "loc") m.loc = std::stod(v);
    else if (k == "balance") m.balance = std::stod(v);
  }
  return m;
}

Checkpoint init_checkpoint(const TrainConfig& cfg) {
  cfg.validate();
  Checkpoint ck;
  ck.config = cfg;
  ck.model = HitModel::init(cfg.model, mix_seed(cfg.seed, 0x1417));
  for (const auto& [name, t] : ck.model.parameters()) {
    ck.adam.m[name].assign(t.numel(), 0.0);
    ck.adam.v[name].assign(t.numel(), 0.0);
  }
  return ck;
}

StepMetrics accumulate_step(const Checkpoint& ck, const std::vector<TrainingShape>& data, std::size_t step) {
  if (data.empty()) throw ConfigError("training data is empty");
  const TrainConfig& cfg = ck.config;
  StepMetrics acc;
  acc.step = step;
  acc.lr = cfg.learning_rate;
  std::mt19937_64 pick(mix_seed(cfg.seed, step, kBatch));
  std::uniform_int_distribution<std::size_t> dist(0, data.size() - 1);
  const double w = 1.0 / static_cast<double>(cfg.batch_size);
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    const std::size_t i = dist(pick);
    try {
      shape_loss(ck, data[i], mix_seed(cfg.seed, step, b, kPoints), mix_seed(cfg.seed, step, b, kQueries),
                 mix_seed(cfg.seed, step, b, kInterior), acc, w, true);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) + " (shape " +
                         std::to_string(i) + ")");
    }
  }
  return acc;
}

void adam_update(Checkpoint& ck) {
  const TrainConfig& c = ck.config;
  const double t = static_cast<double>(ck.step + 1);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (auto& [name, param] : ck.model.parameters()) {
    auto& m = ck.adam.m.at(name);
    auto& v = ck.adam.v.at(name);
    auto x = param.mutable_data();
    if (!param.has_grad()) continue;
    const auto g = param.grad();
    for (std::size_t k = 0; k < x.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g[k] * g[k];
      x[k] -= c.learning_rate * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + c.eps);
    }
  }
  ++ck.step;
}

void train_until(Checkpoint& ck, const std::vector<TrainingShape>& data, std::size_t until,
                 const std::function<void(const StepMetrics&, const Checkpoint&)>& on_step) {
  while (ck.step < until) {
    for (auto& [name, p] : ck.model.parameters()) p.zero_grad();
    const StepMetrics m = accumulate_step(ck, data, ck.step + 1);
    adam_update(ck);
    require_finite_params(ck.model, ck.step);
    if (on_step) on_step(m, ck);
  }
}

double validation_loss(const Checkpoint& ck, const std::vector<TrainingShape>& data) {
  NoGradGuard no_grad;
  const std::size_t n = std::min(ck.config.validation_shapes, data.size());
  if (n == 0) return 0.0;
  StepMetrics acc;
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t s = mix_seed(ck.config.seed, i, kValidation);
    shape_loss(ck, data[i], mix_seed(s, kPoints), mix_seed(s, kQueries), mix_seed(s, kInterior), acc, w, false);
  }
  return acc.total;
}

TrainOutputs train(const TrainConfig& cfg, const std::filesystem::path& out) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory " + out.string() + ": " + ec.message());
  const auto data = prepare_dataset(generate_dataset(cfg.num_shapes, cfg.families, cfg.seed), cfg.surface_pool,
                                    cfg.seed);
  Checkpoint ck = init_checkpoint(cfg);
  TrainOutputs res{out / "metrics.log", out / "final.ckpt"};
  std::ofstream log(res.log);
  if (!log) throw IoError("cannot write " + res.log.string());
  train_until(ck, data, cfg.total_steps(), [&](const StepMetrics& m, const Checkpoint& c) {
    log << format_metrics(m) << '\n';
    if (cfg.checkpoint_every > 0 && c.step % cfg.checkpoint_every == 0) {
      save_checkpoint(c, out / ("step_" + std::to_string(c.step) + ".ckpt"));
    }
  });
  log.flush();
  if (!log) throw IoError("failed writing " + res.log.string());
  save_checkpoint(ck, res.final_checkpoint);
  return res;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::vector<double>>> blobs;
  std::vector<Shape> shapes;
  for (const auto& [name, t] : ck.model.parameters()) {
    blobs.emplace_back(name, std::vector<double>(t.data().begin(), t.data().end()));
    shapes.push_back(t.shape());
  }
  const std::size_t nparams = blobs.size();
  for (std::size_t i = 0; i < nparams; ++i) {
    const std::string name = blobs[i].first;
    blobs.emplace_back("adam.m." + name, ck.adam.m.at(name));
    shapes.push_back(shapes[i]);
    blobs.emplace_back("adam.v." + name, ck.adam.v.at(name));
    shapes.push_back(shapes[i]);
  }

  std::ostringstream manifest;
  manifest << "hit-checkpoint 1\nstep " << ck.step << '\n';
  std::istringstream cfg_lines(format_train_config(ck.config));
  for (std::string line; std::getline(cfg_lines, line);) manifest << "config " << line << '\n';
  std::size_t offset = 0;
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    manifest << "tensor " << blobs[i].first << " f64 ";
    for (std::size_t d = 0; d < shapes[i].size(); ++d) manifest << (d ? "x" : "") << shapes[i][d];
    if (shapes[i].empty()) manifest << "scalar";
    manifest << ' ' << offset << ' ' << blobs[i].second.size() << '\n';
    offset += 8 * blobs[i].second.size();
  }
  manifest << "end\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << manifest.str();
  for (const auto& [name, values] : blobs)
    for (double x : values) write_le(out, x);
  out.flush();
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  const std::string where = path.string() + ": ";
  std::string line;
  if (!std::getline(in, line)) throw LoadError(where + "empty file");
  if (line.rfind("hit-checkpoint ", 0) != 0) throw LoadError(where + "not a checkpoint file");
  if (line != "hit-checkpoint 1") throw LoadError(where + "unsupported checkpoint version '" + line.substr(15) + "'");

  Checkpoint ck;
  std::ostringstream cfg_text;
  std::vector<ManifestEntry> entries;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "step") {
      ls >> ck.step;
    } else if (key == "config") {
      cfg_text << line.substr(7) << '\n';
    } else if (key == "tensor") {
      ManifestEntry e;
      std::string shape;
      ls >> e.name >> e.dtype >> shape >> e.offset >> e.count;
      if (!ls) throw LoadError(where + "malformed tensor line '" + line + "'");
      if (e.dtype != "f64" && e.dtype != "f32") throw LoadError(where + "unsupported dtype " + e.dtype);
      if (shape != "scalar")
        for (const auto& d : split(shape, 'x')) e.shape.push_back(std::stoull(d));
      if (shape_numel(e.shape) != e.count) throw LoadError(where + "tensor " + e.name + " count/shape mismatch");
      entries.push_back(std::move(e));
    } else {
      throw LoadError(where + "unknown manifest key '" + key + "'");
    }
  }
  if (!ended) throw LoadError(where + "truncated manifest");
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::istringstream cfg_in(cfg_text.str());
  try {
    ck.config = parse_train_config(cfg_in);
  } catch (const ConfigError& e) {
    throw LoadError(where + "bad config echo: " + e.what());
  }
  ck.model = HitModel::init(ck.config.model, 0);

  std::map<std::string, const ManifestEntry*> by_name;
  for (const auto& e : entries) {
    const std::size_t width = e.dtype == "f64" ? 8 : 4;
    if (e.offset + width * e.count > blob.size()) throw LoadError(where + "truncated data for tensor " + e.name);
    by_name[e.name] = &e;
  }
  auto fetch = [&](const std::string& name, const Shape& expect) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw LoadError(where + "missing tensor " + name);
    const ManifestEntry& e = *it->second;
    if (e.shape != expect) {
      throw LoadError(where + "shape mismatch for tensor " + name + ": file has " + shape_str(e.shape) +
                      ", model expects " + shape_str(expect));
    }
    std::vector<double> out(e.count);
    const unsigned char* p = blob.data() + e.offset;
    for (std::size_t k = 0; k < e.count; ++k)
      out[k] = e.dtype == "f64" ? read_le64(p + 8 * k) : read_le32(p + 4 * k);
    return out;
  };
  for (auto& [name, t] : ck.model.parameters()) {
    const auto values = fetch(name, t.shape());
    std::copy(values.begin(), values.end(), t.mutable_data().begin());
    ck.adam.m[name] = fetch("adam.m." + name, t.shape());
    ck.adam.v[name] = fetch("adam.v." + name, t.shape());
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  // Re-read the manifest shapes against the expected model before trusting the echo.
  const HitModel ref = HitModel::init(expected, 0);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::map<std::string, Shape> file_shapes;
  for (std::string line; std::getline(in, line) && line != "end";) {
    std::istringstream ls(line);
    std::string key, name, dtype, shape;
    ls >> key;
    if (key != "tensor") continue;
    ls >> name >> dtype >> shape;
    Shape s;
    if (shape != "scalar")
      for (const auto& d : split(shape, 'x')) s.push_back(std::stoull(d));
    file_shapes[name] = s;
  }
  for (const auto& [name, t] : ref.parameters()) {
    const auto it = file_shapes.find(name);
    if (it == file_shapes.end()) throw LoadError(path.string() + ": missing tensor " + name + " expected by config");
    if (it->second != t.shape()) {
      throw LoadError(path.string() + ": shape mismatch for tensor " + name + ": file has " +
                      shape_str(it->second) + ", config expects " + shape_str(t.shape()));
    }
  }
  if (file_shapes.size() != 3 * ref.parameters().size()) {
    throw LoadError(path.string() + ": tensor count differs from the expected configuration");
  }
  return load_checkpoint(path);
}

}  // namespace hit
