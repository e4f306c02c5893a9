#include "cyclehash/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cyclehash/errors.hpp"

namespace cyclehash {

namespace {

enum Stream : std::uint64_t { kInitStream = 1, kEpochStream = 2 };

CrossModalModel init_model(const TrainConfig& cfg, std::size_t dim_u, std::size_t dim_v) {
  cfg.validate();
  auto rng = derived_rng(cfg.seed, kInitStream);
  return CrossModalModel::create(cfg.arch, dim_u, dim_v, rng);
}

void require_positive(std::size_t v, const char* name) {
  if (v == 0) throw ConfigError(std::string(name) + " must be positive");
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void store_adam(Checkpoint& ckpt, const std::string& prefix, const Adam& opt) {
  const auto& st = opt.state();
  ckpt.meta[prefix + ".step"] = std::to_string(st.step);
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const Shape& shape = opt.params()[i].shape();
    ckpt.blobs.push_back({prefix + ".m." + std::to_string(i), shape, st.first_moment[i]});
    ckpt.blobs.push_back({prefix + ".v." + std::to_string(i), shape, st.second_moment[i]});
  }
}

void load_adam(const Checkpoint& ckpt, const std::string& prefix, Adam& opt) {
  auto& st = opt.state();
  auto it = ckpt.meta.find(prefix + ".step");
  if (it == ckpt.meta.end()) throw FormatError("checkpoint lacks " + prefix + ".step");
  st.step = std::stoull(it->second);
  for (std::size_t i = 0; i < opt.params().size(); ++i) {
    const Blob& m = ckpt.require(prefix + ".m." + std::to_string(i));
    const Blob& v = ckpt.require(prefix + ".v." + std::to_string(i));
    if (m.shape != opt.params()[i].shape() || v.shape != m.shape) {
      throw FormatError("checkpoint optimizer state for " + prefix + " has the wrong shape");
    }
    st.first_moment[i] = m.data;
    st.second_moment[i] = v.data;
  }
}

void store_history(Checkpoint& ckpt, const std::string& name, const HistoryBuffer& buf,
                   std::size_t width) {
  Blob b{name, {buf.size(), width}, {}};
  for (const auto& s : buf.samples()) b.data.insert(b.data.end(), s.begin(), s.end());
  ckpt.blobs.push_back(std::move(b));
}

void load_history(const Checkpoint& ckpt, const std::string& name, HistoryBuffer& buf,
                  std::size_t width) {
  const Blob& b = ckpt.require(name);
  if (b.shape.size() != 2 || b.shape[1] != width) {
    throw FormatError("checkpoint history '" + name + "' has the wrong width");
  }
  std::vector<HistoryBuffer::Sample> samples;
  for (std::size_t i = 0; i < b.shape[0]; ++i) {
    samples.emplace_back(b.data.begin() + i * width, b.data.begin() + (i + 1) * width);
  }
  buf.restore(std::move(samples));
}

Tensor gather(const Matrix& features, const std::vector<std::size_t>& order,
              std::size_t start, std::size_t count) {
  const std::size_t d = features.cols();
  std::vector<double> values(count * d);
  for (std::size_t j = 0; j < count; ++j) {
    const auto row = features.row(order[(start + j) % order.size()]);
    std::copy(row.begin(), row.end(), values.begin() + j * d);
  }
  return Tensor::constant({count, d}, std::move(values));
}

double step_discriminator(const Discriminator& disc, Adam& opt, const Tensor& real,
                          const Tensor& fake, double lr, double clip) {
  opt.zero_grad();
  const Tensor loss = lsgan_discriminator_loss(disc.score(real), disc.score(fake));
  backward(loss);
  if (clip > 0) opt.clip_grad_norm(clip);
  opt.step(lr);
  return loss.item();
}

}  // namespace

void TrainConfig::validate() const {
  require_positive(arch.bits, "bits");
  if (arch.bits > 256) throw ConfigError("bits must be at most 256");
  require_positive(epochs_flat + epochs_decay, "epochs_flat + epochs_decay");
  require_positive(batch_size, "batch_size");
  require_positive(n_samples, "n_samples");
  require_positive(d_steps, "d_steps");
  if (!(base_lr > 0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(sgh_weight >= 0) || !std::isfinite(sgh_weight)) {
    throw ConfigError("sgh_weight must be >= 0");
  }
  if (!(clip_norm >= 0)) throw ConfigError("clip_norm must be >= 0");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1)) throw ConfigError("adam_beta1 must lie in [0, 1)");
  if (!(adam.beta2 >= 0 && adam.beta2 < 1)) throw ConfigError("adam_beta2 must lie in [0, 1)");
  if (!(adam.epsilon > 0)) throw ConfigError("adam_eps must be positive");
  for (auto s : arch.disc_hidden) require_positive(s, "disc_hidden entries");
  for (auto s : arch.stem_u) require_positive(s, "stem_u entries");
  for (auto s : arch.stem_v) require_positive(s, "stem_v entries");
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
  if (epoch >= cfg.total_epochs()) {
    throw std::out_of_range("lr_schedule: epoch " + std::to_string(epoch) +
                            " outside [0, " + std::to_string(cfg.total_epochs()) + ")");
  }
  if (epoch < cfg.epochs_flat) return cfg.base_lr;
  const double into_decay = static_cast<double>(epoch - cfg.epochs_flat);
  return cfg.base_lr * (1.0 - into_decay / static_cast<double>(cfg.epochs_decay));
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out.precision(17);
  out << "iteration,epoch,lr,gan_u_to_v,gan_v_to_u,cycle,sgh_u,sgh_v,total\n";
  for (const auto& r : iterations) {
    out << r.iteration << ',' << r.epoch << ',' << r.lr << ',' << r.loss.gan_u_to_v << ','
        << r.loss.gan_v_to_u << ',' << r.loss.cycle << ',' << r.loss.sgh_u << ','
        << r.loss.sgh_v << ',' << r.loss.total << '\n';
  }
}

TrainLog TrainLog::read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  TrainLog log;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    IterationRecord r;
    char c = 0;
    is >> r.iteration >> c >> r.epoch >> c >> r.lr >> c >> r.loss.gan_u_to_v >> c >>
        r.loss.gan_v_to_u >> c >> r.loss.cycle >> c >> r.loss.sgh_u >> c >> r.loss.sgh_v >>
        c >> r.loss.total;
    if (!is) throw FormatError(path.string() + ": malformed log line '" + line + "'");
    log.iterations.push_back(r);
  }
  return log;
}

Trainer::Trainer(TrainConfig cfg, std::size_t dim_u, std::size_t dim_v)
    : cfg_(std::move(cfg)),
      model_(init_model(cfg_, dim_u, dim_v)),
      gen_opt_(model_.generator_parameters(), cfg_.adam),
      disc_u_opt_(model_.u.discriminator_parameters(), cfg_.adam),
      disc_v_opt_(model_.v.discriminator_parameters(), cfg_.adam),
      history_u_(cfg_.history_capacity),
      history_v_(cfg_.history_capacity) {}

Trainer::Trainer(TrainConfig cfg, const Checkpoint& ckpt)
    : Trainer(std::move(cfg), ckpt.dim_u, ckpt.dim_v) {
  if (ckpt.bits != cfg_.arch.bits) {
    throw ConfigError("checkpoint has " + std::to_string(ckpt.bits) +
                      " bits but the config asks for " + std::to_string(cfg_.arch.bits));
  }
  load_model(ckpt, model_);
  load_adam(ckpt, "opt.gen", gen_opt_);
  load_adam(ckpt, "opt.disc_u", disc_u_opt_);
  load_adam(ckpt, "opt.disc_v", disc_v_opt_);
  load_history(ckpt, "history.u", history_u_, model_.u.dim);
  load_history(ckpt, "history.v", history_v_, model_.v.dim);
  next_epoch_ = std::stoull(ckpt.meta.at("next_epoch"));
  next_iteration_ = std::stoull(ckpt.meta.at("next_iteration"));
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.seed = cfg_.seed;
  store_model(ckpt, model_);
  store_adam(ckpt, "opt.gen", gen_opt_);
  store_adam(ckpt, "opt.disc_u", disc_u_opt_);
  store_adam(ckpt, "opt.disc_v", disc_v_opt_);
  store_history(ckpt, "history.u", history_u_, model_.u.dim);
  store_history(ckpt, "history.v", history_v_, model_.v.dim);
  ckpt.meta["next_epoch"] = std::to_string(next_epoch_);
  ckpt.meta["next_iteration"] = std::to_string(next_iteration_);
  ckpt.meta["base_lr"] = fmt(cfg_.base_lr);
  ckpt.meta["lambda"] = fmt(cfg_.lambda);
  return ckpt;
}

void Trainer::iterate(const Tensor& x_u, const Tensor& x_v, double lr,
                      std::mt19937_64& rng, IterationRecord& rec) {
  const ObjectiveWeights weights = cfg_.weights();
  const GeneratorPass pass = forward_generators(x_u, x_v, model_, weights, rng);

  // Discriminators see detached fakes, so their updates cannot reach the
  // generator parameters.
  const Tensor pooled_u = to_tensor(history_u_.push_batch(to_matrix(pass.fake_u), rng));
  const Tensor pooled_v = to_tensor(history_v_.push_batch(to_matrix(pass.fake_v), rng));
  for (std::size_t s = 0; s < cfg_.d_steps; ++s) {
    rec.disc_u = step_discriminator(model_.u.discriminator, disc_u_opt_, x_u, pooled_u, lr,
                                    cfg_.clip_norm);
    rec.disc_v = step_discriminator(model_.v.discriminator, disc_v_opt_, x_v, pooled_v, lr,
                                    cfg_.clip_norm);
  }

  // The generator step is scored by the freshly updated discriminators.
  // Gradients that land on discriminator weights here are cleared before
  // their next update and never applied.
  gen_opt_.zero_grad();
  const Objective obj = assemble_objective(pass, model_, weights);
  if (!std::isfinite(obj.breakdown.total)) {
    throw NumericError("non-finite total loss");
  }
  backward(obj.total);
  if (cfg_.clip_norm > 0) gen_opt_.clip_grad_norm(cfg_.clip_norm);
  gen_opt_.step(lr);
  rec.loss = obj.breakdown;
}

void Trainer::run_epoch(const LabeledFeatureSet& set_u, const LabeledFeatureSet& set_v,
                        TrainLog& log) {
  if (finished()) throw std::logic_error("Trainer::run_epoch: training already finished");
  if (set_u.size() == 0 || set_v.size() == 0) {
    throw std::invalid_argument("train: empty dataset");
  }
  if (set_u.dim() != model_.u.dim || set_v.dim() != model_.v.dim) {
    throw ShapeError("train: feature dimensions " + std::to_string(set_u.dim()) + "/" +
                     std::to_string(set_v.dim()) + " do not match the model " +
                     std::to_string(model_.u.dim) + "/" + std::to_string(model_.v.dim));
  }
  const auto started = std::chrono::steady_clock::now();
  const std::size_t epoch = next_epoch_;
  const double lr = lr_schedule(epoch, cfg_);
  auto rng = derived_rng(cfg_.seed, kEpochStream, epoch);

  std::vector<std::size_t> order_u(set_u.size());
  std::vector<std::size_t> order_v(set_v.size());
  std::iota(order_u.begin(), order_u.end(), std::size_t{0});
  std::iota(order_v.begin(), order_v.end(), std::size_t{0});
  std::shuffle(order_u.begin(), order_u.end(), rng);
  std::shuffle(order_v.begin(), order_v.end(), rng);

  const std::size_t batch = cfg_.batch_size;
  const std::size_t longest = std::max(set_u.size(), set_v.size());
  const std::size_t iterations = (longest + batch - 1) / batch;
  for (std::size_t it = 0; it < iterations; ++it) {
    // The shorter set wraps around its permutation.
    const Tensor x_u = gather(set_u.features, order_u, it * batch, batch);
    const Tensor x_v = gather(set_v.features, order_v, it * batch, batch);
    IterationRecord rec;
    rec.iteration = next_iteration_;
    rec.epoch = epoch;
    rec.lr = lr;
    try {
      iterate(x_u, x_v, lr, rng, rec);
    } catch (const NumericError& e) {
      throw NumericError(std::string("training diverged at epoch ") + std::to_string(epoch) +
                         ", iteration " + std::to_string(next_iteration_) + ": " + e.what());
    }
    log.iterations.push_back(rec);
    ++next_iteration_;
  }
  log.epoch_lr.push_back(lr);
  log.epoch_seconds.push_back(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  ++next_epoch_;
}

void Trainer::train(const LabeledFeatureSet& set_u, const LabeledFeatureSet& set_v,
                    TrainLog& log, const EpochCallback& on_epoch) {
  while (!finished()) {
    const std::size_t epoch = next_epoch_;
    run_epoch(set_u, set_v, log);
    if (on_epoch) on_epoch(*this, epoch);
  }
}

TrainResult train(const TrainConfig& cfg, const LabeledFeatureSet& set_u,
                  const LabeledFeatureSet& set_v) {
  Trainer trainer(cfg, set_u.dim(), set_v.dim());
  TrainResult result;
  trainer.train(set_u, set_v, result.log);
  result.model = trainer.model();
  return result;
}

}  // namespace cyclehash
