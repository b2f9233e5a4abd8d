#include "c2v/nn/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "c2v/common/binary_io.hpp"
#include "c2v/common/error.hpp"
#include "c2v/common/parallel.hpp"
#include "c2v/common/rng.hpp"
#include "c2v/diffusion/bridge.hpp"
#include "c2v/diffusion/schedule.hpp"
#include "c2v/nn/ops.hpp"

namespace c2v::nn {
namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

std::uint64_t noise_seed(std::uint64_t seed, std::string_view purpose) {
  return CounterRng::derive(seed, purpose).key();
}

// Draws (t, eps) for one batch entry and writes x_t and the loss target.
void make_example(const PreparedPair& p, const diffusion::BridgeSchedule& s, std::uint64_t seed,
                  std::uint64_t sample_id, std::span<float> x_t, std::span<float> target, int& t_out) {
  const auto rng = CounterRng::derive(seed, "timestep");
  const int t = 1 + static_cast<int>(rng.below(sample_id, static_cast<std::uint64_t>(s.steps())));
  std::vector<float> eps(p.x0.size());
  diffusion::fill_noise<float>(eps, noise_seed(seed, "noise"), sample_id, t);
  diffusion::forward_sample<float>(p.x0, p.y, t, eps, s, x_t);
  diffusion::loss_target<float>(p.x0, p.y, t, eps, s, target);
  t_out = t;
}

struct Batch {
  Tensor<float> input;
  Tensor<float> target;
  std::vector<int> t;
};

Batch make_batch(const DenoiserConfig& cfg, const std::vector<PreparedPair>& data,
                 const std::vector<std::size_t>& idx, const diffusion::BridgeSchedule& s, std::uint64_t seed,
                 std::uint64_t first_sample_id) {
  const std::int64_t r = cfg.resolution;
  const std::size_t vox = static_cast<std::size_t>(r * r * r);
  const auto n = static_cast<std::int64_t>(idx.size());
  std::vector<float> in(static_cast<std::size_t>(n * cfg.in_channels) * vox);
  std::vector<float> target(static_cast<std::size_t>(n) * vox);
  std::vector<float> x_t(vox);
  Batch b;
  b.t.resize(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const PreparedPair& p = data.at(idx[i]);
    if (p.x0.size() != vox || p.aux.size() != vox * (static_cast<std::size_t>(cfg.in_channels) - 1)) {
      throw ShapeMismatch("training pair does not match the denoiser configuration");
    }
    make_example(p, s, seed, first_sample_id + i, x_t, std::span<float>(target).subspan(i * vox, vox), b.t[i]);
    assemble_input(x_t, p.aux,
                   std::span<float>(in).subspan(i * vox * static_cast<std::size_t>(cfg.in_channels),
                                                vox * static_cast<std::size_t>(cfg.in_channels)));
  }
  b.input = Tensor<float>::from({n, cfg.in_channels, r, r, r}, std::move(in));
  b.target = Tensor<float>::from({n, 1, r, r, r}, std::move(target));
  return b;
}

std::vector<std::size_t> param_sizes(const UNet<float>& net) {
  std::vector<std::size_t> sizes;
  for (const auto& [name, t] : net.parameters()) sizes.push_back(static_cast<std::size_t>(t.size()));
  return sizes;
}

void write_tensor(std::ostream& os, const std::string& name, const Shape& shape, std::span<const float> data) {
  io::write_string(os, name);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) io::write_le<std::int64_t>(os, d);
  io::write_le_array<float>(os, data);
}

struct RawTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

RawTensor read_tensor(std::istream& is, bool with_data) {
  RawTensor t;
  t.name = io::read_string(is, 4096);
  const auto rank = io::read_le<std::uint32_t>(is);
  if (rank > 8) throw ValidationError("checkpoint: tensor rank out of range");
  t.shape.resize(rank);
  for (auto& d : t.shape) {
    d = io::read_le<std::int64_t>(is);
    if (d < 0 || d > (1 << 24)) throw ValidationError("checkpoint: tensor dimension out of range");
  }
  const auto n = static_cast<std::size_t>(numel(t.shape));
  if (n > (1u << 28)) throw ValidationError("checkpoint: tensor too large");
  if (with_data) {
    t.data.resize(n);
    io::read_le_array<float>(is, t.data);
  } else {
    is.seekg(static_cast<std::streamoff>(n * sizeof(float)), std::ios::cur);
    if (!is) throw ValidationError("checkpoint: truncated tensor payload");
  }
  return t;
}

struct CheckpointFile {
  std::uint32_t version = 0;
  nlohmann::json header;
  std::vector<RawTensor> tensors;
};

CheckpointFile read_checkpoint(const std::filesystem::path& path, bool with_data) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open checkpoint " + path.string());
  io::expect_magic(is, "C2CK", "checkpoint");
  CheckpointFile f;
  f.version = io::read_le<std::uint32_t>(is);
  if (f.version != kCheckpointVersion) {
    throw ValidationError("checkpoint: unsupported version " + std::to_string(f.version));
  }
  try {
    f.header = nlohmann::json::parse(io::read_string(is));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
  }
  const auto count = io::read_le<std::uint64_t>(is);
  if (count > (1u << 20)) throw ValidationError("checkpoint: tensor count out of range");
  for (std::uint64_t i = 0; i < count; ++i) f.tensors.push_back(read_tensor(is, with_data));
  return f;
}

void restore(std::span<float> dst, const RawTensor& src, const Shape& expected) {
  if (src.shape != expected) {
    throw ValidationError("checkpoint: tensor " + src.name + " has shape " + shape_string(src.shape) + ", expected " +
                          shape_string(expected));
  }
  std::copy(src.data.begin(), src.data.end(), dst.begin());
}

const RawTensor& find_tensor(const CheckpointFile& f, const std::string& name) {
  for (const auto& t : f.tensors) {
    if (t.name == name) return t;
  }
  throw ValidationError("checkpoint: missing tensor " + name);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train: epochs must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("train: learning_rate must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) throw ValidationError("train: plateau_factor must be in (0, 1)");
  if (plateau_patience < 1) throw ValidationError("train: plateau_patience must be positive");
  if (!(plateau_threshold >= 0.0)) throw ValidationError("train: plateau_threshold must be non-negative");
  if (batch_size < 1) throw ValidationError("train: batch_size must be positive");
  if (!(ema_rate > 0.0 && ema_rate < 1.0)) throw ValidationError("train: ema_rate must be in (0, 1)");
  if (T < 2) throw ValidationError("train: T must be at least 2");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"learning_rate", c.learning_rate},
       {"plateau_factor", c.plateau_factor},
       {"plateau_patience", c.plateau_patience},
       {"plateau_threshold", c.plateau_threshold},
       {"batch_size", c.batch_size},
       {"ema_rate", c.ema_rate},
       {"T", c.T},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  d.epochs = j.value("epochs", d.epochs);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.plateau_factor = j.value("plateau_factor", d.plateau_factor);
  d.plateau_patience = j.value("plateau_patience", d.plateau_patience);
  d.plateau_threshold = j.value("plateau_threshold", d.plateau_threshold);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.ema_rate = j.value("ema_rate", d.ema_rate);
  d.T = j.value("T", d.T);
  d.seed = j.value("seed", d.seed);
  d.validate();
  c = d;
}

void to_json(nlohmann::json& j, const EpochRecord& r) {
  j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"learning_rate", r.learning_rate}, {"step", r.step}};
  j["val_loss"] = r.val_loss ? nlohmann::json(*r.val_loss) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, EpochRecord& r) {
  r.epoch = j.at("epoch").get<int>();
  r.train_loss = j.at("train_loss").get<double>();
  r.learning_rate = j.at("learning_rate").get<double>();
  r.step = j.at("step").get<std::uint64_t>();
  r.val_loss.reset();
  if (j.contains("val_loss") && !j["val_loss"].is_null()) r.val_loss = j["val_loss"].get<double>();
}

std::vector<PreparedPair> prepare(const DenoiserConfig& cfg, const std::vector<TrainingPair>& data) {
  std::vector<PreparedPair> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    require_same_grid(d.cond.grid(), d.image.grid(), "training pair");
    out.push_back({encode_image(cfg, d.image), encode_endpoint(cfg, d.cond), encode_aux(cfg, d.cond)});
  }
  return out;
}

Adam::Adam(std::vector<std::size_t> sizes, double beta1, double beta2, double eps) : b1_(beta1), b2_(beta2), eps_(eps) {
  for (auto n : sizes) {
    m_.emplace_back(n, 0.0f);
    v_.emplace_back(n, 0.0f);
  }
}

void Adam::step(std::vector<NamedTensor<float>>& params, double lr) {
  if (params.size() != m_.size()) throw UsageError("adam: parameter list changed");
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].second;
    if (!p.has_grad()) continue;
    auto w = p.data();
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g[k];
      const double mk = b1_ * m[k] + (1.0 - b1_) * gk;
      const double vk = b2_ * v[k] + (1.0 - b2_) * gk * gk;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      w[k] = static_cast<float>(w[k] - lr * (mk / c1) / (std::sqrt(vk / c2) + eps_));
    }
  }
}

void ema_update(std::vector<std::vector<float>>& ema, const std::vector<NamedTensor<float>>& params, double rate) {
  if (ema.size() != params.size()) throw UsageError("ema: parameter list changed");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i].second.data();
    auto& e = ema[i];
    for (std::size_t k = 0; k < w.size(); ++k) e[k] = static_cast<float>(rate * e[k] + (1.0 - rate) * w[k]);
  }
}

double PlateauState::observe(double loss, double lr, const TrainConfig& cfg) {
  if (loss < best - cfg.plateau_threshold) {
    best = loss;
    bad_epochs = 0;
    return lr;
  }
  if (++bad_epochs >= cfg.plateau_patience) {
    bad_epochs = 0;
    return lr * cfg.plateau_factor;
  }
  return lr;
}

double evaluate_loss(const UNet<float>& net, const std::vector<PreparedPair>& data, int T, std::uint64_t seed,
                     int draws_per_pair) {
  if (data.empty()) throw ValidationError("evaluate_loss: empty dataset");
  const auto sched = diffusion::make_schedule(T);
  const NoGradGuard no_grad;
  std::vector<double> losses;
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (int d = 0; d < draws_per_pair; ++d) {
      const Batch b = make_batch(net.config(), data, {i}, sched, seed, i * static_cast<std::uint64_t>(draws_per_pair) + d);
      losses.push_back(l1_loss(net.forward(b.input, b.t), b.target).data()[0]);
    }
  }
  return pairwise_sum(std::span<const double>(losses)) / static_cast<double>(losses.size());
}

Trainer::Trainer(const DenoiserConfig& dcfg, const TrainConfig& tcfg)
    : dcfg_(dcfg),
      tcfg_(tcfg),
      net_((tcfg.validate(), dcfg), CounterRng::derive(tcfg.seed, "init").key()),
      adam_(param_sizes(net_)),
      lr_(tcfg.learning_rate) {
  for (const auto& [name, t] : net_.parameters()) ema_.emplace_back(t.data().begin(), t.data().end());
}

void Trainer::set_epochs(int epochs) {
  TrainConfig c = tcfg_;
  c.epochs = epochs;
  c.validate();
  tcfg_ = c;
}

double Trainer::step(const std::vector<PreparedPair>& train, const std::vector<std::size_t>& batch) {
  const auto sched = diffusion::make_schedule(tcfg_.T);
  const std::uint64_t sid = adam_.steps() * static_cast<std::uint64_t>(tcfg_.batch_size);
  const Batch b = make_batch(dcfg_, train, batch, sched, tcfg_.seed, sid);
  for (auto& [name, t] : net_.parameters()) t.zero_grad();
  Tensor<float> loss = l1_loss(net_.forward(b.input, b.t), b.target);
  const double value = loss.data()[0];
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "non-finite training loss at step " << adam_.steps() << " (epoch " << history_.size() << ", t =";
    for (int t : b.t) msg << ' ' << t;
    msg << ", lr " << lr_ << ")";
    throw NumericalError(msg.str());
  }
  loss.backward();
  adam_.step(net_.parameters(), lr_);
  ema_update(ema_, net_.parameters(), tcfg_.ema_rate);
  return value;
}

EpochRecord Trainer::run_epoch(const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& val) {
  if (train.empty()) throw ValidationError("train: empty dataset");
  const int epoch = static_cast<int>(history_.size());
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const auto rng = CounterRng::derive(tcfg_.seed, "shuffle", epoch);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i, i)]);

  std::vector<double> losses;
  const auto bs = static_cast<std::size_t>(tcfg_.batch_size);
  for (std::size_t begin = 0; begin < order.size(); begin += bs) {
    const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), begin + bs)));
    losses.push_back(step(train, batch));
  }
  EpochRecord r;
  r.epoch = epoch;
  r.train_loss = pairwise_sum(std::span<const double>(losses)) / static_cast<double>(losses.size());
  r.learning_rate = lr_;
  if (!val.empty()) {
    r.val_loss = evaluate_loss(ema_net(), val, tcfg_.T, CounterRng::derive(tcfg_.seed, "validation").key());
  }
  r.step = adam_.steps();
  lr_ = plateau_.observe(r.val_loss.value_or(r.train_loss), lr_, tcfg_);
  history_.push_back(r);
  return r;
}

void Trainer::fit(const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& val,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  while (epochs_done() < tcfg_.epochs) {
    const EpochRecord r = run_epoch(train, val);
    if (on_epoch) on_epoch(r);
  }
}

UNet<float> Trainer::ema_net() const {
  UNet<float> net = net_.clone();
  auto& params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(ema_[i].begin(), ema_[i].end(), params[i].second.data().begin());
  return net;
}

void Trainer::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["denoiser"] = dcfg_;
  header["train"] = tcfg_;
  header["parameter_count"] = net_.parameter_count();
  nlohmann::json state;
  state["step"] = adam_.steps();
  state["epochs_done"] = epochs_done();
  state["learning_rate"] = lr_;
  state["plateau_best"] = std::isfinite(plateau_.best) ? nlohmann::json(plateau_.best) : nlohmann::json(nullptr);
  state["plateau_bad_epochs"] = plateau_.bad_epochs;
  state["history"] = history_;
  header["state"] = state;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  io::write_magic(os, "C2CK");
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_string(os, header.dump());
  const auto& params = net_.parameters();
  io::write_le<std::uint64_t>(os, 4 * params.size());
  for (const auto& [name, t] : params) write_tensor(os, "raw/" + name, t.shape(), t.data());
  for (std::size_t i = 0; i < params.size(); ++i) write_tensor(os, "ema/" + params[i].first, params[i].second.shape(), ema_[i]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_tensor(os, "adam_m/" + params[i].first, params[i].second.shape(), adam_.first_moments()[i]);
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    write_tensor(os, "adam_v/" + params[i].first, params[i].second.shape(), adam_.second_moments()[i]);
  }
  if (!os) throw Error("failed writing " + path.string());
}

Trainer Trainer::load(const std::filesystem::path& path) {
  const CheckpointFile f = read_checkpoint(path, true);
  DenoiserConfig dcfg;
  TrainConfig tcfg;
  try {
    dcfg = f.header.at("denoiser").get<DenoiserConfig>();
    tcfg = f.header.at("train").get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
  }
  Trainer tr(dcfg, tcfg);
  auto& params = tr.net_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, t] = params[i];
    restore(params[i].second.data(), find_tensor(f, "raw/" + name), t.shape());
    restore(tr.ema_[i], find_tensor(f, "ema/" + name), t.shape());
    restore(tr.adam_.first_moments()[i], find_tensor(f, "adam_m/" + name), t.shape());
    restore(tr.adam_.second_moments()[i], find_tensor(f, "adam_v/" + name), t.shape());
  }
  const auto& st = f.header.at("state");
  tr.adam_.set_steps(st.at("step").get<std::uint64_t>());
  tr.lr_ = st.at("learning_rate").get<double>();
  tr.plateau_.best = st.at("plateau_best").is_null() ? std::numeric_limits<double>::infinity()
                                                     : st.at("plateau_best").get<double>();
  tr.plateau_.bad_epochs = st.at("plateau_bad_epochs").get<int>();
  tr.history_ = st.at("history").get<std::vector<EpochRecord>>();
  return tr;
}

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path) {
  const CheckpointFile f = read_checkpoint(path, false);
  CheckpointInfo info{f.version, f.header, {}};
  for (const auto& t : f.tensors) info.tensors.emplace_back(t.name, t.shape);
  return info;
}

ModelDenoiser load_denoiser(const std::filesystem::path& path) {
  const CheckpointFile f = read_checkpoint(path, true);
  DenoiserConfig dcfg;
  TrainConfig tcfg;
  try {
    dcfg = f.header.at("denoiser").get<DenoiserConfig>();
    tcfg = f.header.at("train").get<TrainConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
  }
  UNet<float> net(dcfg, 0);
  for (auto& [name, t] : net.parameters()) restore(t.data(), find_tensor(f, "ema/" + name), t.shape());
  return ModelDenoiser(std::move(net), tcfg.T);
}

std::string loss_curve_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,train_loss,val_loss,learning_rate,step\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.train_loss << ',';
    if (r.val_loss) os << *r.val_loss;
    os << ',' << r.learning_rate << ',' << r.step << '\n';
  }
  return os.str();
}

}  // namespace c2v::nn
