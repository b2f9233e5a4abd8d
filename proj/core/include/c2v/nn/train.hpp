#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "c2v/geometry/conditions.hpp"
#include "c2v/geometry/volume.hpp"
#include "c2v/nn/denoiser.hpp"
#include "c2v/nn/unet.hpp"

namespace c2v::nn {

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-4;
  double plateau_factor = 0.5;
  int plateau_patience = 10;
  double plateau_threshold = 1e-4;
  int batch_size = 2;
  double ema_rate = 0.995;
  int T = 1000;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct TrainingPair {
  geometry::ConditionSet cond;
  Volume image;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_loss;
  double learning_rate = 0.0;
  std::uint64_t step = 0;  // optimizer steps completed after this epoch
};

void to_json(nlohmann::json& j, const EpochRecord& r);
void from_json(const nlohmann::json& j, EpochRecord& r);

/// One training sample in model units.
struct PreparedPair {
  std::vector<float> x0;
  std::vector<float> y;
  std::vector<float> aux;
};

std::vector<PreparedPair> prepare(const DenoiserConfig& cfg, const std::vector<TrainingPair>& data);

/// Adam with bias correction, one moment pair per parameter tensor.
class Adam {
 public:
  explicit Adam(std::vector<std::size_t> sizes, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// params[i] -= lr * m_hat / (sqrt(v_hat) + eps); increments the step count.
  void step(std::vector<NamedTensor<float>>& params, double lr);
  std::uint64_t steps() const { return t_; }

  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  double b1_, b2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
};

/// ema = rate * ema + (1 - rate) * param, elementwise.
void ema_update(std::vector<std::vector<float>>& ema, const std::vector<NamedTensor<float>>& params, double rate);

/// Learning-rate decay on a stalled monitored loss.
struct PlateauState {
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  /// Returns the new learning rate after observing `loss`.
  double observe(double loss, double lr, const TrainConfig& cfg);
};

/// Mean L1 loss of `net` on `data` at fixed (t, eps) draws from `seed`.
double evaluate_loss(const UNet<float>& net, const std::vector<PreparedPair>& data, int T, std::uint64_t seed,
                     int draws_per_pair = 4);

/// Training state: raw parameters, EMA copy, optimizer moments, schedule and
/// loss history. The per-step randomness is a pure function of
/// (seed, step), so a resumed run continues the exact sequence.
class Trainer {
 public:
  Trainer(const DenoiserConfig& dcfg, const TrainConfig& tcfg);

  /// Runs one epoch over `train`; `val` (may be empty) drives the plateau
  /// schedule, otherwise the epoch's training loss does.
  EpochRecord run_epoch(const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& val);

  /// Runs epochs until tcfg.epochs have been completed in total.
  void fit(const std::vector<PreparedPair>& train, const std::vector<PreparedPair>& val,
           const std::function<void(const EpochRecord&)>& on_epoch = {});

  /// One optimizer step on the given batch indices; returns the batch loss.
  double step(const std::vector<PreparedPair>& train, const std::vector<std::size_t>& batch);

  const DenoiserConfig& denoiser_config() const { return dcfg_; }
  const TrainConfig& train_config() const { return tcfg_; }
  /// Replaces the epoch budget (e.g. when resuming with more epochs).
  void set_epochs(int epochs);

  UNet<float>& net() { return net_; }
  const UNet<float>& net() const { return net_; }
  /// Copy of the network carrying the EMA weights.
  UNet<float> ema_net() const;
  const std::vector<std::vector<float>>& ema() const { return ema_; }
  const std::vector<EpochRecord>& history() const { return history_; }
  std::uint64_t steps() const { return adam_.steps(); }
  int epochs_done() const { return static_cast<int>(history_.size()); }
  double learning_rate() const { return lr_; }

  void save(const std::filesystem::path& path) const;
  static Trainer load(const std::filesystem::path& path);

 private:
  DenoiserConfig dcfg_;
  TrainConfig tcfg_;
  UNet<float> net_;
  std::vector<std::vector<float>> ema_;
  Adam adam_;
  PlateauState plateau_;
  double lr_;
  std::vector<EpochRecord> history_;
};

/// Header and tensor directory of a checkpoint file.
struct CheckpointInfo {
  std::uint32_t version = 0;
  nlohmann::json header;
  std::vector<std::pair<std::string, Shape>> tensors;
};

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

/// Frozen EMA network of a checkpoint, ready for sampling.
ModelDenoiser load_denoiser(const std::filesystem::path& path);

/// Loss curve as CSV: epoch,train_loss,val_loss,learning_rate,step.
std::string loss_curve_csv(const std::vector<EpochRecord>& history);

}  // namespace c2v::nn
