#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fasvit/augment.hpp"
#include "fasvit/losses.hpp"
#include "fasvit/rng.hpp"
#include "fasvit/sample.hpp"
#include "fasvit/vit.hpp"

namespace fasvit {

struct TrainConfig {
  int batch_size = 8;
  double learning_rate = 1e-4;
  int epochs = 200;
  double momentum = 0.9;
  double p_fas = 0.2;
  double p_pda = 0.2;
  double p_pda_patch = 0.5;
  double gate_threshold = 0.001;
  std::uint64_t seed = 0;
  // Per-batch worker count. Fixed (not hardware-derived) so a config+seed
  // pair reproduces bit-identically on any machine.
  int threads = 4;
  LossOptions loss;
  FasAugParams aug_params;

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double l_class = 0.0;
  double l_tap = 0.0;
  double l_apl = 0.0;
  double l_overall = 0.0;
  int n_fas_applied = 0;  // samples that drew a FAS op this epoch
  int n_pda_applied = 0;
  bool aug_enabled = true;  // state during this epoch
};

template <typename T>
struct TrainState {
  ModelConfig model_config;
  ModelParams<T> params;
  ModelParams<T> velocity;
  int epoch = 0;
  bool augmentation_enabled = true;
  std::vector<EpochStats> history;
};

template <typename T>
TrainState<T> make_train_state(const ModelConfig& cfg, std::uint64_t seed);

// v <- mu*v - lr*g; theta <- theta + mu*v - lr*g. Throws NumericError naming
// the tensor on a non-finite gradient.
template <typename T>
void nesterov_step(ModelParams<T>& params, ModelParams<T>& velocity,
                   const ModelParams<T>& grads, double lr, double mu);

// One pass over the dataset: seeded shuffle, augmentation (FAS ops per
// sample, then patch mixing for spoof samples against a live partner from
// the same mini-batch), per-batch mean gradients, one optimizer step per
// batch. Flips state.augmentation_enabled off permanently once the epoch
// mean overall loss drops below the gate threshold.
template <typename T>
EpochStats train_epoch(TrainState<T>& state, const std::vector<Sample>& dataset,
                       const TrainConfig& cfg, Rng& epoch_rng);

using EpochCallback = std::function<void(const EpochStats&)>;

// Full training run driven by cfg.epochs and cfg.seed.
template <typename T>
TrainState<T> train(const ModelConfig& model_cfg, const std::vector<Sample>& dataset,
                    const TrainConfig& cfg, const EpochCallback& on_epoch = nullptr);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  int worst_row = 0, worst_col = 0;
  double worst_analytic = 0.0, worst_numeric = 0.0;
  std::int64_t entries_checked = 0;
  double seconds = 0.0;
};

// Central finite differences (step 1e-4) against the tape gradients over
// every parameter entry, in double precision, on n_samples random inputs
// (one carries mixed patch labels so the patch-loss path is exercised).
// Relative error uses denominator max(1, |analytic|, |numeric|).
GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed, int n_samples = 2);

}  // namespace fasvit
