#include "fasvit/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "fasvit/image.hpp"

namespace fasvit {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("TrainConfig: " + msg); };
  if (batch_size < 1) fail("batch_size must be positive");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (epochs < 1) fail("epochs must be positive");
  if (momentum < 0.0 || momentum >= 1.0) fail("momentum must be in [0,1)");
  if (p_fas < 0.0 || p_fas > 1.0) fail("p_fas must be in [0,1]");
  if (p_pda < 0.0 || p_pda > 1.0) fail("p_pda must be in [0,1]");
  if (p_pda_patch < 0.0 || p_pda_patch > 1.0) fail("p_pda_patch must be in [0,1]");
  if (!(gate_threshold >= 0.0)) fail("gate_threshold must be nonnegative");
  if (threads < 1 || threads > 64) fail("threads must be in 1..64");
}

template <typename T>
TrainState<T> make_train_state(const ModelConfig& cfg, std::uint64_t seed) {
  ModelConfig resolved = cfg.resolved();
  resolved.validate();
  TrainState<T> st;
  st.model_config = resolved;
  st.params = make_params<T>(resolved);
  Rng init_rng = Rng(seed).child(0);
  init_params(st.params, resolved, init_rng);
  st.velocity = zeros_like(st.params);
  return st;
}

template <typename T>
void nesterov_step(ModelParams<T>& params, ModelParams<T>& velocity,
                   const ModelParams<T>& grads, double lr, double mu) {
  auto tp = tensor_refs(params);
  auto tv = tensor_refs(velocity);
  auto tg = tensor_refs(const_cast<ModelParams<T>&>(grads));
  for (size_t i = 0; i < tp.size(); ++i) {
    const Mat<T>& g = *tg[i].second;
    if (!all_finite(g))
      throw NumericError("non-finite gradient in tensor '" + tg[i].first + "'");
    Mat<T>& v = *tv[i].second;
    v = static_cast<T>(mu) * v - static_cast<T>(lr) * g;
    *tp[i].second += static_cast<T>(mu) * v - static_cast<T>(lr) * g;
  }
}

template <typename T>
EpochStats train_epoch(TrainState<T>& state, const std::vector<Sample>& dataset,
                       const TrainConfig& cfg, Rng& epoch_rng) {
  cfg.validate();
  if (dataset.empty()) throw std::invalid_argument("train_epoch: empty dataset");
  const ModelConfig& mc = state.model_config;

  Rng shuffle_rng = epoch_rng.child(0);
  Rng aug_rng = epoch_rng.child(1);

  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});
  for (size_t i = order.size() - 1; i > 0; --i) {
    const size_t j = shuffle_rng.uniform_int(i + 1);
    std::swap(order[i], order[j]);
  }

  EpochStats stats;
  stats.epoch = state.epoch;
  stats.aug_enabled = state.augmentation_enabled;

  ModelParams<T> grads = zeros_like(state.params);
  std::vector<ModelParams<T>> thread_grads;
  thread_grads.reserve(static_cast<size_t>(cfg.threads));
  for (int t = 0; t < cfg.threads; ++t) thread_grads.push_back(zeros_like(state.params));

  double sum_class = 0.0, sum_tap = 0.0, sum_apl = 0.0, sum_overall = 0.0;

  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
    const size_t bn = std::min(static_cast<size_t>(cfg.batch_size), order.size() - start);

    std::vector<Sample> batch;
    batch.reserve(bn);
    for (size_t k = 0; k < bn; ++k) batch.push_back(dataset[order[start + k]]);

    if (state.augmentation_enabled) {
      for (auto& s : batch) {
        AugOutcome o = apply_fas_aug(s, aug_rng, cfg.p_fas, cfg.aug_params);
        if (o.op_applied != AugOp::kNone) ++stats.n_fas_applied;
        s.image = std::move(o.image);
        s.label = o.label_after;
        s.attack = o.attack_after;
      }
      std::vector<size_t> lives;
      for (size_t k = 0; k < bn; ++k)
        if (batch[k].label == Label::kLive) lives.push_back(k);
      for (size_t k = 0; k < bn; ++k) {
        if (batch[k].label != Label::kSpoof) continue;
        if (aug_rng.uniform() >= cfg.p_pda) continue;
        if (lives.empty()) continue;
        const size_t partner = lives[aug_rng.uniform_int(lives.size())];
        batch[k] = apply_pda(batch[k], batch[partner], aug_rng, cfg.p_pda_patch,
                             mc.patch_size);
        ++stats.n_pda_applied;
      }
    }

    for (auto& s : batch) s.image = normalize_per_channel(s.image);

    const int nt = std::min<int>(cfg.threads, static_cast<int>(bn));
    for (int t = 0; t < nt; ++t) set_zero(thread_grads[static_cast<size_t>(t)]);
    std::vector<LossBreakdown> breakdowns(bn);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(nt));

    auto work = [&](int t) {
      try {
        for (size_t i = static_cast<size_t>(t); i < bn; i += static_cast<size_t>(nt)) {
          ForwardGraph<T> fg = forward_graph<T>(state.params, mc, batch[i].image, true,
                                                &thread_grads[static_cast<size_t>(t)]);
          LossGraph<T> lg = loss_graph(fg, batch[i], cfg.loss);
          fg.tape.backward(lg.total);
          breakdowns[i] = lg.values;
        }
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    };
    if (nt == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<size_t>(nt));
      for (int t = 0; t < nt; ++t) pool.emplace_back(work, t);
      for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);

    set_zero(grads);
    auto tg = tensor_refs(grads);
    for (int t = 0; t < nt; ++t) {
      auto tt = tensor_refs(thread_grads[static_cast<size_t>(t)]);
      for (size_t i = 0; i < tg.size(); ++i) *tg[i].second += *tt[i].second;
    }
    const T inv_bn = T(1) / static_cast<T>(bn);
    for (auto& [name, m] : tg) *m *= inv_bn;

    for (const auto& b : breakdowns) {
      sum_class += b.l_class;
      sum_tap += b.l_tap;
      sum_apl += b.l_apl;
      sum_overall += b.l_overall;
    }

    nesterov_step(state.params, state.velocity, grads, cfg.learning_rate, cfg.momentum);
  }

  const double n = static_cast<double>(dataset.size());
  stats.l_class = sum_class / n;
  stats.l_tap = sum_tap / n;
  stats.l_apl = sum_apl / n;
  stats.l_overall = sum_overall / n;

  state.history.push_back(stats);
  ++state.epoch;
  if (state.augmentation_enabled && stats.l_overall < cfg.gate_threshold)
    state.augmentation_enabled = false;
  return stats;
}

template <typename T>
TrainState<T> train(const ModelConfig& model_cfg, const std::vector<Sample>& dataset,
                    const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainState<T> state = make_train_state<T>(model_cfg, cfg.seed);
  Rng root(cfg.seed);
  for (int e = 0; e < cfg.epochs; ++e) {
    Rng epoch_rng = root.child(static_cast<std::uint64_t>(e) + 1);
    EpochStats stats = train_epoch(state, dataset, cfg, epoch_rng);
    if (on_epoch) on_epoch(stats);
  }
  return state;
}

GradCheckReport grad_check(const ModelConfig& cfg0, std::uint64_t seed, int n_samples) {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg = cfg0.resolved();
  cfg.validate();
  n_samples = std::max(1, std::min(4, n_samples));

  Rng rng(seed);
  ModelParams<double> params = make_params<double>(cfg);
  Rng init_rng = rng.child(0);
  init_params(params, cfg, init_rng);

  Rng data_rng = rng.child(1);
  std::vector<Sample> samples;
  for (int i = 0; i < n_samples; ++i) {
    Sample s;
    s.id = "gradcheck" + std::to_string(i);
    s.image = ImageTensor(cfg.image_size, cfg.image_size, 0.0f, ColorSpace::kNormalized);
    for (auto& v : s.image.data) v = static_cast<float>(data_rng.normal());
    s.label = i % 2 == 0 ? Label::kLive : Label::kSpoof;
    s.attack = s.label == Label::kSpoof ? AttackType::kSynthPrint : AttackType::kNone;
    if (i == n_samples - 1 && s.label == Label::kSpoof) {
      PatchLabels pl;
      pl.grid = cfg.grid();
      pl.labels.resize(static_cast<size_t>(cfg.n_patches()));
      for (size_t j = 0; j < pl.labels.size(); ++j)
        pl.labels[j] = j % 2 == 0 ? Label::kLive : Label::kSpoof;
      s.patch_labels = pl;
    }
    samples.push_back(std::move(s));
  }

  ModelParams<double> grads = zeros_like(params);
  for (const auto& s : samples) {
    ForwardGraph<double> fg = forward_graph<double>(params, cfg, s.image, true, &grads);
    LossGraph<double> lg = loss_graph(fg, s);
    fg.tape.backward(lg.total);
  }

  auto eval = [&]() {
    double total = 0.0;
    for (const auto& s : samples) {
      ForwardGraph<double> fg = forward_graph<double>(params, cfg, s.image, false, nullptr);
      LossGraph<double> lg = loss_graph(fg, s);
      total += lg.values.l_overall;
    }
    return total;
  };

  const double h = 1e-4;
  GradCheckReport rep;
  auto tp = tensor_refs(params);
  auto tg = tensor_refs(grads);
  for (size_t ti = 0; ti < tp.size(); ++ti) {
    Mat<double>& m = *tp[ti].second;
    const Mat<double>& gm = *tg[ti].second;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double orig = m(i, j);
        m(i, j) = orig + h;
        const double lp = eval();
        m(i, j) = orig - h;
        const double lm = eval();
        m(i, j) = orig;
        const double numeric = (lp - lm) / (2.0 * h);
        const double analytic = gm(i, j);
        const double rel = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        ++rep.entries_checked;
        if (rel > rep.max_rel_err) {
          rep.max_rel_err = rel;
          rep.worst_tensor = tp[ti].first;
          rep.worst_row = static_cast<int>(i);
          rep.worst_col = static_cast<int>(j);
          rep.worst_analytic = analytic;
          rep.worst_numeric = numeric;
        }
      }
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

template TrainState<float> make_train_state<float>(const ModelConfig&, std::uint64_t);
template TrainState<double> make_train_state<double>(const ModelConfig&, std::uint64_t);
template void nesterov_step<float>(ModelParams<float>&, ModelParams<float>&,
                                   const ModelParams<float>&, double, double);
template void nesterov_step<double>(ModelParams<double>&, ModelParams<double>&,
                                    const ModelParams<double>&, double, double);
template EpochStats train_epoch<float>(TrainState<float>&, const std::vector<Sample>&,
                                       const TrainConfig&, Rng&);
template EpochStats train_epoch<double>(TrainState<double>&, const std::vector<Sample>&,
                                        const TrainConfig&, Rng&);
template TrainState<float> train<float>(const ModelConfig&, const std::vector<Sample>&,
                                        const TrainConfig&, const EpochCallback&);
template TrainState<double> train<double>(const ModelConfig&, const std::vector<Sample>&,
                                          const TrainConfig&, const EpochCallback&);

}  // namespace fasvit
