#include <benchmark/benchmark.h>

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "fasvit/augment.hpp"
#include "fasvit/image.hpp"
#include "fasvit/rng.hpp"
#include "fasvit/scoring.hpp"
#include "fasvit/vit.hpp"

namespace {

using namespace fasvit;

ImageTensor textured_image(int size, Rng& rng) {
  ImageTensor img(size, size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const float base = ((y / 2 + x / 2) % 2 == 0) ? 0.8f : 0.2f;
      for (int c = 0; c < 3; ++c) {
        float v = base + 0.02f * static_cast<float>(rng.normal());
        img.at(y, x, c) = std::clamp(v, 0.0f, 1.0f);
      }
    }
  return img;
}

ModelConfig toy_config() {
  ModelConfig cfg;
  cfg.image_size = 32;
  cfg.patch_size = 8;
  cfg.depth = 6;
  cfg.embed_dim = 64;
  cfg.heads = 4;
  return cfg.resolved();
}

struct ModelFixture {
  ModelConfig cfg = toy_config();
  ModelParams<double> params = make_params<double>(cfg);
  ImageTensor input;

  ModelFixture() {
    Rng r(7);
    init_params(params, cfg, r);
    input = normalize_per_channel(textured_image(cfg.image_size, r));
  }
};

const ModelFixture& model_fixture() {
  static ModelFixture f;
  return f;
}

void bm_forward(benchmark::State& state) {
  const auto& f = model_fixture();
  for (auto _ : state) {
    auto acts = forward(f.params, f.cfg, f.input);
    benchmark::DoNotOptimize(acts.logits_final);
  }
}
BENCHMARK(bm_forward)->Unit(benchmark::kMillisecond);

void bm_forward_with_tape(benchmark::State& state) {
  const auto& f = model_fixture();
  for (auto _ : state) {
    auto g = forward_graph(f.params, f.cfg, f.input, true);
    benchmark::DoNotOptimize(g.logits_final);
  }
}
BENCHMARK(bm_forward_with_tape)->Unit(benchmark::kMillisecond);

template <ImageTensor (*Op)(const ImageTensor&, Rng&, int), int Arg>
void bm_aug_rng_int(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = Op(img, r, Arg);
    benchmark::DoNotOptimize(out.data.data());
  }
}

void bm_hand_tremble(benchmark::State& state) { bm_aug_rng_int<hand_tremble, 2>(state); }
BENCHMARK(bm_hand_tremble)->Arg(64)->Arg(128);

void bm_halftone_bn(benchmark::State& state) { bm_aug_rng_int<halftone_bn, 3>(state); }
BENCHMARK(bm_halftone_bn)->Arg(64)->Arg(128);

void bm_low_resolution(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = low_resolution(img, 2);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_low_resolution)->Arg(64)->Arg(128);

void bm_color_diversity(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = color_diversity(img, r, 0.2);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_color_diversity)->Arg(64)->Arg(128);

void bm_color_distortion(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = color_distortion(img, r, 0.5, 2.0);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_color_distortion)->Arg(64)->Arg(128);

void bm_halftone_sfc(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = halftone_sfc(img, 3);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_halftone_sfc)->Arg(64)->Arg(128);

void bm_specular(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = specular_reflection(img, r, 0.8);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_specular)->Arg(64)->Arg(128);

void bm_moire(benchmark::State& state) {
  Rng r(11);
  const ImageTensor img = textured_image(static_cast<int>(state.range(0)), r);
  for (auto _ : state) {
    ImageTensor out = moire(img, r, 0.3, 2.0, 16.0);
    benchmark::DoNotOptimize(out.data.data());
  }
}
BENCHMARK(bm_moire)->Arg(64)->Arg(128);

void bm_max_cosine(benchmark::State& state) {
  const int rows = static_cast<int>(state.range(0));
  const int dim = 64;
  Rng r(21);
  Mat<double> bank(rows, dim);
  for (Eigen::Index i = 0; i < bank.rows(); ++i) {
    for (Eigen::Index j = 0; j < bank.cols(); ++j) bank(i, j) = r.normal();
    bank.row(i).normalize();
  }
  Mat<double> q(1, dim);
  for (Eigen::Index j = 0; j < q.cols(); ++j) q(0, j) = r.normal();
  for (auto _ : state) {
    auto best = max_cosine(bank, q);
    benchmark::DoNotOptimize(best);
  }
}
BENCHMARK(bm_max_cosine)->Arg(64)->Arg(1024);

void bm_score_query(benchmark::State& state) {
  const auto& f = model_fixture();
  Rng r(31);
  std::vector<Sample> lives;
  for (int i = 0; i < 16; ++i) {
    Sample s;
    s.id = "live" + std::to_string(i);
    s.label = Label::kLive;
    s.image = textured_image(f.cfg.image_size, r);
    lives.push_back(std::move(s));
  }
  const ReferenceBank bank = build_bank(f.params, f.cfg, lives);
  Sample probe;
  probe.id = "probe";
  probe.image = textured_image(f.cfg.image_size, r);
  for (auto _ : state) {
    ScoreReport rep = score(f.params, f.cfg, bank, probe);
    benchmark::DoNotOptimize(rep.score);
  }
}
BENCHMARK(bm_score_query)->Unit(benchmark::kMillisecond);

void bm_select_threshold(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng r(41);
  std::vector<double> live(n), spoof(n);
  for (int i = 0; i < n; ++i) {
    live[i] = 0.6 + 0.2 * r.normal();
    spoof[i] = 0.3 + 0.2 * r.normal();
  }
  for (auto _ : state) {
    double th = select_threshold(live, spoof);
    benchmark::DoNotOptimize(th);
  }
}
BENCHMARK(bm_select_threshold)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
