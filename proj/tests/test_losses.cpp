#include <doctest.h>

#include <cmath>
#include <vector>

#include "fasvit/losses.hpp"
#include "fasvit/rng.hpp"
#include "fasvit/vit.hpp"
#include "test_util.hpp"

using namespace fasvit;
using M = Mat<double>;

namespace {

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.image_size = 16;
  cfg.patch_size = 8;
  cfg.depth = 2;
  cfg.embed_dim = 8;
  cfg.heads = 2;
  return cfg.resolved();
}

ImageTensor random_normalized(int size, Rng& r) {
  ImageTensor img(size, size);
  for (auto& v : img.data) v = static_cast<float>(r.uniform());
  return normalize_per_channel(img);
}

Sample make_sample(const ImageTensor& img, Label label) {
  Sample s;
  s.id = "s";
  s.image = img;
  s.label = label;
  s.attack = label == Label::kLive ? AttackType::kNone : AttackType::kSynthPrint;
  return s;
}

}  // namespace

TEST_CASE("losses: uniform logits give ln 2") {
  M logits(1, 2);
  logits << 0.0, 0.0;
  CHECK(std::abs(cross_entropy(logits, 0) - std::log(2.0)) < 1e-12);
  CHECK(std::abs(cross_entropy(logits, 1) - std::log(2.0)) < 1e-12);

  // Through the normalized-feature head: zero weights collapse any feature
  // to uniform logits.
  M f(1, 4);
  f << 0.3, -1.2, 0.5, 2.0;
  const M W = M::Zero(4, 2);
  const M b = M::Zero(1, 2);
  CHECK(std::abs(l2softmax(f, W, b, 0, 16.0) - std::log(2.0)) < 1e-12);
}

TEST_CASE("losses: feature rescale invariance") {
  Rng r(5);
  M f(1, 6), W(6, 2), b(1, 2);
  for (int i = 0; i < 6; ++i) f(0, i) = r.normal();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) W(i, j) = r.normal();
  b << 0.1, -0.2;
  const double base = l2softmax(f, W, b, 1, 16.0);
  for (double c : {1e-3, 3.0, 1e4}) {
    const M scaled = f * c;
    CHECK(std::abs(l2softmax(scaled, W, b, 1, 16.0) - base) < 1e-12);
  }
}

TEST_CASE("losses: hand-worked head value") {
  M f(1, 2), W(2, 2), b(1, 2);
  f << 1.0, 0.0;
  W << 1.0, 0.0, 0.0, 1.0;
  b << 0.0, 0.0;
  // Feature rescales to [2, 0]; CE at class 0 is log(1 + e^-2).
  const double expect = 0.12692801104297263;
  CHECK(std::abs(l2softmax(f, W, b, 0, 2.0) - expect) < 1e-12);
}

TEST_CASE("losses: large alpha stays finite") {
  Rng r(6);
  M f(1, 8), W(8, 2), b(1, 2);
  for (int i = 0; i < 8; ++i) f(0, i) = r.normal();
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 2; ++j) W(i, j) = r.normal();
  b.setZero();
  for (double alpha : {8.0, 16.0, 32.0}) {
    for (int y : {0, 1}) {
      const double v = l2softmax(f, W, b, y, alpha);
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
    }
  }
}

TEST_CASE("losses: zero feature is flagged degenerate") {
  const M f = M::Zero(1, 4);
  M W(4, 2);
  W.setRandom();
  M b(1, 2);
  b << 0.5, -0.5;
  bool degenerate = false;
  const double v = l2softmax(f, W, b, 0, 16.0, &degenerate);
  CHECK(degenerate);
  // The rescale is skipped, so only the bias survives.
  M logits = b;
  CHECK(std::abs(v - cross_entropy(logits, 0)) < 1e-12);

  degenerate = true;
  M f2(1, 4);
  f2 << 1, 0, 0, 0;
  l2softmax(f2, W, b, 0, 16.0, &degenerate);
  CHECK_FALSE(degenerate);
}

TEST_CASE("losses: l2softmax input validation") {
  M f(1, 3), W(3, 2), b(1, 2);
  f.setOnes();
  W.setOnes();
  b.setZero();
  CHECK_THROWS_AS(l2softmax(f, W, b, 0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(l2softmax(f, W, b, 2, 16.0), std::invalid_argument);
  M Wbad(4, 2);
  Wbad.setOnes();
  CHECK_THROWS_AS(l2softmax(f, Wbad, b, 0, 16.0), std::invalid_argument);
}

TEST_CASE("losses: attention-weighted patch term") {
  Rng r(7);
  M logits(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) logits(i, j) = r.normal();
  const std::vector<int> labels = {0, 1, 1, 0};

  SUBCASE("one-hot weights pick out a single patch") {
    for (int k = 0; k < 4; ++k) {
      M w = M::Zero(1, 4);
      w(0, k) = 1.0;
      M row = logits.row(k);
      CHECK(std::abs(apl(logits, labels, w) - cross_entropy(row, labels[static_cast<size_t>(k)])) <
            1e-12);
    }
  }

  SUBCASE("general weights match the direct sum") {
    Rng r2(8);
    for (int trial = 0; trial < 50; ++trial) {
      M w(1, 4);
      for (int j = 0; j < 4; ++j) w(0, j) = r2.uniform(0.05, 1.0);
      w /= w.sum();
      double expect = 0.0;
      for (int j = 0; j < 4; ++j) {
        M row = logits.row(j);
        expect += w(0, j) * cross_entropy(row, labels[static_cast<size_t>(j)]);
      }
      CHECK(std::abs(apl(logits, labels, w) - expect) < 1e-10);
    }
  }

  SUBCASE("identical rows make the weights irrelevant") {
    M same(4, 2);
    for (int i = 0; i < 4; ++i) same.row(i) << 0.7, -0.3;
    const std::vector<int> ones(4, 1);
    M u = M::Constant(1, 4, 0.25);
    M skew(1, 4);
    skew << 0.7, 0.1, 0.1, 0.1;
    M row = same.row(0);
    const double expect = cross_entropy(row, 1);
    CHECK(std::abs(apl(same, ones, u) - expect) < 1e-12);
    CHECK(std::abs(apl(same, ones, skew) - expect) < 1e-12);
  }

  SUBCASE("validation") {
    M w = M::Constant(1, 4, 0.25);
    CHECK_THROWS_AS(apl(logits, {0, 1}, w), std::invalid_argument);
    M wbad = M::Constant(1, 4, 0.3);
    CHECK_THROWS_AS(apl(logits, labels, wbad), std::invalid_argument);
    M wshape = M::Constant(2, 2, 0.25);
    CHECK_THROWS_AS(apl(logits, labels, wshape), std::invalid_argument);
  }
}

TEST_CASE("losses: patch label vector") {
  Sample s = make_sample(ImageTensor(16, 16, 0.5f), Label::kSpoof);
  auto broadcast = patch_label_vector(s, 4);
  REQUIRE(broadcast.size() == 4);
  for (int v : broadcast) CHECK(v == 1);

  s.label = Label::kLive;
  s.attack = AttackType::kNone;
  broadcast = patch_label_vector(s, 4);
  for (int v : broadcast) CHECK(v == 0);

  PatchLabels pl;
  pl.grid = 2;
  pl.labels = {Label::kLive, Label::kSpoof, Label::kSpoof, Label::kLive};
  s.patch_labels = pl;
  const auto mixed = patch_label_vector(s, 4);
  CHECK(mixed == std::vector<int>({0, 1, 1, 0}));
  CHECK_THROWS_AS(patch_label_vector(s, 9), std::invalid_argument);
}

TEST_CASE("losses: composite decomposes exactly and respects the switches") {
  const ModelConfig cfg = tiny_config();
  auto params = make_params<double>(cfg);
  Rng r(99);
  init_params(params, cfg, r);

  Rng ir(100);
  for (int trial = 0; trial < 100; ++trial) {
    const ImageTensor img = random_normalized(16, ir);
    const Sample s = make_sample(img, trial % 2 == 0 ? Label::kLive : Label::kSpoof);
    const auto acts = forward(params, cfg, img);
    const LossBreakdown all = overall_loss(acts, s);
    CHECK(all.l_class >= 0.0);
    CHECK(all.l_tap >= 0.0);
    CHECK(all.l_apl >= 0.0);
    CHECK(std::abs(all.l_overall - (all.l_class + all.l_tap + all.l_apl)) < 1e-9);
  }

  const ImageTensor img = random_normalized(16, ir);
  const Sample s = make_sample(img, Label::kSpoof);
  const auto acts = forward(params, cfg, img);
  const LossBreakdown all = overall_loss(acts, s);

  LossOptions opts;
  opts.use_apl = false;
  LossBreakdown no_apl = overall_loss(acts, s, opts);
  CHECK(no_apl.l_apl == 0.0);
  CHECK(std::abs(no_apl.l_overall - (all.l_class + all.l_tap)) < 1e-12);

  opts = LossOptions{};
  opts.use_class = false;
  LossBreakdown no_class = overall_loss(acts, s, opts);
  CHECK(no_class.l_class == 0.0);
  CHECK(std::abs(no_class.l_overall - (all.l_tap + all.l_apl)) < 1e-12);

  opts = LossOptions{};
  opts.use_tap = false;
  LossBreakdown no_tap = overall_loss(acts, s, opts);
  CHECK(no_tap.l_tap == 0.0);
  CHECK(std::abs(no_tap.l_overall - (all.l_class + all.l_apl)) < 1e-12);
}

TEST_CASE("losses: graph values agree with the value-level composite") {
  const ModelConfig cfg = tiny_config();
  auto params = make_params<double>(cfg);
  Rng r(123);
  init_params(params, cfg, r);

  Rng ir(124);
  for (int trial = 0; trial < 10; ++trial) {
    const ImageTensor img = random_normalized(16, ir);
    Sample s = make_sample(img, trial % 2 == 0 ? Label::kLive : Label::kSpoof);
    if (trial == 9) {
      PatchLabels pl;
      pl.grid = 2;
      pl.labels = {Label::kLive, Label::kSpoof, Label::kLive, Label::kSpoof};
      s.patch_labels = pl;
      s.label = Label::kSpoof;
      s.attack = AttackType::kSynthDisplay;
    }
    const LossBreakdown direct = overall_loss(forward(params, cfg, img), s);

    auto g = forward_graph(params, cfg, img, true);
    const auto lg = loss_graph(g, s);
    CHECK(std::abs(lg.values.l_class - direct.l_class) < 1e-9);
    CHECK(std::abs(lg.values.l_tap - direct.l_tap) < 1e-9);
    CHECK(std::abs(lg.values.l_apl - direct.l_apl) < 1e-9);
    CHECK(std::abs(lg.values.l_overall - direct.l_overall) < 1e-9);
    CHECK(std::abs(static_cast<double>(g.tape.value(lg.total)(0, 0)) - direct.l_overall) < 1e-9);
  }

  auto g = forward_graph(params, cfg, random_normalized(16, ir), true);
  LossOptions none;
  none.use_class = none.use_tap = none.use_apl = false;
  Sample s = make_sample(ImageTensor(16, 16, 0.0f), Label::kLive);
  CHECK_THROWS_AS(loss_graph(g, s, none), std::invalid_argument);
}
