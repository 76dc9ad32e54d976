#include <doctest.h>

#include <cmath>

#include "fasvit/autograd.hpp"

using namespace fasvit;
using M = Mat<double>;

namespace {

// Central finite difference of a scalar-graph builder with respect to one
// entry of an input matrix.
template <typename BuildFn>
double fd_grad(BuildFn build, M& input, int r, int c, double h = 1e-6) {
  const double orig = input(r, c);
  input(r, c) = orig + h;
  const double up = build();
  input(r, c) = orig - h;
  const double down = build();
  input(r, c) = orig;
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("tape: matmul/add chain matches finite differences") {
  M a(2, 3), b(3, 2), bias(1, 2);
  a << 0.3, -0.7, 1.1, 0.9, 0.2, -0.4;
  b << 0.5, -0.2, 0.8, 0.1, -0.6, 0.4;
  bias << 0.05, -0.15;

  M ga = M::Zero(2, 3), gb = M::Zero(3, 2), gbias = M::Zero(1, 2);
  auto run = [&](bool with_grads) {
    Tape<double> t(true);
    auto ra = t.leaf(a, with_grads ? &ga : nullptr);
    auto rb = t.leaf(b, with_grads ? &gb : nullptr);
    auto rbias = t.leaf(bias, with_grads ? &gbias : nullptr);
    auto prod = t.add_rowvec(t.matmul(ra, rb), rbias);
    auto loss = t.dot(prod, prod);
    if (with_grads) t.backward(loss);
    return t.value(loss)(0, 0);
  };
  run(true);

  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      CHECK(ga(r, c) ==
            doctest::Approx(fd_grad([&] { return run(false); }, a, r, c)).epsilon(1e-5));
  for (int r = 0; r < 1; ++r)
    for (int c = 0; c < 2; ++c)
      CHECK(gbias(r, c) ==
            doctest::Approx(fd_grad([&] { return run(false); }, bias, r, c)).epsilon(1e-5));
}

TEST_CASE("tape: layer_norm and softmax_rows match finite differences") {
  M x(2, 4), gamma(1, 4), beta(1, 4);
  x << 0.2, -1.3, 0.7, 0.4, 1.5, 0.3, -0.8, 0.6;
  gamma << 1.1, 0.9, 1.0, 1.2;
  beta << 0.0, 0.1, -0.1, 0.05;

  M gx = M::Zero(2, 4), ggamma = M::Zero(1, 4), gbeta = M::Zero(1, 4);
  auto run = [&](bool with_grads) {
    Tape<double> t(true);
    auto rx = t.leaf(x, with_grads ? &gx : nullptr);
    auto rg = t.leaf(gamma, with_grads ? &ggamma : nullptr);
    auto rb = t.leaf(beta, with_grads ? &gbeta : nullptr);
    auto ln = t.layer_norm(rx, rg, rb, 1e-6);
    auto sm = t.softmax_rows(ln);
    auto loss = t.dot(sm, sm);
    if (with_grads) t.backward(loss);
    return t.value(loss)(0, 0);
  };
  run(true);

  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c)
      CHECK(gx(r, c) ==
            doctest::Approx(fd_grad([&] { return run(false); }, x, r, c)).epsilon(1e-4));
  for (int c = 0; c < 4; ++c)
    CHECK(ggamma(0, c) ==
          doctest::Approx(fd_grad([&] { return run(false); }, gamma, 0, c)).epsilon(1e-4));
}

TEST_CASE("tape: graphs survive being moved before backward") {
  struct Graph {
    Tape<double> tape{true};
    Tape<double>::Ref out;
  };
  M w(2, 2);
  w << 1.0, 2.0, 3.0, 4.0;
  M gw = M::Zero(2, 2);

  auto build = [&]() {
    Graph g;
    auto rw = g.tape.leaf(w, &gw);
    g.out = g.tape.dot(rw, rw);
    return g;
  };
  Graph g = build();
  Graph moved = std::move(g);
  moved.tape.backward(moved.out);
  CHECK(gw(0, 0) == doctest::Approx(2.0));
  CHECK(gw(1, 1) == doctest::Approx(8.0));
}

TEST_CASE("tape: grad-disabled mode computes identical values") {
  M a(3, 3);
  a << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  Tape<double> on(true), off(false);
  auto va = on.value(on.softmax_rows(on.leaf(a)));
  auto vb = off.value(off.softmax_rows(off.leaf(a)));
  CHECK((va - vb).cwiseAbs().maxCoeff() == 0.0);
}
