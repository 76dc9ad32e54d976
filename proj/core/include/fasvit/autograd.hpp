#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fasvit/common.hpp"

namespace fasvit {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
bool all_finite(const Mat<T>& m) {
  return m.allFinite();
}

// Reverse-mode autodiff tape over dense matrices. Ops append nodes holding
// the forward value plus a closure that scatters the node's gradient to its
// inputs; backward() runs the closures in reverse creation order. Leaves can
// point at external gradient accumulators so a training step reads its grads
// straight out of parameter-shaped buffers it owns.
//
// Closures receive the tape by reference instead of capturing `this`, so a
// Tape can be moved (e.g. inside a returned forward-graph struct) safely.
// With grads disabled the tape only stores values, and the same graph
// builder doubles as the inference path.
template <typename T>
class Tape {
 public:
  using M = Mat<T>;
  struct Ref {
    int i = -1;
    bool valid() const { return i >= 0; }
  };

  explicit Tape(bool grad_enabled = true) : grad_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool grad_enabled() const { return grad_; }
  int size() const { return static_cast<int>(nodes_.size()); }
  const M& value(Ref r) const { return nodes_[check(r)].value; }
  const M& grad(Ref r) const { return nodes_[check(r)].grad; }

  // Parameter node. On backward the accumulated gradient is added into
  // *grad_sink (ignored when null or when grads are disabled).
  Ref leaf(const M& v, M* grad_sink = nullptr) {
    Ref r = push(v);
    if (grad_ && grad_sink) {
      nodes_[r.i].back = [r, grad_sink](Tape& t) { *grad_sink += t.nodes_[r.i].grad; };
    }
    return r;
  }

  // Value that never needs a gradient (inputs, fixed masks, etc).
  Ref constant(const M& v) { return push(v); }

  Ref matmul(Ref a, Ref b) {
    Ref r = push(value(a) * value(b));
    record(r, [r, a, b](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      t.nodes_[a.i].grad.noalias() += g * t.nodes_[b.i].value.transpose();
      t.nodes_[b.i].grad.noalias() += t.nodes_[a.i].value.transpose() * g;
    });
    return r;
  }

  // A * B^T without materializing the transpose in the graph.
  Ref matmul_nt(Ref a, Ref b) {
    Ref r = push(value(a) * value(b).transpose());
    record(r, [r, a, b](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      t.nodes_[a.i].grad.noalias() += g * t.nodes_[b.i].value;
      t.nodes_[b.i].grad.noalias() += g.transpose() * t.nodes_[a.i].value;
    });
    return r;
  }

  Ref add(Ref a, Ref b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
            "add: shape mismatch");
    Ref r = push(value(a) + value(b));
    record(r, [r, a, b](Tape& t) {
      t.nodes_[a.i].grad += t.nodes_[r.i].grad;
      t.nodes_[b.i].grad += t.nodes_[r.i].grad;
    });
    return r;
  }

  // Broadcast-add a 1 x d row vector to every row of an n x d matrix.
  Ref add_rowvec(Ref a, Ref b) {
    require(value(b).rows() == 1 && value(b).cols() == value(a).cols(),
            "add_rowvec: needs a 1 x cols(a) row");
    M v = value(a);
    v.rowwise() += value(b).row(0);
    Ref r = push(std::move(v));
    record(r, [r, a, b](Tape& t) {
      t.nodes_[a.i].grad += t.nodes_[r.i].grad;
      t.nodes_[b.i].grad += t.nodes_[r.i].grad.colwise().sum();
    });
    return r;
  }

  Ref scale(Ref a, T s) {
    Ref r = push(value(a) * s);
    record(r, [r, a, s](Tape& t) { t.nodes_[a.i].grad += t.nodes_[r.i].grad * s; });
    return r;
  }

  Ref rows(Ref a, int r0, int n) {
    Ref r = push(value(a).middleRows(r0, n));
    record(r, [r, a, r0, n](Tape& t) {
      t.nodes_[a.i].grad.middleRows(r0, n) += t.nodes_[r.i].grad;
    });
    return r;
  }

  Ref cols(Ref a, int c0, int n) {
    Ref r = push(value(a).middleCols(c0, n));
    record(r, [r, a, c0, n](Tape& t) {
      t.nodes_[a.i].grad.middleCols(c0, n) += t.nodes_[r.i].grad;
    });
    return r;
  }

  Ref vcat(Ref a, Ref b) {
    require(value(a).cols() == value(b).cols(), "vcat: column mismatch");
    M v(value(a).rows() + value(b).rows(), value(a).cols());
    v.topRows(value(a).rows()) = value(a);
    v.bottomRows(value(b).rows()) = value(b);
    Ref r = push(std::move(v));
    record(r, [r, a, b](Tape& t) {
      const auto na = t.nodes_[a.i].value.rows();
      t.nodes_[a.i].grad += t.nodes_[r.i].grad.topRows(na);
      t.nodes_[b.i].grad += t.nodes_[r.i].grad.bottomRows(t.nodes_[b.i].value.rows());
    });
    return r;
  }

  Ref hcat(const std::vector<Ref>& parts) {
    require(!parts.empty(), "hcat: empty");
    Eigen::Index cols_total = 0;
    for (Ref p : parts) cols_total += value(p).cols();
    M v(value(parts[0]).rows(), cols_total);
    Eigen::Index off = 0;
    for (Ref p : parts) {
      v.middleCols(off, value(p).cols()) = value(p);
      off += value(p).cols();
    }
    Ref r = push(std::move(v));
    record(r, [r, parts](Tape& t) {
      Eigen::Index o = 0;
      for (Ref p : parts) {
        const auto w = t.nodes_[p.i].value.cols();
        t.nodes_[p.i].grad += t.nodes_[r.i].grad.middleCols(o, w);
        o += w;
      }
    });
    return r;
  }

  // Per-row layer normalization with learnable 1 x d scale and offset.
  Ref layer_norm(Ref x, Ref gamma, Ref beta, T eps) {
    const M& xv = value(x);
    const auto n = xv.rows(), d = xv.cols();
    require(value(gamma).rows() == 1 && value(gamma).cols() == d, "layer_norm: gamma shape");
    require(value(beta).rows() == 1 && value(beta).cols() == d, "layer_norm: beta shape");
    auto xhat = std::make_shared<M>(n, d);
    auto inv_std = std::make_shared<std::vector<T>>(static_cast<size_t>(n));
    M y(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mu = xv.row(i).mean();
      const T var = (xv.row(i).array() - mu).square().sum() / static_cast<T>(d);
      const T is = T(1) / std::sqrt(var + eps);
      (*inv_std)[static_cast<size_t>(i)] = is;
      xhat->row(i) = ((xv.row(i).array() - mu) * is).matrix();
      y.row(i) = xhat->row(i).cwiseProduct(value(gamma).row(0)) + value(beta).row(0);
    }
    Ref r = push(std::move(y));
    record(r, [r, x, gamma, beta, xhat, inv_std](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      t.nodes_[gamma.i].grad += g.cwiseProduct(*xhat).colwise().sum();
      t.nodes_[beta.i].grad += g.colwise().sum();
      const auto& gam = t.nodes_[gamma.i].value;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        Eigen::Matrix<T, 1, Eigen::Dynamic> dxh = g.row(i).cwiseProduct(gam.row(0));
        const T m1 = dxh.mean();
        const T m2 = dxh.cwiseProduct(xhat->row(i)).mean();
        t.nodes_[x.i].grad.row(i) +=
            ((*inv_std)[static_cast<size_t>(i)] *
             (dxh.array() - m1 - xhat->row(i).array() * m2))
                .matrix();
      }
    });
    return r;
  }

  Ref softmax_rows(Ref a) {
    const M& xv = value(a);
    M p(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const T mx = xv.row(i).maxCoeff();
      p.row(i) = (xv.row(i).array() - mx).exp().matrix();
      p.row(i) /= p.row(i).sum();
    }
    Ref r = push(std::move(p));
    record(r, [r, a](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      const M& p2 = t.nodes_[r.i].value;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        const T dot = g.row(i).cwiseProduct(p2.row(i)).sum();
        t.nodes_[a.i].grad.row(i) +=
            (p2.row(i).array() * (g.row(i).array() - dot)).matrix();
      }
    });
    return r;
  }

  // Exact (erf-based) GELU.
  Ref gelu(Ref a) {
    const M& xv = value(a);
    M y = xv.unaryExpr([](T x) {
      return T(0.5) * x * (T(1) + std::erf(x / std::sqrt(T(2))));
    });
    Ref r = push(std::move(y));
    record(r, [r, a](Tape& t) {
      const M& xv2 = t.nodes_[a.i].value;
      const T inv_sqrt2pi = T(1) / std::sqrt(T(2) * T(std::acos(-1.0)));
      M d = xv2.unaryExpr([inv_sqrt2pi](T x) {
        return T(0.5) * (T(1) + std::erf(x / std::sqrt(T(2)))) +
               x * inv_sqrt2pi * std::exp(T(-0.5) * x * x);
      });
      t.nodes_[a.i].grad += t.nodes_[r.i].grad.cwiseProduct(d);
    });
    return r;
  }

  // Rescale each row to L2 norm alpha. Rows with norm <= tol pass through
  // unchanged; their indices are flagged in *degenerate when provided.
  Ref l2_rescale_rows(Ref a, T alpha, T tol = T(1e-12),
                      std::vector<std::uint8_t>* degenerate = nullptr) {
    const M& xv = value(a);
    auto scaled = std::make_shared<std::vector<std::uint8_t>>(
        static_cast<size_t>(xv.rows()), std::uint8_t(1));
    if (degenerate) degenerate->assign(static_cast<size_t>(xv.rows()), 0);
    M y(xv.rows(), xv.cols());
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const T n = xv.row(i).norm();
      if (n <= tol) {
        (*scaled)[static_cast<size_t>(i)] = 0;
        if (degenerate) (*degenerate)[static_cast<size_t>(i)] = 1;
        y.row(i) = xv.row(i);
      } else {
        y.row(i) = xv.row(i) * (alpha / n);
      }
    }
    Ref r = push(std::move(y));
    record(r, [r, a, alpha, scaled](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      const M& xv2 = t.nodes_[a.i].value;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        if (!(*scaled)[static_cast<size_t>(i)]) {
          t.nodes_[a.i].grad.row(i) += g.row(i);
          continue;
        }
        const T n = xv2.row(i).norm();
        const T proj = xv2.row(i).cwiseProduct(g.row(i)).sum() / (n * n);
        t.nodes_[a.i].grad.row(i) += (alpha / n) * (g.row(i) - proj * xv2.row(i));
      }
    });
    return r;
  }

  // Per-row softmax cross entropy against integer labels: out is n x 1 with
  // out(i) = logsumexp(logits.row(i)) - logits(i, labels[i]).
  Ref ce_rows(Ref logits, std::vector<int> labels) {
    const M& xv = value(logits);
    require(static_cast<Eigen::Index>(labels.size()) == xv.rows(), "ce_rows: label count");
    auto probs = std::make_shared<M>(xv.rows(), xv.cols());
    M y(xv.rows(), 1);
    for (Eigen::Index i = 0; i < xv.rows(); ++i) {
      const int lab = labels[static_cast<size_t>(i)];
      require(lab >= 0 && lab < xv.cols(), "ce_rows: label out of range");
      const T mx = xv.row(i).maxCoeff();
      Eigen::Matrix<T, 1, Eigen::Dynamic> e = (xv.row(i).array() - mx).exp().matrix();
      const T z = e.sum();
      probs->row(i) = e / z;
      y(i, 0) = std::log(z) + mx - xv(i, lab);
    }
    Ref r = push(std::move(y));
    record(r, [r, logits, labels = std::move(labels), probs](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        t.nodes_[logits.i].grad.row(i) += g(i, 0) * probs->row(i);
        t.nodes_[logits.i].grad(i, labels[static_cast<size_t>(i)]) -= g(i, 0);
      }
    });
    return r;
  }

  // Sum of the elementwise product, as a 1 x 1 node. Shapes must match.
  Ref dot(Ref a, Ref b) {
    require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
            "dot: shape mismatch");
    M v(1, 1);
    v(0, 0) = value(a).cwiseProduct(value(b)).sum();
    Ref r = push(std::move(v));
    record(r, [r, a, b](Tape& t) {
      const T g = t.nodes_[r.i].grad(0, 0);
      t.nodes_[a.i].grad += g * t.nodes_[b.i].value;
      t.nodes_[b.i].grad += g * t.nodes_[a.i].value;
    });
    return r;
  }

  Ref sum(Ref a) {
    M v(1, 1);
    v(0, 0) = value(a).sum();
    Ref r = push(std::move(v));
    record(r, [r, a](Tape& t) {
      t.nodes_[a.i].grad.array() += t.nodes_[r.i].grad(0, 0);
    });
    return r;
  }

  // Divide by the sum of all entries (e.g. renormalizing attention weights).
  Ref normalize_sum(Ref a) {
    const T s = value(a).sum();
    if (!(s > T(0))) throw NumericError("normalize_sum: nonpositive sum");
    Ref r = push(value(a) / s);
    record(r, [r, a, s](Tape& t) {
      const M& g = t.nodes_[r.i].grad;
      const T d = g.cwiseProduct(t.nodes_[r.i].value).sum();
      t.nodes_[a.i].grad += ((g.array() - d) / s).matrix();
    });
    return r;
  }

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be 1 x 1.
  void backward(Ref loss) {
    require(grad_, "backward: tape built with grads disabled");
    require(value(loss).rows() == 1 && value(loss).cols() == 1, "backward: loss must be 1x1");
    for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
    nodes_[loss.i].grad(0, 0) = T(1);
    for (int i = loss.i; i >= 0; --i)
      if (nodes_[i].back) nodes_[i].back(*this);
  }

 private:
  struct Node {
    M value;
    M grad;
    std::function<void(Tape&)> back;
  };

  int check(Ref r) const {
    require(r.i >= 0 && r.i < static_cast<int>(nodes_.size()), "bad tape ref");
    return r.i;
  }

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  Ref push(M v) {
    nodes_.push_back(Node{std::move(v), M(), nullptr});
    return Ref{static_cast<int>(nodes_.size()) - 1};
  }

  template <typename F>
  void record(Ref r, F&& f) {
    if (grad_) nodes_[r.i].back = std::forward<F>(f);
  }

  bool grad_;
  std::vector<Node> nodes_;
};

}  // namespace fasvit
