#include "fasvit/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace fasvit {

template <typename T>
T cross_entropy(const Mat<T>& logits, int y) {
  if (logits.rows() != 1) throw std::invalid_argument("cross_entropy: expects one logit row");
  if (y < 0 || y >= logits.cols()) throw std::invalid_argument("cross_entropy: label out of range");
  const T mx = logits.maxCoeff();
  const T z = (logits.array() - mx).exp().sum();
  return std::log(z) + mx - logits(0, y);
}

template <typename T>
T l2softmax(const Mat<T>& f, const Mat<T>& W, const Mat<T>& b, int y, T alpha,
            bool* degenerate) {
  if (f.rows() != 1) throw std::invalid_argument("l2softmax: feature must be a single row");
  if (W.rows() != f.cols() || b.cols() != W.cols() || b.rows() != 1)
    throw std::invalid_argument("l2softmax: weight shapes inconsistent with feature");
  if (!(alpha > T(0))) throw std::invalid_argument("l2softmax: alpha must be positive");
  if (degenerate) *degenerate = false;
  const T n = f.norm();
  Mat<T> fhat;
  if (n <= T(1e-12)) {
    if (degenerate) *degenerate = true;
    fhat = f;
  } else {
    fhat = f * (alpha / n);
  }
  Mat<T> logits = fhat * W + b;
  return cross_entropy(logits, y);
}

template <typename T>
T apl(const Mat<T>& patch_logits, const std::vector<int>& patch_labels,
      const Mat<T>& weights) {
  const Eigen::Index p = patch_logits.rows();
  if (static_cast<Eigen::Index>(patch_labels.size()) != p)
    throw std::invalid_argument("apl: label count does not match patch count");
  if (weights.rows() != 1 || weights.cols() != p)
    throw std::invalid_argument("apl: weights must be 1 x n_patches");
  if (std::abs(static_cast<double>(weights.sum()) - 1.0) > 1e-6)
    throw std::invalid_argument("apl: weights must sum to 1");
  T total = T(0);
  for (Eigen::Index j = 0; j < p; ++j) {
    Mat<T> row = patch_logits.row(j);
    total += weights(0, j) * cross_entropy(row, patch_labels[static_cast<size_t>(j)]);
  }
  return total;
}

std::vector<int> patch_label_vector(const Sample& sample, int n_patches) {
  if (sample.patch_labels.has_value()) {
    const auto& pl = *sample.patch_labels;
    if (static_cast<int>(pl.labels.size()) != n_patches)
      throw std::invalid_argument("patch labels do not match the model's patch count");
    std::vector<int> out(pl.labels.size());
    for (size_t i = 0; i < pl.labels.size(); ++i) out[i] = static_cast<int>(pl.labels[i]);
    return out;
  }
  return std::vector<int>(static_cast<size_t>(n_patches), static_cast<int>(sample.label));
}

template <typename T>
LossBreakdown overall_loss(const EncoderActivations<T>& acts, const Sample& sample,
                           const LossOptions& opts) {
  LossBreakdown out;
  const int y = static_cast<int>(sample.label);
  if (opts.use_class) out.l_class = static_cast<double>(cross_entropy(acts.logits_final, y));
  if (opts.use_tap) out.l_tap = static_cast<double>(cross_entropy(acts.logits_tap, y));
  if (opts.use_apl) {
    const Mat<T> w = attention_class_weights(acts);
    const auto labels = patch_label_vector(sample, static_cast<int>(acts.logits_patch.rows()));
    out.l_apl = static_cast<double>(apl(acts.logits_patch, labels, w));
  }
  out.l_overall = out.l_class + out.l_tap + out.l_apl;
  out.degenerate_l2 = acts.degenerate_l2;
  return out;
}

template <typename T>
LossGraph<T> loss_graph(ForwardGraph<T>& g, const Sample& sample, const LossOptions& opts) {
  auto& tp = g.tape;
  using Ref = typename Tape<T>::Ref;
  const int y = static_cast<int>(sample.label);

  LossGraph<T> out;
  Ref total;
  auto accumulate = [&](Ref term) { total = total.valid() ? tp.add(total, term) : term; };

  if (opts.use_class) {
    out.l_class = tp.ce_rows(g.logits_final, {y});
    out.values.l_class = static_cast<double>(tp.value(out.l_class)(0, 0));
    accumulate(out.l_class);
  }
  if (opts.use_apl) {
    const auto labels =
        patch_label_vector(sample, static_cast<int>(tp.value(g.logits_patch).rows()));
    Ref ce_patch = tp.ce_rows(g.logits_patch, labels);
    out.l_apl = tp.matmul(g.attn_weights, ce_patch);
    out.values.l_apl = static_cast<double>(tp.value(out.l_apl)(0, 0));
    accumulate(out.l_apl);
  }
  if (opts.use_tap) {
    out.l_tap = tp.ce_rows(g.logits_tap, {y});
    out.values.l_tap = static_cast<double>(tp.value(out.l_tap)(0, 0));
    accumulate(out.l_tap);
  }
  if (!total.valid()) throw std::invalid_argument("loss_graph: all terms disabled");
  out.total = total;
  out.values.l_overall = static_cast<double>(tp.value(total)(0, 0));
  out.values.degenerate_l2 = g.any_degenerate();
  return out;
}

template float cross_entropy<float>(const Mat<float>&, int);
template double cross_entropy<double>(const Mat<double>&, int);
template float l2softmax<float>(const Mat<float>&, const Mat<float>&, const Mat<float>&, int,
                                float, bool*);
template double l2softmax<double>(const Mat<double>&, const Mat<double>&, const Mat<double>&,
                                  int, double, bool*);
template float apl<float>(const Mat<float>&, const std::vector<int>&, const Mat<float>&);
template double apl<double>(const Mat<double>&, const std::vector<int>&, const Mat<double>&);
template LossBreakdown overall_loss<float>(const EncoderActivations<float>&, const Sample&,
                                           const LossOptions&);
template LossBreakdown overall_loss<double>(const EncoderActivations<double>&, const Sample&,
                                            const LossOptions&);
template struct LossGraph<float>;
template struct LossGraph<double>;
template LossGraph<float> loss_graph<float>(ForwardGraph<float>&, const Sample&,
                                            const LossOptions&);
template LossGraph<double> loss_graph<double>(ForwardGraph<double>&, const Sample&,
                                              const LossOptions&);

}  // namespace fasvit
