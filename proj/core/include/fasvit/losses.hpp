#pragma once

#include <optional>
#include <vector>

#include "fasvit/sample.hpp"
#include "fasvit/vit.hpp"

namespace fasvit {

struct LossOptions {
  bool use_class = true;  // final-norm class-token term
  bool use_tap = true;    // intermediate class-token term
  bool use_apl = true;    // attention-weighted patch term
};

struct LossBreakdown {
  double l_class = 0.0;
  double l_tap = 0.0;
  double l_apl = 0.0;
  double l_overall = 0.0;
  bool degenerate_l2 = false;
};

// Cross entropy of softmax(W f_hat + b) at class y, where f_hat is f
// rescaled to L2 norm alpha. f is 1 x d, W is d x C, b is 1 x C. A zero-norm
// f skips the rescale and sets *degenerate.
template <typename T>
T l2softmax(const Mat<T>& f, const Mat<T>& W, const Mat<T>& b, int y, T alpha,
            bool* degenerate = nullptr);

// Plain softmax cross entropy of one logit row against class y.
template <typename T>
T cross_entropy(const Mat<T>& logits, int y);

// Attention-weighted patch loss: sum_j weights(j) * CE(patch_logits.row(j),
// labels[j]). weights is 1 x P and must sum to 1 within 1e-6.
template <typename T>
T apl(const Mat<T>& patch_logits, const std::vector<int>& patch_labels,
      const Mat<T>& weights);

// Per-patch integer labels for a sample: its PatchLabels when present
// (length must be n_patches), otherwise the image label broadcast.
std::vector<int> patch_label_vector(const Sample& sample, int n_patches);

// Value-level composite loss from precomputed activations.
template <typename T>
LossBreakdown overall_loss(const EncoderActivations<T>& acts, const Sample& sample,
                           const LossOptions& opts = {});

// Tape-level composite loss on top of a forward graph; gradients flow
// through the logits and through the attention weights of the APL term.
template <typename T>
struct LossGraph {
  typename Tape<T>::Ref total;
  typename Tape<T>::Ref l_class, l_tap, l_apl;  // invalid when the term is off
  LossBreakdown values;
};

template <typename T>
LossGraph<T> loss_graph(ForwardGraph<T>& g, const Sample& sample,
                        const LossOptions& opts = {});

}  // namespace fasvit
