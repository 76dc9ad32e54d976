#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fasvit/autograd.hpp"
#include "fasvit/image.hpp"
#include "fasvit/rng.hpp"

namespace fasvit {

// Tap indices are 1-based block numbers 1..depth; kTapFinalNorm selects the
// post-final-normalization class token (stored after the last block's entry).
inline constexpr int kTapFinalNorm = -1;

struct ModelConfig {
  int image_size = 224;
  int patch_size = 16;
  int depth = 12;
  int embed_dim = 768;
  int heads = 12;
  double mlp_ratio = 4.0;
  double alpha = 16.0;
  int score_tap = 0;  // 0 = default for depth
  int loss_tap = 0;   // 0 = default for depth
  int n_classes = 2;

  int grid() const { return image_size / patch_size; }
  int n_patches() const { return grid() * grid(); }
  int patch_dim() const { return patch_size * patch_size * 3; }
  int mlp_hidden() const;

  static int default_score_tap(int depth);  // 8 at depth 12, else round(2*depth/3)
  static int default_loss_tap(int depth);   // 11 at depth 12, else depth-1

  // Copy with zero taps replaced by the depth defaults.
  ModelConfig resolved() const;
  // Throws std::invalid_argument on any violated invariant (divisibility,
  // tap ranges, positivity). Expects taps already resolved.
  void validate() const;
};

template <typename T>
struct BlockParams {
  Mat<T> ln1_g, ln1_b;
  Mat<T> qkv_w, qkv_b;
  Mat<T> attn_out_w, attn_out_b;
  Mat<T> ln2_g, ln2_b;
  Mat<T> mlp1_w, mlp1_b;
  Mat<T> mlp2_w, mlp2_b;
};

template <typename T>
struct ModelParams {
  Mat<T> patch_embed_w, patch_embed_b;
  Mat<T> cls_token;  // 1 x dim
  Mat<T> pos_embed;  // (n_patches+1) x dim
  std::vector<BlockParams<T>> blocks;
  Mat<T> final_norm_g, final_norm_b;
  Mat<T> head_final_w, head_final_b;
  Mat<T> head_tap_w, head_tap_b;
  Mat<T> head_patch_w, head_patch_b;
};

// Visits every tensor as (name, matrix) in a fixed order; the same order is
// used for initialization draws, checkpoint layout, and optimizer state.
template <typename T, typename F>
void for_each_tensor(ModelParams<T>& p, F&& f) {
  f("patch_embed.w", p.patch_embed_w);
  f("patch_embed.b", p.patch_embed_b);
  f("cls_token", p.cls_token);
  f("pos_embed", p.pos_embed);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string pre = "block" + std::to_string(i) + ".";
    f(pre + "ln1.g", b.ln1_g);
    f(pre + "ln1.b", b.ln1_b);
    f(pre + "qkv.w", b.qkv_w);
    f(pre + "qkv.b", b.qkv_b);
    f(pre + "attn_out.w", b.attn_out_w);
    f(pre + "attn_out.b", b.attn_out_b);
    f(pre + "ln2.g", b.ln2_g);
    f(pre + "ln2.b", b.ln2_b);
    f(pre + "mlp1.w", b.mlp1_w);
    f(pre + "mlp1.b", b.mlp1_b);
    f(pre + "mlp2.w", b.mlp2_w);
    f(pre + "mlp2.b", b.mlp2_b);
  }
  f("final_norm.g", p.final_norm_g);
  f("final_norm.b", p.final_norm_b);
  f("head_final.w", p.head_final_w);
  f("head_final.b", p.head_final_b);
  f("head_tap.w", p.head_tap_w);
  f("head_tap.b", p.head_tap_b);
  f("head_patch.w", p.head_patch_w);
  f("head_patch.b", p.head_patch_b);
}

template <typename T, typename F>
void for_each_tensor(const ModelParams<T>& p, F&& f) {
  for_each_tensor(const_cast<ModelParams<T>&>(p),
                  [&f](const std::string& n, Mat<T>& m) {
                    f(n, static_cast<const Mat<T>&>(m));
                  });
}

// Name/pointer view of all tensors, for lockstep iteration over parameter,
// gradient, and velocity buffers.
template <typename T>
std::vector<std::pair<std::string, Mat<T>*>> tensor_refs(ModelParams<T>& p) {
  std::vector<std::pair<std::string, Mat<T>*>> v;
  for_each_tensor(p, [&v](const std::string& n, Mat<T>& m) { v.emplace_back(n, &m); });
  return v;
}

template <typename T>
void set_zero(ModelParams<T>& p) {
  for_each_tensor(p, [](const std::string&, Mat<T>& m) { m.setZero(); });
}

template <typename T>
ModelParams<T> zeros_like(const ModelParams<T>& p) {
  ModelParams<T> z = p;
  set_zero(z);
  return z;
}

// Allocates all tensors with the shapes implied by the config, zero-filled.
template <typename T>
ModelParams<T> make_params(const ModelConfig& cfg);

// Truncated-normal(0, 0.02) weights, zero biases, unit LayerNorm scales.
// Tensors are filled in for_each_tensor order, each matrix row-major, so the
// result is a pure function of (cfg, seed).
template <typename T>
void init_params(ModelParams<T>& p, const ModelConfig& cfg, Rng& rng);

template <typename T>
std::int64_t param_count(const ModelParams<T>& p);

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p);

// Flattened patches in raster order, one row per patch, each row the
// patch's pixels in (y, x, channel) order. Throws on geometry mismatch.
template <typename T>
Mat<T> patchify(const ImageTensor& img, int patch_size);

// Inverse of patchify, for round-trip checks.
ImageTensor unpatchify(const Mat<float>& patches, int image_size, int patch_size);

template <typename T>
struct EncoderActivations {
  // class_tokens[k] for k in [0, depth) is the class token after block k+1;
  // class_tokens[depth] is the post-final-norm class token. All 1 x dim.
  std::vector<Mat<T>> class_tokens;
  Mat<T> patch_tokens_final;       // n_patches x dim, before the final norm
  std::vector<Mat<T>> attention_final;  // per head, (n_patches+1) x (n_patches+1)
  Mat<T> logits_final;  // 1 x n_classes
  Mat<T> logits_tap;    // 1 x n_classes
  Mat<T> logits_patch;  // n_patches x n_classes
  bool degenerate_l2 = false;  // some feature hit the zero-norm fallback
};

// Tape plus handles into it, for building losses on top of the forward pass.
template <typename T>
struct ForwardGraph {
  Tape<T> tape{true};
  std::vector<typename Tape<T>::Ref> class_tokens;  // depth+1 entries
  typename Tape<T>::Ref patch_tokens_final;
  std::vector<typename Tape<T>::Ref> attention_final;  // per head
  typename Tape<T>::Ref attn_weights;  // 1 x n_patches, sums to 1
  typename Tape<T>::Ref logits_final, logits_tap, logits_patch;
  std::vector<std::uint8_t> l2_degenerate_final, l2_degenerate_tap, l2_degenerate_patch;

  bool any_degenerate() const;
};

// Builds the full forward computation on a fresh tape. When `grads` is
// non-null the parameter leaves accumulate into the same-named tensors of
// that buffer during backward. The image must be kNormalized and match the
// config geometry.
template <typename T>
ForwardGraph<T> forward_graph(const ModelParams<T>& params, const ModelConfig& cfg,
                              const ImageTensor& img, bool grad_enabled,
                              ModelParams<T>* grads = nullptr);

// Grad-free forward returning plain activations.
template <typename T>
EncoderActivations<T> forward(const ModelParams<T>& params, const ModelConfig& cfg,
                              const ImageTensor& img);

// Class-token attention over patches: class row of the final block's
// attention, averaged over heads, class column dropped, renormalized.
template <typename T>
Mat<T> attention_class_weights(const EncoderActivations<T>& acts);

// Class token at a tap: `tap` in 1..depth selects the post-block token,
// kTapFinalNorm the post-final-norm token.
template <typename T>
const Mat<T>& class_token_at(const EncoderActivations<T>& acts, int tap);

}  // namespace fasvit
