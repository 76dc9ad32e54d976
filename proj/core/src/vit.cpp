#include "fasvit/vit.hpp"

#include <cmath>
#include <stdexcept>

namespace fasvit {

int ModelConfig::mlp_hidden() const {
  return static_cast<int>(std::lround(mlp_ratio * embed_dim));
}

int ModelConfig::default_score_tap(int depth) {
  if (depth == 12) return 8;
  const int t = static_cast<int>(std::lround(2.0 * depth / 3.0));
  return std::max(1, std::min(depth, t));
}

int ModelConfig::default_loss_tap(int depth) {
  if (depth == 12) return 11;
  return std::max(1, depth - 1);
}

ModelConfig ModelConfig::resolved() const {
  ModelConfig c = *this;
  if (c.score_tap == 0) c.score_tap = default_score_tap(c.depth);
  if (c.loss_tap == 0) c.loss_tap = default_loss_tap(c.depth);
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("ModelConfig: " + msg); };
  if (image_size <= 0 || patch_size <= 0) fail("image_size and patch_size must be positive");
  if (image_size % patch_size != 0) fail("image_size must be divisible by patch_size");
  if (depth < 1) fail("depth must be >= 1");
  if (embed_dim < 1 || heads < 1) fail("embed_dim and heads must be positive");
  if (embed_dim % heads != 0) fail("embed_dim must be divisible by heads");
  if (mlp_ratio <= 0.0) fail("mlp_ratio must be positive");
  if (alpha <= 0.0) fail("alpha must be positive");
  if (score_tap < 1 || score_tap > depth) fail("score_tap out of range 1..depth");
  if (loss_tap < 1 || loss_tap > depth) fail("loss_tap out of range 1..depth");
  if (n_classes != 2) fail("n_classes is fixed at 2");
}

template <typename T>
ModelParams<T> make_params(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.embed_dim, h = cfg.mlp_hidden(), n = cfg.n_patches();
  ModelParams<T> p;
  p.patch_embed_w = Mat<T>::Zero(cfg.patch_dim(), d);
  p.patch_embed_b = Mat<T>::Zero(1, d);
  p.cls_token = Mat<T>::Zero(1, d);
  p.pos_embed = Mat<T>::Zero(n + 1, d);
  p.blocks.resize(static_cast<size_t>(cfg.depth));
  for (auto& b : p.blocks) {
    b.ln1_g = Mat<T>::Zero(1, d);
    b.ln1_b = Mat<T>::Zero(1, d);
    b.qkv_w = Mat<T>::Zero(d, 3 * d);
    b.qkv_b = Mat<T>::Zero(1, 3 * d);
    b.attn_out_w = Mat<T>::Zero(d, d);
    b.attn_out_b = Mat<T>::Zero(1, d);
    b.ln2_g = Mat<T>::Zero(1, d);
    b.ln2_b = Mat<T>::Zero(1, d);
    b.mlp1_w = Mat<T>::Zero(d, h);
    b.mlp1_b = Mat<T>::Zero(1, h);
    b.mlp2_w = Mat<T>::Zero(h, d);
    b.mlp2_b = Mat<T>::Zero(1, d);
  }
  p.final_norm_g = Mat<T>::Zero(1, d);
  p.final_norm_b = Mat<T>::Zero(1, d);
  p.head_final_w = Mat<T>::Zero(d, cfg.n_classes);
  p.head_final_b = Mat<T>::Zero(1, cfg.n_classes);
  p.head_tap_w = Mat<T>::Zero(d, cfg.n_classes);
  p.head_tap_b = Mat<T>::Zero(1, cfg.n_classes);
  p.head_patch_w = Mat<T>::Zero(d, cfg.n_classes);
  p.head_patch_b = Mat<T>::Zero(1, cfg.n_classes);
  return p;
}

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename T>
void init_params(ModelParams<T>& p, const ModelConfig& cfg, Rng& rng) {
  (void)cfg;
  for_each_tensor(p, [&rng](const std::string& name, Mat<T>& m) {
    if (ends_with(name, ".g")) {
      m.setOnes();
    } else if (ends_with(name, ".b")) {
      m.setZero();
    } else {
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
          m(i, j) = static_cast<T>(rng.truncated_normal(0.0, 0.02));
    }
  });
}

template <typename T>
std::int64_t param_count(const ModelParams<T>& p) {
  std::int64_t n = 0;
  for_each_tensor(p, [&n](const std::string&, const Mat<T>& m) { n += m.size(); });
  return n;
}

template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& p) {
  ModelParams<To> out;
  out.blocks.resize(p.blocks.size());
  auto copy = [](const Mat<From>& src, Mat<To>& dst) { dst = src.template cast<To>(); };
  copy(p.patch_embed_w, out.patch_embed_w);
  copy(p.patch_embed_b, out.patch_embed_b);
  copy(p.cls_token, out.cls_token);
  copy(p.pos_embed, out.pos_embed);
  for (size_t i = 0; i < p.blocks.size(); ++i) {
    copy(p.blocks[i].ln1_g, out.blocks[i].ln1_g);
    copy(p.blocks[i].ln1_b, out.blocks[i].ln1_b);
    copy(p.blocks[i].qkv_w, out.blocks[i].qkv_w);
    copy(p.blocks[i].qkv_b, out.blocks[i].qkv_b);
    copy(p.blocks[i].attn_out_w, out.blocks[i].attn_out_w);
    copy(p.blocks[i].attn_out_b, out.blocks[i].attn_out_b);
    copy(p.blocks[i].ln2_g, out.blocks[i].ln2_g);
    copy(p.blocks[i].ln2_b, out.blocks[i].ln2_b);
    copy(p.blocks[i].mlp1_w, out.blocks[i].mlp1_w);
    copy(p.blocks[i].mlp1_b, out.blocks[i].mlp1_b);
    copy(p.blocks[i].mlp2_w, out.blocks[i].mlp2_w);
    copy(p.blocks[i].mlp2_b, out.blocks[i].mlp2_b);
  }
  copy(p.final_norm_g, out.final_norm_g);
  copy(p.final_norm_b, out.final_norm_b);
  copy(p.head_final_w, out.head_final_w);
  copy(p.head_final_b, out.head_final_b);
  copy(p.head_tap_w, out.head_tap_w);
  copy(p.head_tap_b, out.head_tap_b);
  copy(p.head_patch_w, out.head_patch_w);
  copy(p.head_patch_b, out.head_patch_b);
  return out;
}

template <typename T>
Mat<T> patchify(const ImageTensor& img, int patch_size) {
  if (patch_size <= 0 || img.height % patch_size != 0 || img.width % patch_size != 0)
    throw std::invalid_argument("patchify: patch size must divide the image size");
  const int gy = img.height / patch_size, gx = img.width / patch_size;
  Mat<T> out(static_cast<Eigen::Index>(gy) * gx, static_cast<Eigen::Index>(patch_size) * patch_size * 3);
  for (int py = 0; py < gy; ++py)
    for (int px = 0; px < gx; ++px) {
      const Eigen::Index row = static_cast<Eigen::Index>(py) * gx + px;
      Eigen::Index k = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            out(row, k++) = static_cast<T>(img.at(py * patch_size + y, px * patch_size + x, c));
    }
  return out;
}

ImageTensor unpatchify(const Mat<float>& patches, int image_size, int patch_size) {
  if (patch_size <= 0 || image_size % patch_size != 0)
    throw std::invalid_argument("unpatchify: patch size must divide the image size");
  const int g = image_size / patch_size;
  if (patches.rows() != static_cast<Eigen::Index>(g) * g ||
      patches.cols() != static_cast<Eigen::Index>(patch_size) * patch_size * 3)
    throw std::invalid_argument("unpatchify: patch matrix shape mismatch");
  ImageTensor img(image_size, image_size, 0.0f, ColorSpace::kNormalized);
  for (int py = 0; py < g; ++py)
    for (int px = 0; px < g; ++px) {
      const Eigen::Index row = static_cast<Eigen::Index>(py) * g + px;
      Eigen::Index k = 0;
      for (int y = 0; y < patch_size; ++y)
        for (int x = 0; x < patch_size; ++x)
          for (int c = 0; c < 3; ++c)
            img.at(py * patch_size + y, px * patch_size + x, c) = patches(row, k++);
    }
  return img;
}

template <typename T>
bool ForwardGraph<T>::any_degenerate() const {
  auto any = [](const std::vector<std::uint8_t>& v) {
    for (auto f : v)
      if (f) return true;
    return false;
  };
  return any(l2_degenerate_final) || any(l2_degenerate_tap) || any(l2_degenerate_patch);
}

template <typename T>
ForwardGraph<T> forward_graph(const ModelParams<T>& params, const ModelConfig& cfg,
                              const ImageTensor& img, bool grad_enabled,
                              ModelParams<T>* grads) {
  cfg.validate();
  if (img.height != cfg.image_size || img.width != cfg.image_size)
    throw std::invalid_argument("forward: image geometry does not match the config");
  if (img.color_space != ColorSpace::kNormalized)
    throw std::invalid_argument("forward: image must be normalized first");

  const int dim = cfg.embed_dim;
  const int n_heads = cfg.heads;
  const int dh = dim / n_heads;
  const int n = cfg.n_patches();
  const T eps = static_cast<T>(1e-6);
  const T alpha = static_cast<T>(cfg.alpha);

  ForwardGraph<T> g;
  g.tape = Tape<T>(grad_enabled);
  auto& tp = g.tape;
  using Ref = typename Tape<T>::Ref;

  auto lf = [&](const Mat<T>& v, Mat<T>* sink) { return tp.leaf(v, grads ? sink : nullptr); };

  Ref patches = tp.constant(patchify<T>(img, cfg.patch_size));
  Ref embed = tp.add_rowvec(tp.matmul(patches, lf(params.patch_embed_w, grads ? &grads->patch_embed_w : nullptr)),
                            lf(params.patch_embed_b, grads ? &grads->patch_embed_b : nullptr));
  Ref z = tp.vcat(lf(params.cls_token, grads ? &grads->cls_token : nullptr), embed);
  z = tp.add(z, lf(params.pos_embed, grads ? &grads->pos_embed : nullptr));

  g.class_tokens.reserve(static_cast<size_t>(cfg.depth) + 1);
  const T inv_sqrt_dh = T(1) / std::sqrt(static_cast<T>(dh));

  for (int bi = 0; bi < cfg.depth; ++bi) {
    const auto& b = params.blocks[static_cast<size_t>(bi)];
    BlockParams<T>* gb = grads ? &grads->blocks[static_cast<size_t>(bi)] : nullptr;

    Ref a = tp.layer_norm(z, lf(b.ln1_g, gb ? &gb->ln1_g : nullptr),
                          lf(b.ln1_b, gb ? &gb->ln1_b : nullptr), eps);
    Ref qkv = tp.add_rowvec(tp.matmul(a, lf(b.qkv_w, gb ? &gb->qkv_w : nullptr)),
                            lf(b.qkv_b, gb ? &gb->qkv_b : nullptr));
    std::vector<Ref> ctx;
    ctx.reserve(static_cast<size_t>(n_heads));
    std::vector<Ref> probs;
    probs.reserve(static_cast<size_t>(n_heads));
    for (int h = 0; h < n_heads; ++h) {
      Ref q = tp.cols(qkv, h * dh, dh);
      Ref k = tp.cols(qkv, dim + h * dh, dh);
      Ref v = tp.cols(qkv, 2 * dim + h * dh, dh);
      Ref scores = tp.scale(tp.matmul_nt(q, k), inv_sqrt_dh);
      Ref p = tp.softmax_rows(scores);
      probs.push_back(p);
      ctx.push_back(tp.matmul(p, v));
    }
    Ref merged = n_heads == 1 ? ctx[0] : tp.hcat(ctx);
    Ref attn_out = tp.add_rowvec(tp.matmul(merged, lf(b.attn_out_w, gb ? &gb->attn_out_w : nullptr)),
                                 lf(b.attn_out_b, gb ? &gb->attn_out_b : nullptr));
    z = tp.add(z, attn_out);

    Ref m = tp.layer_norm(z, lf(b.ln2_g, gb ? &gb->ln2_g : nullptr),
                          lf(b.ln2_b, gb ? &gb->ln2_b : nullptr), eps);
    Ref m1 = tp.gelu(tp.add_rowvec(tp.matmul(m, lf(b.mlp1_w, gb ? &gb->mlp1_w : nullptr)),
                                   lf(b.mlp1_b, gb ? &gb->mlp1_b : nullptr)));
    Ref m2 = tp.add_rowvec(tp.matmul(m1, lf(b.mlp2_w, gb ? &gb->mlp2_w : nullptr)),
                           lf(b.mlp2_b, gb ? &gb->mlp2_b : nullptr));
    z = tp.add(z, m2);

    g.class_tokens.push_back(tp.rows(z, 0, 1));

    if (bi == cfg.depth - 1) {
      g.attention_final = probs;
      // Class-token attention over patches: head average of the class row,
      // class column dropped, renormalized.
      Ref acc;
      for (int h = 0; h < n_heads; ++h) {
        Ref strip = tp.cols(tp.rows(probs[static_cast<size_t>(h)], 0, 1), 1, n);
        acc = h == 0 ? strip : tp.add(acc, strip);
      }
      g.attn_weights = tp.normalize_sum(tp.scale(acc, T(1) / static_cast<T>(n_heads)));
      g.patch_tokens_final = tp.rows(z, 1, n);
    }
  }

  Ref zn = tp.layer_norm(z, lf(params.final_norm_g, grads ? &grads->final_norm_g : nullptr),
                         lf(params.final_norm_b, grads ? &grads->final_norm_b : nullptr), eps);
  g.class_tokens.push_back(tp.rows(zn, 0, 1));

  auto head = [&](Ref feat, const Mat<T>& w, Mat<T>* gw, const Mat<T>& bvec, Mat<T>* gb2,
                  std::vector<std::uint8_t>* flags) {
    Ref scaled = tp.l2_rescale_rows(feat, alpha, static_cast<T>(1e-12), flags);
    return tp.add_rowvec(tp.matmul(scaled, lf(w, gw)), lf(bvec, gb2));
  };

  g.logits_final = head(g.class_tokens.back(), params.head_final_w,
                        grads ? &grads->head_final_w : nullptr, params.head_final_b,
                        grads ? &grads->head_final_b : nullptr, &g.l2_degenerate_final);
  g.logits_tap = head(g.class_tokens[static_cast<size_t>(cfg.loss_tap - 1)], params.head_tap_w,
                      grads ? &grads->head_tap_w : nullptr, params.head_tap_b,
                      grads ? &grads->head_tap_b : nullptr, &g.l2_degenerate_tap);
  g.logits_patch = head(g.patch_tokens_final, params.head_patch_w,
                        grads ? &grads->head_patch_w : nullptr, params.head_patch_b,
                        grads ? &grads->head_patch_b : nullptr, &g.l2_degenerate_patch);
  return g;
}

template <typename T>
EncoderActivations<T> forward(const ModelParams<T>& params, const ModelConfig& cfg,
                              const ImageTensor& img) {
  ForwardGraph<T> g = forward_graph<T>(params, cfg, img, false, nullptr);
  EncoderActivations<T> acts;
  acts.class_tokens.reserve(g.class_tokens.size());
  for (auto r : g.class_tokens) acts.class_tokens.push_back(g.tape.value(r));
  acts.patch_tokens_final = g.tape.value(g.patch_tokens_final);
  acts.attention_final.reserve(g.attention_final.size());
  for (auto r : g.attention_final) acts.attention_final.push_back(g.tape.value(r));
  acts.logits_final = g.tape.value(g.logits_final);
  acts.logits_tap = g.tape.value(g.logits_tap);
  acts.logits_patch = g.tape.value(g.logits_patch);
  acts.degenerate_l2 = g.any_degenerate();
  return acts;
}

template <typename T>
Mat<T> attention_class_weights(const EncoderActivations<T>& acts) {
  if (acts.attention_final.empty())
    throw std::invalid_argument("attention_class_weights: no attention recorded");
  const Eigen::Index n1 = acts.attention_final[0].cols();
  Mat<T> acc = Mat<T>::Zero(1, n1 - 1);
  for (const auto& p : acts.attention_final) acc += p.row(0).tail(n1 - 1);
  acc /= static_cast<T>(acts.attention_final.size());
  const T s = acc.sum();
  if (!(s > T(0))) throw NumericError("attention_class_weights: nonpositive sum");
  return acc / s;
}

template <typename T>
const Mat<T>& class_token_at(const EncoderActivations<T>& acts, int tap) {
  const int depth = static_cast<int>(acts.class_tokens.size()) - 1;
  if (tap == kTapFinalNorm) return acts.class_tokens[static_cast<size_t>(depth)];
  if (tap < 1 || tap > depth)
    throw std::invalid_argument("class_token_at: tap out of range");
  return acts.class_tokens[static_cast<size_t>(tap - 1)];
}

template ModelParams<float> make_params<float>(const ModelConfig&);
template ModelParams<double> make_params<double>(const ModelConfig&);
template void init_params<float>(ModelParams<float>&, const ModelConfig&, Rng&);
template void init_params<double>(ModelParams<double>&, const ModelConfig&, Rng&);
template std::int64_t param_count<float>(const ModelParams<float>&);
template std::int64_t param_count<double>(const ModelParams<double>&);
template ModelParams<float> cast_params<float, double>(const ModelParams<double>&);
template ModelParams<double> cast_params<double, float>(const ModelParams<float>&);
template ModelParams<float> cast_params<float, float>(const ModelParams<float>&);
template ModelParams<double> cast_params<double, double>(const ModelParams<double>&);
template Mat<float> patchify<float>(const ImageTensor&, int);
template Mat<double> patchify<double>(const ImageTensor&, int);
template struct ForwardGraph<float>;
template struct ForwardGraph<double>;
template ForwardGraph<float> forward_graph<float>(const ModelParams<float>&, const ModelConfig&,
                                                  const ImageTensor&, bool, ModelParams<float>*);
template ForwardGraph<double> forward_graph<double>(const ModelParams<double>&, const ModelConfig&,
                                                    const ImageTensor&, bool, ModelParams<double>*);
template EncoderActivations<float> forward<float>(const ModelParams<float>&, const ModelConfig&,
                                                  const ImageTensor&);
template EncoderActivations<double> forward<double>(const ModelParams<double>&, const ModelConfig&,
                                                    const ImageTensor&);
template Mat<float> attention_class_weights<float>(const EncoderActivations<float>&);
template Mat<double> attention_class_weights<double>(const EncoderActivations<double>&);
template const Mat<float>& class_token_at<float>(const EncoderActivations<float>&, int);
template const Mat<double>& class_token_at<double>(const EncoderActivations<double>&, int);

}  // namespace fasvit
