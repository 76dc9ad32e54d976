#pragma once

#include <string>

#include "fasvit/image.hpp"
#include "fasvit/rng.hpp"
#include "fasvit/sample.hpp"

namespace fasvit {

// The eight artifact simulators. Ops a-c emulate photography noise and keep
// the label; d-f emulate print artifacts and g-h display artifacts, both of
// which rewrite the label to Spoof with the matching synthetic attack type.
enum class AugOp : int {
  kNone = 0,
  kHandTremble = 1,     // (a)
  kLowResolution = 2,   // (b)
  kColorDiversity = 3,  // (c)
  kColorDistortion = 4, // (d)
  kHalftoneSfc = 5,     // (e)
  kHalftoneBn = 6,      // (f)
  kSpecular = 7,        // (g)
  kMoire = 8,           // (h)
};

std::string to_string(AugOp op);

// True for ops d-h.
bool rewrites_label(AugOp op);
// Attack type implied by an applied op (kNone for a-c and kNone op).
AttackType attack_after(AugOp op, AttackType before);
Label label_after(AugOp op, Label before);

// ---- individual simulators ----
// All of them map [0,1] sRGB images to [0,1] sRGB images and are pure given
// the Rng. Zero-strength settings return the input bit-exactly.

// Directional motion blur with a uniform line kernel of length 2*strength+1
// at a random angle. strength 0 is the identity.
ImageTensor hand_tremble(const ImageTensor& img, Rng& rng, int strength);

// Bilinear downsample by `factor` and back up. factor 1 is the identity.
ImageTensor low_resolution(const ImageTensor& img, int factor);

// Per-channel affine jitter: gain in [1-s, 1+s], offset in [-s, s].
ImageTensor color_diversity(const ImageTensor& img, Rng& rng, double max_shift);

// Per-channel gamma curve with gamma drawn from [lo, hi].
ImageTensor color_distortion(const ImageTensor& img, Rng& rng, double gamma_lo,
                             double gamma_hi);

// Hilbert-curve error-diffusion halftone, then box blur with `cell` to
// re-grayscale. Deterministic, no rng.
ImageTensor halftone_sfc(const ImageTensor& img, int cell);

// Threshold against a tiled void-and-cluster blue-noise mask (random tile
// phase), then box blur with `cell`.
ImageTensor halftone_bn(const ImageTensor& img, Rng& rng, int cell);

// Additive elliptical Gaussian highlight at a random position and scale.
ImageTensor specular_reflection(const ImageTensor& img, Rng& rng, double intensity);

// Multiplicative sinusoidal interference pattern with random frequency and
// phase. Frequencies are in cycles per image edge.
ImageTensor moire(const ImageTensor& img, Rng& rng, double amplitude, double freq_lo,
                  double freq_hi);

// Parameter ranges used when an op is drawn by apply_fas_aug.
struct FasAugParams {
  int tremble_strength_min = 1;
  int tremble_strength_max = 5;
  int lowres_factor_min = 2;
  int lowres_factor_max = 4;
  double color_div_max_shift = 0.2;
  double color_dist_gamma_lo = 0.5;
  double color_dist_gamma_hi = 2.0;
  int halftone_cell_min = 2;
  int halftone_cell_max = 4;
  double specular_intensity_lo = 0.2;
  double specular_intensity_hi = 0.8;
  double moire_amplitude_lo = 0.05;
  double moire_amplitude_hi = 0.3;
  double moire_freq_lo = 2.0;
  double moire_freq_hi = 16.0;
};

struct AugOutcome {
  ImageTensor image;
  Label label_after = Label::kLive;
  AttackType attack_after = AttackType::kNone;
  AugOp op_applied = AugOp::kNone;
  std::string params_used;  // JSON object text
};

// With probability p, draw one of the 8 ops uniformly, apply it and rewrite
// the label per the op class; otherwise pass the sample through unchanged.
AugOutcome apply_fas_aug(const Sample& sample, Rng& rng, double p,
                         const FasAugParams& params = {});

// Live Patch Mask: replace each patch of a spoof image with the co-located
// patch of a live image with probability p_patch. Replaced patches are
// labeled Live, retained ones Spoof; the image label stays Spoof.
Sample apply_pda(const Sample& spoof, const Sample& live, Rng& rng, double p_patch,
                 int patch_size);

// The 64x64 void-and-cluster threshold mask used by halftone_bn, values in
// (0,1). Exposed for tests.
const std::vector<float>& blue_noise_mask(int& side);

// Hilbert scan order covering an h x w grid. Exposed for tests.
std::vector<std::pair<int, int>> hilbert_order(int h, int w);

}  // namespace fasvit
