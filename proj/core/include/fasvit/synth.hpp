#pragma once

#include <array>
#include <string>
#include <vector>

#include "fasvit/augment.hpp"
#include "fasvit/manifest.hpp"
#include "fasvit/rng.hpp"

namespace fasvit {

// Procedural live/spoof corpus generator. Live frames are face-like
// compositions (gradient backdrop, shaded skin ellipse, eyes, mouth) with
// per-subject identity jitter and per-frame pose/illumination jitter. Each
// live frame is paired with one print spoof (a d/e/f simulator at generation
// strength, attack type Print) and one display spoof (g/h, attack type
// Display), so a run yields n_subjects * frames_per_subject * 3 rows.

struct SynthOptions {
  int n_subjects = 20;
  int frames_per_subject = 6;
  int image_size = 32;
  // Subject numbering starts at subject_offset + 1, so two runs with
  // different offsets into the same directory stay disjoint.
  int subject_offset = 0;
  // Simulators used to fabricate spoofs, cycled over frames. Print ops must
  // come from {ColorDistortion, HalftoneSfc, HalftoneBn}, display ops from
  // {Specular, Moire}. The defaults are the texture-heavy pair per family;
  // pure tone curves survive per-channel input standardization too well to
  // stand in for a print attack on their own.
  std::vector<AugOp> print_ops = {AugOp::kHalftoneSfc, AugOp::kHalftoneBn};
  std::vector<AugOp> display_ops = {AugOp::kMoire};

  void validate() const;
};

// Per-subject face geometry and palette.
struct FaceParams {
  std::array<double, 3> bg_top, bg_bottom;
  std::array<double, 3> skin;
  double cx, cy, rx, ry;          // face ellipse, fractions of image size
  double eye_dx, eye_dy, eye_r;   // offsets from face center
  double mouth_dy, mouth_rx, mouth_ry;
};

FaceParams draw_face_params(Rng& rng);

// Renders one live frame. `illum` scales the whole image; pose jitter is
// drawn from `jitter_rng`.
ImageTensor render_face(const FaceParams& params, int image_size, double illum,
                        Rng& jitter_rng);

// Applies one spoof simulator at generation strength (stronger than the
// training-time augmentation ranges, so the artifact dominates).
ImageTensor synth_spoof(const ImageTensor& live, AugOp op, Rng& rng);

// Generates images under out_dir/images, writes out_dir/manifest.csv and
// returns the manifest. Deterministic given (options, rng seed). An
// unwritable directory raises IoError.
Manifest synth_dataset(const SynthOptions& options, Rng& rng, const std::string& out_dir);

}  // namespace fasvit
