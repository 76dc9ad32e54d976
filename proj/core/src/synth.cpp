#include "fasvit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "fasvit/common.hpp"
#include "fasvit/image_io.hpp"

namespace fs = std::filesystem;

namespace fasvit {

namespace {

bool is_print_op(AugOp op) {
  return op == AugOp::kColorDistortion || op == AugOp::kHalftoneSfc ||
         op == AugOp::kHalftoneBn;
}

bool is_display_op(AugOp op) { return op == AugOp::kSpecular || op == AugOp::kMoire; }

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

void blend(double* px, const std::array<double, 3>& color, double a) {
  for (int c = 0; c < 3; ++c) px[c] = px[c] * (1.0 - a) + color[c] * a;
}

std::string pad2(int v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", v);
  return buf;
}

}  // namespace

void SynthOptions::validate() const {
  if (n_subjects < 1) throw std::invalid_argument("SynthOptions: n_subjects must be positive");
  if (frames_per_subject < 1)
    throw std::invalid_argument("SynthOptions: frames_per_subject must be positive");
  if (image_size < 8) throw std::invalid_argument("SynthOptions: image_size must be at least 8");
  if (subject_offset < 0) throw std::invalid_argument("SynthOptions: negative subject_offset");
  if (print_ops.empty() || display_ops.empty())
    throw std::invalid_argument("SynthOptions: op lists must be non-empty");
  for (AugOp op : print_ops)
    if (!is_print_op(op))
      throw std::invalid_argument("SynthOptions: '" + to_string(op) + "' is not a print simulator");
  for (AugOp op : display_ops)
    if (!is_display_op(op))
      throw std::invalid_argument("SynthOptions: '" + to_string(op) +
                                  "' is not a display simulator");
}

FaceParams draw_face_params(Rng& rng) {
  FaceParams p;
  const double base = rng.uniform(0.15, 0.35);
  p.bg_top = {base, base + rng.uniform(0.0, 0.1), base + rng.uniform(0.1, 0.25)};
  for (int c = 0; c < 3; ++c) p.bg_bottom[c] = std::min(1.0, p.bg_top[c] + rng.uniform(0.1, 0.25));
  p.skin = {0.78 + rng.uniform(-0.1, 0.08), 0.58 + rng.uniform(-0.08, 0.08),
            0.46 + rng.uniform(-0.08, 0.08)};
  p.cx = rng.uniform(0.46, 0.54);
  p.cy = rng.uniform(0.46, 0.54);
  p.rx = rng.uniform(0.27, 0.35);
  p.ry = rng.uniform(0.36, 0.44);
  p.eye_dx = rng.uniform(0.11, 0.16);
  p.eye_dy = -rng.uniform(0.08, 0.13);
  p.eye_r = rng.uniform(0.035, 0.055);
  p.mouth_dy = rng.uniform(0.14, 0.2);
  p.mouth_rx = rng.uniform(0.08, 0.12);
  p.mouth_ry = rng.uniform(0.03, 0.05);
  return p;
}

ImageTensor render_face(const FaceParams& p, int image_size, double illum,
                        Rng& jitter_rng) {
  if (image_size < 1) throw std::invalid_argument("render_face: bad image size");
  const double dx = jitter_rng.uniform(-0.03, 0.03);
  const double dy = jitter_rng.uniform(-0.03, 0.03);
  const double gain = illum * jitter_rng.uniform(0.95, 1.05);

  const double cx = p.cx + dx, cy = p.cy + dy;
  const std::array<double, 3> eye_color = {0.12, 0.1, 0.1};
  const std::array<double, 3> mouth_color = {0.6, 0.25, 0.25};

  ImageTensor img(image_size, image_size);
  for (int y = 0; y < image_size; ++y) {
    const double v = (y + 0.5) / image_size;
    for (int x = 0; x < image_size; ++x) {
      const double u = (x + 0.5) / image_size;
      double px[3];
      for (int c = 0; c < 3; ++c) px[c] = p.bg_top[c] + (p.bg_bottom[c] - p.bg_top[c]) * v;

      const double fu = (u - cx) / p.rx, fv = (v - cy) / p.ry;
      const double d = fu * fu + fv * fv;
      const double face_a = 1.0 - smoothstep(0.85, 1.1, d);
      if (face_a > 0.0) {
        std::array<double, 3> shaded;
        const double shade = 1.0 - 0.22 * std::min(d, 1.0);
        for (int c = 0; c < 3; ++c) shaded[c] = p.skin[c] * shade;
        blend(px, shaded, face_a);

        for (int side = -1; side <= 1; side += 2) {
          const double ex = cx + side * p.eye_dx, ey = cy + p.eye_dy;
          const double ed = ((u - ex) * (u - ex) + (v - ey) * (v - ey)) / (p.eye_r * p.eye_r);
          blend(px, eye_color, (1.0 - smoothstep(0.6, 1.2, ed)) * face_a);
        }
        const double mu = (u - cx) / p.mouth_rx, mv = (v - (cy + p.mouth_dy)) / p.mouth_ry;
        blend(px, mouth_color, (1.0 - smoothstep(0.6, 1.2, mu * mu + mv * mv)) * face_a);
      }

      for (int c = 0; c < 3; ++c) img.at(y, x, c) = std::clamp(px[c] * gain, 0.0, 1.0);
    }
  }
  return img;
}

ImageTensor synth_spoof(const ImageTensor& live, AugOp op, Rng& rng) {
  // Halftone prints carry the ink tone curve of the reproduction chain, so the
  // print path runs the gamma curve before dithering. Re-photographed screens
  // pick up several glare highlights on top of the interference bands, so the
  // display path stacks glare after the bands. The tone components displace
  // each attack family consistently in pixel space; pure texture ops would
  // average out to the live centroid.
  switch (op) {
    case AugOp::kColorDistortion:
      return color_distortion(live, rng, 1.9, 2.3);
    case AugOp::kHalftoneSfc:
      return halftone_sfc(color_distortion(live, rng, 1.8, 2.2), 3);
    case AugOp::kHalftoneBn:
      return halftone_bn(color_distortion(live, rng, 1.8, 2.2), rng, 3);
    case AugOp::kSpecular:
      return specular_reflection(live, rng, 1.0);
    case AugOp::kMoire: {
      ImageTensor out = moire(live, rng, 0.3, 4.0, 10.0);
      for (int i = 0; i < 3; ++i) out = specular_reflection(out, rng, 0.9);
      return out;
    }
    default:
      throw std::invalid_argument("synth_spoof: '" + to_string(op) + "' is not a spoof simulator");
  }
}

Manifest synth_dataset(const SynthOptions& opt, Rng& rng, const std::string& out_dir) {
  opt.validate();
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (ec) throw IoError("synth_dataset: cannot create '" + out_dir + "': " + ec.message());

  Manifest m;
  m.base_dir = out_dir;

  for (int s = 0; s < opt.n_subjects; ++s) {
    const int sid_num = opt.subject_offset + s + 1;
    const std::string sid = "s" + pad2(sid_num);
    const std::string device = "dev" + std::to_string((sid_num - 1) % 2 + 1);
    Rng subj_rng = rng.child(static_cast<std::uint64_t>(sid_num));
    Rng id_rng = subj_rng.child(0);
    const FaceParams params = draw_face_params(id_rng);

    for (int f = 0; f < opt.frames_per_subject; ++f) {
      const int session_idx = f % 3;
      const std::string session = "sess" + std::to_string(session_idx + 1);
      const double illum = 0.92 + 0.08 * session_idx;
      Rng frame_rng = subj_rng.child(static_cast<std::uint64_t>(f) + 1);

      Rng live_rng = frame_rng.child(0);
      const ImageTensor live = render_face(params, opt.image_size, illum, live_rng);

      const AugOp print_op = opt.print_ops[f % opt.print_ops.size()];
      Rng print_rng = frame_rng.child(1);
      const ImageTensor print_img = synth_spoof(live, print_op, print_rng);

      const AugOp display_op = opt.display_ops[f % opt.display_ops.size()];
      Rng display_rng = frame_rng.child(2);
      const ImageTensor display_img = synth_spoof(live, display_op, display_rng);

      struct Emit {
        const ImageTensor* img;
        const char* kind;
        Label label;
        AttackType attack;
      };
      const Emit emits[3] = {
          {&live, "live", Label::kLive, AttackType::kNone},
          {&print_img, "print", Label::kSpoof, AttackType::kPrint},
          {&display_img, "display", Label::kSpoof, AttackType::kDisplay},
      };
      for (const Emit& e : emits) {
        ManifestRow row;
        row.path = "images/" + sid + "_" + e.kind + "_f" + pad2(f) + ".png";
        row.label = e.label;
        row.attack = e.attack;
        row.subject_id = sid;
        row.session = session;
        row.device = device;
        row.video_id = sid + "_" + e.kind;
        row.frame_index = f;
        write_image((fs::path(out_dir) / row.path).string(), *e.img);
        m.rows.push_back(std::move(row));
      }
    }
  }

  save_manifest(m, (fs::path(out_dir) / "manifest.csv").string());
  return m;
}

}  // namespace fasvit
