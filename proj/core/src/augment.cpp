#include "fasvit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fasvit/common.hpp"
#include <nlohmann/json.hpp>

namespace fasvit {

std::string to_string(Label l) { return l == Label::kLive ? "live" : "spoof"; }

std::string to_string(AttackType a) {
  switch (a) {
    case AttackType::kNone: return "none";
    case AttackType::kPrint: return "print";
    case AttackType::kDisplay: return "display";
    case AttackType::kSynthPrint: return "synth_print";
    case AttackType::kSynthDisplay: return "synth_display";
  }
  return "none";
}

Label label_from_string(const std::string& s) {
  if (s == "live") return Label::kLive;
  if (s == "spoof") return Label::kSpoof;
  throw std::invalid_argument("unknown label: " + s);
}

AttackType attack_from_string(const std::string& s) {
  if (s == "none") return AttackType::kNone;
  if (s == "print") return AttackType::kPrint;
  if (s == "display") return AttackType::kDisplay;
  if (s == "synth_print") return AttackType::kSynthPrint;
  if (s == "synth_display") return AttackType::kSynthDisplay;
  throw std::invalid_argument("unknown attack type: " + s);
}

std::string to_string(AugOp op) {
  switch (op) {
    case AugOp::kNone: return "none";
    case AugOp::kHandTremble: return "a_tremble";
    case AugOp::kLowResolution: return "b_lowres";
    case AugOp::kColorDiversity: return "c_colordiv";
    case AugOp::kColorDistortion: return "d_colordist";
    case AugOp::kHalftoneSfc: return "e_halftone_sfc";
    case AugOp::kHalftoneBn: return "f_halftone_bn";
    case AugOp::kSpecular: return "g_specular";
    case AugOp::kMoire: return "h_moire";
  }
  return "none";
}

bool rewrites_label(AugOp op) {
  switch (op) {
    case AugOp::kColorDistortion:
    case AugOp::kHalftoneSfc:
    case AugOp::kHalftoneBn:
    case AugOp::kSpecular:
    case AugOp::kMoire:
      return true;
    default:
      return false;
  }
}

Label label_after(AugOp op, Label before) {
  return rewrites_label(op) ? Label::kSpoof : before;
}

AttackType attack_after(AugOp op, AttackType before) {
  switch (op) {
    case AugOp::kColorDistortion:
    case AugOp::kHalftoneSfc:
    case AugOp::kHalftoneBn:
      return AttackType::kSynthPrint;
    case AugOp::kSpecular:
    case AugOp::kMoire:
      return AttackType::kSynthDisplay;
    default:
      return before;
  }
}

namespace {

float sample_clamped(const ImageTensor& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height - 1);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const double wy = y - y0, wx = x - x0;
  const double top = (1.0 - wx) * img.at(y0, x0, c) + wx * img.at(y0, x1, c);
  const double bot = (1.0 - wx) * img.at(y1, x0, c) + wx * img.at(y1, x1, c);
  return static_cast<float>((1.0 - wy) * top + wy * bot);
}

// Mean filter with a `cell`-wide window, window clamped at borders and the
// sum divided by the number of in-range taps.
ImageTensor box_blur(const ImageTensor& img, int cell) {
  if (cell <= 1) return img;
  const int lo = -(cell - 1) / 2;
  const int hi = cell / 2;
  ImageTensor tmp(img.height, img.width, 0.0f, img.color_space);
  // Horizontal pass.
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int x0 = std::max(0, x + lo), x1 = std::min(img.width - 1, x + hi);
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int xx = x0; xx <= x1; ++xx) s += img.at(y, xx, c);
        tmp.at(y, x, c) = static_cast<float>(s / (x1 - x0 + 1));
      }
    }
  }
  // Vertical pass.
  ImageTensor out(img.height, img.width, 0.0f, img.color_space);
  for (int y = 0; y < img.height; ++y) {
    const int y0 = std::max(0, y + lo), y1 = std::min(img.height - 1, y + hi);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int yy = y0; yy <= y1; ++yy) s += tmp.at(yy, x, c);
        out.at(y, x, c) = static_cast<float>(s / (y1 - y0 + 1));
      }
    }
  }
  return out;
}

}  // namespace

ImageTensor hand_tremble(const ImageTensor& img, Rng& rng, int strength) {
  if (strength < 0) throw std::invalid_argument("hand_tremble: negative strength");
  const double angle = rng.uniform(0.0, std::numbers::pi);
  if (strength == 0) return img;
  const double dy = std::sin(angle), dx = std::cos(angle);
  ImageTensor out(img.height, img.width, 0.0f, img.color_space);
  const int len = 2 * strength + 1;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int t = -strength; t <= strength; ++t)
          s += sample_clamped(img, y + t * dy, x + t * dx, c);
        out.at(y, x, c) = clamp01(static_cast<float>(s / len));
      }
  return out;
}

ImageTensor low_resolution(const ImageTensor& img, int factor) {
  if (factor < 1) throw std::invalid_argument("low_resolution: factor must be >= 1");
  if (factor == 1) return img;
  const int h = std::max(1, img.height / factor);
  const int w = std::max(1, img.width / factor);
  return resize_bilinear(resize_bilinear(img, h, w), img.height, img.width);
}

ImageTensor color_diversity(const ImageTensor& img, Rng& rng, double max_shift) {
  double gain[3], offset[3];
  for (int c = 0; c < 3; ++c) {
    gain[c] = rng.uniform(1.0 - max_shift, 1.0 + max_shift);
    offset[c] = rng.uniform(-max_shift, max_shift);
  }
  if (max_shift == 0.0) return img;
  ImageTensor out = img;
  for (size_t i = 0; i < out.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    out.data[i] = clamp01(static_cast<float>(gain[c] * img.data[i] + offset[c]));
  }
  return out;
}

ImageTensor color_distortion(const ImageTensor& img, Rng& rng, double gamma_lo,
                             double gamma_hi) {
  double gamma[3];
  for (int c = 0; c < 3; ++c) gamma[c] = rng.uniform(gamma_lo, gamma_hi);
  if (gamma_lo == 1.0 && gamma_hi == 1.0) return img;
  ImageTensor out = img;
  for (size_t i = 0; i < out.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    out.data[i] = clamp01(std::pow(std::max(img.data[i], 0.0f), static_cast<float>(gamma[c])));
  }
  return out;
}

std::vector<std::pair<int, int>> hilbert_order(int h, int w) {
  int n = 1;
  while (n < std::max(h, w)) n <<= 1;
  std::vector<std::pair<int, int>> order;
  order.reserve(static_cast<size_t>(h) * w);
  const long long total = static_cast<long long>(n) * n;
  for (long long d = 0; d < total; ++d) {
    long long t = d;
    int x = 0, y = 0;
    for (int s = 1; s < n; s <<= 1) {
      const int rx = 1 & static_cast<int>(t / 2);
      const int ry = 1 & static_cast<int>(t ^ rx);
      if (ry == 0) {
        if (rx == 1) {
          x = s - 1 - x;
          y = s - 1 - y;
        }
        std::swap(x, y);
      }
      x += s * rx;
      y += s * ry;
      t /= 4;
    }
    if (y < h && x < w) order.emplace_back(y, x);
  }
  return order;
}

ImageTensor halftone_sfc(const ImageTensor& img, int cell) {
  const auto order = hilbert_order(img.height, img.width);
  ImageTensor binary(img.height, img.width, 0.0f, img.color_space);
  for (int c = 0; c < 3; ++c) {
    double err = 0.0;
    for (const auto& [y, x] : order) {
      const double v = img.at(y, x, c) + err;
      const float q = v >= 0.5 ? 1.0f : 0.0f;
      binary.at(y, x, c) = q;
      err = v - q;
    }
  }
  return box_blur(binary, cell);
}

ImageTensor halftone_bn(const ImageTensor& img, Rng& rng, int cell) {
  int side = 0;
  const auto& mask = blue_noise_mask(side);
  const int oy = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(side)));
  const int ox = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(side)));
  ImageTensor binary(img.height, img.width, 0.0f, img.color_space);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const float m = mask[static_cast<size_t>((y + oy) % side) * side + (x + ox) % side];
      for (int c = 0; c < 3; ++c) binary.at(y, x, c) = img.at(y, x, c) > m ? 1.0f : 0.0f;
    }
  return box_blur(binary, cell);
}

ImageTensor specular_reflection(const ImageTensor& img, Rng& rng, double intensity) {
  const double cx = rng.uniform(0.0, static_cast<double>(img.width));
  const double cy = rng.uniform(0.0, static_cast<double>(img.height));
  const double sx = img.width * rng.uniform(0.05, 0.2);
  const double sy = img.height * rng.uniform(0.05, 0.2);
  if (intensity == 0.0) return img;
  ImageTensor out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double dx = (x - cx) / sx, dy = (y - cy) / sy;
      const double g = std::exp(-0.5 * (dx * dx + dy * dy));
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp01(static_cast<float>(img.at(y, x, c) + intensity * g));
    }
  return out;
}

ImageTensor moire(const ImageTensor& img, Rng& rng, double amplitude, double freq_lo,
                  double freq_hi) {
  const double fx = rng.uniform(freq_lo, freq_hi);
  const double fy = rng.uniform(freq_lo, freq_hi);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  if (amplitude == 0.0) return img;
  ImageTensor out = img;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      const double arg = 2.0 * std::numbers::pi *
                             (fx * x / img.width + fy * y / img.height) +
                         phase;
      const double m = 1.0 + amplitude * std::sin(arg);
      for (int c = 0; c < 3; ++c)
        out.at(y, x, c) = clamp01(static_cast<float>(img.at(y, x, c) * m));
    }
  return out;
}

AugOutcome apply_fas_aug(const Sample& sample, Rng& rng, double p,
                         const FasAugParams& params) {
  if (p < 0.0 || p > 1.0) throw std::invalid_argument("apply_fas_aug: p must be in [0,1]");
  if (sample.image.color_space != ColorSpace::kSrgbUnit)
    throw std::invalid_argument("apply_fas_aug: image must be in unit sRGB space");

  AugOutcome out;
  if (rng.uniform() >= p) {
    out.image = sample.image;
    out.label_after = sample.label;
    out.attack_after = sample.attack;
    out.op_applied = AugOp::kNone;
    out.params_used = "{}";
    return out;
  }

  const auto op = static_cast<AugOp>(1 + rng.uniform_int(8));
  nlohmann::ordered_json rec;
  rec["op"] = to_string(op);
  switch (op) {
    case AugOp::kHandTremble: {
      const int strength = params.tremble_strength_min +
                           static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                               params.tremble_strength_max - params.tremble_strength_min + 1)));
      rec["strength"] = strength;
      out.image = hand_tremble(sample.image, rng, strength);
      break;
    }
    case AugOp::kLowResolution: {
      const int factor = params.lowres_factor_min +
                         static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                             params.lowres_factor_max - params.lowres_factor_min + 1)));
      rec["factor"] = factor;
      out.image = low_resolution(sample.image, factor);
      break;
    }
    case AugOp::kColorDiversity: {
      rec["max_shift"] = params.color_div_max_shift;
      out.image = color_diversity(sample.image, rng, params.color_div_max_shift);
      break;
    }
    case AugOp::kColorDistortion: {
      rec["gamma_lo"] = params.color_dist_gamma_lo;
      rec["gamma_hi"] = params.color_dist_gamma_hi;
      out.image = color_distortion(sample.image, rng, params.color_dist_gamma_lo,
                                   params.color_dist_gamma_hi);
      break;
    }
    case AugOp::kHalftoneSfc: {
      const int cell = params.halftone_cell_min +
                       static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                           params.halftone_cell_max - params.halftone_cell_min + 1)));
      rec["cell"] = cell;
      out.image = halftone_sfc(sample.image, cell);
      break;
    }
    case AugOp::kHalftoneBn: {
      const int cell = params.halftone_cell_min +
                       static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                           params.halftone_cell_max - params.halftone_cell_min + 1)));
      rec["cell"] = cell;
      out.image = halftone_bn(sample.image, rng, cell);
      break;
    }
    case AugOp::kSpecular: {
      const double intensity =
          rng.uniform(params.specular_intensity_lo, params.specular_intensity_hi);
      rec["intensity"] = intensity;
      out.image = specular_reflection(sample.image, rng, intensity);
      break;
    }
    case AugOp::kMoire: {
      const double amplitude = rng.uniform(params.moire_amplitude_lo, params.moire_amplitude_hi);
      rec["amplitude"] = amplitude;
      rec["freq_lo"] = params.moire_freq_lo;
      rec["freq_hi"] = params.moire_freq_hi;
      out.image = moire(sample.image, rng, amplitude, params.moire_freq_lo,
                        params.moire_freq_hi);
      break;
    }
    default:
      break;
  }
  out.op_applied = op;
  out.label_after = label_after(op, sample.label);
  out.attack_after = attack_after(op, sample.attack);
  out.params_used = rec.dump();
  return out;
}

Sample apply_pda(const Sample& spoof, const Sample& live, Rng& rng, double p_patch,
                 int patch_size) {
  if (spoof.label != Label::kSpoof)
    throw ContractError("apply_pda: base sample must be labeled spoof");
  if (live.label != Label::kLive)
    throw ContractError("apply_pda: partner sample must be labeled live");
  if (!spoof.image.same_shape(live.image))
    throw std::invalid_argument("apply_pda: image sizes differ");
  if (patch_size <= 0 || spoof.image.height % patch_size != 0 ||
      spoof.image.width % patch_size != 0)
    throw std::invalid_argument("apply_pda: patch size must divide the image size");
  if (spoof.image.height != spoof.image.width)
    throw std::invalid_argument("apply_pda: image must be square");
  if (p_patch < 0.0 || p_patch > 1.0)
    throw std::invalid_argument("apply_pda: p_patch must be in [0,1]");

  const int grid = spoof.image.height / patch_size;
  Sample out = spoof;
  PatchLabels labels;
  labels.grid = grid;
  labels.labels.assign(static_cast<size_t>(grid) * grid, Label::kSpoof);
  for (int py = 0; py < grid; ++py)
    for (int px = 0; px < grid; ++px) {
      if (rng.uniform() < p_patch) {
        labels.labels[static_cast<size_t>(py) * grid + px] = Label::kLive;
        for (int y = py * patch_size; y < (py + 1) * patch_size; ++y)
          for (int x = px * patch_size; x < (px + 1) * patch_size; ++x)
            for (int c = 0; c < 3; ++c) out.image.at(y, x, c) = live.image.at(y, x, c);
      }
    }
  out.patch_labels = std::move(labels);
  out.label = Label::kSpoof;
  return out;
}

}  // namespace fasvit
