#include "fasvit/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fasvit/binio.hpp"
#include "fasvit/image_io.hpp"

namespace fasvit {

std::pair<double, int> max_cosine(const Mat<double>& bank, const Mat<double>& query) {
  if (query.rows() != 1 || query.cols() != bank.cols())
    throw std::invalid_argument("max_cosine: query must be 1 x bank_dim");
  if (bank.rows() == 0) throw std::invalid_argument("max_cosine: empty bank");
  const double qn = query.norm();
  if (qn <= 1e-12) return {-1.0, -1};
  double best = -2.0;
  int best_i = -1;
  for (Eigen::Index i = 0; i < bank.rows(); ++i) {
    const double rn = bank.row(i).norm();
    const double c = bank.row(i).dot(query.row(0)) / (rn * qn);
    if (c > best) {
      best = c;
      best_i = static_cast<int>(i);
    }
  }
  return {best, best_i};
}

namespace {

ImageTensor normalized_view(const ImageTensor& img) {
  return img.color_space == ColorSpace::kNormalized ? img : normalize_per_channel(img);
}

Mat<double> tap_token(const ModelParams<double>& params, const ModelConfig& cfg,
                      const ImageTensor& img, int tap) {
  EncoderActivations<double> acts = forward(params, cfg, normalized_view(img));
  return class_token_at(acts, tap);
}

}  // namespace

ReferenceBank build_bank(const ModelParams<double>& params, const ModelConfig& cfg,
                         const std::vector<Sample>& live_samples, int tap_override,
                         std::uint64_t model_fingerprint) {
  if (live_samples.empty()) throw std::invalid_argument("build_bank: no live samples");
  const int tap = tap_override == 0 ? cfg.score_tap : tap_override;
  ReferenceBank bank;
  bank.tap_index = tap;
  bank.model_fingerprint = model_fingerprint;
  bank.vectors = Mat<double>(static_cast<Eigen::Index>(live_samples.size()), cfg.embed_dim);
  bank.source_ids.reserve(live_samples.size());
  for (size_t i = 0; i < live_samples.size(); ++i) {
    const Sample& s = live_samples[i];
    if (s.label != Label::kLive)
      throw ContractError("build_bank: sample '" + s.id + "' is not labeled live");
    Mat<double> tok = tap_token(params, cfg, s.image, tap);
    const double n = tok.norm();
    if (n <= 1e-12)
      throw NumericError("build_bank: zero-norm class token for sample '" + s.id + "'");
    bank.vectors.row(static_cast<Eigen::Index>(i)) = tok.row(0) / n;
    bank.source_ids.push_back(s.id);
  }
  return bank;
}

ScoreReport score(const ModelParams<double>& params, const ModelConfig& cfg,
                  const ReferenceBank& bank, const Sample& sample) {
  ScoreReport rep;
  rep.sample_id = sample.id;
  Mat<double> tok = tap_token(params, cfg, sample.image, bank.tap_index);
  const auto [s, idx] = max_cosine(bank.vectors, tok);
  rep.score = s;
  rep.nearest_index = idx;
  if (idx < 0) {
    rep.degenerate = true;
  } else {
    rep.nearest_reference = bank.source_ids[static_cast<size_t>(idx)];
  }
  return rep;
}

double select_threshold(const std::vector<double>& live_scores,
                        const std::vector<double>& spoof_scores) {
  if (live_scores.empty() || spoof_scores.empty())
    throw std::invalid_argument("select_threshold: both score sets must be non-empty");

  std::vector<double> grid;
  grid.reserve(2 * (live_scores.size() + spoof_scores.size()));
  grid.insert(grid.end(), live_scores.begin(), live_scores.end());
  grid.insert(grid.end(), spoof_scores.begin(), spoof_scores.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const size_t n_distinct = grid.size();
  for (size_t i = 0; i + 1 < n_distinct; ++i)
    grid.push_back(0.5 * (grid[i] + grid[i + 1]));
  std::sort(grid.begin(), grid.end());

  auto far_at = [&](double theta) {
    size_t k = 0;
    for (double s : spoof_scores)
      if (s >= theta) ++k;
    return static_cast<double>(k) / static_cast<double>(spoof_scores.size());
  };
  auto frr_at = [&](double theta) {
    size_t k = 0;
    for (double s : live_scores)
      if (s < theta) ++k;
    return static_cast<double>(k) / static_cast<double>(live_scores.size());
  };

  double best_theta = grid.front();
  double best_gap = 2.0, best_far = 2.0;
  for (double theta : grid) {
    const double far = far_at(theta), frr = frr_at(theta);
    const double gap = std::abs(far - frr);
    if (gap < best_gap || (gap == best_gap && (far < best_far ||
                                               (far == best_far && theta < best_theta)))) {
      best_gap = gap;
      best_far = far;
      best_theta = theta;
    }
  }
  return best_theta;
}

void save_bank(const ReferenceBank& bank, const std::string& path) {
  ByteWriter w;
  w.raw("FASB", 4);
  w.u16(kBankVersion);
  w.i32(bank.tap_index);
  w.u64(bank.model_fingerprint);
  w.u32(static_cast<std::uint32_t>(bank.vectors.rows()));
  w.u32(static_cast<std::uint32_t>(bank.vectors.cols()));
  for (Eigen::Index i = 0; i < bank.vectors.rows(); ++i)
    for (Eigen::Index j = 0; j < bank.vectors.cols(); ++j)
      w.f32(static_cast<float>(bank.vectors(i, j)));
  for (const auto& id : bank.source_ids) w.str(id);
  write_file(path, w.bytes());
}

ReferenceBank load_bank(const std::string& path) {
  const auto bytes = read_file(path);
  ByteReader r(bytes, path);
  char magic[4];
  r.raw(magic, 4, "magic");
  if (std::string(magic, 4) != "FASB") r.fail("bad magic, not a reference bank");
  const std::uint16_t version = r.u16("version");
  if (version != kBankVersion) r.fail("unsupported bank version " + std::to_string(version));
  ReferenceBank bank;
  bank.tap_index = r.i32("tap_index");
  bank.model_fingerprint = r.u64("model_fingerprint");
  const std::uint32_t rows = r.u32("rows");
  const std::uint32_t dim = r.u32("dim");
  if (rows == 0) r.fail("bank has no rows");
  bank.vectors = Mat<double>(rows, dim);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < dim; ++j)
      bank.vectors(i, j) = static_cast<double>(r.f32("row data"));
  bank.source_ids.reserve(rows);
  for (std::uint32_t i = 0; i < rows; ++i) bank.source_ids.push_back(r.str("source id"));
  if (!r.done()) r.fail("trailing bytes after the id table");
  return bank;
}

}  // namespace fasvit
