#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fasvit/sample.hpp"
#include "fasvit/vit.hpp"

namespace fasvit {

// Rows are unit-normalized class tokens from the score tap, one per live
// training image. tap_index is 1..depth or kTapFinalNorm.
struct ReferenceBank {
  Mat<double> vectors;
  std::vector<std::string> source_ids;
  int tap_index = 0;
  std::uint64_t model_fingerprint = 0;
};

struct ScoreReport {
  std::string sample_id;
  double score = -1.0;
  std::string nearest_reference;
  int nearest_index = -1;
  bool degenerate = false;                // zero-norm query token
  std::optional<Label> predicted;         // filled when a threshold is known
};

// Max cosine similarity of `query` (1 x d) against the bank rows, with the
// lowest index winning ties. A zero-norm query scores -1 with index -1.
std::pair<double, int> max_cosine(const Mat<double>& bank, const Mat<double>& query);

// Forward every live sample, take the class token at the tap, normalize to
// unit length, stack. Samples still in unit sRGB space are normalized
// per-channel first. Throws ContractError on a spoof sample and
// std::invalid_argument on empty input. tap_override 0 uses cfg.score_tap.
ReferenceBank build_bank(const ModelParams<double>& params, const ModelConfig& cfg,
                         const std::vector<Sample>& live_samples, int tap_override = 0,
                         std::uint64_t model_fingerprint = 0);

ScoreReport score(const ModelParams<double>& params, const ModelConfig& cfg,
                  const ReferenceBank& bank, const Sample& sample);

inline Label predict(double score, double threshold) {
  return score >= threshold ? Label::kLive : Label::kSpoof;
}

// Threshold where FAR (spoof >= theta) and FRR (live < theta) intersect:
// candidates are all observed scores plus midpoints of adjacent distinct
// scores; minimizes |FAR - FRR| with ties broken by smaller FAR, then
// smaller theta.
double select_threshold(const std::vector<double>& live_scores,
                        const std::vector<double>& spoof_scores);

// Bank container, little-endian:
//   magic "FASB" | u16 version | i32 tap_index | u64 model_fingerprint |
//   u32 rows | u32 dim | f32 row data (row-major) | rows id strings
//   (u32 length + bytes each).
inline constexpr std::uint16_t kBankVersion = 1;

void save_bank(const ReferenceBank& bank, const std::string& path);
ReferenceBank load_bank(const std::string& path);

}  // namespace fasvit
