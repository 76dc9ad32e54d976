#pragma once

#include <map>
#include <string>
#include <vector>

#include "fasvit/sample.hpp"

namespace fasvit {

// A scored sample with its ground truth, the unit the evaluator consumes.
struct ScoredSample {
  std::string id;
  double score = 0.0;
  Label truth = Label::kLive;
  AttackType attack = AttackType::kNone;
};

struct CurvePoint {
  double theta = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

struct MetricsReport {
  std::map<AttackType, double> per_attack_apcer;
  std::map<AttackType, int> n_per_attack;  // N_PA per type
  double apcer = 0.0;  // max over attack types
  double bpcer = 0.0;  // live rejection fraction
  double acer = 0.0;   // (apcer + bpcer) / 2
  double threshold = 0.0;
  int n_live = 0;  // N_BF
  std::vector<CurvePoint> curve;
};

// Counting per Eqs. APCER/BPCER/ACER with prediction SPOOF <=> score <
// threshold. Requires at least one live and one spoof sample; a spoof
// carrying AttackType::kNone is a contract violation.
MetricsReport compute_metrics(const std::vector<ScoredSample>& samples, double threshold);

// FAR/FRR evaluated at every distinct observed score, ascending theta.
std::vector<CurvePoint> far_frr_curve(const std::vector<double>& live_scores,
                                      const std::vector<double>& spoof_scores);

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

struct FoldAggregate {
  MetricStat apcer, bpcer, acer;
  int folds = 0;
};

FoldAggregate aggregate_folds(const std::vector<MetricsReport>& reports);

// Renderings for the eval subcommand.
std::string metrics_to_json(const MetricsReport& report);
std::string metrics_table(const MetricsReport& report);
std::string curve_svg(const MetricsReport& report);

}  // namespace fasvit
