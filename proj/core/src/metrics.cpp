#include "fasvit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "fasvit/common.hpp"
#include <nlohmann/json.hpp>

namespace fasvit {

MetricsReport compute_metrics(const std::vector<ScoredSample>& samples, double threshold) {
  MetricsReport rep;
  rep.threshold = threshold;

  std::map<AttackType, int> rejected_per_attack;
  int live_rejected = 0;
  std::vector<double> live_scores, spoof_scores;

  for (const auto& s : samples) {
    const bool predicted_spoof = s.score < threshold;  // R_i
    if (s.truth == Label::kLive) {
      if (s.attack != AttackType::kNone)
        throw ContractError("compute_metrics: live sample '" + s.id + "' carries an attack type");
      ++rep.n_live;
      if (predicted_spoof) ++live_rejected;
      live_scores.push_back(s.score);
    } else {
      if (s.attack == AttackType::kNone)
        throw ContractError("compute_metrics: spoof sample '" + s.id + "' has no attack type");
      ++rep.n_per_attack[s.attack];
      if (predicted_spoof) ++rejected_per_attack[s.attack];
      spoof_scores.push_back(s.score);
    }
  }
  if (rep.n_live == 0) throw std::invalid_argument("compute_metrics: no live samples");
  if (rep.n_per_attack.empty()) throw std::invalid_argument("compute_metrics: no spoof samples");

  for (const auto& [attack, n] : rep.n_per_attack) {
    const double accepted =
        1.0 - static_cast<double>(rejected_per_attack[attack]) / static_cast<double>(n);
    rep.per_attack_apcer[attack] = accepted;
    rep.apcer = std::max(rep.apcer, accepted);
  }
  rep.bpcer = static_cast<double>(live_rejected) / static_cast<double>(rep.n_live);
  rep.acer = (rep.apcer + rep.bpcer) / 2.0;
  rep.curve = far_frr_curve(live_scores, spoof_scores);
  return rep;
}

std::vector<CurvePoint> far_frr_curve(const std::vector<double>& live_scores,
                                      const std::vector<double>& spoof_scores) {
  if (live_scores.empty() || spoof_scores.empty())
    throw std::invalid_argument("far_frr_curve: both score sets must be non-empty");
  std::set<double> thetas(live_scores.begin(), live_scores.end());
  thetas.insert(spoof_scores.begin(), spoof_scores.end());

  std::vector<CurvePoint> curve;
  curve.reserve(thetas.size());
  for (double theta : thetas) {
    CurvePoint p;
    p.theta = theta;
    size_t fa = 0, fr = 0;
    for (double s : spoof_scores)
      if (s >= theta) ++fa;
    for (double s : live_scores)
      if (s < theta) ++fr;
    p.far = static_cast<double>(fa) / static_cast<double>(spoof_scores.size());
    p.frr = static_cast<double>(fr) / static_cast<double>(live_scores.size());
    curve.push_back(p);
  }
  return curve;
}

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
  MetricStat st;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) st.mean += x;
  st.mean /= n;
  double sq = 0.0;
  for (double x : xs) sq += (x - st.mean) * (x - st.mean);
  st.stddev = std::sqrt(sq / n);
  return st;
}

}  // namespace

FoldAggregate aggregate_folds(const std::vector<MetricsReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("aggregate_folds: no folds");
  std::vector<double> apcers, bpcers, acers;
  for (const auto& r : reports) {
    apcers.push_back(r.apcer);
    bpcers.push_back(r.bpcer);
    acers.push_back(r.acer);
  }
  FoldAggregate agg;
  agg.apcer = stat_of(apcers);
  agg.bpcer = stat_of(bpcers);
  agg.acer = stat_of(acers);
  agg.folds = static_cast<int>(reports.size());
  return agg;
}

std::string metrics_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  j["threshold"] = report.threshold;
  j["apcer"] = report.apcer;
  j["bpcer"] = report.bpcer;
  j["acer"] = report.acer;
  j["n_live"] = report.n_live;
  nlohmann::ordered_json per;
  for (const auto& [attack, v] : report.per_attack_apcer) {
    nlohmann::ordered_json entry;
    entry["apcer"] = v;
    entry["count"] = report.n_per_attack.at(attack);
    per[to_string(attack)] = entry;
  }
  j["per_attack"] = per;
  nlohmann::ordered_json curve = nlohmann::ordered_json::array();
  for (const auto& p : report.curve)
    curve.push_back({{"theta", p.theta}, {"far", p.far}, {"frr", p.frr}});
  j["curve"] = curve;
  return j.dump(2) + "\n";
}

std::string metrics_table(const MetricsReport& report) {
  std::ostringstream os;
  auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << 100.0 * v;
    return s.str();
  };
  os << "threshold: " << report.threshold << "\n";
  os << "metric       value(%)\n";
  os << "APCER        " << pct(report.apcer) << "\n";
  for (const auto& [attack, v] : report.per_attack_apcer)
    os << "  " << to_string(attack) << std::string(std::max<size_t>(1, 11 - to_string(attack).size()), ' ')
       << pct(v) << "  (n=" << report.n_per_attack.at(attack) << ")\n";
  os << "BPCER        " << pct(report.bpcer) << "  (n=" << report.n_live << ")\n";
  os << "ACER         " << pct(report.acer) << "\n";
  return os.str();
}

std::string curve_svg(const MetricsReport& report) {
  const int w = 480, h = 360, m = 40;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(1);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << h - m << "\" x2=\"" << w - m << "\" y2=\""
     << h - m << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << h - m
     << "\" stroke=\"black\"/>\n";
  if (!report.curve.empty()) {
    const double t0 = report.curve.front().theta;
    const double t1 = report.curve.back().theta;
    const double span = t1 > t0 ? t1 - t0 : 1.0;
    auto px = [&](double theta) { return m + (theta - t0) / span * (w - 2 * m); };
    auto py = [&](double rate) { return h - m - rate * (h - 2 * m); };
    auto path = [&](auto get) {
      std::ostringstream p;
      p.setf(std::ios::fixed);
      p.precision(1);
      for (size_t i = 0; i < report.curve.size(); ++i)
        p << (i == 0 ? "M" : " L") << px(report.curve[i].theta) << " "
          << py(get(report.curve[i]));
      return p.str();
    };
    os << "<path d=\"" << path([](const CurvePoint& p) { return p.far; })
       << "\" fill=\"none\" stroke=\"crimson\"/>\n";
    os << "<path d=\"" << path([](const CurvePoint& p) { return p.frr; })
       << "\" fill=\"none\" stroke=\"steelblue\"/>\n";
    os << "<line x1=\"" << px(report.threshold) << "\" y1=\"" << m << "\" x2=\""
       << px(report.threshold) << "\" y2=\"" << h - m
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  os << "<text x=\"" << w - m - 60 << "\" y=\"" << m << "\" fill=\"crimson\">FAR</text>\n";
  os << "<text x=\"" << w - m - 60 << "\" y=\"" << m + 16 << "\" fill=\"steelblue\">FRR</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace fasvit
