#include "fasvit/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fasvit/checkpoint.hpp"
#include "fasvit/common.hpp"
#include "fasvit/image_io.hpp"
#include "fasvit/scoring.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace fasvit {

namespace {

// Stream-id salts so the synth and train rng trees never collide.
constexpr std::uint64_t kSynthSalt = 0x73796e7468ULL;
constexpr std::uint64_t kTrainSalt = 0x747261696eULL;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void expect_keys(const json& j, const std::vector<std::string>& allowed,
                 const std::string& what) {
  for (const auto& [key, _] : j.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw std::invalid_argument(what + ": unknown key '" + key + "'");
}

template <typename T>
void read_field(const json& j, const std::string& key, T& dst, const std::string& what) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(what + ": bad value for '" + key + "'");
  }
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 4;
  return 3;
}

template <typename Fn>
auto stage_guard(Stage s, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(s, e.what(), exit_code_for(e));
  }
}

bool is_train_row(const RunConfig& cfg, const ManifestRow& row) {
  // Subject ids are "s<number>"; the first n_train_subjects train.
  if (row.subject_id.size() < 2 || row.subject_id[0] != 's')
    throw ContractError("unexpected subject id '" + row.subject_id + "' in a synthetic run");
  const int n = std::atoi(row.subject_id.c_str() + 1);
  return n >= 1 && n <= cfg.n_train_subjects();
}

Manifest load_run_manifest(const RunConfig& cfg) {
  const RunPaths paths = run_paths(cfg.out_dir);
  Manifest m = load_manifest(paths.manifest);
  if (m.rows.empty()) throw IoError("manifest '" + paths.manifest + "' has no rows");
  return m;
}

std::vector<ManifestRow> split_rows(const RunConfig& cfg, const Manifest& m, bool train) {
  std::vector<ManifestRow> out;
  for (const auto& row : m.rows)
    if (is_train_row(cfg, row) == train) out.push_back(row);
  return out;
}

// ---- score CSV ----

constexpr const char* kScoresHeader = "id,score,label,attack_type";

void write_scores_csv(const std::string& path, const std::vector<ScoredSample>& rows) {
  std::ostringstream os;
  os << kScoresHeader << "\n";
  for (const auto& r : rows)
    os << r.id << ',' << fmt_double(r.score) << ',' << to_string(r.truth) << ','
       << to_string(r.attack) << "\n";
  write_text_file(path, os.str());
}

std::vector<ScoredSample> read_scores_csv(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kScoresHeader)
    throw IoError("scores file '" + path + "' has a wrong header");
  std::vector<ScoredSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == ',') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    f.push_back(cur);
    if (f.size() != 4) throw IoError(where + ": expected 4 fields");
    ScoredSample s;
    s.id = f[0];
    try {
      s.score = std::stod(f[1]);
      s.truth = label_from_string(f[2]);
      s.attack = attack_from_string(f[3]);
    } catch (const std::exception& e) {
      throw IoError(where + ": " + e.what());
    }
    out.push_back(std::move(s));
  }
  if (out.empty()) throw IoError("scores file '" + path + "' has no rows");
  return out;
}

void split_scores(const std::vector<ScoredSample>& rows, std::vector<double>& live,
                  std::vector<double>& spoof) {
  for (const auto& r : rows)
    (r.truth == Label::kLive ? live : spoof).push_back(r.score);
}

// ---- stages ----

void stage_synth(const RunConfig& cfg, std::ostream* log) {
  const RunPaths paths = run_paths(cfg.out_dir);
  Rng rng(splitmix64(cfg.seed ^ kSynthSalt));
  SynthOptions opt;
  opt.frames_per_subject = cfg.data.frames_per_subject;
  opt.image_size = cfg.model.image_size;
  if (!cfg.data.hard_split) {
    opt.n_subjects = cfg.data.n_subjects;
    synth_dataset(opt, rng, paths.data_dir);
  } else {
    const int n_train = cfg.n_train_subjects();
    SynthOptions train_opt = opt, test_opt = opt;
    train_opt.n_subjects = n_train;
    train_opt.print_ops = {AugOp::kColorDistortion};
    train_opt.display_ops = {AugOp::kSpecular};
    test_opt.n_subjects = cfg.data.n_subjects - n_train;
    test_opt.subject_offset = n_train;
    test_opt.print_ops = {AugOp::kHalftoneSfc};
    test_opt.display_ops = {AugOp::kMoire};
    Manifest a = synth_dataset(train_opt, rng, paths.data_dir);
    const Manifest b = synth_dataset(test_opt, rng, paths.data_dir);
    a.rows.insert(a.rows.end(), b.rows.begin(), b.rows.end());
    save_manifest(a, paths.manifest);
  }
  if (log) *log << "synth: wrote " << paths.manifest << "\n";
}

TrainState<double> train_model(const RunConfig& cfg, const std::vector<Sample>& samples,
                               const std::string& log_path, std::ostream* log) {
  TrainConfig tc = cfg.train;
  tc.seed = splitmix64(cfg.seed ^ kTrainSalt);

  std::ostringstream log_csv;
  log_csv << "epoch,l_class,l_tap,l_apl,l_overall,aug_enabled\n";
  const EpochCallback on_epoch = [&](const EpochStats& st) {
    log_csv << st.epoch << ',' << fmt_double(st.l_class) << ',' << fmt_double(st.l_tap)
            << ',' << fmt_double(st.l_apl) << ',' << fmt_double(st.l_overall) << ','
            << (st.aug_enabled ? 1 : 0) << "\n";
    if (log)
      *log << "epoch " << st.epoch << " l_overall " << st.l_overall
           << (st.aug_enabled ? "" : " (aug off)") << "\n";
  };
  TrainState<double> state = train<double>(cfg.model, samples, tc, on_epoch);
  if (!log_path.empty()) write_text_file(log_path, log_csv.str());
  return state;
}

void stage_train(const RunConfig& cfg, std::ostream* log) {
  const RunPaths paths = run_paths(cfg.out_dir);
  const Manifest m = load_run_manifest(cfg);
  const std::vector<Sample> samples = load_samples(m, split_rows(cfg, m, true));
  if (samples.empty()) throw std::invalid_argument("train split is empty");
  TrainState<double> state = train_model(cfg, samples, paths.train_log, log);
  save_checkpoint(state.model_config, state.params, paths.checkpoint);
  if (log) *log << "train: wrote " << paths.checkpoint << "\n";
}

void stage_bank(const RunConfig& cfg, std::ostream* log) {
  const RunPaths paths = run_paths(cfg.out_dir);
  auto [model_cfg, params] = load_checkpoint<double>(paths.checkpoint);
  const Manifest m = load_run_manifest(cfg);
  std::vector<Sample> lives;
  for (const auto& row : split_rows(cfg, m, true))
    if (row.label == Label::kLive) lives.push_back(load_sample(m, row));
  const ReferenceBank bank =
      build_bank(params, model_cfg, lives, 0, file_fingerprint(paths.checkpoint));
  save_bank(bank, paths.bank);
  if (log) *log << "bank: " << bank.vectors.rows() << " references -> " << paths.bank << "\n";
}

std::vector<ScoredSample> score_rows(const ModelParams<double>& params,
                                     const ModelConfig& model_cfg, const ReferenceBank& bank,
                                     const Manifest& m, const std::vector<ManifestRow>& rows) {
  std::vector<ScoredSample> out;
  out.reserve(rows.size());
  for (const auto& row : rows) {
    const Sample s = load_sample(m, row);
    const ScoreReport r = score(params, model_cfg, bank, s);
    out.push_back({r.sample_id, r.score, row.label, row.attack});
  }
  return out;
}

void stage_score(const RunConfig& cfg, std::ostream* log) {
  const RunPaths paths = run_paths(cfg.out_dir);
  auto [model_cfg, params] = load_checkpoint<double>(paths.checkpoint);
  const ReferenceBank bank = load_bank(paths.bank);
  if (bank.model_fingerprint != file_fingerprint(paths.checkpoint))
    throw ContractError("bank '" + paths.bank + "' was built from a different checkpoint");
  const Manifest m = load_run_manifest(cfg);
  write_scores_csv(paths.scores, score_rows(params, model_cfg, bank, m, split_rows(cfg, m, false)));
  if (cfg.scoring.calib_split == "train")
    write_scores_csv(paths.calib_scores,
                     score_rows(params, model_cfg, bank, m, split_rows(cfg, m, true)));
  if (log) *log << "score: wrote " << paths.scores << "\n";
}

PipelineResult stage_eval(const RunConfig& cfg, std::ostream* log) {
  const RunPaths paths = run_paths(cfg.out_dir);
  const std::vector<ScoredSample> test_scores = read_scores_csv(paths.scores);
  const std::vector<ScoredSample> calib_scores = cfg.scoring.calib_split == "train"
                                                     ? read_scores_csv(paths.calib_scores)
                                                     : test_scores;
  std::vector<double> live, spoof;
  split_scores(calib_scores, live, spoof);
  const double theta = select_threshold(live, spoof);
  const MetricsReport report = compute_metrics(test_scores, theta);

  write_text_file(paths.metrics_json, metrics_to_json(report));
  write_text_file(paths.metrics_txt, metrics_table(report));
  write_text_file(paths.curve_svg, curve_svg(report));

  const std::string config_text = serialize_run_config(cfg);
  ordered_json summary;
  summary["config"] = json::parse(config_text);
  summary["config_hash"] = to_hex(fnv1a64(config_text.data(), config_text.size()));
  summary["seed"] = cfg.seed;
  summary["manifest_hash"] = to_hex(file_fingerprint(paths.manifest));
  summary["checkpoint_hash"] = to_hex(file_fingerprint(paths.checkpoint));
  summary["bank_hash"] = to_hex(file_fingerprint(paths.bank));
  summary["calib_split"] = cfg.scoring.calib_split;
  summary["threshold"] = theta;
  summary["metrics"] = {{"apcer", report.apcer}, {"bpcer", report.bpcer}, {"acer", report.acer}};
  write_text_file(paths.summary, summary.dump(2) + "\n");

  if (log)
    *log << "eval: acer " << report.acer << " apcer " << report.apcer << " bpcer "
         << report.bpcer << " @ theta " << theta << "\n";
  return {report, theta, paths.summary};
}

}  // namespace

ModelConfig default_pipeline_model() {
  ModelConfig m;
  m.image_size = 32;
  m.patch_size = 8;
  m.depth = 6;
  m.embed_dim = 64;
  m.heads = 4;
  return m;
}

TrainConfig default_pipeline_train() {
  TrainConfig t;
  t.epochs = 90;
  t.learning_rate = 3e-3;
  return t;
}

int RunConfig::n_train_subjects() const {
  const int n = data.n_subjects;
  const int k = static_cast<int>(std::lround(data.train_fraction * n));
  return std::clamp(k, 1, n - 1);
}

void RunConfig::validate() const {
  model.resolved().validate();
  train.validate();
  if (data.n_subjects < 2)
    throw std::invalid_argument("RunConfig: need at least 2 subjects to split");
  if (data.frames_per_subject < 1)
    throw std::invalid_argument("RunConfig: frames_per_subject must be positive");
  if (!(data.train_fraction > 0.0 && data.train_fraction < 1.0))
    throw std::invalid_argument("RunConfig: train_fraction must be in (0, 1)");
  if (scoring.calib_split != "test" && scoring.calib_split != "train")
    throw std::invalid_argument("RunConfig: calib_split must be 'test' or 'train'");
  if (out_dir.empty()) throw std::invalid_argument("RunConfig: out_dir must be non-empty");
}

std::string serialize_run_config(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  j["model"] = {{"image_size", cfg.model.image_size}, {"patch_size", cfg.model.patch_size},
                {"depth", cfg.model.depth},           {"embed_dim", cfg.model.embed_dim},
                {"heads", cfg.model.heads},           {"mlp_ratio", cfg.model.mlp_ratio},
                {"alpha", cfg.model.alpha},           {"score_tap", cfg.model.score_tap},
                {"loss_tap", cfg.model.loss_tap},     {"n_classes", cfg.model.n_classes}};
  j["train"] = {{"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"epochs", cfg.train.epochs},
                {"momentum", cfg.train.momentum},
                {"p_fas", cfg.train.p_fas},
                {"p_pda", cfg.train.p_pda},
                {"p_pda_patch", cfg.train.p_pda_patch},
                {"gate_threshold", cfg.train.gate_threshold},
                {"threads", cfg.train.threads},
                {"use_class", cfg.train.loss.use_class},
                {"use_tap", cfg.train.loss.use_tap},
                {"use_apl", cfg.train.loss.use_apl}};
  j["data"] = {{"n_subjects", cfg.data.n_subjects},
               {"frames_per_subject", cfg.data.frames_per_subject},
               {"train_fraction", cfg.data.train_fraction},
               {"hard_split", cfg.data.hard_split}};
  j["scoring"] = {{"calib_split", cfg.scoring.calib_split}};
  return j.dump(2) + "\n";
}

RunConfig parse_run_config(const std::string& json_text, const std::string& what) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(what + ": " + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument(what + ": top level must be an object");
  expect_keys(j, {"seed", "out_dir", "model", "train", "data", "scoring"}, what);

  RunConfig cfg;
  read_field(j, "seed", cfg.seed, what);
  read_field(j, "out_dir", cfg.out_dir, what);
  if (j.contains("model")) {
    const json& m = j["model"];
    const std::string w = what + ".model";
    expect_keys(m,
                {"image_size", "patch_size", "depth", "embed_dim", "heads", "mlp_ratio",
                 "alpha", "score_tap", "loss_tap", "n_classes"},
                w);
    read_field(m, "image_size", cfg.model.image_size, w);
    read_field(m, "patch_size", cfg.model.patch_size, w);
    read_field(m, "depth", cfg.model.depth, w);
    read_field(m, "embed_dim", cfg.model.embed_dim, w);
    read_field(m, "heads", cfg.model.heads, w);
    read_field(m, "mlp_ratio", cfg.model.mlp_ratio, w);
    read_field(m, "alpha", cfg.model.alpha, w);
    read_field(m, "score_tap", cfg.model.score_tap, w);
    read_field(m, "loss_tap", cfg.model.loss_tap, w);
    read_field(m, "n_classes", cfg.model.n_classes, w);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    const std::string w = what + ".train";
    expect_keys(t,
                {"batch_size", "learning_rate", "epochs", "momentum", "p_fas", "p_pda",
                 "p_pda_patch", "gate_threshold", "threads", "use_class", "use_tap", "use_apl"},
                w);
    read_field(t, "batch_size", cfg.train.batch_size, w);
    read_field(t, "learning_rate", cfg.train.learning_rate, w);
    read_field(t, "epochs", cfg.train.epochs, w);
    read_field(t, "momentum", cfg.train.momentum, w);
    read_field(t, "p_fas", cfg.train.p_fas, w);
    read_field(t, "p_pda", cfg.train.p_pda, w);
    read_field(t, "p_pda_patch", cfg.train.p_pda_patch, w);
    read_field(t, "gate_threshold", cfg.train.gate_threshold, w);
    read_field(t, "threads", cfg.train.threads, w);
    read_field(t, "use_class", cfg.train.loss.use_class, w);
    read_field(t, "use_tap", cfg.train.loss.use_tap, w);
    read_field(t, "use_apl", cfg.train.loss.use_apl, w);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    const std::string w = what + ".data";
    expect_keys(d, {"n_subjects", "frames_per_subject", "train_fraction", "hard_split"}, w);
    read_field(d, "n_subjects", cfg.data.n_subjects, w);
    read_field(d, "frames_per_subject", cfg.data.frames_per_subject, w);
    read_field(d, "train_fraction", cfg.data.train_fraction, w);
    read_field(d, "hard_split", cfg.data.hard_split, w);
  }
  if (j.contains("scoring")) {
    const json& s = j["scoring"];
    const std::string w = what + ".scoring";
    expect_keys(s, {"calib_split"}, w);
    read_field(s, "calib_split", cfg.scoring.calib_split, w);
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_text_file(path), "config '" + path + "'");
}

RunPaths run_paths(const std::string& out_dir) {
  const fs::path base(out_dir);
  RunPaths p;
  p.data_dir = (base / "data").string();
  p.manifest = (base / "data" / "manifest.csv").string();
  p.checkpoint = (base / "model.ckpt").string();
  p.train_log = (base / "train_log.csv").string();
  p.bank = (base / "bank.fasb").string();
  p.scores = (base / "scores.csv").string();
  p.calib_scores = (base / "calib_scores.csv").string();
  p.metrics_json = (base / "metrics.json").string();
  p.metrics_txt = (base / "metrics.txt").string();
  p.curve_svg = (base / "curve.svg").string();
  p.summary = (base / "summary.json").string();
  return p;
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::kSynth: return "synth";
    case Stage::kTrain: return "train";
    case Stage::kBank: return "bank";
    case Stage::kScore: return "score";
    case Stage::kEval: return "eval";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  for (Stage s : {Stage::kSynth, Stage::kTrain, Stage::kBank, Stage::kScore, Stage::kEval})
    if (name == stage_name(s)) return s;
  throw std::invalid_argument("unknown stage '" + name +
                              "' (expected synth, train, bank, score or eval)");
}

PipelineResult run_pipeline(const RunConfig& cfg, Stage from, std::ostream* log) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create out_dir '" + cfg.out_dir + "': " + ec.message());

  if (from <= Stage::kSynth) stage_guard(Stage::kSynth, [&] { stage_synth(cfg, log); });
  if (from <= Stage::kTrain) stage_guard(Stage::kTrain, [&] { stage_train(cfg, log); });
  if (from <= Stage::kBank) stage_guard(Stage::kBank, [&] { stage_bank(cfg, log); });
  if (from <= Stage::kScore) stage_guard(Stage::kScore, [&] { stage_score(cfg, log); });
  return stage_guard(Stage::kEval, [&] { return stage_eval(cfg, log); });
}

void run_single_stage(const RunConfig& cfg, Stage stage, std::ostream* log) {
  cfg.validate();
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create out_dir '" + cfg.out_dir + "': " + ec.message());
  switch (stage) {
    case Stage::kSynth: stage_guard(Stage::kSynth, [&] { stage_synth(cfg, log); }); break;
    case Stage::kTrain: stage_guard(Stage::kTrain, [&] { stage_train(cfg, log); }); break;
    case Stage::kBank: stage_guard(Stage::kBank, [&] { stage_bank(cfg, log); }); break;
    case Stage::kScore: stage_guard(Stage::kScore, [&] { stage_score(cfg, log); }); break;
    case Stage::kEval: stage_guard(Stage::kEval, [&] { stage_eval(cfg, log); }); break;
  }
}

// ---- ablation ----

namespace {

std::vector<std::vector<std::string>> fold_subjects(const RunConfig& cfg, const Manifest& m,
                                                    int n_folds) {
  std::vector<std::string> test_subjects;
  std::set<std::string> seen;
  for (const auto& row : m.rows)
    if (!is_train_row(cfg, row) && seen.insert(row.subject_id).second)
      test_subjects.push_back(row.subject_id);
  const int k = std::clamp<int>(n_folds, 1, static_cast<int>(test_subjects.size()));
  std::vector<std::vector<std::string>> folds(k);
  for (std::size_t i = 0; i < test_subjects.size(); ++i)
    folds[i % k].push_back(test_subjects[i]);
  return folds;
}

FoldAggregate fold_metrics(const std::vector<ScoredSample>& scored,
                           const std::vector<std::vector<std::string>>& folds,
                           const std::map<std::string, std::string>& subject_of) {
  std::vector<MetricsReport> reports;
  for (const auto& fold : folds) {
    std::vector<ScoredSample> part;
    for (const auto& s : scored)
      if (std::find(fold.begin(), fold.end(), subject_of.at(s.id)) != fold.end())
        part.push_back(s);
    std::vector<double> live, spoof;
    split_scores(part, live, spoof);
    reports.push_back(compute_metrics(part, select_threshold(live, spoof)));
  }
  return aggregate_folds(reports);
}

std::string tap_label(int tap) {
  return tap == kTapFinalNorm ? "final-norm" : "block " + std::to_string(tap);
}

}  // namespace

AblateResult run_ablate(const RunConfig& cfg, const std::vector<int>& taps, AblateMode mode,
                        int n_folds, std::ostream* log) {
  cfg.validate();
  if (taps.empty()) throw std::invalid_argument("run_ablate: empty tap list");
  std::vector<int> unique_taps;
  for (int t : taps) {
    if (t < 1 || t > cfg.model.depth)
      throw std::invalid_argument("run_ablate: tap " + std::to_string(t) +
                                  " out of range 1.." + std::to_string(cfg.model.depth));
    if (std::find(unique_taps.begin(), unique_taps.end(), t) == unique_taps.end())
      unique_taps.push_back(t);
  }
  std::sort(unique_taps.begin(), unique_taps.end());
  if (mode == AblateMode::kScore) unique_taps.push_back(kTapFinalNorm);

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create out_dir '" + cfg.out_dir + "': " + ec.message());
  stage_guard(Stage::kSynth, [&] { stage_synth(cfg, log); });
  const Manifest m = load_run_manifest(cfg);
  const std::vector<ManifestRow> train_rows = split_rows(cfg, m, true);
  const std::vector<ManifestRow> test_rows = split_rows(cfg, m, false);
  const std::vector<Sample> train_samples = load_samples(m, train_rows);
  std::vector<Sample> train_lives;
  for (const auto& s : train_samples)
    if (s.label == Label::kLive) train_lives.push_back(s);

  std::map<std::string, std::string> subject_of;
  for (const auto& row : test_rows) subject_of[row.path] = row.subject_id;
  const auto folds = fold_subjects(cfg, m, n_folds);

  AblateResult result;
  result.mode = mode;

  TrainState<double> shared_state;
  if (mode == AblateMode::kScore) {
    if (log) *log << "ablate: training once for score-tap sweep\n";
    shared_state = stage_guard(Stage::kTrain,
                               [&] { return train_model(cfg, train_samples, "", log); });
  }

  for (int tap : unique_taps) {
    if (log) *log << "ablate: " << tap_label(tap) << "\n";
    RunConfig tap_cfg = cfg;
    const TrainState<double>* state = &shared_state;
    TrainState<double> own_state;
    if (mode == AblateMode::kLoss) {
      tap_cfg.model.loss_tap = tap;
      own_state = stage_guard(Stage::kTrain,
                              [&] { return train_model(tap_cfg, train_samples, "", log); });
      state = &own_state;
    }
    const int bank_tap = mode == AblateMode::kScore ? tap : 0;
    const ReferenceBank bank = stage_guard(Stage::kBank, [&] {
      return build_bank(state->params, state->model_config, train_lives, bank_tap);
    });
    const std::vector<ScoredSample> scored = stage_guard(Stage::kScore, [&] {
      return score_rows(state->params, state->model_config, bank, m, test_rows);
    });
    const FoldAggregate agg =
        stage_guard(Stage::kEval, [&] { return fold_metrics(scored, folds, subject_of); });
    result.rows.push_back({tap_label(tap), tap, agg});
  }
  return result;
}

std::string ablate_table(const AblateResult& result) {
  auto cell = [](const MetricStat& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%5.2f +/- %4.2f", 100.0 * s.mean, 100.0 * s.stddev);
    return std::string(buf);
  };
  std::ostringstream os;
  os << (result.mode == AblateMode::kScore ? "score tap" : "loss tap ")
     << "     acer (%)         apcer (%)        bpcer (%)\n";
  for (const auto& row : result.rows) {
    os << row.label;
    for (std::size_t i = row.label.size(); i < 14; ++i) os << ' ';
    os << cell(row.agg.acer) << "  " << cell(row.agg.apcer) << "  " << cell(row.agg.bpcer)
       << "\n";
  }
  return os.str();
}

std::string ablate_to_json(const AblateResult& result) {
  ordered_json j;
  j["mode"] = result.mode == AblateMode::kScore ? "score" : "loss";
  j["rows"] = ordered_json::array();
  for (const auto& row : result.rows) {
    ordered_json r;
    r["tap"] = row.label;
    r["folds"] = row.agg.folds;
    r["acer"] = {{"mean", row.agg.acer.mean}, {"std", row.agg.acer.stddev}};
    r["apcer"] = {{"mean", row.agg.apcer.mean}, {"std", row.agg.apcer.stddev}};
    r["bpcer"] = {{"mean", row.agg.bpcer.mean}, {"std", row.agg.bpcer.stddev}};
    j["rows"].push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

}  // namespace fasvit
