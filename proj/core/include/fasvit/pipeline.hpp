#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fasvit/metrics.hpp"
#include "fasvit/synth.hpp"
#include "fasvit/trainer.hpp"
#include "fasvit/vit.hpp"

namespace fasvit {

// One config object drives a whole run: data generation, model, training,
// calibration. Serialized as JSON with four nested sections (model, train,
// data, scoring) plus top-level seed and out_dir; every field below is the
// documented default, parse rejects unknown keys, and
// parse(serialize(c)) == c. All randomness derives from the single seed.

// Synthetic images are rendered at the model's image_size.
struct DataConfig {
  int n_subjects = 20;
  int frames_per_subject = 8;
  // Subjects s01..s<k> train, the rest test, k = round(train_fraction * n)
  // clamped so both sides are non-empty. Subject-disjoint by construction.
  double train_fraction = 0.8;
  // When set, train-subject spoofs use one simulator pair (color
  // distortion + specular) and test-subject spoofs a disjoint one
  // (SFC halftone + moire), so test attacks are unseen during training.
  bool hard_split = false;
};

struct ScoringConfig {
  std::string calib_split = "test";  // "test" or "train"
};

// Toy-scale model used by the default pipeline run.
ModelConfig default_pipeline_model();
// Toy-scale training schedule matching it.
TrainConfig default_pipeline_train();

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  ModelConfig model = default_pipeline_model();
  TrainConfig train = default_pipeline_train();
  DataConfig data;
  ScoringConfig scoring;

  int n_train_subjects() const;
  void validate() const;
};

std::string serialize_run_config(const RunConfig& cfg);
RunConfig parse_run_config(const std::string& json_text, const std::string& what);
RunConfig load_run_config(const std::string& path);

// Artifact locations under a run's out_dir.
struct RunPaths {
  std::string data_dir, manifest, checkpoint, train_log, bank, scores, calib_scores,
      metrics_json, metrics_txt, curve_svg, summary;
};
RunPaths run_paths(const std::string& out_dir);

enum class Stage { kSynth = 0, kTrain, kBank, kScore, kEval };
const char* stage_name(Stage s);
Stage stage_from_string(const std::string& name);

// A stage failure wrapping the underlying error; exit_code follows the CLI
// convention (3 data error, 4 numeric failure).
struct StageError : std::runtime_error {
  StageError(Stage s, const std::string& message, int code)
      : std::runtime_error(std::string("stage '") + stage_name(s) + "': " + message),
        stage(s),
        exit_code(code) {}
  Stage stage;
  int exit_code;
};

struct PipelineResult {
  MetricsReport metrics;
  double threshold = 0.0;
  std::string summary_path;
};

// Runs synth -> train -> bank -> score -> eval starting at `from`, reading
// earlier stages' artifacts from out_dir. Progress lines go to `log` when
// given; all artifacts are byte-deterministic for a fixed config.
PipelineResult run_pipeline(const RunConfig& cfg, Stage from = Stage::kSynth,
                            std::ostream* log = nullptr);

// Runs exactly one stage against the artifacts already in out_dir.
void run_single_stage(const RunConfig& cfg, Stage stage, std::ostream* log = nullptr);

// ---- ablation harness ----

enum class AblateMode { kScore, kLoss };

struct AblateRow {
  std::string label;  // "block 4" or "final-norm"
  int tap = 0;        // kTapFinalNorm for the final-norm row
  FoldAggregate agg;
};

struct AblateResult {
  AblateMode mode;
  std::vector<AblateRow> rows;
};

// Score mode trains once, then rebuilds the bank and rescores per tap in
// taps + the final-norm row; loss mode retrains per tap. Test subjects are
// split round-robin into n_folds folds; each fold is thresholded at its own
// FAR=FRR point and metrics are aggregated as mean +/- population std.
// Taps outside 1..depth are invalid arguments.
AblateResult run_ablate(const RunConfig& cfg, const std::vector<int>& taps,
                        AblateMode mode, int n_folds = 3, std::ostream* log = nullptr);

std::string ablate_table(const AblateResult& result);
std::string ablate_to_json(const AblateResult& result);

}  // namespace fasvit
