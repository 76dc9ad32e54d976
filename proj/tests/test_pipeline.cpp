#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "fasvit/common.hpp"
#include "fasvit/image_io.hpp"
#include "fasvit/pipeline.hpp"
#include "test_util.hpp"

using namespace fasvit;
namespace fs = std::filesystem;

namespace {

// Small enough to train in seconds, big enough to produce sane metrics.
RunConfig smoke_config(const std::string& out_dir) {
  RunConfig cfg;
  cfg.seed = 7;
  cfg.out_dir = out_dir;
  cfg.model.image_size = 16;
  cfg.model.patch_size = 8;
  cfg.model.depth = 2;
  cfg.model.embed_dim = 8;
  cfg.model.heads = 2;
  cfg.model.score_tap = 0;
  cfg.model.loss_tap = 0;
  cfg.model = cfg.model.resolved();
  cfg.train.epochs = 5;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 1e-3;
  cfg.data.n_subjects = 6;
  cfg.data.frames_per_subject = 3;
  return cfg;
}

}  // namespace

TEST_CASE("pipeline: run config serialization round-trip") {
  RunConfig def;
  const std::string js = serialize_run_config(def);
  const RunConfig parsed = parse_run_config(js, "inline");
  CHECK(serialize_run_config(parsed) == js);
  CHECK(parsed.seed == def.seed);
  CHECK(parsed.model.depth == def.model.depth);
  CHECK(parsed.model.embed_dim == def.model.embed_dim);
  CHECK(parsed.train.epochs == def.train.epochs);
  CHECK(parsed.train.learning_rate == def.train.learning_rate);
  CHECK(parsed.data.n_subjects == def.data.n_subjects);
  CHECK(parsed.data.hard_split == def.data.hard_split);
  CHECK(parsed.scoring.calib_split == def.scoring.calib_split);

  RunConfig custom = smoke_config("somewhere");
  custom.data.hard_split = true;
  custom.train.p_fas = 0.35;
  const RunConfig back = parse_run_config(serialize_run_config(custom), "inline");
  CHECK(serialize_run_config(back) == serialize_run_config(custom));
  CHECK(back.model.depth == 2);
  CHECK(back.data.hard_split);
  CHECK(back.train.p_fas == 0.35);
}

TEST_CASE("pipeline: unknown config keys are rejected") {
  RunConfig def;
  std::string js = serialize_run_config(def);
  CHECK_THROWS_AS(parse_run_config("{\"bogus\": 1}", "inline"), std::invalid_argument);

  std::string with_top = js;
  with_top.insert(with_top.find('{') + 1, "\"mystery\": 3,");
  CHECK_THROWS_AS(parse_run_config(with_top, "inline"), std::invalid_argument);

  const size_t model_pos = js.find("\"model\"");
  REQUIRE(model_pos != std::string::npos);
  std::string with_nested = js;
  with_nested.insert(with_nested.find('{', model_pos) + 1, "\"mystery\": 3,");
  CHECK_THROWS_AS(parse_run_config(with_nested, "inline"), std::invalid_argument);

  CHECK_THROWS_AS(parse_run_config("not json", "inline"), std::invalid_argument);
}

TEST_CASE("pipeline: train subject count") {
  RunConfig cfg;
  cfg.data.n_subjects = 20;
  cfg.data.train_fraction = 0.8;
  CHECK(cfg.n_train_subjects() == 16);
  cfg.data.n_subjects = 2;
  CHECK(cfg.n_train_subjects() == 1);
  cfg.data.n_subjects = 3;
  cfg.data.train_fraction = 0.99;
  CHECK(cfg.n_train_subjects() == 2);  // clamped to keep a test subject
  cfg.data.train_fraction = 0.01;
  CHECK(cfg.n_train_subjects() == 1);  // clamped to keep a train subject
}

TEST_CASE("pipeline: smoke run produces artifacts and is deterministic") {
  fasvit::test::TempDir tmp("pipeline");
  const RunConfig cfg = smoke_config((tmp.path() / "run1").string());

  const PipelineResult res = run_pipeline(cfg);
  CHECK(std::isfinite(res.metrics.acer));
  CHECK(res.metrics.acer >= 0.0);
  CHECK(res.metrics.acer <= 1.0);
  CHECK(std::isfinite(res.threshold));

  const RunPaths paths = run_paths(cfg.out_dir);
  for (const std::string* p :
       {&paths.manifest, &paths.checkpoint, &paths.train_log, &paths.bank, &paths.scores,
        &paths.metrics_json, &paths.metrics_txt, &paths.curve_svg, &paths.summary}) {
    CAPTURE(*p);
    CHECK(fs::exists(*p));
  }
  // Calibrating on the test split needs no separate calibration scores.
  CHECK(!fs::exists(paths.calib_scores));
  CHECK(res.summary_path == paths.summary);

  RunConfig cfg2 = cfg;
  cfg2.out_dir = (tmp.path() / "run2").string();
  const PipelineResult res2 = run_pipeline(cfg2);
  CHECK(read_file(paths.metrics_json) == read_file(run_paths(cfg2.out_dir).metrics_json));
  CHECK(res2.metrics.acer == res.metrics.acer);
  CHECK(res2.threshold == res.threshold);

  RunConfig other_seed = cfg;
  other_seed.seed = 8;
  other_seed.out_dir = (tmp.path() / "run3").string();
  other_seed.scoring.calib_split = "train";
  run_pipeline(other_seed);
  CHECK(read_file(paths.scores) != read_file(run_paths(other_seed.out_dir).scores));
  CHECK(fs::exists(run_paths(other_seed.out_dir).calib_scores));

  SUBCASE("stages restart from existing artifacts") {
    fs::remove(paths.bank);
    fs::remove(paths.metrics_json);
    run_single_stage(cfg, Stage::kBank);
    CHECK(fs::exists(paths.bank));
    run_single_stage(cfg, Stage::kScore);
    run_single_stage(cfg, Stage::kEval);
    CHECK(fs::exists(paths.metrics_json));
    CHECK(read_file(paths.metrics_json) == read_file(run_paths(cfg2.out_dir).metrics_json));
  }

  SUBCASE("a missing dependency fails with the stage name") {
    fs::remove(paths.checkpoint);
    try {
      run_single_stage(cfg, Stage::kBank);
      FAIL("expected StageError");
    } catch (const StageError& e) {
      CHECK(std::string(e.what()).find("stage 'bank'") != std::string::npos);
      CHECK(e.exit_code == 3);
      CHECK(e.stage == Stage::kBank);
    }
  }
}

TEST_CASE("pipeline: stage names round-trip") {
  for (Stage s : {Stage::kSynth, Stage::kTrain, Stage::kBank, Stage::kScore, Stage::kEval})
    CHECK(stage_from_string(stage_name(s)) == s);
  CHECK_THROWS_AS(stage_from_string("nonsense"), std::invalid_argument);
}

TEST_CASE("pipeline: tap ablation harness") {
  fasvit::test::TempDir tmp("ablate");
  RunConfig cfg = smoke_config((tmp.path() / "run").string());
  cfg.data.n_subjects = 8;  // two held-out subjects, one per fold

  const AblateResult res = run_ablate(cfg, {2}, AblateMode::kScore, 2);
  CHECK(res.mode == AblateMode::kScore);
  REQUIRE(res.rows.size() == 2);
  CHECK(res.rows[0].tap == 2);
  CHECK(res.rows[0].label.find("2") != std::string::npos);
  CHECK(res.rows[1].tap == kTapFinalNorm);
  CHECK(res.rows[1].label == "final-norm");
  for (const auto& row : res.rows) {
    CHECK(row.agg.folds == 2);
    CHECK(row.agg.acer.mean >= 0.0);
    CHECK(row.agg.acer.mean <= 1.0);
    CHECK(row.agg.acer.stddev >= 0.0);
  }

  const std::string table = ablate_table(res);
  CHECK(table.find("final-norm") != std::string::npos);
  const std::string js = ablate_to_json(res);
  CHECK(js.find("final-norm") != std::string::npos);

  CHECK_THROWS_AS(run_ablate(cfg, {3}, AblateMode::kScore, 2), std::invalid_argument);
  CHECK_THROWS_AS(run_ablate(cfg, {0}, AblateMode::kScore, 2), std::invalid_argument);
}
