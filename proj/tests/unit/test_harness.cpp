#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "gazeauth/error.hpp"
#include "gazeauth/harness.hpp"

using namespace gazeauth;

namespace {

CalibrationBank alice_and_bob() {
  CalibrationBank bank;
  for (const char* who : {"alice", "bob"}) {
    for (Depth d : {Depth::Far200, Depth::Near75}) {
      CalibrationModel m;
      m.subject_id = who;
      m.fitted_depth = d;
      bank.insert(m);
    }
  }
  return bank;
}

}  // namespace

TEST(Scenario, S1GenuineUsesOwnFarCalibration) {
  const auto bank = alice_and_bob();
  const auto& m = resolve_verification_calibration(Scenario::S1, "alice", "alice", bank);
  EXPECT_EQ(m.subject_id, "alice");
  EXPECT_EQ(m.fitted_depth, Depth::Far200);
}

TEST(Scenario, S2ImpostorUsesOwnNearCalibration) {
  const auto bank = alice_and_bob();
  const auto& m = resolve_verification_calibration(Scenario::S2, "alice", "bob", bank);
  EXPECT_EQ(m.subject_id, "bob");
  EXPECT_EQ(m.fitted_depth, Depth::Near75);
}

TEST(Scenario, S3ImpostorUsesClaimedFarCalibration) {
  const auto bank = alice_and_bob();
  const auto& m = resolve_verification_calibration(Scenario::S3, "alice", "bob", bank);
  EXPECT_EQ(m.subject_id, "alice");
  EXPECT_EQ(m.fitted_depth, Depth::Far200);
}

TEST(Scenario, EnrollmentAlwaysUsesFarCalibration) {
  const auto bank = alice_and_bob();
  EXPECT_EQ(enrollment_calibration("bob", bank).fitted_depth, Depth::Far200);
  EXPECT_THROW(enrollment_calibration("carol", bank), ValidationError);
}

TEST(Grid, CrossProductWithUniqueIds) {
  GridAxes axes;
  axes.calib_training = {CalibTraining::All, CalibTraining::Single};
  axes.filters = {false, true};
  const auto specs = enumerate_grid(axes, false);
  EXPECT_EQ(specs.size(), 2u * 2u * 1u * 3u * 1u * 2u);
  std::set<std::string> ids;
  for (const auto& s : specs) ids.insert(s.exp_id);
  EXPECT_EQ(ids.size(), specs.size());
  EXPECT_EQ(specs.front().exp_id, "S1@1");
  EXPECT_EQ(specs[12].exp_id, "S2@1");
  EXPECT_EQ(specs[12].axis, specs[0].axis);
}

TEST(Grid, S3NeedsExperimentalFlag) {
  GridAxes axes;
  axes.scenarios = {Scenario::S1, Scenario::S3};
  EXPECT_THROW(enumerate_grid(axes, false), ValidationError);
  EXPECT_EQ(enumerate_grid(axes, true).size(), 6u);
  ExperimentSpec spec;
  spec.exp_id = "x";
  spec.scenario = Scenario::S3;
  EXPECT_THROW(spec.validate(), ValidationError);
}

TEST(Regime, DeskScalingKeepsRatios) {
  const RegimeScale scale;
  const auto c1 = regime_train_config(Regime::Config1, scale, 1);
  const auto c2 = regime_train_config(Regime::Config2, scale, 1);
  EXPECT_EQ(c1.epochs, 50);
  EXPECT_EQ(c2.epochs, 500);
  EXPECT_EQ(c1.minibatch_size(), 64);
  EXPECT_EQ(c2.minibatch_size(), 256);
  RegimeScale exact;
  exact.full_scale = true;
  EXPECT_EQ(regime_train_config(Regime::Config1, exact, 1).minibatch_size(), 256);
  EXPECT_EQ(regime_train_config(Regime::Config2, exact, 1).minibatch_size(), 1024);
}

TEST(TrainingKey, IgnoresScenarioAndOpticalCalibration) {
  ExperimentSpec a;
  a.exp_id = "a";
  a.axis = Axis::O;
  ExperimentSpec b = a;
  b.scenario = Scenario::S2;
  b.calib_training = CalibTraining::All;
  EXPECT_EQ(training_key(a), training_key(b));
  a.axis = b.axis = Axis::V;
  EXPECT_NE(training_key(a), training_key(b));
}

TEST(Report, MeanSdCell) {
  ExperimentResult r{"S1@1", 0.0575, 0.0013, 0.5, 0.01, false, 1.0};
  const std::string md = render_report({r}, ReportFormat::Markdown);
  EXPECT_NE(md.find("5.75 (0.13)"), std::string::npos) << md;
  const std::string csv = render_report({r}, ReportFormat::Csv);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "exp_id,eer_mean_pct,eer_sd_pct,frr_mean_pct,frr_sd_pct,unresolved_far");
}

TEST(Report, RejectsEmptyAndDuplicates) {
  EXPECT_THROW(render_report({}, ReportFormat::Csv), ValidationError);
  ExperimentResult r{"S1@1", 0.1, 0.0, 0.1, 0.0, false, 0.0};
  EXPECT_THROW(render_report({r, r}, ReportFormat::Markdown), ValidationError);
}

TEST(Config, ParsesSectionsAndArrays) {
  const auto cfg = parse_config(R"(
seed = 42
[synth]
n_train_subjects = 12   # comment
task_duration_s = 40.0
[train]
epoch_scale = 0.25
growth = 8
[grid]
scenarios = ["S1", "S2"]
axes = ["O", "B"]
filters = ["On"]
)");
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.harness.synth.n_train_subjects, 12);
  EXPECT_EQ(cfg.harness.synth.task_duration_s, 40.0);
  EXPECT_EQ(cfg.harness.scale.epoch_scale, 0.25);
  EXPECT_EQ(cfg.harness.embedder.growth, 8);
  EXPECT_EQ(cfg.grid.axes, (std::vector<Axis>{Axis::O, Axis::B}));
  EXPECT_EQ(cfg.grid.filters, (std::vector<bool>{true}));
}

TEST(Config, UnknownKeysAndBadValuesAreErrors) {
  EXPECT_THROW(parse_config("[synth]\nbogus = 1\n"), ValidationError);
  EXPECT_THROW(parse_config("[nope]\n"), ValidationError);
  EXPECT_THROW(parse_config("[synth]\nn_train_subjects = \"many\"\n"), ValidationError);
  EXPECT_THROW(parse_config("[grid]\naxes = [\"X\"]\n"), ValidationError);
}

TEST(ResultCsv, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "gazeauth_unit_result.csv";
  std::vector<ExperimentResult> rs{{"S1@1", 0.1, 0.02, 0.3, 0.04, true, 0.0}, {"S2@1", 0.2, 0.0, 1.0, 0.0, false, 0.0}};
  write_result_csv(rs, path);
  const auto back = read_result_csv(path);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].exp_id, "S1@1");
  EXPECT_EQ(back[0].eer_sd, 0.02);
  EXPECT_TRUE(back[0].unresolved_far);
}
