#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "gazeauth/domain.hpp"
#include "gazeauth/error.hpp"
#include "gazeauth/synth.hpp"

using namespace gazeauth;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("gazeauth_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.n_train_subjects = 3;
  cfg.n_test_subjects = 4;
  cfg.task_duration_s = 25.0;
  cfg.folds = 2;
  cfg.seed = 11;
  return cfg;
}

}  // namespace

TEST(Gaze, AngularDistanceAlongEquatorEqualsYawDifference) {
  EXPECT_NEAR(angular_distance_deg({0.0, 0.0}, {3.0, 0.0}), 3.0, 1e-12);
  EXPECT_NEAR(angular_distance_deg({-2.0, 0.0}, {0.0, 0.0}), 2.0, 1e-12);
}

TEST(Gaze, AngularDistanceIsSymmetricAndZeroOnSelf) {
  const Gaze a{5.0, -3.0}, b{-1.0, 7.5};
  EXPECT_NEAR(angular_distance_deg(a, b), angular_distance_deg(b, a), 1e-12);
  EXPECT_EQ(angular_distance_deg(a, a), 0.0);
}

TEST(Gaze, VerticalDistanceEqualsPitchDifference) {
  EXPECT_NEAR(angular_distance_deg({10.0, 1.0}, {10.0, 4.0}), 3.0, 1e-12);
}

TEST(Domain, ParsersRejectUnknownText) {
  EXPECT_EQ(parse_task("Calibration"), Task::Calibration);
  EXPECT_EQ(parse_split("Test"), Split::Test);
  EXPECT_THROW(parse_task("reading"), ValidationError);
  EXPECT_THROW(parse_split("dev"), ValidationError);
  EXPECT_THROW(depth_from_cm(100), ValidationError);
  EXPECT_EQ(depth_from_cm(75), Depth::Near75);
}

TEST(Domain, FormatRealRoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-7, 123456.789, 1e300, 0.0, -0.0}) {
    const double back = parse_real(format_real(v));
    EXPECT_EQ(std::memcmp(&v, &back, sizeof v), 0) << format_real(v);
  }
  EXPECT_EQ(format_real(0.5), "0.5");
  EXPECT_TRUE(std::isnan(parse_real(format_real(std::nan("")))));
  EXPECT_THROW(parse_real("1.0x"), ValidationError);
}

TEST(Domain, ValidateRecordingRejectsBadTimestamps) {
  Recording rec;
  rec.subject_id = "s";
  rec.recording_id = "r";
  rec.samples.resize(3);
  for (std::size_t i = 0; i < 3; ++i) rec.samples[i].t = static_cast<double>(i) / kSampleRateHz;
  EXPECT_NO_THROW(validate_recording(rec));
  rec.samples[2].t += 1e-6;
  EXPECT_THROW(validate_recording(rec), ValidationError);
}

TEST(Domain, CalibrationRecordingNeedsNineTargets) {
  Recording rec;
  rec.subject_id = "s";
  rec.recording_id = "r";
  rec.task = Task::Calibration;
  rec.samples.resize(8);
  for (std::size_t i = 0; i < 8; ++i) {
    rec.samples[i].t = static_cast<double>(i) / kSampleRateHz;
    rec.samples[i].target = {static_cast<double>(i), 0.0};
  }
  EXPECT_THROW(validate_recording(rec), ValidationError);
}

TEST(Folds, TwentySubjectsIntoTenFoldsOfTwo) {
  Dataset ds;
  for (int i = 0; i < 20; ++i) {
    SubjectRecord s;
    s.subject_id = subject_id_for(i);
    ds.split[s.subject_id] = Split::Test;
    ds.subjects.push_back(s);
  }
  const Dataset a = assign_folds(ds, 10, 5);
  const Dataset b = assign_folds(ds, 10, 5);
  EXPECT_EQ(a.folds, b.folds);
  std::map<int, int> sizes;
  for (const auto& [id, f] : a.folds) ++sizes[f];
  ASSERT_EQ(sizes.size(), 10u);
  for (const auto& [f, n] : sizes) EXPECT_EQ(n, 2);
}

TEST(Folds, RejectsFewerThanTwoFolds) {
  Dataset ds;
  SubjectRecord s;
  s.subject_id = "x";
  ds.split["x"] = Split::Test;
  ds.subjects.push_back(s);
  EXPECT_THROW(assign_folds(ds, 1, 0), ValidationError);
}

TEST(DatasetIo, SaveLoadIsBitIdentical) {
  const Dataset ds = generate_dataset(small_config(), PipelineNoise::new_pipeline());
  const fs::path dir = temp_dir("roundtrip");
  save_dataset(ds, dir);
  const Dataset back = load_dataset(dir);
  EXPECT_TRUE(bitwise_equal(ds, back));
  EXPECT_EQ(ds.recording_count(), 7u * 4u);
}

TEST(DatasetIo, MissingSamplesFileNamesTheRecording) {
  const Dataset ds = generate_dataset(small_config(), PipelineNoise::new_pipeline());
  const fs::path dir = temp_dir("missing");
  save_dataset(ds, dir);
  const std::string rid = ds.subjects.front().task_recordings.front().recording_id;
  fs::remove(dir / "samples" / (rid + ".csv"));
  try {
    load_dataset(dir);
    FAIL() << "expected a validation error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(rid), std::string::npos) << e.what();
  }
}

TEST(DatasetIo, RejectsUnknownTaskInManifest) {
  const Dataset ds = generate_dataset(small_config(), PipelineNoise::new_pipeline());
  const fs::path dir = temp_dir("badtask");
  save_dataset(ds, dir);
  std::ifstream in(dir / "manifest.csv");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();
  const auto pos = text.find("RandomSaccade");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 13, "Reading");
  std::ofstream(dir / "manifest.csv", std::ios::binary) << text;
  EXPECT_THROW(load_dataset(dir), ValidationError);
}

TEST(DatasetIo, ValidateDatasetRejectsUnbalancedFolds) {
  Dataset ds = generate_dataset(small_config(), PipelineNoise::new_pipeline());
  for (auto& [id, f] : ds.folds) f = 0;
  ds.folds.begin()->second = 1;
  EXPECT_THROW(validate_dataset(ds), ValidationError);
}
