#include <gtest/gtest.h>

#include <cmath>

#include "../common/fixtures.hpp"
#include "gazeauth/calibration.hpp"
#include "gazeauth/error.hpp"
#include "gazeauth/synth.hpp"

using namespace gazeauth;

TEST(Calibration, NoiselessFitRecoversTrueAffine) {
  for (int subject = 0; subject < 3; ++subject) {
    const SubjectSignature sig = generate_subject_signature(21, subject);
    const auto rec = fixture::noiseless_calibration(sig, Depth::Far200, 100 + subject);
    const CalibrationModel m = fit_calibration(rec);
    EXPECT_LT(fixture::max_affine_difference(m.left, fixture::true_eye_map(sig.left, Depth::Far200, 63.0, true)), 1e-6);
    EXPECT_LT(fixture::max_affine_difference(m.right, fixture::true_eye_map(sig.right, Depth::Far200, 63.0, false)),
              1e-6);
    EXPECT_LT(m.fit_rmse_deg, 1e-6);
  }
}

TEST(Calibration, DwellWindowsSkipTransitions) {
  const auto rec = fixture::hold_targets({{0, 0}, {5, 0}, {0, 5}}, 90);
  const auto windows = dwell_windows(rec);
  ASSERT_EQ(windows.size(), 3u);
  EXPECT_EQ(windows[1].begin, 90u + 18u);
  EXPECT_EQ(windows[1].end, 180u - 18u);
  // Short runs still skip the first 100 ms (8 samples at 72 Hz).
  const auto short_rec = fixture::hold_targets({{0, 0}, {5, 0}}, 20);
  EXPECT_EQ(dwell_windows(short_rec)[1].begin, 20u + 8u);
}

TEST(Calibration, IdentityDataGivesIdentityModel) {
  const auto rec = fixture::hold_targets({{-5, -5}, {0, -5}, {5, -5}, {-5, 0}, {0, 0}, {5, 0}, {-5, 5}, {0, 5}, {5, 5}}, 60);
  const CalibrationModel m = fit_calibration(rec);
  EXPECT_LT((m.left.gain - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(m.left.offset.yaw, 0.0, 1e-12);
}

TEST(Calibration, TwoTargetsAreUnderdetermined) {
  const auto rec = fixture::hold_targets({{0, 0}, {5, 5}, {0, 0}, {5, 5}}, 60);
  try {
    fit_calibration(rec);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("underdetermined"), std::string::npos);
  }
}

TEST(Calibration, CollinearTargetsAreUnderdetermined) {
  const auto rec = fixture::hold_targets({{-5, 0}, {0, 0}, {5, 0}, {10, 0}}, 60);
  EXPECT_THROW(fit_calibration(rec), ValidationError);
}

TEST(Calibration, AccuracyOfConstantOffsetIsThatOffset) {
  auto rec = fixture::hold_targets({{0, 0}, {5, 0}, {0, 5}}, 90);
  for (auto& s : rec.samples) s.left_optical = s.right_optical = s.target + Gaze{0.0, 0.5};
  const GazeSeries g = optical_series(rec);
  EXPECT_NEAR(spatial_accuracy(rec, g), 0.5, 1e-9);
  EXPECT_NEAR(s2s_precision(rec, g), 0.0, 1e-12);
}

TEST(Calibration, PrecisionOfAlternatingJitter) {
  auto rec = fixture::hold_targets({{0, 0}, {5, 0}, {0, 5}}, 90);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    auto& s = rec.samples[i];
    const double d = (i % 2 == 0) ? 0.05 : -0.05;
    s.left_optical = s.right_optical = s.target + Gaze{0.0, d};
  }
  const GazeSeries g = optical_series(rec);
  EXPECT_NEAR(s2s_precision(rec, g), 0.1, 1e-9);
}

TEST(Calibration, CyclopeanAveragesTheEyes) {
  auto rec = fixture::hold_targets({{0, 0}, {5, 0}, {0, 5}}, 90);
  for (auto& s : rec.samples) {
    s.left_optical = s.target + Gaze{0.0, 1.0};
    s.right_optical = s.target + Gaze{0.0, -1.0};
  }
  const GazeSeries g = optical_series(rec);
  EXPECT_NEAR(spatial_accuracy(rec, g, EyeSelection::Cyclopean), 0.0, 1e-9);
  EXPECT_NEAR(spatial_accuracy(rec, g, EyeSelection::Left), 1.0, 1e-9);
}

TEST(Calibration, HighDispersionFixationsAreExcluded) {
  auto rec = fixture::hold_targets({{0, 0}, {5, 0}, {0, 5}}, 90);
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    auto& s = rec.samples[i];
    // The middle dwell wanders over 20 degrees; the others sit 0.3 off.
    const double off = (i >= 90 && i < 180) ? static_cast<double>(i - 90) * 0.25 : 0.3;
    s.left_optical = s.right_optical = s.target + Gaze{0.0, off};
  }
  const GazeSeries g = optical_series(rec);
  EXPECT_NEAR(spatial_accuracy(rec, g), 0.3, 1e-9);
}

TEST(Calibration, ApplyLeavesInvalidSamplesNan) {
  auto rec = fixture::hold_targets({{0, 0}, {5, 0}, {0, 5}}, 30);
  rec.samples[10].valid = false;
  rec.samples[10].left_optical = rec.samples[10].right_optical = nan_gaze();
  CalibrationModel m;
  const GazeSeries g = apply_calibration(m, rec);
  EXPECT_FALSE(is_finite(g.left[10]));
  EXPECT_TRUE(is_finite(g.left[11]));
}

TEST(Calibration, MedianOfEvenCountAveragesMiddle) {
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 3.0, 2.0}), 2.5);
  EXPECT_DOUBLE_EQ(median({5.0, 1.0, 3.0}), 3.0);
}
