#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../common/fixtures.hpp"
#include "../common/oracles.hpp"
#include "gazeauth/error.hpp"
#include "gazeauth/preprocess.hpp"
#include "gazeauth/synth.hpp"

using namespace gazeauth;

TEST(SavitzkyGolay, MatchesLeastSquaresOracleOnRandomSeries) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(7 + static_cast<std::size_t>(trial) * 13);
    for (auto& v : x) v = normal(rng);
    const auto got = sg_velocity(x);
    const auto want = oracle::sg_derivative(x, kSampleRateHz);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-9) << "i=" << i;
  }
}

TEST(SavitzkyGolay, ExactOnQuadraticIncludingEdges) {
  std::vector<double> x(40);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    x[i] = 3.0 - 2.0 * t + 7.5 * t * t;
  }
  const auto v = sg_velocity(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / kSampleRateHz;
    EXPECT_NEAR(v[i], -2.0 + 15.0 * t, 1e-9);
  }
}

TEST(SavitzkyGolay, RejectsShortInput) {
  const std::vector<double> x(6, 1.0);
  EXPECT_THROW(sg_velocity(x), ValidationError);
}

TEST(MovingAverage, CausalWithPrefixMeans) {
  const std::vector<double> x{3, 6, 9, 0};
  const auto y = moving_average3(x);
  EXPECT_DOUBLE_EQ(y[0], 3);
  EXPECT_DOUBLE_EQ(y[1], 4.5);
  EXPECT_DOUBLE_EQ(y[2], 6);
  EXPECT_DOUBLE_EQ(y[3], 5);
}

TEST(Windows, CountClampAndDropTail) {
  ChannelMatrix v = ChannelMatrix::Constant(360 * 2 + 100, 4, 10.0);
  v(5, 1) = 5000.0;
  v(6, 2) = -3000.0;
  const auto w = make_windows(v);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0](5, 1), 1000.0);
  EXPECT_EQ(w[0](6, 2), -1000.0);
  EXPECT_EQ(w[1].rows(), 360);
}

TEST(Windows, ThirtySecondsGiveSixWindows) {
  const SubjectSignature sig = generate_subject_signature(2, 0);
  SynthConfig cfg;
  auto rec = generate_recording(sig, Task::RandomSaccade, Depth::Far200, PipelineNoise::new_pipeline(), cfg, 3);
  rec.subject_id = "s";
  rec.recording_id = "r";
  EXPECT_EQ(raw_windows(rec, Axis::O, {}, false).size(), 6u);
}

TEST(NormStats, MatchTwoPassOracleAndIgnoreNan) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal(3.0, 2.0);
  std::vector<ChannelMatrix> windows;
  std::vector<std::vector<double>> per_channel(4);
  for (int w = 0; w < 5; ++w) {
    ChannelMatrix m(360, 4);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < 4; ++c) {
        m(r, c) = normal(rng) * static_cast<double>(c + 1);
        if ((r + c) % 97 == 0) m(r, c) = std::nan("");
        if (!std::isnan(m(r, c))) per_channel[static_cast<std::size_t>(c)].push_back(m(r, c));
      }
    }
    windows.push_back(m);
  }
  const NormStats s = fit_norm_stats(windows);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto ref = oracle::two_pass(per_channel[c], false);
    EXPECT_NEAR(s.mean[c], ref.mean, 1e-12);
    EXPECT_NEAR(s.sd[c], ref.sd, 1e-12);
  }
}

TEST(NormStats, ConstantChannelGetsUnitSd) {
  std::vector<ChannelMatrix> windows{ChannelMatrix::Constant(360, 4, 2.0)};
  const NormStats s = fit_norm_stats(windows);
  EXPECT_EQ(s.sd[0], 1.0);
  const WindowTensor t = apply_norm(windows[0], s);
  EXPECT_EQ(t.values(0, 0), 0.0f);
}

TEST(NormStats, NanBecomesZeroAfterStandardizing) {
  ChannelMatrix m = ChannelMatrix::Constant(360, 4, 1.0);
  m(3, 2) = std::nan("");
  NormStats s{{0, 0, 0, 0}, {2, 2, 2, 2}};
  const WindowTensor t = apply_norm(m, s);
  EXPECT_EQ(t.values(3, 2), 0.0f);
  EXPECT_EQ(t.values(4, 2), 0.5f);
}

TEST(NormStats, ChannelCountMismatchIsRejected) {
  NormStats s{{0, 0, 0, 0}, {1, 1, 1, 1}};
  EXPECT_THROW(apply_norm(ChannelMatrix::Zero(360, 8), s), ValidationError);
}

TEST(Channels, BinocularPutsOpticalBeforeVisual) {
  const SubjectSignature sig = generate_subject_signature(2, 1);
  SynthConfig cfg;
  auto rec = generate_recording(sig, Task::RandomSaccade, Depth::Far200, PipelineNoise::new_pipeline(), cfg, 3);
  rec.subject_id = "s";
  rec.recording_id = "r";
  auto cal = fixture::noiseless_calibration(sig, Depth::Far200, 4);
  const std::vector<CalibrationModel> models{fit_calibration(cal)};
  const auto o = raw_windows(rec, Axis::O, {}, false);
  const auto v = raw_windows(rec, Axis::V, models, false);
  const auto b = raw_windows(rec, Axis::B, models, false);
  ASSERT_EQ(b.size(), o.size());
  EXPECT_EQ(b[0].values.cols(), 8);
  EXPECT_TRUE(b[2].values.leftCols(4) == o[2].values);
  EXPECT_TRUE(b[2].values.rightCols(4) == v[2].values);
  EXPECT_FALSE(o[0].calib_variant.has_value());
  EXPECT_EQ(b[0].calib_variant, Depth::Far200);
}

TEST(Channels, VisualAxisNeedsACalibrationModel) {
  const SubjectSignature sig = generate_subject_signature(2, 1);
  SynthConfig cfg;
  auto rec = generate_recording(sig, Task::RandomSaccade, Depth::Far200, PipelineNoise::new_pipeline(), cfg, 3);
  EXPECT_THROW(raw_windows(rec, Axis::V, {}, false), ValidationError);
}

TEST(Channels, FilterChangesTheSignal) {
  const SubjectSignature sig = generate_subject_signature(2, 1);
  SynthConfig cfg;
  auto rec = generate_recording(sig, Task::RandomSaccade, Depth::Far200, PipelineNoise::new_pipeline(), cfg, 3);
  const auto off = raw_windows(rec, Axis::O, {}, false);
  const auto on = raw_windows(rec, Axis::O, {}, true);
  EXPECT_FALSE(off[1].values == on[1].values);
}
