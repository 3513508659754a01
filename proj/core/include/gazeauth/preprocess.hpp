#pragma once

#include <Eigen/Core>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gazeauth/calibration.hpp"
#include "gazeauth/domain.hpp"

namespace gazeauth {

inline constexpr int kWindowSamples = 360;  // 5 s at 72 Hz
inline constexpr double kVelocityClampDegS = 1000.0;
inline constexpr int kSgWindow = 7;

enum class Axis { O, V, B };

std::string_view to_string(Axis axis);
Axis parse_axis(std::string_view text);
int channel_count(Axis axis);

// Rows are samples, columns are [left-yaw, left-pitch, right-yaw, right-pitch].
using ChannelMatrix = Eigen::MatrixXd;

ChannelMatrix to_channels(const GazeSeries& gaze);

// Causal 3-tap mean; the first two outputs are prefix means.
std::vector<double> moving_average3(std::span<const double> x);
ChannelMatrix moving_average3(const ChannelMatrix& positions);

// First derivative by a 7-point quadratic Savitzky-Golay fit, in units/s.
std::vector<double> sg_velocity(std::span<const double> x, double fs = kSampleRateHz);
ChannelMatrix sg_velocity(const ChannelMatrix& positions, double fs = kSampleRateHz);

// Non-overlapping 360-row segments from row 0, clamped to +/-1000 deg/s.
std::vector<ChannelMatrix> make_windows(const ChannelMatrix& velocities);

struct NormStats {
  std::vector<double> mean;
  std::vector<double> sd;

  std::size_t channels() const { return mean.size(); }
};

NormStats fit_norm_stats(std::span<const ChannelMatrix> windows);

struct WindowTensor {
  Eigen::MatrixXf values;  // 360 x C
  std::string subject_id;
  std::string recording_id;
  int window_index = 0;
  std::optional<Depth> calib_variant;
};

WindowTensor apply_norm(const ChannelMatrix& window, const NormStats& stats);

// One velocity window before standardization, with its provenance.
struct RawWindow {
  ChannelMatrix values;
  int window_index = 0;
  std::optional<Depth> calib_variant;
};

// Optical and/or calibrated velocity windows for one recording. For V and B,
// one variant per calibration model is emitted, grouped by model.
std::vector<RawWindow> raw_windows(const Recording& rec, Axis axis,
                                   std::span<const CalibrationModel> calib_models, bool filter_on);

std::vector<WindowTensor> assemble_channels(const Recording& rec, Axis axis,
                                            std::span<const CalibrationModel> calib_models,
                                            bool filter_on, const NormStats& stats);

}  // namespace gazeauth
