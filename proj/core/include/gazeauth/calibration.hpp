#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "gazeauth/domain.hpp"

namespace gazeauth {

// visual = gain * optical + offset, per eye.
struct EyeCalibration {
  Eigen::Matrix2d gain = Eigen::Matrix2d::Identity();
  Gaze offset;

  Gaze apply(Gaze optical) const;
};

struct CalibrationModel {
  std::string subject_id;
  Depth fitted_depth = Depth::Far200;
  EyeCalibration left;
  EyeCalibration right;
  double fit_rmse_deg = 0.0;
};

// Per-eye gaze directions, one entry per recording sample. Invalid samples
// hold NaN.
struct GazeSeries {
  std::vector<Gaze> left;
  std::vector<Gaze> right;

  std::size_t size() const { return left.size(); }
};

GazeSeries optical_series(const Recording& rec);

// Stable part of one stimulus dwell: samples [begin, end) all show `target`.
struct DwellWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
  Gaze target;
};

// Central 60 % of every constant-target run (and never the first 100 ms
// after a jump). Leading and trailing invalid samples are not part of any
// run.
std::vector<DwellWindow> dwell_windows(const Recording& rec);

CalibrationModel fit_calibration(const Recording& rec);
GazeSeries apply_calibration(const CalibrationModel& model, const Recording& rec);

enum class EyeSelection {
  Cyclopean,  // per-sample average of both eyes ("binocular")
  Left,
  Right,
  PerEye,  // both eyes, pooled as separate (window, eye) medians
};

inline constexpr double kMaxFixationDispersionDeg = 10.0;

double spatial_accuracy(const Recording& rec, const GazeSeries& gaze,
                        EyeSelection eyes = EyeSelection::Cyclopean);
double s2s_precision(const Recording& rec, const GazeSeries& gaze,
                     EyeSelection eyes = EyeSelection::Cyclopean);

struct QualityRow {
  std::string recording_id;
  std::string axis;  // "O" or "V"
  double accuracy_deg = 0.0;
  double precision_deg = 0.0;
};

void write_quality_csv(const std::vector<QualityRow>& rows, const std::filesystem::path& path);

double median(std::vector<double> values);

}  // namespace gazeauth
