#include "gazeauth/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <set>

#include "csv.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

namespace {

struct EyeFit {
  EyeCalibration calibration;
  double squared_error = 0.0;
  std::size_t count = 0;
};

EyeFit fit_eye(const std::vector<Gaze>& optical, const std::vector<Gaze>& targets) {
  const auto n = static_cast<Eigen::Index>(optical.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::MatrixXd values(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    design.row(i) << optical[k].yaw, optical[k].pitch, 1.0;
    values.row(i) << targets[k].yaw, targets[k].pitch;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < 3) throw NumericError("singular normal equations in calibration fit");
  const Eigen::MatrixXd coef = qr.solve(values);  // 3 x 2

  EyeFit fit;
  fit.calibration.gain << coef(0, 0), coef(1, 0), coef(0, 1), coef(1, 1);
  fit.calibration.offset = {coef(2, 0), coef(2, 1)};
  if (!fit.calibration.gain.allFinite() || std::abs(fit.calibration.gain.determinant()) <= 1e-6) {
    throw NumericError("calibration gain is singular");
  }
  const Eigen::MatrixXd resid = values - design * coef;
  fit.squared_error = resid.squaredNorm();
  fit.count = static_cast<std::size_t>(n);
  return fit;
}

Gaze cyclopean(Gaze l, Gaze r) { return {0.5 * (l.yaw + r.yaw), 0.5 * (l.pitch + r.pitch)}; }

// The gaze tracks considered by a quality metric: one for cyclopean or a
// single eye, two for PerEye.
std::vector<std::vector<Gaze>> tracks_for(const GazeSeries& gaze, EyeSelection eyes) {
  switch (eyes) {
    case EyeSelection::Left: return {gaze.left};
    case EyeSelection::Right: return {gaze.right};
    case EyeSelection::PerEye: return {gaze.left, gaze.right};
    case EyeSelection::Cyclopean: {
      std::vector<Gaze> c(gaze.size());
      for (std::size_t i = 0; i < c.size(); ++i) c[i] = cyclopean(gaze.left[i], gaze.right[i]);
      return {c};
    }
  }
  return {};
}

bool usable(const Recording& rec, const Gaze& g, std::size_t i) {
  return rec.samples[i].valid && is_finite(g);
}

double dispersion(const Recording& rec, const std::vector<Gaze>& track, const DwellWindow& w) {
  double widest = 0.0;
  for (std::size_t i = w.begin; i < w.end; ++i) {
    if (!usable(rec, track[i], i)) continue;
    for (std::size_t j = i + 1; j < w.end; ++j) {
      if (!usable(rec, track[j], j)) continue;
      widest = std::max(widest, angular_distance_deg(track[i], track[j]));
    }
  }
  return widest;
}

void check_series(const Recording& rec, const GazeSeries& gaze) {
  if (gaze.left.size() != rec.samples.size() || gaze.right.size() != rec.samples.size()) {
    throw ValidationError("gaze series length does not match recording '" + rec.recording_id + "'");
  }
}

}  // namespace

Gaze EyeCalibration::apply(Gaze optical) const {
  return {gain(0, 0) * optical.yaw + gain(0, 1) * optical.pitch + offset.yaw,
          gain(1, 0) * optical.yaw + gain(1, 1) * optical.pitch + offset.pitch};
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

GazeSeries optical_series(const Recording& rec) {
  GazeSeries out;
  out.left.reserve(rec.samples.size());
  out.right.reserve(rec.samples.size());
  for (const auto& s : rec.samples) {
    out.left.push_back(s.valid ? s.left_optical : nan_gaze());
    out.right.push_back(s.valid ? s.right_optical : nan_gaze());
  }
  return out;
}

std::vector<DwellWindow> dwell_windows(const Recording& rec) {
  std::size_t first = 0;
  std::size_t last = rec.samples.size();
  while (first < last && !rec.samples[first].valid) ++first;
  while (last > first && !rec.samples[last - 1].valid) --last;

  const auto min_skip = static_cast<std::size_t>(std::ceil(0.1 * rec.sample_rate_hz - 1e-9));
  std::vector<DwellWindow> windows;
  std::size_t run_start = first;
  for (std::size_t i = first; i <= last; ++i) {
    const bool boundary = i == last || !(rec.samples[i].target == rec.samples[run_start].target);
    if (!boundary) continue;
    const std::size_t len = i - run_start;
    const auto margin = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(len)));
    const std::size_t begin = run_start + std::max(margin, min_skip);
    const std::size_t end = i - std::min(margin, len);
    if (begin < end) windows.push_back({begin, end, rec.samples[run_start].target});
    run_start = i;
  }
  return windows;
}

CalibrationModel fit_calibration(const Recording& rec) {
  const auto windows = dwell_windows(rec);
  std::set<std::pair<double, double>> distinct;
  for (const auto& w : windows) distinct.emplace(w.target.yaw, w.target.pitch);
  if (distinct.size() < 3) throw ValidationError("underdetermined calibration: fewer than 3 targets");

  // Collinearity: the target scatter must span two dimensions.
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (const auto& [y, p] : distinct) mean += Eigen::Vector2d(y, p);
  mean /= static_cast<double>(distinct.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& [y, p] : distinct) {
    const Eigen::Vector2d d = Eigen::Vector2d(y, p) - mean;
    scatter += d * d.transpose();
  }
  const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(scatter).eigenvalues();
  if (!(ev(0) > 1e-10 * std::max(ev(1), 1e-300))) {
    throw ValidationError("underdetermined calibration: targets are collinear");
  }

  std::vector<Gaze> left, right, left_targets, right_targets;
  for (const auto& w : windows) {
    for (std::size_t i = w.begin; i < w.end; ++i) {
      const GazeSample& s = rec.samples[i];
      if (!s.valid) continue;
      if (is_finite(s.left_optical)) {
        left.push_back(s.left_optical);
        left_targets.push_back(w.target);
      }
      if (is_finite(s.right_optical)) {
        right.push_back(s.right_optical);
        right_targets.push_back(w.target);
      }
    }
  }
  if (left.size() < 3 || right.size() < 3) {
    throw ValidationError("underdetermined calibration: too few valid dwell samples");
  }

  const EyeFit l = fit_eye(left, left_targets);
  const EyeFit r = fit_eye(right, right_targets);
  CalibrationModel model;
  model.subject_id = rec.subject_id;
  model.fitted_depth = rec.target_depth;
  model.left = l.calibration;
  model.right = r.calibration;
  model.fit_rmse_deg =
      std::sqrt((l.squared_error + r.squared_error) / static_cast<double>(l.count + r.count));
  return model;
}

GazeSeries apply_calibration(const CalibrationModel& model, const Recording& rec) {
  GazeSeries out;
  out.left.reserve(rec.samples.size());
  out.right.reserve(rec.samples.size());
  for (const auto& s : rec.samples) {
    if (s.valid) {
      out.left.push_back(model.left.apply(s.left_optical));
      out.right.push_back(model.right.apply(s.right_optical));
    } else {
      out.left.push_back(nan_gaze());
      out.right.push_back(nan_gaze());
    }
  }
  return out;
}

double spatial_accuracy(const Recording& rec, const GazeSeries& gaze, EyeSelection eyes) {
  check_series(rec, gaze);
  const auto windows = dwell_windows(rec);
  std::vector<double> medians;
  for (const auto& track : tracks_for(gaze, eyes)) {
    for (const auto& w : windows) {
      std::vector<double> offsets;
      for (std::size_t i = w.begin; i < w.end; ++i) {
        if (usable(rec, track[i], i)) offsets.push_back(angular_distance_deg(track[i], w.target));
      }
      if (offsets.empty()) continue;
      if (dispersion(rec, track, w) >= kMaxFixationDispersionDeg) continue;
      medians.push_back(median(std::move(offsets)));
    }
  }
  if (medians.empty()) throw ValidationError("no valid fixations in '" + rec.recording_id + "'");
  return median(std::move(medians));
}

double s2s_precision(const Recording& rec, const GazeSeries& gaze, EyeSelection eyes) {
  check_series(rec, gaze);
  const auto windows = dwell_windows(rec);
  std::vector<double> rms_values;
  for (const auto& track : tracks_for(gaze, eyes)) {
    for (const auto& w : windows) {
      double sum_sq = 0.0;
      std::size_t pairs = 0;
      for (std::size_t i = w.begin; i + 1 < w.end; ++i) {
        if (!usable(rec, track[i], i) || !usable(rec, track[i + 1], i + 1)) continue;
        const double d = angular_distance_deg(track[i], track[i + 1]);
        sum_sq += d * d;
        ++pairs;
      }
      if (pairs == 0) continue;
      if (dispersion(rec, track, w) >= kMaxFixationDispersionDeg) continue;
      rms_values.push_back(std::sqrt(sum_sq / static_cast<double>(pairs)));
    }
  }
  if (rms_values.empty()) {
    throw ValidationError("no eligible sample pairs for precision in '" + rec.recording_id + "'");
  }
  return median(std::move(rms_values));
}

void write_quality_csv(const std::vector<QualityRow>& rows, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "recording_id,axis,accuracy_deg,precision_deg\n";
  for (const auto& r : rows) {
    out << r.recording_id << ',' << r.axis << ',' << format_real(r.accuracy_deg) << ','
        << format_real(r.precision_deg) << '\n';
  }
  detail::check_stream(out, path);
}

}  // namespace gazeauth
