#pragma once

#include <cmath>
#include <string>

#include "gazeauth/calibration.hpp"
#include "gazeauth/domain.hpp"
#include "gazeauth/synth.hpp"

namespace fixture {

// A recording of the jumping-dot calibration task without noise, drift,
// bias field or blinks, so the emitted optical signal is an exact affine
// image of the target trace during fixations.
inline gazeauth::Recording noiseless_calibration(gazeauth::SubjectSignature sig, gazeauth::Depth depth,
                                                 std::uint64_t seed) {
  gazeauth::SynthConfig cfg;
  cfg.blink_fraction = 0.0;
  sig.drift_amplitude_deg = 0.0;
  auto rec = gazeauth::generate_recording(sig, gazeauth::Task::Calibration, depth,
                                          gazeauth::PipelineNoise::noiseless(), cfg, seed);
  rec.subject_id = "sub";
  rec.recording_id = "cal";
  return rec;
}

// Ground-truth optical-to-visual map of one eye at a given depth.
inline gazeauth::EyeCalibration true_eye_map(const gazeauth::EyeSignature& eye, gazeauth::Depth depth,
                                             double ipd_mm, bool left) {
  const double v = gazeauth::vergence_offset_deg(depth, ipd_mm) * (left ? 1.0 : -1.0);
  gazeauth::EyeCalibration cal;
  cal.gain = eye.gain;
  cal.offset = eye.offset + eye.kappa + gazeauth::Gaze{v, 0.0};
  return cal;
}

inline double max_affine_difference(const gazeauth::EyeCalibration& a, const gazeauth::EyeCalibration& b) {
  double worst = (a.gain - b.gain).cwiseAbs().maxCoeff();
  worst = std::max(worst, std::abs(a.offset.yaw - b.offset.yaw));
  worst = std::max(worst, std::abs(a.offset.pitch - b.offset.pitch));
  return worst;
}

// Hand-built recording: `runs` constant-target segments of `run_len` samples.
inline gazeauth::Recording hold_targets(const std::vector<gazeauth::Gaze>& targets, std::size_t run_len,
                                        gazeauth::Task task = gazeauth::Task::Calibration) {
  gazeauth::Recording rec;
  rec.subject_id = "hand";
  rec.recording_id = "hand";
  rec.task = task;
  std::size_t i = 0;
  for (const auto& t : targets) {
    for (std::size_t k = 0; k < run_len; ++k, ++i) {
      gazeauth::GazeSample s;
      s.t = static_cast<double>(i) / gazeauth::kSampleRateHz;
      s.target = t;
      s.left_optical = t;
      s.right_optical = t;
      rec.samples.push_back(s);
    }
  }
  return rec;
}

}  // namespace fixture
