#include "gazeauth/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "gazeauth/error.hpp"

namespace gazeauth {

namespace {

constexpr int kHalf = kSgWindow / 2;

// Weight of sample x_i (offset i in -3..3 from the window centre) in the
// derivative of the least-squares quadratic evaluated at offset `at`. With
// p(x) = a + b x + c x^2 over x = -3..3: b = sum x y / 28 and
// c = sum (x^2 - 4) y / 84.
double sg_weight(int i, int at) {
  return static_cast<double>(i) / 28.0 + 2.0 * at * static_cast<double>(i * i - 4) / 84.0;
}

ChannelMatrix column_map(const ChannelMatrix& in, std::vector<double> (*f)(std::span<const double>)) {
  ChannelMatrix out(in.rows(), in.cols());
  for (Eigen::Index c = 0; c < in.cols(); ++c) {
    const auto col = f(std::span<const double>(in.col(c).data(), static_cast<std::size_t>(in.rows())));
    out.col(c) = Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
  }
  return out;
}

}  // namespace

std::string_view to_string(Axis axis) {
  switch (axis) {
    case Axis::O: return "O";
    case Axis::V: return "V";
    case Axis::B: return "B";
  }
  return "?";
}

Axis parse_axis(std::string_view text) {
  if (text == "O") return Axis::O;
  if (text == "V") return Axis::V;
  if (text == "B") return Axis::B;
  throw ValidationError("unknown axis '" + std::string(text) + "' (expected O, V or B)");
}

int channel_count(Axis axis) { return axis == Axis::B ? 8 : 4; }

ChannelMatrix to_channels(const GazeSeries& gaze) {
  ChannelMatrix m(static_cast<Eigen::Index>(gaze.size()), 4);
  for (std::size_t i = 0; i < gaze.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    m(r, 0) = gaze.left[i].yaw;
    m(r, 1) = gaze.left[i].pitch;
    m(r, 2) = gaze.right[i].yaw;
    m(r, 3) = gaze.right[i].pitch;
  }
  return m;
}

std::vector<double> moving_average3(std::span<const double> x) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == 0) {
      out[i] = x[0];
    } else if (i == 1) {
      out[i] = (x[0] + x[1]) / 2.0;
    } else {
      out[i] = (x[i - 2] + x[i - 1] + x[i]) / 3.0;
    }
  }
  return out;
}

ChannelMatrix moving_average3(const ChannelMatrix& positions) {
  return column_map(positions, [](std::span<const double> x) { return moving_average3(x); });
}

std::vector<double> sg_velocity(std::span<const double> x, double fs) {
  if (x.size() < static_cast<std::size_t>(kSgWindow)) {
    throw ValidationError("Savitzky-Golay differentiation needs at least 7 samples, got " +
                          std::to_string(x.size()));
  }
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  std::vector<double> out(x.size());
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    // Centre of the nearest full window and the offset of k within it.
    const std::ptrdiff_t centre = std::clamp<std::ptrdiff_t>(k, kHalf, n - 1 - kHalf);
    const int at = static_cast<int>(k - centre);
    double acc = 0.0;
    for (int i = -kHalf; i <= kHalf; ++i) acc += sg_weight(i, at) * x[static_cast<std::size_t>(centre + i)];
    out[static_cast<std::size_t>(k)] = acc * fs;
  }
  return out;
}

ChannelMatrix sg_velocity(const ChannelMatrix& positions, double fs) {
  ChannelMatrix out(positions.rows(), positions.cols());
  for (Eigen::Index c = 0; c < positions.cols(); ++c) {
    const auto v = sg_velocity(
        std::span<const double>(positions.col(c).data(), static_cast<std::size_t>(positions.rows())),
        fs);
    out.col(c) = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return out;
}

std::vector<ChannelMatrix> make_windows(const ChannelMatrix& velocities) {
  std::vector<ChannelMatrix> windows;
  const Eigen::Index count = velocities.rows() / kWindowSamples;
  windows.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index w = 0; w < count; ++w) {
    ChannelMatrix seg = velocities.middleRows(w * kWindowSamples, kWindowSamples);
    // NaN passes through: both comparisons are false.
    seg = seg.unaryExpr([](double v) {
      return v < -kVelocityClampDegS ? -kVelocityClampDegS
                                      : (v > kVelocityClampDegS ? kVelocityClampDegS : v);
    });
    windows.push_back(std::move(seg));
  }
  return windows;
}

// Welford accumulation in window order, ignoring NaN.
NormStats fit_norm_stats(std::span<const ChannelMatrix> windows) {
  if (windows.empty()) throw ValidationError("cannot fit normalization stats on zero windows");
  const Eigen::Index channels = windows.front().cols();
  NormStats stats;
  stats.mean.assign(static_cast<std::size_t>(channels), 0.0);
  stats.sd.assign(static_cast<std::size_t>(channels), 1.0);
  for (Eigen::Index c = 0; c < channels; ++c) {
    double mean = 0.0, m2 = 0.0;
    std::size_t n = 0;
    for (const auto& w : windows) {
      if (w.cols() != channels) throw ValidationError("windows disagree on channel count");
      for (Eigen::Index r = 0; r < w.rows(); ++r) {
        const double v = w(r, c);
        if (std::isnan(v)) continue;
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
      }
    }
    const auto k = static_cast<std::size_t>(c);
    stats.mean[k] = n > 0 ? mean : 0.0;
    const double sd = n > 0 ? std::sqrt(m2 / static_cast<double>(n)) : 0.0;
    stats.sd[k] = sd < 1e-12 ? 1.0 : sd;
  }
  return stats;
}

WindowTensor apply_norm(const ChannelMatrix& window, const NormStats& stats) {
  if (static_cast<std::size_t>(window.cols()) != stats.channels()) {
    throw ValidationError("normalization stats have " + std::to_string(stats.channels()) +
                          " channels, window has " + std::to_string(window.cols()));
  }
  WindowTensor out;
  out.values.resize(window.rows(), window.cols());
  for (Eigen::Index c = 0; c < window.cols(); ++c) {
    const auto k = static_cast<std::size_t>(c);
    for (Eigen::Index r = 0; r < window.rows(); ++r) {
      const double z = (window(r, c) - stats.mean[k]) / stats.sd[k];
      out.values(r, c) = std::isnan(z) ? 0.0f : static_cast<float>(z);
    }
  }
  return out;
}

std::vector<RawWindow> raw_windows(const Recording& rec, Axis axis,
                                   std::span<const CalibrationModel> calib_models, bool filter_on) {
  if (axis != Axis::O && calib_models.empty()) {
    throw ValidationError("axis " + std::string(to_string(axis)) +
                          " needs a calibration model for recording '" + rec.recording_id + "'");
  }
  auto velocity_windows = [&](const GazeSeries& gaze) {
    ChannelMatrix pos = to_channels(gaze);
    if (filter_on) pos = moving_average3(pos);
    return make_windows(sg_velocity(pos));
  };

  std::vector<RawWindow> out;
  std::vector<ChannelMatrix> optical;
  if (axis != Axis::V) optical = velocity_windows(optical_series(rec));

  if (axis == Axis::O) {
    for (std::size_t w = 0; w < optical.size(); ++w) {
      out.push_back({std::move(optical[w]), static_cast<int>(w), std::nullopt});
    }
    return out;
  }
  for (const auto& model : calib_models) {
    auto visual = velocity_windows(apply_calibration(model, rec));
    for (std::size_t w = 0; w < visual.size(); ++w) {
      RawWindow rw;
      rw.window_index = static_cast<int>(w);
      rw.calib_variant = model.fitted_depth;
      if (axis == Axis::V) {
        rw.values = std::move(visual[w]);
      } else {
        rw.values.resize(kWindowSamples, 8);
        rw.values.leftCols(4) = optical[w];
        rw.values.rightCols(4) = visual[w];
      }
      out.push_back(std::move(rw));
    }
  }
  return out;
}

std::vector<WindowTensor> assemble_channels(const Recording& rec, Axis axis,
                                            std::span<const CalibrationModel> calib_models,
                                            bool filter_on, const NormStats& stats) {
  std::vector<WindowTensor> out;
  for (auto& raw : raw_windows(rec, axis, calib_models, filter_on)) {
    WindowTensor t = apply_norm(raw.values, stats);
    t.subject_id = rec.subject_id;
    t.recording_id = rec.recording_id;
    t.window_index = raw.window_index;
    t.calib_variant = raw.calib_variant;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace gazeauth
