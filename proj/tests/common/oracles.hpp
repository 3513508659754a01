#pragma once

// Reference implementations used only by tests. Each one is written from the
// definition rather than from the production code path.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "gazeauth/biometrics.hpp"
#include "gazeauth/embedder.hpp"

namespace oracle {

struct SweepPoint {
  double far;
  double frr;
};

// Every distinct score plus +inf as threshold; counts by binary search on
// the sorted class lists, accepting score >= threshold.
inline std::vector<SweepPoint> threshold_sweep(const gazeauth::ScoreSet& set) {
  std::vector<double> gen, imp, all;
  for (const auto& s : set.scores) {
    (s.genuine ? gen : imp).push_back(s.similarity);
    all.push_back(s.similarity);
  }
  std::sort(gen.begin(), gen.end());
  std::sort(imp.begin(), imp.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  all.push_back(std::numeric_limits<double>::infinity());
  std::vector<SweepPoint> pts;
  for (double tau : all) {
    const auto rejected_gen = std::lower_bound(gen.begin(), gen.end(), tau) - gen.begin();
    const auto accepted_imp = imp.end() - std::lower_bound(imp.begin(), imp.end(), tau);
    pts.push_back({imp.empty() ? 0.0 : static_cast<double>(accepted_imp) / static_cast<double>(imp.size()),
                   gen.empty() ? 0.0 : static_cast<double>(rejected_gen) / static_cast<double>(gen.size())});
  }
  return pts;
}

// Crossing of FRR - FAR from negative to non-negative, interpolated on FAR.
inline double eer(const gazeauth::ScoreSet& set) {
  const auto pts = threshold_sweep(set);
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double a = pts[i - 1].frr - pts[i - 1].far;
    const double b = pts[i].frr - pts[i].far;
    if (a < 0.0 && b >= 0.0) {
      if (b == 0.0) return pts[i].far;
      const double t = -a / (b - a);
      return pts[i - 1].far + t * (pts[i].far - pts[i - 1].far);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// FRR at the first threshold reaching FAR <= target, interpolated from the
// previous point; when only FAR = 0 reaches the target the value is taken
// there without interpolation and flagged.
inline gazeauth::FrrAtFar frr_at_far(const gazeauth::ScoreSet& set, double target) {
  const auto pts = threshold_sweep(set);
  double min_positive = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    if (p.far > 0.0) min_positive = std::min(min_positive, p.far);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].far > target) continue;
    if (pts[i].far == target || i == 0) return {pts[i].frr, false};
    if (min_positive > target) return {pts[i].frr, true};
    const double t = (pts[i - 1].far - target) / (pts[i - 1].far - pts[i].far);
    return {pts[i - 1].frr + t * (pts[i].frr - pts[i - 1].frr), false};
  }
  return {std::numeric_limits<double>::quiet_NaN(), false};
}

inline gazeauth::ScoreSet random_scores(std::mt19937_64& rng, std::size_t n, double separation, bool ties) {
  gazeauth::ScoreSet set;
  std::bernoulli_distribution genuine(0.2);
  std::normal_distribution<double> noise(0.0, 0.25);
  for (std::size_t i = 0; i < n; ++i) {
    gazeauth::Score s;
    s.genuine = i == 0 || (i != 1 && genuine(rng));
    double v = std::clamp((s.genuine ? separation : 0.0) + noise(rng), -1.0, 1.0);
    if (ties) v = std::round(v * 50.0) / 50.0;
    s.similarity = v;
    s.verify_subject = s.genuine ? "a" : "b";
    s.enroll_subject = "a";
    set.scores.push_back(std::move(s));
  }
  return set;
}

// Derivative at every sample of a least-squares quadratic through the 7
// nearest samples (the window slides inward at the edges), in units/s.
inline std::vector<double> sg_derivative(const std::vector<double>& x, double fs) {
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size());
  for (int i = 0; i < n; ++i) {
    const int start = std::clamp(i - 3, 0, n - 7);
    Eigen::Matrix<double, 7, 3> a;
    Eigen::Matrix<double, 7, 1> b;
    for (int j = 0; j < 7; ++j) {
      const double u = static_cast<double>(start + j - i);
      a(j, 0) = 1.0;
      a(j, 1) = u;
      a(j, 2) = u * u;
      b(j) = x[static_cast<std::size_t>(start + j)];
    }
    const Eigen::Vector3d coef = a.colPivHouseholderQr().solve(b);
    out[static_cast<std::size_t>(i)] = coef(1) * fs;
  }
  return out;
}

struct MeanSd {
  double mean;
  double sd;
};

inline MeanSd two_pass(const std::vector<double>& v, bool sample) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double denom = static_cast<double>(v.size()) - (sample ? 1.0 : 0.0);
  return {m, std::sqrt(ss / denom)};
}

// max over entries of |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline double max_relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric,
                                 double floor) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
  }
  return worst;
}

// Central differences of f at x in every coordinate.
inline std::vector<double> central_differences(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                               double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

struct EmbedderGradCheck {
  double worst_relative_error = 0.0;
  std::size_t parameters = 0;
};

// Compares backward() with central differences of sum(upstream .* forward())
// over every parameter of a double-precision embedder.
inline EmbedderGradCheck check_embedder_gradients(const gazeauth::EmbedderConfig& cfg, int length, int batch,
                                                  std::uint64_t seed) {
  using gazeauth::Matrix;
  auto params = gazeauth::init_params<double>(cfg, seed);
  std::mt19937_64 rng(seed + 17);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Nonzero biases so their gradients flow through every nonlinearity.
  for (auto& t : params.tensors) {
    if (t.name.ends_with(".bias")) {
      for (auto& v : t.data) v = 0.1 * normal(rng);
    }
  }
  std::vector<Matrix<double>> inputs;
  for (int b = 0; b < batch; ++b) {
    Matrix<double> x(length, cfg.input_channels);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    inputs.push_back(x);
  }
  Matrix<double> upstream(batch, cfg.embedding_dim);
  for (Eigen::Index i = 0; i < upstream.size(); ++i) upstream.data()[i] = normal(rng);

  const auto grads = gazeauth::backward(params, inputs, upstream);
  auto objective = [&](const gazeauth::EmbedderParams<double>& p) {
    return (gazeauth::forward(p, inputs).array() * upstream.array()).sum();
  };

  EmbedderGradCheck out;
  std::vector<double> analytic, numeric;
  const double h = 1e-6;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    for (std::size_t i = 0; i < params.tensors[t].data.size(); ++i) {
      double& w = params.tensors[t].data[i];
      const double saved = w;
      w = saved + h;
      const double up = objective(params);
      w = saved - h;
      const double down = objective(params);
      w = saved;
      numeric.push_back((up - down) / (2.0 * h));
      analytic.push_back(grads.tensors[t].data[i]);
    }
  }
  out.parameters = analytic.size();
  out.worst_relative_error = max_relative_error(analytic, numeric, 1e-4);
  return out;
}

inline gazeauth::EmbedderConfig tiny_embedder_config() {
  gazeauth::EmbedderConfig cfg;
  cfg.input_channels = 2;
  cfg.growth = 2;
  cfg.dilations = {1, 2, 4, 8, 1, 2, 4, 1};
  return cfg;
}

}  // namespace oracle
