#include "gazeauth/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "csv.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

namespace {

constexpr double kPi = std::numbers::pi;

enum class Stream : std::uint32_t {
  Signature = 1,
  Schedule,
  Drift,
  Field,
  Noise,
  Blink,
};

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

EyeSignature make_eye(std::mt19937_64& rng, double nasal_sign) {
  EyeSignature eye;
  const double magnitude = uniform(rng, 1.5, 5.5);
  const double direction = uniform(rng, -25.0, 25.0) * kPi / 180.0;
  eye.kappa = {nasal_sign * magnitude * std::cos(direction), magnitude * std::sin(direction)};
  for (int r = 0; r < 2; ++r) {
    for (int c = 0; c < 2; ++c) {
      eye.gain(r, c) = (r == c ? 1.0 : 0.0) + uniform(rng, -0.12, 0.12);
    }
  }
  eye.offset = {uniform(rng, -1.5, 1.5), uniform(rng, -1.5, 1.5)};
  return eye;
}

// Smooth vector field over the visual field built from random Fourier
// features with bounded spatial frequency.
class BiasField {
 public:
  BiasField(std::mt19937_64& rng, double length_scale_deg) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double scale = 1.0 / length_scale_deg;
    for (auto& f : features_) {
      do {
        f.wy = normal(rng) * scale;
        f.wp = normal(rng) * scale;
      } while (std::hypot(f.wy, f.wp) > 2.5 * scale);
      f.phase = uniform(rng, 0.0, 2.0 * kPi);
      f.ay = normal(rng) * std::sqrt(2.0 / kFeatures);
      f.ap = normal(rng) * std::sqrt(2.0 / kFeatures);
    }
  }

  Gaze operator()(Gaze p) const {
    Gaze out;
    for (const auto& f : features_) {
      const double c = std::cos(f.wy * p.yaw + f.wp * p.pitch + f.phase);
      out.yaw += f.ay * c;
      out.pitch += f.ap * c;
    }
    return {gain_ * out.yaw, gain_ * out.pitch};
  }

  void set_gain(double g) { gain_ = g; }

 private:
  static constexpr int kFeatures = 24;
  struct Feature {
    double wy = 0, wp = 0, phase = 0, ay = 0, ap = 0;
  };
  std::array<Feature, kFeatures> features_{};
  double gain_ = 1.0;
};

// Median magnitude of what an affine fit over `points` leaves of `field`.
double affine_residual_median(const BiasField& field, const std::vector<Gaze>& points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::MatrixXd values(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Gaze p = points[static_cast<std::size_t>(i)];
    const Gaze b = field(p);
    design.row(i) << p.yaw, p.pitch, 1.0;
    values.row(i) << b.yaw, b.pitch;
  }
  const Eigen::MatrixXd coef = design.colPivHouseholderQr().solve(values);
  const Eigen::MatrixXd resid = values - design * coef;
  std::vector<double> mags(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = resid.row(i).norm();
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  if (mags.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(mags.begin(), mid);
  return 0.5 * (lower + upper);
}

struct Drift {
  std::array<double, 3> freq{}, phase_y{}, phase_p{};
  double amplitude = 0.0;

  Gaze operator()(double t) const {
    Gaze d;
    for (std::size_t j = 0; j < freq.size(); ++j) {
      d.yaw += std::sin(2.0 * kPi * freq[j] * t + phase_y[j]);
      d.pitch += std::sin(2.0 * kPi * freq[j] * t + phase_p[j]);
    }
    return amplitude * d;
  }
};

Gaze apply_inverse(const EyeSignature& eye, Gaze visual) {
  const Eigen::Vector2d y(visual.yaw - eye.offset.yaw, visual.pitch - eye.offset.pitch);
  const Eigen::Vector2d x = eye.gain.inverse() * y;
  return {x(0), x(1)};
}

}  // namespace

bool operator==(const SubjectSignature& a, const SubjectSignature& b) {
  auto eye_eq = [](const EyeSignature& x, const EyeSignature& y) {
    return x.kappa == y.kappa && x.gain == y.gain && x.offset == y.offset;
  };
  return eye_eq(a.left, b.left) && eye_eq(a.right, b.right) && a.vmax_deg_s == b.vmax_deg_s &&
         a.amplitude_constant_deg == b.amplitude_constant_deg &&
         a.drift_amplitude_deg == b.drift_amplitude_deg &&
         a.noise_multiplier == b.noise_multiplier;
}

std::string_view to_string(Pipeline p) {
  switch (p) {
    case Pipeline::New: return "New";
    case Pipeline::Old: return "Old";
    case Pipeline::Custom: return "Custom";
  }
  return "?";
}

Pipeline parse_pipeline(std::string_view text) {
  if (text == "New") return Pipeline::New;
  if (text == "Old") return Pipeline::Old;
  throw ValidationError("unknown pipeline '" + std::string(text) + "'");
}

PipelineNoise pipeline_noise(Pipeline p) {
  switch (p) {
    case Pipeline::New: return PipelineNoise::new_pipeline();
    case Pipeline::Old: return PipelineNoise::old_pipeline();
    case Pipeline::Custom: break;
  }
  throw ValidationError("custom pipelines have no preset noise levels");
}

void SynthConfig::validate() const {
  if (n_train_subjects < 1 || n_test_subjects < 1) {
    throw ValidationError("synth: subject counts must be at least 1");
  }
  if (task_recordings_per_subject < 1) {
    throw ValidationError("synth: need at least one task recording per subject");
  }
  if (task_duration_s < 25.0) throw ValidationError("synth: task_duration_s must be >= 25");
  if (!(dwell_s > 0.0)) throw ValidationError("synth: dwell_s must be positive");
  if (task_duration_s < 9.0 * dwell_s) {
    throw ValidationError("synth: duration must fit the nine calibration dwells");
  }
  if (!(fov_half_deg > 0.0 && fov_half_deg < 45.0)) {
    throw ValidationError("synth: fov_half_deg must be in (0, 45)");
  }
  if (!(ipd_mm > 0.0)) throw ValidationError("synth: ipd_mm must be positive");
  if (blink_fraction < 0.0 || blink_fraction > 0.1) {
    throw ValidationError("synth: blink_fraction must be in [0, 0.1]");
  }
  if (folds < 2) throw ValidationError("synth: folds must be at least 2");
}

SubjectSignature generate_subject_signature(std::uint64_t seed, int subject_index) {
  auto rng = make_rng(seed, static_cast<std::uint64_t>(subject_index), Stream::Signature);
  SubjectSignature sig;
  sig.left = make_eye(rng, +1.0);
  sig.right = make_eye(rng, -1.0);
  sig.vmax_deg_s = uniform(rng, 350.0, 650.0);
  sig.amplitude_constant_deg = uniform(rng, 6.0, 14.0);
  sig.drift_amplitude_deg = uniform(rng, 0.05, 0.25);
  sig.noise_multiplier = std::exp(uniform(rng, -0.25, 0.25));
  return sig;
}

double vergence_offset_deg(Depth depth, double ipd_mm) {
  const double half_ipd_m = ipd_mm / 2000.0;
  const double depth_m = to_cm(depth) / 100.0;
  return std::atan(half_ipd_m / depth_m) * 180.0 / kPi;
}

double saccade_peak_velocity(const SubjectSignature& sig, double amplitude_deg) {
  return sig.vmax_deg_s * (1.0 - std::exp(-amplitude_deg / sig.amplitude_constant_deg));
}

Gaze saccade_position(const Saccade& s, double t) {
  const double tau = t - s.onset_s;
  if (tau <= 0.0) return s.from;
  if (tau >= s.duration_s) return s.to;
  const double u = tau / s.duration_s;
  const double progress = u - std::sin(2.0 * kPi * u) / (2.0 * kPi);
  return s.from + progress * (s.to - s.from);
}

TargetSchedule make_target_schedule(Task task, const SynthConfig& cfg, std::mt19937_64& rng) {
  if (cfg.task_duration_s < cfg.dwell_s) {
    throw ValidationError("synth: duration too short for one full dwell");
  }
  TargetSchedule schedule;
  schedule.dwell_s = cfg.dwell_s;
  const auto count = static_cast<std::size_t>(std::ceil(cfg.task_duration_s / cfg.dwell_s - 1e-9));
  if (task == Task::Calibration) {
    const double g = 0.75 * cfg.fov_half_deg;
    std::vector<Gaze> grid;
    for (double pitch : {g, 0.0, -g}) {
      for (double yaw : {-g, 0.0, g}) grid.push_back({yaw, pitch});
    }
    while (schedule.targets.size() < count) {
      std::shuffle(grid.begin(), grid.end(), rng);
      if (!schedule.targets.empty() && grid.front() == schedule.targets.back()) {
        std::swap(grid.front(), grid.back());
      }
      for (const Gaze& p : grid) {
        if (schedule.targets.size() == count) break;
        schedule.targets.push_back(p);
      }
    }
  } else {
    schedule.targets.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      schedule.targets.push_back(
          {uniform(rng, -cfg.fov_half_deg, cfg.fov_half_deg),
           uniform(rng, -cfg.fov_half_deg, cfg.fov_half_deg)});
    }
  }
  return schedule;
}

std::vector<Saccade> plan_saccades(const SubjectSignature& sig, const TargetSchedule& schedule) {
  std::vector<Saccade> saccades;
  if (schedule.targets.size() < 2) return saccades;
  saccades.reserve(schedule.targets.size() - 1);
  Gaze position = schedule.targets.front();
  for (std::size_t k = 1; k < schedule.targets.size(); ++k) {
    Saccade s;
    s.onset_s = static_cast<double>(k) * schedule.dwell_s;
    if (!saccades.empty()) position = saccade_position(saccades.back(), s.onset_s);
    s.from = position;
    s.to = schedule.targets[k];
    s.amplitude_deg = std::hypot(s.to.yaw - s.from.yaw, s.to.pitch - s.from.pitch);
    s.peak_velocity_deg_s = saccade_peak_velocity(sig, s.amplitude_deg);
    // Raised cosine: mean velocity is half the peak.
    s.duration_s = s.amplitude_deg > 0.0 ? 2.0 * s.amplitude_deg / s.peak_velocity_deg_s : 0.0;
    saccades.push_back(s);
  }
  return saccades;
}

Recording generate_recording(const SubjectSignature& sig, Task task, Depth depth,
                             const PipelineNoise& pipeline, const SynthConfig& cfg,
                             std::uint64_t seed) {
  if (cfg.task_duration_s < cfg.dwell_s) {
    throw ValidationError("synth: duration too short for one full dwell");
  }
  auto schedule_rng = make_rng(seed, 0, Stream::Schedule);
  const TargetSchedule schedule = make_target_schedule(task, cfg, schedule_rng);
  const std::vector<Saccade> saccades = plan_saccades(sig, schedule);

  Drift drift;
  {
    auto rng = make_rng(seed, 0, Stream::Drift);
    for (std::size_t j = 0; j < drift.freq.size(); ++j) {
      drift.freq[j] = uniform(rng, 0.1, 0.8);
      drift.phase_y[j] = uniform(rng, 0.0, 2.0 * kPi);
      drift.phase_p[j] = uniform(rng, 0.0, 2.0 * kPi);
    }
    // Three unit sinusoids have RMS sqrt(1.5).
    drift.amplitude = sig.drift_amplitude_deg / std::sqrt(1.5);
  }

  auto field_rng = make_rng(seed, 0, Stream::Field);
  BiasField field(field_rng, cfg.fov_half_deg);
  if (pipeline.accuracy_bias_deg > 0.0) {
    const double raw = affine_residual_median(field, schedule.targets);
    field.set_gain(raw > 0.0 ? pipeline.accuracy_bias_deg / raw : 0.0);
  } else {
    field.set_gain(0.0);
  }

  // Cyclopean averaging halves the per-axis noise variance, so per-eye sigma
  // s/sqrt(2) yields a binocular sample-to-sample RMS of s.
  const double sigma = pipeline.s2s_rms_deg / std::sqrt(2.0) * sig.noise_multiplier;
  auto noise_rng = make_rng(seed, 0, Stream::Noise);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double verg = vergence_offset_deg(depth, cfg.ipd_mm);
  const Gaze left_verg{+verg, 0.0};
  const Gaze right_verg{-verg, 0.0};

  Recording rec;
  rec.task = task;
  rec.target_depth = depth;
  rec.sample_rate_hz = kSampleRateHz;
  const auto n = static_cast<std::size_t>(std::floor(cfg.task_duration_s * kSampleRateHz + 1e-9));
  rec.samples.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    GazeSample& s = rec.samples[i];
    s.t = static_cast<double>(i) / kSampleRateHz;
    const auto k = std::min(static_cast<std::size_t>(std::floor(s.t / schedule.dwell_s + 1e-12)),
                            schedule.targets.size() - 1);
    s.target = schedule.targets[k];
    Gaze eye_line = k == 0 ? schedule.targets.front() : saccade_position(saccades[k - 1], s.t);
    if (sig.drift_amplitude_deg > 0.0) eye_line = eye_line + drift(s.t);
    const Gaze biased = eye_line + field(eye_line);

    s.left_optical = apply_inverse(sig.left, biased - sig.left.kappa - left_verg);
    s.right_optical = apply_inverse(sig.right, biased - sig.right.kappa - right_verg);
    if (sigma > 0.0) {
      s.left_optical.yaw += sigma * normal(noise_rng);
      s.left_optical.pitch += sigma * normal(noise_rng);
      s.right_optical.yaw += sigma * normal(noise_rng);
      s.right_optical.pitch += sigma * normal(noise_rng);
    }
    s.valid = true;
  }

  if (cfg.blink_fraction > 0.0) {
    auto rng = make_rng(seed, 0, Stream::Blink);
    constexpr double kMeanRun = 10.0;
    std::bernoulli_distribution starts(cfg.blink_fraction / kMeanRun);
    std::uniform_int_distribution<std::size_t> run_length(5, 15);
    for (std::size_t i = 0; i < n; ++i) {
      if (!starts(rng)) continue;
      const std::size_t end = std::min(n, i + run_length(rng));
      for (; i < end; ++i) {
        rec.samples[i].valid = false;
        rec.samples[i].left_optical = nan_gaze();
        rec.samples[i].right_optical = nan_gaze();
      }
    }
  }
  return rec;
}

std::string subject_id_for(int subject_index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub%04d", subject_index + 1);
  return buf;
}

std::vector<SubjectSignature> generate_signatures(const SynthConfig& cfg) {
  const int total = cfg.n_train_subjects + cfg.n_test_subjects;
  std::vector<SubjectSignature> sigs;
  sigs.reserve(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) sigs.push_back(generate_subject_signature(cfg.seed, i));
  return sigs;
}

Dataset generate_dataset(const SynthConfig& cfg, const PipelineNoise& pipeline) {
  cfg.validate();
  const std::vector<SubjectSignature> sigs = generate_signatures(cfg);
  Dataset ds;
  ds.subjects.reserve(sigs.size());
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const int index = static_cast<int>(i);
    SubjectRecord subject;
    subject.subject_id = subject_id_for(index);
    const std::uint64_t base =
        (cfg.seed * 0x9E3779B97F4A7C15ULL) ^ (static_cast<std::uint64_t>(index) << 16);

    auto make = [&](Task task, Depth depth, std::uint64_t slot, std::string suffix) {
      Recording r = generate_recording(sigs[i], task, depth, pipeline, cfg, base + slot);
      r.subject_id = subject.subject_id;
      r.recording_id = subject.subject_id + "_" + suffix;
      return r;
    };
    subject.calibration_recordings.push_back(make(Task::Calibration, Depth::Far200, 1, "cal200"));
    subject.calibration_recordings.push_back(make(Task::Calibration, Depth::Near75, 2, "cal75"));
    for (int k = 0; k < cfg.task_recordings_per_subject; ++k) {
      subject.task_recordings.push_back(make(Task::RandomSaccade, Depth::Far200,
                                             10 + static_cast<std::uint64_t>(k),
                                             "rs" + std::to_string(k + 1)));
    }
    ds.split[subject.subject_id] = index < cfg.n_train_subjects ? Split::Train : Split::Test;
    ds.subjects.push_back(std::move(subject));
  }
  const auto test_ids = ds.subject_ids(Split::Test);
  if (test_ids.size() >= 2) {
    ds = assign_folds(std::move(ds), std::min<int>(cfg.folds, static_cast<int>(test_ids.size())),
                      cfg.seed);
  } else {
    for (const auto& id : test_ids) ds.folds[id] = 0;
  }
  return ds;
}

void write_signatures_csv(const SynthConfig& cfg, const std::filesystem::path& path) {
  const auto sigs = generate_signatures(cfg);
  auto out = detail::open_for_write(path);
  out << "subject_id,split,eye,kappa_yaw,kappa_pitch,gain_00,gain_01,gain_10,gain_11,"
         "offset_yaw,offset_pitch,vmax_deg_s,amplitude_constant_deg,drift_amplitude_deg,"
         "noise_multiplier\n";
  for (std::size_t i = 0; i < sigs.size(); ++i) {
    const int index = static_cast<int>(i);
    const char* split = index < cfg.n_train_subjects ? "Train" : "Test";
    for (const auto& [eye_name, eye] :
         {std::pair<const char*, const EyeSignature*>{"left", &sigs[i].left},
          std::pair<const char*, const EyeSignature*>{"right", &sigs[i].right}}) {
      out << subject_id_for(index) << ',' << split << ',' << eye_name << ','
          << format_real(eye->kappa.yaw) << ',' << format_real(eye->kappa.pitch) << ','
          << format_real(eye->gain(0, 0)) << ',' << format_real(eye->gain(0, 1)) << ','
          << format_real(eye->gain(1, 0)) << ',' << format_real(eye->gain(1, 1)) << ','
          << format_real(eye->offset.yaw) << ',' << format_real(eye->offset.pitch) << ','
          << format_real(sigs[i].vmax_deg_s) << ',' << format_real(sigs[i].amplitude_constant_deg)
          << ',' << format_real(sigs[i].drift_amplitude_deg) << ','
          << format_real(sigs[i].noise_multiplier) << '\n';
    }
  }
  detail::check_stream(out, path);
}

}  // namespace gazeauth
