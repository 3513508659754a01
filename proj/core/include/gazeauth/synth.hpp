#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "gazeauth/domain.hpp"

namespace gazeauth {

// Ground truth for one eye: the optical axis is the inverse of
// `visual = gain * optical + offset` applied after removing kappa and the
// depth-dependent vergence term.
struct EyeSignature {
  Gaze kappa;
  Eigen::Matrix2d gain = Eigen::Matrix2d::Identity();
  Gaze offset;
};

struct SubjectSignature {
  EyeSignature left;
  EyeSignature right;
  double vmax_deg_s = 500.0;
  double amplitude_constant_deg = 10.0;
  double drift_amplitude_deg = 0.1;
  double noise_multiplier = 1.0;
};

bool operator==(const SubjectSignature& a, const SubjectSignature& b);

enum class Pipeline { New, Old, Custom };

struct PipelineNoise {
  Pipeline pipeline = Pipeline::New;
  double accuracy_bias_deg = 0.79;
  double s2s_rms_deg = 0.20;

  static PipelineNoise new_pipeline() { return {Pipeline::New, 0.79, 0.20}; }
  static PipelineNoise old_pipeline() { return {Pipeline::Old, 1.07, 0.32}; }
  static PipelineNoise noiseless() { return {Pipeline::Custom, 0.0, 0.0}; }
};

std::string_view to_string(Pipeline p);
Pipeline parse_pipeline(std::string_view text);
PipelineNoise pipeline_noise(Pipeline p);

struct SynthConfig {
  int n_train_subjects = 40;
  int n_test_subjects = 20;
  int task_recordings_per_subject = 2;
  double task_duration_s = 30.0;
  double dwell_s = 1.25;
  double fov_half_deg = 12.0;
  double ipd_mm = 63.0;
  double blink_fraction = 0.002;
  int folds = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

SubjectSignature generate_subject_signature(std::uint64_t seed, int subject_index);

// Per-eye horizontal vergence magnitude in degrees; the left eye gets +, the
// right eye -.
double vergence_offset_deg(Depth depth, double ipd_mm);

double saccade_peak_velocity(const SubjectSignature& sig, double amplitude_deg);

struct Saccade {
  double onset_s = 0.0;
  double duration_s = 0.0;
  Gaze from;
  Gaze to;
  double amplitude_deg = 0.0;
  double peak_velocity_deg_s = 0.0;
};

// Raised-cosine velocity profile; returns `to` once the saccade has finished.
Gaze saccade_position(const Saccade& s, double t);

struct TargetSchedule {
  std::vector<Gaze> targets;  // targets[k] is shown from k * dwell_s
  double dwell_s = 0.0;
};

TargetSchedule make_target_schedule(Task task, const SynthConfig& cfg, std::mt19937_64& rng);

// Saccades that move the eye between consecutive schedule targets, each
// launched at the target jump.
std::vector<Saccade> plan_saccades(const SubjectSignature& sig, const TargetSchedule& schedule);

Recording generate_recording(const SubjectSignature& sig, Task task, Depth depth,
                             const PipelineNoise& pipeline, const SynthConfig& cfg,
                             std::uint64_t seed);

// Subject i < n_train is a training subject; ids are zero-padded "sub0001"...
std::vector<SubjectSignature> generate_signatures(const SynthConfig& cfg);
Dataset generate_dataset(const SynthConfig& cfg, const PipelineNoise& pipeline);

std::string subject_id_for(int subject_index);

// Sidecar with the generating parameters; never read back by the pipeline.
void write_signatures_csv(const SynthConfig& cfg, const std::filesystem::path& path);

}  // namespace gazeauth
