#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gazeauth/biometrics.hpp"
#include "gazeauth/calibration.hpp"
#include "gazeauth/embedder.hpp"
#include "gazeauth/preprocess.hpp"
#include "gazeauth/synth.hpp"
#include "gazeauth/trainer.hpp"

namespace gazeauth {

enum class Scenario { S1, S2, S3 };
enum class CalibTraining { All, Single };
enum class Regime { Config1, Config2 };

std::string_view to_string(Scenario s);
std::string_view to_string(CalibTraining c);
std::string_view to_string(Regime r);
Scenario parse_scenario(std::string_view text);
CalibTraining parse_calib_training(std::string_view text);
Regime parse_regime(std::string_view text);

struct ExperimentSpec {
  Scenario scenario = Scenario::S1;
  CalibTraining calib_training = CalibTraining::Single;
  Pipeline pipeline = Pipeline::New;
  Axis axis = Axis::B;
  Regime regime = Regime::Config1;
  bool filter = false;
  std::string exp_id;
  double verification_seconds = 20.0;
  bool experimental = false;  // required for S3

  void validate() const;
};

struct ExperimentResult {
  std::string exp_id;
  double eer_mean = 0.0;
  double eer_sd = 0.0;
  double frr_mean = 0.0;
  double frr_sd = 0.0;
  bool unresolved_far = false;
  double runtime_s = 0.0;
};

// Desk-scale shrinking of the two regimes. Config2 keeps its ratios to
// Config1: 10x epochs, 2x users and 2x samples per user.
struct RegimeScale {
  bool full_scale = false;
  double epoch_scale = 0.5;
  int users_per_batch = 8;
  int samples_per_user = 8;

  void validate() const;
};

TrainConfig regime_train_config(Regime regime, const RegimeScale& scale, std::uint64_t seed);

struct HarnessConfig {
  SynthConfig synth;
  EmbedderConfig embedder;
  RegimeScale scale;
  MsLossConfig ms_loss;
  double far_target = 2e-5;
  std::uint64_t seed = 0;
  bool experimental_s3 = false;

  HarnessConfig();
  void validate() const;
};

// Fitted 200 cm and 75 cm models of every subject in a dataset.
class CalibrationBank {
 public:
  CalibrationBank() = default;
  explicit CalibrationBank(const Dataset& ds);

  const CalibrationModel& at(const std::string& subject_id, Depth depth) const;
  bool contains(const std::string& subject_id) const { return models_.count(subject_id) != 0; }
  void insert(CalibrationModel model);

 private:
  std::map<std::string, std::array<std::optional<CalibrationModel>, 2>> models_;
};

const CalibrationModel& resolve_verification_calibration(Scenario scenario, const std::string& claimed_subject,
                                                         const std::string& actual_subject,
                                                         const CalibrationBank& bank);

const CalibrationModel& enrollment_calibration(const std::string& enrolled_subject,
                                               const CalibrationBank& bank);

struct TrainedModel {
  EmbedderParams<float> params;
  NormStats norm;
  std::vector<HistoryRow> history;
};

// Windows used to train one model, standardized with statistics fitted on them.
struct TrainingSet {
  std::vector<WindowTensor> windows;
  NormStats norm;
};

TrainingSet build_training_set(const Dataset& ds, const CalibrationBank& bank, Axis axis,
                               CalibTraining calib_training, bool filter_on);

// Scenario-agnostic identity of a trained model.
std::string training_key(const ExperimentSpec& spec);

struct EvaluationOutput {
  ScoreSet scores;  // all folds, verify-major
  std::vector<FoldMetrics> folds;
};

EvaluationOutput evaluate(const ExperimentSpec& spec, const Dataset& ds, const CalibrationBank& bank,
                          const TrainedModel& model, double far_target);

using LogFn = std::function<void(const std::string&)>;

// Runs experiment cells, reusing datasets per pipeline and trained models
// per training key.
class ExperimentRunner {
 public:
  explicit ExperimentRunner(HarnessConfig cfg, LogFn log = {});

  const Dataset& dataset(Pipeline pipeline);
  const CalibrationBank& bank(Pipeline pipeline);
  // Uses a caller-provided dataset for `pipeline` instead of synthesizing one.
  void set_dataset(Pipeline pipeline, Dataset ds);

  const TrainedModel& model(const ExperimentSpec& spec);
  ExperimentResult run(const ExperimentSpec& spec, const std::filesystem::path& out_dir);

  const HarnessConfig& config() const { return cfg_; }

 private:
  struct PipelineData {
    Dataset dataset;
    CalibrationBank bank;
  };
  PipelineData& data(Pipeline pipeline);

  HarnessConfig cfg_;
  LogFn log_;
  std::map<Pipeline, std::unique_ptr<PipelineData>> data_;
  std::map<std::string, std::unique_ptr<TrainedModel>> models_;
};

ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& ds, const HarnessConfig& cfg,
                                const std::filesystem::path& out_dir);

struct GridAxes {
  std::vector<Scenario> scenarios{Scenario::S1, Scenario::S2};
  std::vector<CalibTraining> calib_training{CalibTraining::Single};
  std::vector<Pipeline> pipelines{Pipeline::New};
  std::vector<Axis> axes{Axis::O, Axis::V, Axis::B};
  std::vector<Regime> regimes{Regime::Config1};
  std::vector<bool> filters{false};
};

// Cross-product in the field order above; ids are "<scenario>@<n>" with n
// counting 1.. within each scenario.
std::vector<ExperimentSpec> enumerate_grid(const GridAxes& axes, bool experimental_s3);

void write_norm_stats_csv(const NormStats& stats, const std::filesystem::path& path);
NormStats read_norm_stats_csv(const std::filesystem::path& path);

void write_result_csv(const std::vector<ExperimentResult>& results, const std::filesystem::path& path);
std::vector<ExperimentResult> read_result_csv(const std::filesystem::path& path);

enum class ReportFormat { Csv, Markdown };
ReportFormat parse_report_format(std::string_view text);

std::string render_report(const std::vector<ExperimentResult>& results, ReportFormat format);

// Harness configuration file: [synth], [train] and [grid] tables of a small
// TOML subset (scalars and flat arrays).
struct ConfigFile {
  HarnessConfig harness;
  GridAxes grid;
  std::optional<std::uint64_t> seed;
};

ConfigFile load_config(const std::filesystem::path& path);
ConfigFile parse_config(std::string_view text, const std::string& origin = "<config>");

}  // namespace gazeauth
