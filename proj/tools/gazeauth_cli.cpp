#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "gazeauth/biometrics.hpp"
#include "gazeauth/error.hpp"
#include "gazeauth/harness.hpp"

namespace fs = std::filesystem;
using namespace gazeauth;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

void log_line(const std::string& msg) { std::cerr << "[gazeauth] " << msg << '\n'; }

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

bool parse_on_off(const std::string& s) {
  if (s == "on" || s == "On") return true;
  if (s == "off" || s == "Off") return false;
  throw ValidationError("filter must be on or off, got '" + s + "'");
}

// Config-file values overridden by whichever flags were given.
struct CommonOptions {
  std::optional<fs::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> n_train, n_test, task_recordings, folds;
  std::optional<double> task_duration;
  std::optional<double> epoch_scale, far_target;
  std::optional<int> users_per_batch, samples_per_user, growth;
  bool full_scale = false;

  void add_synth(CLI::App* app) {
    app->add_option("--n-train", n_train, "Training subjects");
    app->add_option("--n-test", n_test, "Test subjects");
    app->add_option("--task-recordings", task_recordings, "Task recordings per subject");
    app->add_option("--task-duration", task_duration, "Task recording length in seconds");
    app->add_option("--folds", folds, "Number of test folds");
  }
  void add_train(CLI::App* app) {
    app->add_option("--epoch-scale", epoch_scale, "Multiplier on regime epochs");
    app->add_option("--users-per-batch", users_per_batch, "Config1 users per minibatch");
    app->add_option("--samples-per-user", samples_per_user, "Config1 windows per user");
    app->add_option("--growth", growth, "Channels added per conv layer");
    app->add_option("--far-target", far_target, "FAR operating point for FRR");
    app->add_flag("--full-scale", full_scale, "Use the unscaled regime presets");
  }

  ConfigFile resolve() const {
    ConfigFile cfg = config ? load_config(*config) : ConfigFile{};
    auto& h = cfg.harness;
    if (seed) cfg.seed = seed;
    if (n_train) h.synth.n_train_subjects = *n_train;
    if (n_test) h.synth.n_test_subjects = *n_test;
    if (task_recordings) h.synth.task_recordings_per_subject = *task_recordings;
    if (task_duration) h.synth.task_duration_s = *task_duration;
    if (folds) h.synth.folds = *folds;
    if (epoch_scale) h.scale.epoch_scale = *epoch_scale;
    if (users_per_batch) h.scale.users_per_batch = *users_per_batch;
    if (samples_per_user) h.scale.samples_per_user = *samples_per_user;
    if (growth) h.embedder.growth = *growth;
    if (far_target) h.far_target = *far_target;
    if (full_scale) h.scale.full_scale = true;
    if (cfg.seed) {
      h.seed = *cfg.seed;
      h.synth.seed = *cfg.seed;
    }
    return cfg;
  }
};

std::uint64_t require_seed(const ConfigFile& cfg, const char* cmd) {
  if (!cfg.seed) throw ValidationError(std::string(cmd) + ": --seed is required");
  return *cfg.seed;
}

void print_result(const ExperimentResult& r) {
  std::printf("%s  EER %.2f%% (%.2f)  FRR %.2f%% (%.2f)%s  %.1fs\n", r.exp_id.c_str(), r.eer_mean * 100.0,
              r.eer_sd * 100.0, r.frr_mean * 100.0, r.frr_sd * 100.0, r.unresolved_far ? " [FAR unresolved]" : "",
              r.runtime_s);
}

struct SpecOptions {
  std::string scenario = "S1", calib_training = "Single", pipeline = "New", axis = "B", regime = "Config1";
  std::string filter = "off";
  std::string exp_id;
  double verification_seconds = 20.0;

  void add(CLI::App* app, bool with_scenario) {
    if (with_scenario) app->add_option("--scenario", scenario, "S1, S2 or S3")->capture_default_str();
    app->add_option("--calib-training", calib_training, "All or Single")->capture_default_str();
    app->add_option("--pipeline", pipeline, "New or Old")->capture_default_str();
    app->add_option("--axis", axis, "O, V or B")->capture_default_str();
    app->add_option("--regime", regime, "Config1 or Config2")->capture_default_str();
    app->add_option("--filter", filter, "on or off")->capture_default_str();
    app->add_option("--verification-seconds", verification_seconds, "Enrollment/verification length")
        ->capture_default_str();
  }

  ExperimentSpec build(bool experimental) const {
    ExperimentSpec s;
    s.scenario = parse_scenario(scenario);
    s.calib_training = parse_calib_training(calib_training);
    s.pipeline = parse_pipeline(pipeline);
    s.axis = parse_axis(axis);
    s.regime = parse_regime(regime);
    s.filter = parse_on_off(filter);
    s.verification_seconds = verification_seconds;
    s.experimental = experimental;
    s.exp_id = exp_id.empty() ? std::string(to_string(s.scenario)) + "-" + std::string(to_string(s.axis)) : exp_id;
    return s;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Eye-movement authentication laboratory"};
  app.require_subcommand(1);

  CommonOptions common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "TOML config with [synth], [train], [grid]");
    sub->add_option("--seed", common.seed, "Master seed");
  };

  // gen
  auto* gen = app.add_subcommand("gen", "Synthesize a dataset");
  fs::path gen_out;
  std::string gen_pipeline = "New";
  add_common(gen);
  common.add_synth(gen);
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--pipeline", gen_pipeline, "New or Old")->capture_default_str();

  // train
  auto* trn = app.add_subcommand("train", "Train one embedder");
  fs::path train_data, train_out;
  SpecOptions train_spec;
  add_common(trn);
  common.add_train(trn);
  train_spec.add(trn, false);
  trn->add_option("--data", train_data, "Dataset directory")->required();
  trn->add_option("--out", train_out, "Model output directory")->required();

  // eval
  auto* evl = app.add_subcommand("eval", "Score a trained model");
  fs::path eval_data, eval_model, eval_out;
  SpecOptions eval_spec;
  bool eval_s3 = false;
  add_common(evl);
  common.add_train(evl);
  eval_spec.add(evl, true);
  evl->add_option("--data", eval_data, "Dataset directory")->required();
  evl->add_option("--model", eval_model, "Directory with model.ekyb and norm_stats.csv")->required();
  evl->add_option("--out", eval_out, "Output directory")->required();
  evl->add_flag("--experimental-s3", eval_s3, "Allow scenario S3");

  // exp
  auto* exp = app.add_subcommand("exp", "Run one experiment cell");
  fs::path exp_out;
  std::optional<fs::path> exp_data;
  SpecOptions exp_spec;
  bool exp_s3 = false;
  add_common(exp);
  common.add_synth(exp);
  common.add_train(exp);
  exp_spec.add(exp, true);
  exp->add_option("--id", exp_spec.exp_id, "Experiment id");
  exp->add_option("--data", exp_data, "Dataset directory (synthesized when absent)");
  exp->add_option("--out", exp_out, "Output directory")->required();
  exp->add_flag("--experimental-s3", exp_s3, "Allow scenario S3");

  // grid
  auto* grd = app.add_subcommand("grid", "Run the factor grid");
  fs::path grid_out;
  bool grid_s3 = false;
  add_common(grd);
  common.add_synth(grd);
  common.add_train(grd);
  grd->add_option("--out", grid_out, "Output directory")->required();
  grd->add_flag("--experimental-s3", grid_s3, "Include scenario S3");

  // report
  auto* rep = app.add_subcommand("report", "Render results as a table");
  std::vector<fs::path> rep_in;
  std::string rep_format = "markdown";
  std::optional<fs::path> rep_out;
  rep->add_option("--in", rep_in, "result.csv files")->required();
  rep->add_option("--format", rep_format, "csv or markdown")->capture_default_str();
  rep->add_option("--out", rep_out, "Output file (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (*gen) {
      ConfigFile cfg = common.resolve();
      require_seed(cfg, "gen");
      const SynthConfig& synth = cfg.harness.synth;
      synth.validate();
      make_dir(gen_out);
      const Dataset ds = generate_dataset(synth, pipeline_noise(parse_pipeline(gen_pipeline)));
      save_dataset(ds, gen_out);
      write_signatures_csv(synth, gen_out / "signatures.csv");
      std::printf("wrote %zu subjects, %zu recordings to %s\n", ds.subjects.size(), ds.recording_count(),
                  gen_out.string().c_str());
    } else if (*trn) {
      ConfigFile cfg = common.resolve();
      cfg.harness.validate();
      const ExperimentSpec spec = train_spec.build(false);
      const Dataset ds = load_dataset(train_data);
      const CalibrationBank bank(ds);
      TrainingSet set = build_training_set(ds, bank, spec.axis, spec.calib_training, spec.filter);
      EmbedderConfig ecfg = cfg.harness.embedder;
      ecfg.input_channels = channel_count(spec.axis);
      const TrainConfig tcfg = regime_train_config(spec.regime, cfg.harness.scale, cfg.harness.seed);
      log_line("training on " + std::to_string(set.windows.size()) + " windows");
      int last_epoch = -1;
      const TrainResult tr = train(set.windows, ecfg, tcfg, cfg.harness.ms_loss, [&](const HistoryRow& h) {
        if (h.epoch != last_epoch) {
          last_epoch = h.epoch;
          char buf[96];
          std::snprintf(buf, sizeof buf, "epoch %d lr %.3g loss %.5f", h.epoch, h.lr, h.loss);
          log_line(buf);
        }
      });
      make_dir(train_out);
      save_checkpoint(tr.params, train_out / "model.ekyb");
      write_norm_stats_csv(set.norm, train_out / "norm_stats.csv");
      write_history_csv(tr.history, train_out / "history.csv");
      std::printf("trained %zu steps, final loss %.6f\n", tr.history.size(),
                  tr.history.empty() ? 0.0 : tr.history.back().loss);
    } else if (*evl) {
      ConfigFile cfg = common.resolve();
      cfg.harness.validate();
      const ExperimentSpec spec = eval_spec.build(eval_s3);
      spec.validate();
      const Dataset ds = load_dataset(eval_data);
      const CalibrationBank bank(ds);
      TrainedModel model;
      model.params = load_checkpoint(eval_model / "model.ekyb");
      model.norm = read_norm_stats_csv(eval_model / "norm_stats.csv");
      if (model.params.config.input_channels != channel_count(spec.axis) ||
          static_cast<int>(model.norm.channels()) != channel_count(spec.axis)) {
        throw ValidationError("model channel count does not match axis " + std::string(to_string(spec.axis)));
      }
      const EvaluationOutput out = evaluate(spec, ds, bank, model, cfg.harness.far_target);
      make_dir(eval_out);
      write_scores_csv(out.scores, eval_out / "scores.csv");
      write_metrics_csv(out.folds, eval_out / "metrics.csv");
      std::vector<double> eers, frrs;
      bool unresolved = false;
      for (const auto& f : out.folds) {
        eers.push_back(f.eer);
        frrs.push_back(f.frr_at_far);
        unresolved = unresolved || f.unresolved_far;
      }
      const auto e = aggregate_folds(eers);
      const auto f = aggregate_folds(frrs);
      print_result({spec.exp_id, e.mean, e.sd, f.mean, f.sd, unresolved, 0.0});
    } else if (*exp) {
      ConfigFile cfg = common.resolve();
      require_seed(cfg, "exp");
      cfg.harness.experimental_s3 = cfg.harness.experimental_s3 || exp_s3;
      const ExperimentSpec spec = exp_spec.build(cfg.harness.experimental_s3);
      spec.validate();
      ExperimentRunner runner(cfg.harness, log_line);
      if (exp_data) runner.set_dataset(spec.pipeline, load_dataset(*exp_data));
      make_dir(exp_out);
      print_result(runner.run(spec, exp_out));
    } else if (*grd) {
      ConfigFile cfg = common.resolve();
      require_seed(cfg, "grid");
      cfg.harness.experimental_s3 = cfg.harness.experimental_s3 || grid_s3;
      const auto specs = enumerate_grid(cfg.grid, cfg.harness.experimental_s3);
      ExperimentRunner runner(cfg.harness, log_line);
      make_dir(grid_out);
      std::vector<ExperimentResult> results;
      for (const auto& spec : specs) {
        results.push_back(runner.run(spec, grid_out));
        print_result(results.back());
      }
      std::vector<ExperimentResult> stored = results;
      for (auto& r : stored) r.runtime_s = 0.0;
      write_result_csv(stored, grid_out / "results.csv");
      std::ofstream md(grid_out / "report.md", std::ios::binary);
      md << render_report(results, ReportFormat::Markdown);
      if (!md) throw IoError("cannot write report");
    } else if (*rep) {
      std::vector<ExperimentResult> results;
      for (const auto& p : rep_in) {
        auto part = read_result_csv(p);
        results.insert(results.end(), part.begin(), part.end());
      }
      const std::string doc = render_report(results, parse_report_format(rep_format));
      if (rep_out) {
        std::ofstream out(*rep_out, std::ios::binary);
        out << doc;
        if (!out) throw IoError("cannot write '" + rep_out->string() + "'");
      } else {
        std::cout << doc;
      }
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const RuntimeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
