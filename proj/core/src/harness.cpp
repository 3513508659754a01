#include "gazeauth/harness.hpp"

#include <chrono>
#include <cmath>
#include <set>
#include <tuple>

#include "csv.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::S1: return "S1";
    case Scenario::S2: return "S2";
    case Scenario::S3: return "S3";
  }
  return "?";
}

std::string_view to_string(CalibTraining c) { return c == CalibTraining::All ? "All" : "Single"; }

std::string_view to_string(Regime r) { return r == Regime::Config1 ? "Config1" : "Config2"; }

Scenario parse_scenario(std::string_view text) {
  if (text == "S1") return Scenario::S1;
  if (text == "S2") return Scenario::S2;
  if (text == "S3") return Scenario::S3;
  throw ValidationError("unknown scenario '" + std::string(text) + "'");
}

CalibTraining parse_calib_training(std::string_view text) {
  if (text == "All") return CalibTraining::All;
  if (text == "Single") return CalibTraining::Single;
  throw ValidationError("unknown calibration training mode '" + std::string(text) + "'");
}

Regime parse_regime(std::string_view text) {
  if (text == "Config1") return Regime::Config1;
  if (text == "Config2") return Regime::Config2;
  throw ValidationError("unknown regime '" + std::string(text) + "'");
}

void ExperimentSpec::validate() const {
  if (exp_id.empty()) throw ValidationError("experiment id must not be empty");
  if (exp_id.find_first_of(",/\\\n\r") != std::string::npos) {
    throw ValidationError("experiment id '" + exp_id + "' contains a forbidden character");
  }
  if (scenario == Scenario::S3 && !experimental) {
    throw ValidationError("scenario S3 requires the experimental flag");
  }
  if (pipeline == Pipeline::Custom) throw ValidationError("experiments need the New or Old pipeline");
  segments_for_seconds(verification_seconds);
}

void RegimeScale::validate() const {
  if (full_scale) return;
  if (!(epoch_scale > 0.0)) throw ValidationError("regime scale: epoch_scale must be positive");
  if (users_per_batch < 2 || samples_per_user < 1) {
    throw ValidationError("regime scale: need users_per_batch >= 2 and samples_per_user >= 1");
  }
}

TrainConfig regime_train_config(Regime regime, const RegimeScale& scale, std::uint64_t seed) {
  scale.validate();
  TrainConfig cfg = regime == Regime::Config1 ? TrainConfig::configuration1() : TrainConfig::configuration2();
  if (!scale.full_scale) {
    const int factor = regime == Regime::Config1 ? 1 : 2;
    cfg.epochs = std::max(1, static_cast<int>(std::lround(cfg.epochs * scale.epoch_scale)));
    cfg.users_per_batch = scale.users_per_batch * factor;
    cfg.samples_per_user = scale.samples_per_user * factor;
  }
  cfg.seed = seed;
  return cfg;
}

HarnessConfig::HarnessConfig() { embedder.growth = 16; }

void HarnessConfig::validate() const {
  synth.validate();
  embedder.validate();
  scale.validate();
  ms_loss.validate();
  if (!(far_target > 0.0 && far_target <= 1.0)) throw ValidationError("far_target must be in (0, 1]");
}

CalibrationBank::CalibrationBank(const Dataset& ds) {
  for (const auto& subject : ds.subjects) {
    for (Depth d : {Depth::Far200, Depth::Near75}) insert(fit_calibration(subject.calibration_at(d)));
  }
}

namespace {

std::size_t depth_slot(Depth d) { return d == Depth::Far200 ? 0 : 1; }

}  // namespace

void CalibrationBank::insert(CalibrationModel model) {
  auto& slots = models_[model.subject_id];
  slots[depth_slot(model.fitted_depth)] = std::move(model);
}

const CalibrationModel& CalibrationBank::at(const std::string& subject_id, Depth depth) const {
  const auto it = models_.find(subject_id);
  if (it == models_.end() || !it->second[depth_slot(depth)]) {
    throw ValidationError("no " + std::to_string(to_cm(depth)) + " cm calibration model for subject '" +
                          subject_id + "'");
  }
  return *it->second[depth_slot(depth)];
}

const CalibrationModel& resolve_verification_calibration(Scenario scenario, const std::string& claimed_subject,
                                                         const std::string& actual_subject,
                                                         const CalibrationBank& bank) {
  switch (scenario) {
    case Scenario::S1: return bank.at(actual_subject, Depth::Far200);
    case Scenario::S2: return bank.at(actual_subject, Depth::Near75);
    case Scenario::S3: return bank.at(claimed_subject, Depth::Far200);
  }
  throw ValidationError("unknown scenario");
}

const CalibrationModel& enrollment_calibration(const std::string& enrolled_subject, const CalibrationBank& bank) {
  return bank.at(enrolled_subject, Depth::Far200);
}

TrainingSet build_training_set(const Dataset& ds, const CalibrationBank& bank, Axis axis,
                               CalibTraining calib_training, bool filter_on) {
  struct Pending {
    RawWindow raw;
    const Recording* rec;
  };
  std::vector<Pending> pending;
  for (const auto& id : ds.subject_ids(Split::Train)) {
    std::vector<CalibrationModel> models;
    if (axis != Axis::O) {
      models.push_back(bank.at(id, Depth::Far200));
      if (calib_training == CalibTraining::All) models.push_back(bank.at(id, Depth::Near75));
    }
    for (const auto& rec : ds.subject(id).task_recordings) {
      for (auto& raw : raw_windows(rec, axis, models, filter_on)) pending.push_back({std::move(raw), &rec});
    }
  }
  if (pending.empty()) throw ValidationError("training set is empty");

  std::vector<ChannelMatrix> values;
  values.reserve(pending.size());
  for (const auto& p : pending) values.push_back(p.raw.values);
  TrainingSet set;
  set.norm = fit_norm_stats(values);
  set.windows.reserve(pending.size());
  for (const auto& p : pending) {
    WindowTensor t = apply_norm(p.raw.values, set.norm);
    t.subject_id = p.rec->subject_id;
    t.recording_id = p.rec->recording_id;
    t.window_index = p.raw.window_index;
    t.calib_variant = p.raw.calib_variant;
    set.windows.push_back(std::move(t));
  }
  return set;
}

std::string training_key(const ExperimentSpec& spec) {
  // Optical-only models never see a calibration.
  const std::string_view calib = spec.axis == Axis::O ? "-" : to_string(spec.calib_training);
  return std::string(to_string(spec.pipeline)) + "/" + std::string(to_string(spec.axis)) + "/" +
         std::string(calib) + "/" + std::string(to_string(spec.regime)) + "/" +
         (spec.filter ? "filter" : "nofilter");
}

EvaluationOutput evaluate(const ExperimentSpec& spec, const Dataset& ds, const CalibrationBank& bank,
                          const TrainedModel& model, double far_target) {
  spec.validate();
  const int n_seg = segments_for_seconds(spec.verification_seconds);
  const auto test_ids = ds.subject_ids(Split::Test);
  if (test_ids.empty()) throw ValidationError("evaluation: dataset has no test subjects");

  auto recording = [&](const std::string& id, std::size_t which) -> const Recording& {
    const auto& recs = ds.subject(id).task_recordings;
    if (recs.size() < 2) {
      throw ValidationError("subject '" + id + "' needs 2 task recordings for enrollment and verification, has " +
                            std::to_string(recs.size()));
    }
    return recs[which];
  };
  auto centroid = [&](const Recording& rec, const CalibrationModel& calib) {
    std::span<const CalibrationModel> models;
    if (spec.axis != Axis::O) models = std::span<const CalibrationModel>(&calib, 1);
    const auto raws = raw_windows(rec, spec.axis, models, spec.filter);
    if (raws.size() < static_cast<std::size_t>(n_seg)) {
      throw ValidationError("recording '" + rec.recording_id + "' yields " + std::to_string(raws.size()) +
                            " windows, need " + std::to_string(n_seg));
    }
    std::vector<Matrix<float>> windows;
    for (int i = 0; i < n_seg; ++i) windows.push_back(apply_norm(raws[static_cast<std::size_t>(i)].values, model.norm).values);
    return centroid_embedding(model.params, windows, n_seg);
  };

  EmbeddingMap enroll;
  for (const auto& id : test_ids) enroll[id] = centroid(recording(id, 0), enrollment_calibration(id, bank));

  // Verification centroids depend on the calibration in force, which for S3
  // depends on the claimed identity.
  std::map<std::tuple<std::string, std::string, int>, Eigen::VectorXd> verify_cache;
  auto verify_centroid = [&](const std::string& actual, const std::string& claimed) -> const Eigen::VectorXd& {
    const CalibrationModel& calib = resolve_verification_calibration(spec.scenario, claimed, actual, bank);
    auto key = spec.axis == Axis::O ? std::make_tuple(actual, std::string(), 0)
                                    : std::make_tuple(actual, calib.subject_id, to_cm(calib.fitted_depth));
    auto it = verify_cache.find(key);
    if (it == verify_cache.end()) it = verify_cache.emplace(key, centroid(recording(actual, 1), calib)).first;
    return it->second;
  };

  std::map<int, std::vector<std::string>> folds;
  for (const auto& id : test_ids) {
    const auto it = ds.folds.find(id);
    if (it == ds.folds.end()) throw ValidationError("test subject '" + id + "' has no fold");
    folds[it->second].push_back(id);
  }
  if (folds.size() < 2) throw ValidationError("evaluation needs at least 2 folds");

  EvaluationOutput out;
  for (const auto& [fold, members] : folds) {
    ScoreSet fold_scores;
    for (const auto& v : members) {
      for (const auto& [e, enrolled] : enroll) {
        fold_scores.scores.push_back({cosine_similarity(verify_centroid(v, e), enrolled), v == e, v, e});
      }
    }
    const FrrAtFar frr = frr_at_far(fold_scores, far_target);
    out.folds.push_back({fold, eer(fold_scores), frr.frr, frr.unresolved_far});
    out.scores.scores.insert(out.scores.scores.end(), fold_scores.scores.begin(), fold_scores.scores.end());
  }
  return out;
}

ExperimentRunner::ExperimentRunner(HarnessConfig cfg, LogFn log) : cfg_(std::move(cfg)), log_(std::move(log)) {
  cfg_.validate();
}

ExperimentRunner::PipelineData& ExperimentRunner::data(Pipeline pipeline) {
  auto& slot = data_[pipeline];
  if (!slot) {
    if (log_) log_("synthesizing " + std::string(to_string(pipeline)) + " pipeline dataset");
    SynthConfig synth = cfg_.synth;
    synth.seed = cfg_.seed;
    auto d = std::make_unique<PipelineData>();
    d->dataset = generate_dataset(synth, pipeline_noise(pipeline));
    d->bank = CalibrationBank(d->dataset);
    slot = std::move(d);
  }
  return *slot;
}

const Dataset& ExperimentRunner::dataset(Pipeline pipeline) { return data(pipeline).dataset; }

const CalibrationBank& ExperimentRunner::bank(Pipeline pipeline) { return data(pipeline).bank; }

void ExperimentRunner::set_dataset(Pipeline pipeline, Dataset ds) {
  validate_dataset(ds);
  auto d = std::make_unique<PipelineData>();
  d->bank = CalibrationBank(ds);
  d->dataset = std::move(ds);
  data_[pipeline] = std::move(d);
  for (auto it = models_.begin(); it != models_.end();) {
    it = it->first.starts_with(std::string(to_string(pipeline)) + "/") ? models_.erase(it) : std::next(it);
  }
}

const TrainedModel& ExperimentRunner::model(const ExperimentSpec& spec) {
  const std::string key = training_key(spec);
  auto& slot = models_[key];
  if (!slot) {
    PipelineData& d = data(spec.pipeline);
    TrainingSet set = build_training_set(d.dataset, d.bank, spec.axis, spec.calib_training, spec.filter);
    EmbedderConfig ecfg = cfg_.embedder;
    ecfg.input_channels = channel_count(spec.axis);
    const TrainConfig tcfg = regime_train_config(spec.regime, cfg_.scale, cfg_.seed);
    if (log_) {
      log_("training " + key + " on " + std::to_string(set.windows.size()) + " windows, " +
           std::to_string(tcfg.epochs) + " epochs, minibatch " + std::to_string(tcfg.users_per_batch) + "x" +
           std::to_string(tcfg.samples_per_user));
    }
    TrainResult tr = train(set.windows, ecfg, tcfg, cfg_.ms_loss);
    auto m = std::make_unique<TrainedModel>();
    m->params = std::move(tr.params);
    m->norm = std::move(set.norm);
    m->history = std::move(tr.history);
    slot = std::move(m);
  }
  return *slot;
}

namespace {

ExperimentResult finish(const ExperimentSpec& spec, const TrainedModel& model, const EvaluationOutput& eval,
                        const std::filesystem::path& out_dir, double elapsed_s) {
  std::vector<double> eers, frrs;
  bool unresolved = false;
  for (const auto& f : eval.folds) {
    eers.push_back(f.eer);
    frrs.push_back(f.frr_at_far);
    unresolved = unresolved || f.unresolved_far;
  }
  const FoldSummary e = aggregate_folds(eers);
  const FoldSummary f = aggregate_folds(frrs);
  ExperimentResult result{spec.exp_id, e.mean, e.sd, f.mean, f.sd, unresolved, elapsed_s};

  const auto dir = out_dir / spec.exp_id;
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  save_checkpoint(model.params, dir / "model.ekyb");
  write_norm_stats_csv(model.norm, dir / "norm_stats.csv");
  write_history_csv(model.history, dir / "history.csv");
  write_scores_csv(eval.scores, dir / "scores.csv");
  write_metrics_csv(eval.folds, dir / "metrics.csv");
  // Runtime is kept out of the file so that reruns are byte-identical.
  ExperimentResult stored = result;
  stored.runtime_s = 0.0;
  write_result_csv({stored}, dir / "result.csv");
  return result;
}

}  // namespace

ExperimentResult ExperimentRunner::run(const ExperimentSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  if (spec.scenario == Scenario::S3 && !cfg_.experimental_s3) {
    throw ValidationError("scenario S3 requires --experimental-s3");
  }
  const auto start = std::chrono::steady_clock::now();
  const TrainedModel& m = model(spec);
  PipelineData& d = data(spec.pipeline);
  if (log_) log_("evaluating " + spec.exp_id);
  const EvaluationOutput eval = evaluate(spec, d.dataset, d.bank, m, cfg_.far_target);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return finish(spec, m, eval, out_dir, elapsed);
}

ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& ds, const HarnessConfig& cfg,
                                const std::filesystem::path& out_dir) {
  ExperimentRunner runner(cfg);
  runner.set_dataset(spec.pipeline, ds);
  return runner.run(spec, out_dir);
}

std::vector<ExperimentSpec> enumerate_grid(const GridAxes& axes, bool experimental_s3) {
  std::vector<ExperimentSpec> specs;
  std::set<Scenario> seen;
  for (Scenario s : axes.scenarios) {
    if (!seen.insert(s).second) throw ValidationError("grid lists scenario " + std::string(to_string(s)) + " twice");
    if (s == Scenario::S3 && !experimental_s3) throw ValidationError("scenario S3 requires --experimental-s3");
    int n = 0;
    for (CalibTraining c : axes.calib_training)
      for (Pipeline p : axes.pipelines)
        for (Axis a : axes.axes)
          for (Regime r : axes.regimes)
            for (bool f : axes.filters) {
              ExperimentSpec spec;
              spec.scenario = s;
              spec.calib_training = c;
              spec.pipeline = p;
              spec.axis = a;
              spec.regime = r;
              spec.filter = f;
              spec.experimental = experimental_s3;
              spec.exp_id = std::string(to_string(s)) + "@" + std::to_string(++n);
              specs.push_back(spec);
            }
  }
  return specs;
}

void write_norm_stats_csv(const NormStats& stats, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "channel,mean,sd\n";
  for (std::size_t c = 0; c < stats.channels(); ++c) {
    out << c << ',' << format_real(stats.mean[c]) << ',' << format_real(stats.sd[c]) << '\n';
  }
  detail::check_stream(out, path);
}

NormStats read_norm_stats_csv(const std::filesystem::path& path) {
  detail::CsvReader reader(path, "channel,mean,sd");
  NormStats stats;
  std::vector<std::string_view> f;
  while (reader.next(f, 3)) {
    if (f[0] != std::to_string(stats.channels())) reader.fail("channels must be listed in order");
    stats.mean.push_back(parse_real(f[1]));
    stats.sd.push_back(parse_real(f[2]));
    if (!(stats.sd.back() > 0.0)) reader.fail("standard deviation must be positive");
  }
  if (stats.channels() != 4 && stats.channels() != 8) reader.fail("expected 4 or 8 channels");
  return stats;
}

void write_result_csv(const std::vector<ExperimentResult>& results, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "exp_id,eer_mean,eer_sd,frr_mean,frr_sd,unresolved_far,runtime_s\n";
  for (const auto& r : results) {
    out << r.exp_id << ',' << format_real(r.eer_mean) << ',' << format_real(r.eer_sd) << ','
        << format_real(r.frr_mean) << ',' << format_real(r.frr_sd) << ',' << (r.unresolved_far ? 1 : 0) << ','
        << format_real(r.runtime_s) << '\n';
  }
  detail::check_stream(out, path);
}

std::vector<ExperimentResult> read_result_csv(const std::filesystem::path& path) {
  detail::CsvReader reader(path, "exp_id,eer_mean,eer_sd,frr_mean,frr_sd,unresolved_far,runtime_s");
  std::vector<ExperimentResult> results;
  std::vector<std::string_view> f;
  while (reader.next(f, 7)) {
    ExperimentResult r;
    r.exp_id = std::string(f[0]);
    r.eer_mean = parse_real(f[1]);
    r.eer_sd = parse_real(f[2]);
    r.frr_mean = parse_real(f[3]);
    r.frr_sd = parse_real(f[4]);
    if (f[5] != "0" && f[5] != "1") reader.fail("unresolved_far must be 0 or 1");
    r.unresolved_far = f[5] == "1";
    r.runtime_s = parse_real(f[6]);
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace gazeauth
