#include <charconv>
#include <map>
#include <set>

#include "csv.hpp"
#include "gazeauth/domain.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestHeader =
    "subject_id,recording_id,task,target_depth_cm,split,fold,samples_file";
constexpr std::string_view kSamplesHeader =
    "t,left_opt_yaw,left_opt_pitch,right_opt_yaw,right_opt_pitch,tgt_yaw,tgt_pitch,valid";

void check_identifier(const std::string& id, std::string_view what) {
  if (id.empty() || id.find_first_of(",\n\r/\\") != std::string::npos) {
    throw ValidationError(std::string(what) + " '" + id + "' is empty or contains a separator");
  }
}

void write_samples(const Recording& rec, const fs::path& path) {
  auto out = detail::open_for_write(path);
  out << kSamplesHeader << '\n';
  for (const auto& s : rec.samples) {
    out << format_real(s.t) << ',' << format_real(s.left_optical.yaw) << ','
        << format_real(s.left_optical.pitch) << ',' << format_real(s.right_optical.yaw) << ','
        << format_real(s.right_optical.pitch) << ',' << format_real(s.target.yaw) << ','
        << format_real(s.target.pitch) << ',' << (s.valid ? '1' : '0') << '\n';
  }
  detail::check_stream(out, path);
}

std::vector<GazeSample> read_samples(const fs::path& path) {
  detail::CsvReader reader(path, kSamplesHeader);
  std::vector<GazeSample> samples;
  std::vector<std::string_view> f;
  while (reader.next(f, 8)) {
    try {
      GazeSample s;
      s.t = parse_real(f[0]);
      s.left_optical = {parse_real(f[1]), parse_real(f[2])};
      s.right_optical = {parse_real(f[3]), parse_real(f[4])};
      s.target = {parse_real(f[5]), parse_real(f[6])};
      if (f[7] == "1") {
        s.valid = true;
      } else if (f[7] == "0") {
        s.valid = false;
      } else {
        throw ValidationError("valid must be 0 or 1");
      }
      samples.push_back(s);
    } catch (const ValidationError& e) {
      reader.fail(e.what());
    }
  }
  return samples;
}

int parse_int(std::string_view text) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace

void save_dataset(const Dataset& ds, const fs::path& root) {
  std::set<std::string> ids;
  for (const auto& s : ds.subjects) {
    check_identifier(s.subject_id, "subject_id");
    for (const auto* group : {&s.calibration_recordings, &s.task_recordings}) {
      for (const auto& r : *group) {
        check_identifier(r.recording_id, "recording_id");
        if (!ids.insert(r.recording_id).second) {
          throw ValidationError("duplicate recording_id '" + r.recording_id + "'");
        }
      }
    }
  }

  std::error_code ec;
  fs::create_directories(root / "samples", ec);
  if (ec) throw IoError("cannot create '" + (root / "samples").string() + "': " + ec.message());

  const fs::path manifest_path = root / "manifest.csv";
  auto manifest = detail::open_for_write(manifest_path);
  manifest << kManifestHeader << '\n';
  for (const auto& s : ds.subjects) {
    auto sp = ds.split.find(s.subject_id);
    if (sp == ds.split.end()) {
      throw ValidationError("subject '" + s.subject_id + "' has no split");
    }
    auto fold = ds.folds.find(s.subject_id);
    const std::string fold_text = fold == ds.folds.end() ? "" : std::to_string(fold->second);
    for (const auto* group : {&s.calibration_recordings, &s.task_recordings}) {
      for (const auto& r : *group) {
        const std::string rel = "samples/" + r.recording_id + ".csv";
        manifest << s.subject_id << ',' << r.recording_id << ',' << to_string(r.task) << ','
                 << to_cm(r.target_depth) << ',' << to_string(sp->second) << ',' << fold_text
                 << ',' << rel << '\n';
        write_samples(r, root / rel);
      }
    }
  }
  detail::check_stream(manifest, manifest_path);
}

Dataset load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.csv";
  if (!fs::exists(manifest_path)) {
    throw IoError("manifest not found: '" + manifest_path.string() + "'");
  }
  detail::CsvReader reader(manifest_path, kManifestHeader);

  Dataset ds;
  std::map<std::string, std::size_t> index;
  std::vector<std::string_view> f;
  while (reader.next(f, 7)) {
    Recording rec;
    Split split = Split::Train;
    std::optional<int> fold;
    try {
      rec.subject_id = std::string(f[0]);
      rec.recording_id = std::string(f[1]);
      rec.task = parse_task(f[2]);
      rec.target_depth = depth_from_cm(parse_int(f[3]));
      split = parse_split(f[4]);
      if (!f[5].empty()) fold = parse_int(f[5]);
    } catch (const ValidationError& e) {
      reader.fail(e.what());
    }
    const fs::path samples_path = root / std::string(f[6]);
    if (!fs::exists(samples_path)) {
      reader.fail("samples file for recording '" + rec.recording_id + "' is missing: '" +
                  samples_path.string() + "'");
    }
    rec.samples = read_samples(samples_path);

    auto [it, inserted] = index.try_emplace(rec.subject_id, ds.subjects.size());
    if (inserted) {
      ds.subjects.push_back(SubjectRecord{rec.subject_id, {}, {}});
      ds.split[rec.subject_id] = split;
      if (fold) ds.folds[rec.subject_id] = *fold;
    } else {
      if (ds.split[rec.subject_id] != split) {
        reader.fail("subject '" + rec.subject_id + "' has conflicting splits");
      }
      const bool had_fold = ds.folds.contains(rec.subject_id);
      if (had_fold != fold.has_value() || (fold && ds.folds[rec.subject_id] != *fold)) {
        reader.fail("subject '" + rec.subject_id + "' has conflicting folds");
      }
    }
    auto& subject = ds.subjects[it->second];
    if (rec.task == Task::Calibration) {
      subject.calibration_recordings.push_back(std::move(rec));
    } else {
      subject.task_recordings.push_back(std::move(rec));
    }
  }
  validate_dataset(ds);
  return ds;
}

}  // namespace gazeauth
