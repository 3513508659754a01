#include "gazeauth/domain.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <utility>

#include "gazeauth/error.hpp"

namespace gazeauth {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct Unit3 {
  double x, y, z;
};

Unit3 to_unit(Gaze g) {
  const double yaw = g.yaw * kDegToRad;
  const double pitch = g.pitch * kDegToRad;
  return {std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
}

bool same_bits(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_bits(Gaze a, Gaze b) { return same_bits(a.yaw, b.yaw) && same_bits(a.pitch, b.pitch); }

bool in_range(Gaze g) {
  return g.yaw >= -90.0 && g.yaw <= 90.0 && g.pitch >= -90.0 && g.pitch <= 90.0;
}

}  // namespace

Gaze operator+(Gaze a, Gaze b) { return {a.yaw + b.yaw, a.pitch + b.pitch}; }
Gaze operator-(Gaze a, Gaze b) { return {a.yaw - b.yaw, a.pitch - b.pitch}; }
Gaze operator*(double s, Gaze g) { return {s * g.yaw, s * g.pitch}; }

bool is_finite(Gaze g) { return std::isfinite(g.yaw) && std::isfinite(g.pitch); }

Gaze nan_gaze() {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan};
}

// atan2 of cross and dot products is the arc-cosine of the dot product but
// stays accurate for nearly parallel directions.
double angular_distance_deg(Gaze a, Gaze b) {
  const Unit3 u = to_unit(a);
  const Unit3 v = to_unit(b);
  const double cx = u.y * v.z - u.z * v.y;
  const double cy = u.z * v.x - u.x * v.z;
  const double cz = u.x * v.y - u.y * v.x;
  const double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
  const double dot = u.x * v.x + u.y * v.y + u.z * v.z;
  return std::atan2(cross, dot) / kDegToRad;
}

std::string_view to_string(Task task) {
  switch (task) {
    case Task::Calibration: return "Calibration";
    case Task::RandomSaccade: return "RandomSaccade";
  }
  return "?";
}

std::string_view to_string(Split split) { return split == Split::Train ? "Train" : "Test"; }

Task parse_task(std::string_view text) {
  if (text == "Calibration") return Task::Calibration;
  if (text == "RandomSaccade") return Task::RandomSaccade;
  throw ValidationError("unknown task '" + std::string(text) + "'");
}

Split parse_split(std::string_view text) {
  if (text == "Train") return Split::Train;
  if (text == "Test") return Split::Test;
  throw ValidationError("unknown split '" + std::string(text) + "'");
}

Depth depth_from_cm(int cm) {
  if (cm == 75) return Depth::Near75;
  if (cm == 200) return Depth::Far200;
  throw ValidationError("target depth must be 75 or 200 cm, got " + std::to_string(cm));
}

bool bitwise_equal(const GazeSample& a, const GazeSample& b) {
  return same_bits(a.t, b.t) && same_bits(a.left_optical, b.left_optical) &&
         same_bits(a.right_optical, b.right_optical) && same_bits(a.target, b.target) &&
         a.valid == b.valid;
}

bool bitwise_equal(const Recording& a, const Recording& b) {
  if (a.subject_id != b.subject_id || a.recording_id != b.recording_id || a.task != b.task ||
      a.target_depth != b.target_depth || !same_bits(a.sample_rate_hz, b.sample_rate_hz) ||
      a.samples.size() != b.samples.size()) {
    return false;
  }
  return std::equal(a.samples.begin(), a.samples.end(), b.samples.begin(),
                    [](const GazeSample& x, const GazeSample& y) { return bitwise_equal(x, y); });
}

std::size_t count_distinct_targets(const Recording& rec) {
  std::set<std::pair<double, double>> seen;
  for (const auto& s : rec.samples) seen.emplace(s.target.yaw, s.target.pitch);
  return seen.size();
}

void validate_recording(const Recording& rec) {
  const std::string where = "recording '" + rec.recording_id + "'";
  if (rec.sample_rate_hz != kSampleRateHz) {
    throw ValidationError(where + ": sample rate must be 72 Hz");
  }
  const double step = 1.0 / rec.sample_rate_hz;
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    const GazeSample& s = rec.samples[i];
    if (i > 0) {
      const double dt = s.t - rec.samples[i - 1].t;
      if (!(dt > 0.0) || std::abs(dt - step) > kTimestampTolerance) {
        throw ValidationError(where + ": non-monotone or irregular timestamp at sample " +
                              std::to_string(i));
      }
    }
    if (!is_finite(s.target) || !in_range(s.target)) {
      throw ValidationError(where + ": target out of range at sample " + std::to_string(i));
    }
    if (s.valid) {
      if (!is_finite(s.left_optical) || !is_finite(s.right_optical) || !in_range(s.left_optical) ||
          !in_range(s.right_optical)) {
        throw ValidationError(where + ": valid sample with out-of-range gaze at sample " +
                              std::to_string(i));
      }
    }
  }
  if (rec.task == Task::Calibration && count_distinct_targets(rec) < 9) {
    throw ValidationError(where + ": calibration recording needs at least 9 distinct targets");
  }
}

const Recording& SubjectRecord::calibration_at(Depth depth) const {
  for (const auto& r : calibration_recordings) {
    if (r.target_depth == depth) return r;
  }
  throw ValidationError("subject '" + subject_id + "' has no calibration at " +
                        std::to_string(to_cm(depth)) + " cm");
}

const SubjectRecord& Dataset::subject(std::string_view id) const {
  for (const auto& s : subjects) {
    if (s.subject_id == id) return s;
  }
  throw ValidationError("unknown subject '" + std::string(id) + "'");
}

std::vector<std::string> Dataset::subject_ids(Split which) const {
  std::vector<std::string> ids;
  for (const auto& s : subjects) {
    auto it = split.find(s.subject_id);
    if (it != split.end() && it->second == which) ids.push_back(s.subject_id);
  }
  return ids;
}

std::size_t Dataset::recording_count() const {
  std::size_t n = 0;
  for (const auto& s : subjects) n += s.calibration_recordings.size() + s.task_recordings.size();
  return n;
}

bool bitwise_equal(const Dataset& a, const Dataset& b) {
  if (a.split != b.split || a.folds != b.folds || a.subjects.size() != b.subjects.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    const auto& x = a.subjects[i];
    const auto& y = b.subjects[i];
    if (x.subject_id != y.subject_id ||
        x.calibration_recordings.size() != y.calibration_recordings.size() ||
        x.task_recordings.size() != y.task_recordings.size()) {
      return false;
    }
    for (std::size_t j = 0; j < x.calibration_recordings.size(); ++j) {
      if (!bitwise_equal(x.calibration_recordings[j], y.calibration_recordings[j])) return false;
    }
    for (std::size_t j = 0; j < x.task_recordings.size(); ++j) {
      if (!bitwise_equal(x.task_recordings[j], y.task_recordings[j])) return false;
    }
  }
  return true;
}

void validate_dataset(const Dataset& ds) {
  std::set<std::string> subject_ids;
  std::set<std::string> recording_ids;
  for (const auto& s : ds.subjects) {
    if (!subject_ids.insert(s.subject_id).second) {
      throw ValidationError("duplicate subject_id '" + s.subject_id + "'");
    }
    if (!ds.split.contains(s.subject_id)) {
      throw ValidationError("subject '" + s.subject_id + "' has no split");
    }
    if (s.calibration_recordings.size() != 2 ||
        s.calibration_recordings[0].target_depth != Depth::Far200 ||
        s.calibration_recordings[1].target_depth != Depth::Near75) {
      throw ValidationError("subject '" + s.subject_id +
                            "' needs two calibrations ordered 200 cm then 75 cm");
    }
    if (s.task_recordings.empty()) {
      throw ValidationError("subject '" + s.subject_id + "' has no task recordings");
    }
    auto check = [&](const Recording& r, Task expected) {
      if (r.subject_id != s.subject_id) {
        throw ValidationError("recording '" + r.recording_id + "' belongs to another subject");
      }
      if (r.task != expected) {
        throw ValidationError("recording '" + r.recording_id + "' has the wrong task kind");
      }
      if (!recording_ids.insert(r.recording_id).second) {
        throw ValidationError("duplicate recording_id '" + r.recording_id + "'");
      }
      validate_recording(r);
    };
    for (const auto& r : s.calibration_recordings) check(r, Task::Calibration);
    for (const auto& r : s.task_recordings) check(r, Task::RandomSaccade);
  }
  if (ds.split.size() != ds.subjects.size()) {
    throw ValidationError("split map names subjects that are not in the dataset");
  }
  std::size_t n_test = 0;
  for (const auto& [id, sp] : ds.split) {
    if (sp == Split::Test) ++n_test;
    const bool has_fold = ds.folds.contains(id);
    if (sp == Split::Train && has_fold) {
      throw ValidationError("train subject '" + id + "' has a fold");
    }
  }
  if (!ds.folds.empty()) {
    if (ds.folds.size() != n_test) {
      throw ValidationError("every test subject needs exactly one fold");
    }
    std::map<int, std::size_t> sizes;
    for (const auto& [id, f] : ds.folds) {
      if (f < 0) throw ValidationError("negative fold for subject '" + id + "'");
      ++sizes[f];
    }
    std::size_t lo = n_test, hi = 0;
    const int k = sizes.rbegin()->first + 1;
    for (int f = 0; f < k; ++f) {
      const std::size_t n = sizes.contains(f) ? sizes[f] : 0;
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    if (hi - lo > 1) throw ValidationError("fold sizes differ by more than one");
  }
}

Dataset assign_folds(Dataset ds, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("fold count must be at least 2");
  std::vector<std::string> ids = ds.subject_ids(Split::Test);
  if (ids.size() < static_cast<std::size_t>(k)) {
    throw ValidationError("only " + std::to_string(ids.size()) + " test subjects for " +
                          std::to_string(k) + " folds");
  }
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  ds.folds.clear();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    ds.folds[ids[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
  }
  return ds;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  if (std::strtod(buf, nullptr) == v) return buf;
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_real(std::string_view text) {
  if (text == "nan" || text == "NaN" || text == "-nan") {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ValidationError("not a number: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace gazeauth
