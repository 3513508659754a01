#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazeauth {

inline constexpr double kSampleRateHz = 72.0;
inline constexpr double kTimestampTolerance = 1e-9;

// A gaze direction in degrees. Yaw is horizontal (positive right), pitch is
// vertical (positive up).
struct Gaze {
  double yaw = 0.0;
  double pitch = 0.0;

  friend bool operator==(const Gaze&, const Gaze&) = default;
};

Gaze operator+(Gaze a, Gaze b);
Gaze operator-(Gaze a, Gaze b);
Gaze operator*(double s, Gaze g);

bool is_finite(Gaze g);
Gaze nan_gaze();

// Great-circle distance in degrees between two (yaw, pitch) directions.
double angular_distance_deg(Gaze a, Gaze b);

enum class Task { Calibration, RandomSaccade };
enum class Split { Train, Test };
enum class Depth : int { Near75 = 75, Far200 = 200 };

std::string_view to_string(Task task);
std::string_view to_string(Split split);
Task parse_task(std::string_view text);
Split parse_split(std::string_view text);
Depth depth_from_cm(int cm);
inline int to_cm(Depth d) { return static_cast<int>(d); }

struct GazeSample {
  double t = 0.0;
  Gaze left_optical;
  Gaze right_optical;
  Gaze target;
  bool valid = true;
};

// Equality treats NaN payloads as equal to each other so that invalid samples
// compare equal after a save/load cycle.
bool bitwise_equal(const GazeSample& a, const GazeSample& b);

struct Recording {
  std::string subject_id;
  std::string recording_id;
  Task task = Task::RandomSaccade;
  Depth target_depth = Depth::Far200;
  double sample_rate_hz = kSampleRateHz;
  std::vector<GazeSample> samples;

  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

bool bitwise_equal(const Recording& a, const Recording& b);

// Number of distinct stimulus positions held by the target trace.
std::size_t count_distinct_targets(const Recording& rec);

// Throws ValidationError when timestamps, angle ranges or the calibration
// target count break the recording invariants.
void validate_recording(const Recording& rec);

struct SubjectRecord {
  std::string subject_id;
  std::vector<Recording> calibration_recordings;  // [0] at 200 cm, [1] at 75 cm
  std::vector<Recording> task_recordings;

  const Recording& calibration_at(Depth depth) const;
};

struct Dataset {
  std::vector<SubjectRecord> subjects;
  std::map<std::string, Split> split;
  std::map<std::string, int> folds;  // test subjects only

  const SubjectRecord& subject(std::string_view id) const;
  std::vector<std::string> subject_ids(Split which) const;
  std::size_t recording_count() const;
};

bool bitwise_equal(const Dataset& a, const Dataset& b);

void validate_dataset(const Dataset& ds);

// Writes `manifest.csv` and `samples/<recording_id>.csv` under root.
void save_dataset(const Dataset& ds, const std::filesystem::path& root);
Dataset load_dataset(const std::filesystem::path& root);

// Seeded shuffle of the test subject ids followed by round-robin assignment.
Dataset assign_folds(Dataset ds, int k, std::uint64_t seed);

// Renders a double with 9 significant digits when that round-trips exactly,
// otherwise with the shortest exact representation; NaN renders as `nan`.
std::string format_real(double v);
double parse_real(std::string_view text);

}  // namespace gazeauth
