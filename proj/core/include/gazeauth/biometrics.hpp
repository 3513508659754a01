#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gazeauth/embedder.hpp"

namespace gazeauth {

struct Score {
  double similarity = 0.0;
  bool genuine = false;
  std::string verify_subject;
  std::string enroll_subject;
};

struct ScoreSet {
  std::vector<Score> scores;

  std::size_t genuine_count() const;
  std::size_t impostor_count() const;
};

// Scores >= threshold are accepted.
struct RocPoint {
  double threshold = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// Points in rising threshold order: one per distinct score, then +inf.
struct RocCurve {
  std::vector<RocPoint> points;
};

RocCurve roc_curve(const ScoreSet& scores);

double eer(const ScoreSet& scores);

struct FrrAtFar {
  double frr = 0.0;
  bool unresolved_far = false;
};

FrrAtFar frr_at_far(const ScoreSet& scores, double far_target);

struct FoldSummary {
  double mean = 0.0;
  double sd = 0.0;
};

// Mean and sample standard deviation.
FoldSummary aggregate_folds(const std::vector<double>& values);

inline constexpr double kSegmentSeconds = 5.0;

// 20 s -> 4 segments; rejects durations that are not whole segments.
int segments_for_seconds(double seconds);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Mean of the embeddings of the first `n_segments` windows.
Eigen::VectorXd centroid_embedding(const EmbedderParams<float>& params,
                                   const std::vector<Matrix<float>>& windows, int n_segments);

using EmbeddingMap = std::map<std::string, Eigen::VectorXd>;

// Every verify x enroll pair, in verify-major order of subject id.
ScoreSet score_all(const EmbeddingMap& enroll, const EmbeddingMap& verify);

struct FoldMetrics {
  int fold = 0;
  double eer = 0.0;
  double frr_at_far = 0.0;
  bool unresolved_far = false;
};

void write_scores_csv(const ScoreSet& scores, const std::filesystem::path& path);
void write_metrics_csv(const std::vector<FoldMetrics>& metrics, const std::filesystem::path& path);

}  // namespace gazeauth
