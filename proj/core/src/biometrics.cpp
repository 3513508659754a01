#include "gazeauth/biometrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csv.hpp"
#include "gazeauth/domain.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

std::size_t ScoreSet::genuine_count() const {
  return static_cast<std::size_t>(
      std::count_if(scores.begin(), scores.end(), [](const Score& s) { return s.genuine; }));
}

std::size_t ScoreSet::impostor_count() const { return scores.size() - genuine_count(); }

RocCurve roc_curve(const ScoreSet& set) {
  std::vector<std::pair<double, bool>> sorted;
  sorted.reserve(set.scores.size());
  for (const auto& s : set.scores) {
    if (!std::isfinite(s.similarity)) throw NumericError("roc: non-finite similarity score");
    sorted.emplace_back(s.similarity, s.genuine);
  }
  std::sort(sorted.begin(), sorted.end());
  const double n_gen = static_cast<double>(set.genuine_count());
  const double n_imp = static_cast<double>(set.impostor_count());

  // Walking thresholds upward, everything below the current threshold is rejected.
  RocCurve roc;
  std::size_t rejected_gen = 0, rejected_imp = 0;
  std::size_t i = 0;
  auto push = [&](double tau) {
    roc.points.push_back({tau, n_imp > 0 ? (n_imp - static_cast<double>(rejected_imp)) / n_imp : 0.0,
                          n_gen > 0 ? static_cast<double>(rejected_gen) / n_gen : 0.0});
  };
  while (i < sorted.size()) {
    const double tau = sorted[i].first;
    push(tau);
    while (i < sorted.size() && sorted[i].first == tau) {
      (sorted[i].second ? rejected_gen : rejected_imp) += 1;
      ++i;
    }
  }
  push(std::numeric_limits<double>::infinity());
  return roc;
}

namespace {

void require_both_classes(const ScoreSet& set, const char* what) {
  if (set.genuine_count() == 0 || set.impostor_count() == 0) {
    throw ValidationError(std::string(what) + ": need at least one genuine and one impostor score (have " +
                          std::to_string(set.genuine_count()) + " genuine, " +
                          std::to_string(set.impostor_count()) + " impostor)");
  }
}

}  // namespace

double eer(const ScoreSet& set) {
  require_both_classes(set, "eer");
  const auto pts = roc_curve(set).points;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double d1 = pts[i].frr - pts[i].far;
    if (d1 < 0.0) continue;
    if (d1 == 0.0) return pts[i].far;
    const double d0 = pts[i - 1].frr - pts[i - 1].far;
    const double t = d0 / (d0 - d1);
    return pts[i - 1].far + t * (pts[i].far - pts[i - 1].far);
  }
  throw NumericError("eer: ROC has no FAR/FRR crossing");
}

FrrAtFar frr_at_far(const ScoreSet& set, double far_target) {
  if (!(far_target > 0.0 && far_target <= 1.0)) {
    throw ValidationError("frr_at_far: target FAR must be in (0, 1]");
  }
  if (set.impostor_count() == 0) throw ValidationError("frr_at_far: need at least one impostor score");
  const auto pts = roc_curve(set).points;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].far > far_target) continue;
    if (pts[i].far == far_target || i == 0) return {pts[i].frr, false};
    // Smallest positive FAR is already above the target.
    if (pts[i].far == 0.0) return {pts[i].frr, true};
    const double t = (pts[i - 1].far - far_target) / (pts[i - 1].far - pts[i].far);
    return {pts[i - 1].frr + t * (pts[i].frr - pts[i - 1].frr), false};
  }
  throw NumericError("frr_at_far: ROC does not reach FAR 0");
}

FoldSummary aggregate_folds(const std::vector<double>& values) {
  if (values.size() < 2) throw ValidationError("aggregate_folds: need at least 2 folds");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

int segments_for_seconds(double seconds) {
  const double n = seconds / kSegmentSeconds;
  if (!(n >= 1.0) || n != std::floor(n)) {
    throw ValidationError("verification duration must be a positive multiple of 5 s");
  }
  return static_cast<int>(n);
}

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw NumericError("cosine: zero-norm embedding");
  return (a / na).dot(b / nb);
}

Eigen::VectorXd centroid_embedding(const EmbedderParams<float>& params,
                                   const std::vector<Matrix<float>>& windows, int n_segments) {
  if (n_segments < 1) throw ValidationError("centroid: n_segments must be positive");
  if (windows.size() < static_cast<std::size_t>(n_segments)) {
    throw ValidationError("centroid: need " + std::to_string(n_segments) + " windows, have " +
                          std::to_string(windows.size()));
  }
  const std::vector<Matrix<float>> first(windows.begin(), windows.begin() + n_segments);
  const Matrix<float> emb = forward(params, first);
  return emb.cast<double>().colwise().mean().transpose();
}

ScoreSet score_all(const EmbeddingMap& enroll, const EmbeddingMap& verify) {
  ScoreSet set;
  set.scores.reserve(enroll.size() * verify.size());
  for (const auto& [vid, v] : verify) {
    for (const auto& [eid, e] : enroll) {
      set.scores.push_back({cosine_similarity(v, e), vid == eid, vid, eid});
    }
  }
  return set;
}

void write_scores_csv(const ScoreSet& set, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "verify_subject,enroll_subject,similarity,genuine\n";
  for (const auto& s : set.scores) {
    out << s.verify_subject << ',' << s.enroll_subject << ',' << format_real(s.similarity) << ','
        << (s.genuine ? 1 : 0) << '\n';
  }
  detail::check_stream(out, path);
}

void write_metrics_csv(const std::vector<FoldMetrics>& metrics, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "fold,eer,frr_at_far,unresolved_far\n";
  for (const auto& m : metrics) {
    out << m.fold << ',' << format_real(m.eer) << ',' << format_real(m.frr_at_far) << ','
        << (m.unresolved_far ? 1 : 0) << '\n';
  }
  detail::check_stream(out, path);
}

}  // namespace gazeauth
