#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gazeauth/embedder.hpp"
#include "gazeauth/preprocess.hpp"

namespace gazeauth {

struct MsLossConfig {
  double alpha = 2.0;
  double beta = 50.0;
  double lambda = 0.5;
  double epsilon = 0.1;

  void validate() const;
};

struct TrainConfig {
  int epochs = 100;
  int users_per_batch = 16;   // P
  int samples_per_user = 16;  // K
  double lr_base = 1e-4;
  double lr_peak = 1e-2;
  double lr_min = 1e-7;
  double warm_fraction = 0.30;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  // 100 epochs with 16 x 16 minibatches.
  static TrainConfig configuration1();
  // 1000 epochs with 32 x 32 minibatches.
  static TrainConfig configuration2();

  int minibatch_size() const { return users_per_batch * samples_per_user; }
  void validate() const;
};

// Window indices grouped by subject, restricted to subjects holding at least
// `min_per_subject` windows.
class SubjectPool {
 public:
  SubjectPool(std::span<const WindowTensor> windows, int min_per_subject);

  const std::vector<std::string>& subjects() const { return subjects_; }
  const std::vector<std::size_t>& windows_of(std::size_t subject) const { return members_[subject]; }
  std::size_t window_count() const { return window_count_; }
  std::size_t excluded_subjects() const { return excluded_; }

 private:
  std::vector<std::string> subjects_;
  std::vector<std::vector<std::size_t>> members_;
  std::size_t window_count_ = 0;
  std::size_t excluded_ = 0;
};

struct Minibatch {
  std::vector<std::size_t> window_indices;
  std::vector<int> labels;  // index into SubjectPool::subjects()
};

Minibatch sample_minibatch(const SubjectPool& pool, int users, int samples_per_user,
                           std::mt19937_64& rng);

struct MinedPairs {
  std::vector<std::vector<int>> positives;
  std::vector<std::vector<int>> negatives;
};

// Keeps negative k of anchor i iff S_ik > min_p S_ip - epsilon and positive k
// iff S_ik < max_n S_in + epsilon. Anchors lacking either class get nothing.
MinedPairs mine_pairs(const Eigen::MatrixXd& sim, std::span<const int> labels, double epsilon);

// One anchor's contribution before averaging over the batch.
double ms_anchor_loss(const Eigen::MatrixXd& sim, int anchor, std::span<const int> positives,
                      std::span<const int> negatives, const MsLossConfig& cfg);

struct MsLossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad;  // d loss / d embeddings, m x dim
  MinedPairs mined;
};

MsLossResult ms_loss(const Eigen::MatrixXd& embeddings, std::span<const int> labels,
                     const MsLossConfig& cfg);

double one_cycle_lr(double progress, const TrainConfig& cfg);

template <typename Scalar>
struct AdamState {
  std::vector<std::vector<Scalar>> m;
  std::vector<std::vector<Scalar>> v;
  long step = 0;

  static AdamState zeros_for(const EmbedderParams<Scalar>& params);
};

template <typename Scalar>
void adam_step(EmbedderParams<Scalar>& params, const EmbedderParams<Scalar>& grads,
               AdamState<Scalar>& state, double lr, const TrainConfig& cfg);

struct HistoryRow {
  long step = 0;
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct TrainResult {
  EmbedderParams<float> params;
  std::vector<HistoryRow> history;
  std::size_t steps_per_epoch = 0;
};

std::size_t steps_per_epoch(std::size_t pool_windows, int minibatch_size);

using TrainProgress = std::function<void(const HistoryRow&)>;

TrainResult train(std::span<const WindowTensor> windows, const EmbedderConfig& embedder_cfg,
                  const TrainConfig& train_cfg, const MsLossConfig& ms_cfg,
                  const TrainProgress& progress = {});

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace gazeauth
