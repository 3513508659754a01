#include "gazeauth/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "csv.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

void MsLossConfig::validate() const {
  if (!(alpha > 0 && beta > 0 && lambda > 0 && epsilon > 0)) {
    throw ValidationError("ms loss: alpha, beta, lambda and epsilon must be positive");
  }
}

TrainConfig TrainConfig::configuration1() {
  TrainConfig c;
  c.epochs = 100;
  c.users_per_batch = 16;
  c.samples_per_user = 16;
  return c;
}

TrainConfig TrainConfig::configuration2() {
  TrainConfig c;
  c.epochs = 1000;
  c.users_per_batch = 32;
  c.samples_per_user = 32;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("train: epochs must be at least 1");
  if (users_per_batch < 2) throw ValidationError("train: need at least 2 users per batch");
  if (samples_per_user < 1) throw ValidationError("train: samples_per_user must be at least 1");
  if (!(lr_base > 0 && lr_peak > 0 && lr_min > 0)) {
    throw ValidationError("train: learning rates must be positive");
  }
  if (!(warm_fraction > 0.0 && warm_fraction < 1.0)) {
    throw ValidationError("train: warm_fraction must be in (0, 1)");
  }
}

SubjectPool::SubjectPool(std::span<const WindowTensor> windows, int min_per_subject) {
  std::map<std::string, std::vector<std::size_t>> grouped;
  for (std::size_t i = 0; i < windows.size(); ++i) grouped[windows[i].subject_id].push_back(i);
  for (auto& [id, members] : grouped) {
    if (members.size() < static_cast<std::size_t>(min_per_subject)) {
      ++excluded_;
      continue;
    }
    window_count_ += members.size();
    subjects_.push_back(id);
    members_.push_back(std::move(members));
  }
}

namespace {

// First `count` entries of a partial Fisher-Yates shuffle of 0..n-1.
std::vector<std::size_t> choose_distinct(std::size_t n, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

}  // namespace

Minibatch sample_minibatch(const SubjectPool& pool, int users, int samples_per_user,
                           std::mt19937_64& rng) {
  if (users < 1 || samples_per_user < 1) {
    throw ValidationError("minibatch: users and samples_per_user must be positive");
  }
  const std::size_t have = pool.subjects().size();
  if (have < static_cast<std::size_t>(users)) {
    throw ValidationError("minibatch: need " + std::to_string(users) + " subjects with >= " +
                          std::to_string(samples_per_user) + " windows, have " +
                          std::to_string(have) + " (short by " +
                          std::to_string(static_cast<std::size_t>(users) - have) + ")");
  }
  Minibatch batch;
  batch.window_indices.reserve(static_cast<std::size_t>(users) * samples_per_user);
  for (std::size_t s : choose_distinct(have, static_cast<std::size_t>(users), rng)) {
    const auto& members = pool.windows_of(s);
    if (members.size() < static_cast<std::size_t>(samples_per_user)) {
      throw ValidationError("minibatch: subject '" + pool.subjects()[s] + "' has too few windows");
    }
    for (std::size_t w : choose_distinct(members.size(), static_cast<std::size_t>(samples_per_user), rng)) {
      batch.window_indices.push_back(members[w]);
      batch.labels.push_back(static_cast<int>(s));
    }
  }
  return batch;
}

MinedPairs mine_pairs(const Eigen::MatrixXd& sim, std::span<const int> labels, double epsilon) {
  const auto m = static_cast<int>(labels.size());
  if (sim.rows() != m || sim.cols() != m) {
    throw ValidationError("mine_pairs: similarity matrix does not match label count");
  }
  MinedPairs mined;
  mined.positives.resize(static_cast<std::size_t>(m));
  mined.negatives.resize(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double min_pos = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    bool any_pos = false, any_neg = false;
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      if (labels[static_cast<std::size_t>(k)] == labels[static_cast<std::size_t>(i)]) {
        any_pos = true;
        min_pos = std::min(min_pos, sim(i, k));
      } else {
        any_neg = true;
        max_neg = std::max(max_neg, sim(i, k));
      }
    }
    if (!any_pos || !any_neg) continue;
    auto& pos = mined.positives[static_cast<std::size_t>(i)];
    auto& neg = mined.negatives[static_cast<std::size_t>(i)];
    for (int k = 0; k < m; ++k) {
      if (k == i) continue;
      if (labels[static_cast<std::size_t>(k)] == labels[static_cast<std::size_t>(i)]) {
        if (sim(i, k) < max_neg + epsilon) pos.push_back(k);
      } else {
        if (sim(i, k) > min_pos - epsilon) neg.push_back(k);
      }
    }
  }
  return mined;
}

double ms_anchor_loss(const Eigen::MatrixXd& sim, int anchor, std::span<const int> positives,
                      std::span<const int> negatives, const MsLossConfig& cfg) {
  double pos_sum = 0.0, neg_sum = 0.0;
  for (int k : positives) pos_sum += std::exp(-cfg.alpha * (sim(anchor, k) - cfg.lambda));
  for (int k : negatives) neg_sum += std::exp(cfg.beta * (sim(anchor, k) - cfg.lambda));
  return std::log1p(pos_sum) / cfg.alpha + std::log1p(neg_sum) / cfg.beta;
}

MsLossResult ms_loss(const Eigen::MatrixXd& embeddings, std::span<const int> labels,
                     const MsLossConfig& cfg) {
  const Eigen::Index m = embeddings.rows();
  if (m < 2) throw ValidationError("ms loss: need at least 2 embeddings");
  if (static_cast<std::size_t>(m) != labels.size()) {
    throw ValidationError("ms loss: label count does not match embeddings");
  }
  const Eigen::VectorXd norms = embeddings.rowwise().norm();
  if ((norms.array() <= 0.0).any() || !norms.allFinite()) {
    throw NumericError("ms loss: zero-length or non-finite embedding");
  }
  const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * embeddings;
  const Eigen::MatrixXd sim = unit * unit.transpose();

  MsLossResult result;
  result.mined = mine_pairs(sim, labels, cfg.epsilon);
  Eigen::MatrixXd dsim = Eigen::MatrixXd::Zero(m, m);
  const double inv_m = 1.0 / static_cast<double>(m);
  double total = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& pos = result.mined.positives[static_cast<std::size_t>(i)];
    const auto& neg = result.mined.negatives[static_cast<std::size_t>(i)];
    const int a = static_cast<int>(i);
    total += ms_anchor_loss(sim, a, pos, neg, cfg);
    double pos_sum = 0.0, neg_sum = 0.0;
    for (int k : pos) pos_sum += std::exp(-cfg.alpha * (sim(i, k) - cfg.lambda));
    for (int k : neg) neg_sum += std::exp(cfg.beta * (sim(i, k) - cfg.lambda));
    for (int k : pos) {
      dsim(i, k) += -inv_m * std::exp(-cfg.alpha * (sim(i, k) - cfg.lambda)) / (1.0 + pos_sum);
    }
    for (int k : neg) {
      dsim(i, k) += inv_m * std::exp(cfg.beta * (sim(i, k) - cfg.lambda)) / (1.0 + neg_sum);
    }
  }
  result.loss = total * inv_m;

  // S = U U^T, so dU = (dS + dS^T) U; then back through x / |x|.
  const Eigen::MatrixXd dunit = (dsim + dsim.transpose()) * unit;
  result.grad.resize(m, embeddings.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::RowVectorXd u = unit.row(i);
    const Eigen::RowVectorXd g = dunit.row(i);
    result.grad.row(i) = (g - g.dot(u) * u) / norms(i);
  }
  return result;
}

double one_cycle_lr(double progress, const TrainConfig& cfg) {
  const double p = std::clamp(progress, 0.0, 1.0);
  const double w = cfg.warm_fraction;
  if (p <= w) {
    const double s = 0.5 * (1.0 - std::cos(std::numbers::pi * p / w));
    return cfg.lr_base * (1.0 - s) + cfg.lr_peak * s;
  }
  const double c = 0.5 * (1.0 + std::cos(std::numbers::pi * (p - w) / (1.0 - w)));
  return cfg.lr_min * (1.0 - c) + cfg.lr_peak * c;
}

template <typename S>
AdamState<S> AdamState<S>::zeros_for(const EmbedderParams<S>& params) {
  AdamState<S> st;
  for (const auto& t : params.tensors) {
    st.m.emplace_back(t.data.size(), S(0));
    st.v.emplace_back(t.data.size(), S(0));
  }
  return st;
}

template <typename S>
void adam_step(EmbedderParams<S>& params, const EmbedderParams<S>& grads, AdamState<S>& state,
               double lr, const TrainConfig& cfg) {
  if (grads.tensors.size() != params.tensors.size() || state.m.size() != params.tensors.size() ||
      state.v.size() != params.tensors.size()) {
    throw ValidationError("adam: parameter, gradient and state layouts differ");
  }
  ++state.step;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& p = params.tensors[t].data;
    const auto& g = grads.tensors[t].data;
    auto& m = state.m[t];
    auto& v = state.v[t];
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
      throw ValidationError("adam: shape mismatch in tensor '" + params.tensors[t].name + "'");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.adam_eps);
      p[i] = static_cast<S>(static_cast<double>(p[i]) - update);
    }
  }
}

template struct AdamState<float>;
template struct AdamState<double>;
template void adam_step<float>(EmbedderParams<float>&, const EmbedderParams<float>&,
                               AdamState<float>&, double, const TrainConfig&);
template void adam_step<double>(EmbedderParams<double>&, const EmbedderParams<double>&,
                                AdamState<double>&, double, const TrainConfig&);

std::size_t steps_per_epoch(std::size_t pool_windows, int minibatch_size) {
  if (minibatch_size < 1) throw ValidationError("minibatch size must be positive");
  const auto m = static_cast<std::size_t>(minibatch_size);
  return std::max<std::size_t>(1, (pool_windows + m - 1) / m);
}

TrainResult train(std::span<const WindowTensor> windows, const EmbedderConfig& embedder_cfg,
                  const TrainConfig& train_cfg, const MsLossConfig& ms_cfg,
                  const TrainProgress& progress) {
  embedder_cfg.validate();
  train_cfg.validate();
  ms_cfg.validate();
  const SubjectPool pool(windows, train_cfg.samples_per_user);
  if (pool.subjects().empty()) throw ValidationError("train: no subject has enough windows");
  if (pool.subjects().size() < static_cast<std::size_t>(train_cfg.users_per_batch)) {
    throw ValidationError("train: " + std::to_string(pool.subjects().size()) +
                          " eligible subjects, minibatch needs " +
                          std::to_string(train_cfg.users_per_batch));
  }
  for (const auto& w : windows) {
    if (w.values.cols() != embedder_cfg.input_channels) {
      throw ValidationError("train: window channel count does not match the embedder");
    }
  }

  TrainResult result;
  result.params = init_params<float>(embedder_cfg, train_cfg.seed);
  result.steps_per_epoch = steps_per_epoch(pool.window_count(), train_cfg.minibatch_size());
  const std::size_t total = result.steps_per_epoch * static_cast<std::size_t>(train_cfg.epochs);
  AdamState<float> adam = AdamState<float>::zeros_for(result.params);
  std::mt19937_64 rng(train_cfg.seed ^ 0xA5A5A5A5DEADBEEFULL);

  std::vector<Matrix<float>> batch;
  for (std::size_t step = 0; step < total; ++step) {
    const double lr = one_cycle_lr(static_cast<double>(step) / static_cast<double>(total), train_cfg);
    const Minibatch mb = sample_minibatch(pool, train_cfg.users_per_batch, train_cfg.samples_per_user, rng);
    batch.clear();
    for (std::size_t idx : mb.window_indices) batch.push_back(windows[idx].values);

    const ForwardTape<float> tape = forward_with_tape(result.params, batch);
    const MsLossResult loss = ms_loss(tape.embeddings.cast<double>(), mb.labels, ms_cfg);
    if (!std::isfinite(loss.loss)) throw NumericError("train: loss became non-finite");
    const Matrix<float> upstream = loss.grad.cast<float>();
    const EmbedderParams<float> grads = backward(result.params, batch, tape, upstream);
    adam_step(result.params, grads, adam, lr, train_cfg);

    HistoryRow row{static_cast<long>(step), static_cast<int>(step / result.steps_per_epoch), lr, loss.loss};
    result.history.push_back(row);
    if (progress) progress(row);
  }
  return result;
}

void write_history_csv(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  auto out = detail::open_for_write(path);
  out << "step,epoch,lr,loss\n";
  for (const auto& h : history) {
    out << h.step << ',' << h.epoch << ',' << format_real(h.lr) << ',' << format_real(h.loss) << '\n';
  }
  detail::check_stream(out, path);
}

}  // namespace gazeauth
