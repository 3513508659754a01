#include "gazeauth/embedder.hpp"

#include <cmath>
#include <random>

#include "gazeauth/error.hpp"

namespace gazeauth {

namespace {

// SiLU: x * sigmoid(x).
template <typename S>
S activate(S z) {
  return z / (S(1) + std::exp(-z));
}

template <typename S>
S activate_grad(S z) {
  const S s = S(1) / (S(1) + std::exp(-z));
  return s * (S(1) + z * (S(1) - s));
}

std::string conv_name(int layer, const char* part) {
  return "conv" + std::to_string(layer) + "." + part;
}

// Per-tap weight matrices (in x out) for one conv layer.
template <typename S>
std::vector<Matrix<S>> tap_matrices(const Tensor<S>& w) {
  const int out = w.shape[0], in = w.shape[1], k = w.shape[2];
  std::vector<Matrix<S>> taps(static_cast<std::size_t>(k), Matrix<S>(in, out));
  for (int g = 0; g < out; ++g) {
    for (int c = 0; c < in; ++c) {
      for (int j = 0; j < k; ++j) {
        taps[static_cast<std::size_t>(j)](c, g) =
            w.data[(static_cast<std::size_t>(g) * in + c) * k + j];
      }
    }
  }
  return taps;
}

template <typename S>
void scatter_taps(const std::vector<Matrix<S>>& taps, Tensor<S>& w) {
  const int out = w.shape[0], in = w.shape[1], k = w.shape[2];
  for (int g = 0; g < out; ++g) {
    for (int c = 0; c < in; ++c) {
      for (int j = 0; j < k; ++j) {
        w.data[(static_cast<std::size_t>(g) * in + c) * k + j] = taps[static_cast<std::size_t>(j)](c, g);
      }
    }
  }
}

struct TapRange {
  Eigen::Index out_begin = 0;  // output rows [out_begin, out_begin + rows)
  Eigen::Index in_begin = 0;   // read from input rows [in_begin, in_begin + rows)
  Eigen::Index rows = 0;
};

// "Same" zero padding: output t reads input t + offset.
TapRange tap_range(Eigen::Index length, Eigen::Index offset) {
  TapRange r;
  r.out_begin = std::max<Eigen::Index>(0, -offset);
  const Eigen::Index out_end = std::min<Eigen::Index>(length, length - offset);
  r.rows = std::max<Eigen::Index>(0, out_end - r.out_begin);
  r.in_begin = r.out_begin + offset;
  return r;
}

template <typename S>
struct LayerWeights {
  std::vector<std::vector<Matrix<S>>> taps;                 // per layer
  std::vector<Eigen::Matrix<S, 1, Eigen::Dynamic>> biases;  // per layer
  Matrix<S> fc_weight;                                      // dim x stack
  Eigen::Matrix<S, Eigen::Dynamic, 1> fc_bias;
};

template <typename S>
LayerWeights<S> unpack(const EmbedderParams<S>& p) {
  const auto& cfg = p.config;
  LayerWeights<S> lw;
  for (int l = 1; l <= cfg.conv_layers; ++l) {
    lw.taps.push_back(tap_matrices(p.at(conv_name(l, "weight"))));
    const auto& b = p.at(conv_name(l, "bias"));
    lw.biases.push_back(Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>>(
        b.data.data(), static_cast<Eigen::Index>(b.data.size())));
  }
  const auto& fw = p.at("fc.weight");
  lw.fc_weight = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      fw.data.data(), fw.shape[0], fw.shape[1]);
  const auto& fb = p.at("fc.bias");
  lw.fc_bias = Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(
      fb.data.data(), static_cast<Eigen::Index>(fb.data.size()));
  return lw;
}

template <typename S>
void check_batch(const EmbedderConfig& cfg, const std::vector<Matrix<S>>& batch) {
  if (batch.empty()) throw ValidationError("embedder: empty batch");
  for (const auto& x : batch) {
    if (x.cols() != cfg.input_channels) {
      throw ValidationError("embedder: input has " + std::to_string(x.cols()) +
                            " channels, config expects " + std::to_string(cfg.input_channels));
    }
    if (x.rows() < 1) throw ValidationError("embedder: input window has no samples");
  }
}

// Runs the conv stack for one sample. Fills `stack` (L x stack_channels) and,
// when requested, the pre-activations (L x layers*growth).
template <typename S>
void conv_stack(const EmbedderConfig& cfg, const LayerWeights<S>& lw, const Matrix<S>& x,
                Matrix<S>& stack, Matrix<S>* preacts) {
  const Eigen::Index length = x.rows();
  const int growth = cfg.growth;
  stack.resize(length, cfg.stack_channels());
  stack.leftCols(cfg.input_channels) = x;
  if (preacts) preacts->resize(length, static_cast<Eigen::Index>(cfg.conv_layers) * growth);
  Matrix<S> z(length, growth);
  const int centre = (cfg.kernel_size - 1) / 2;
  for (int l = 1; l <= cfg.conv_layers; ++l) {
    const auto li = static_cast<std::size_t>(l - 1);
    const int in = cfg.layer_input_channels(l);
    const int dilation = cfg.dilations[li];
    z.rowwise() = lw.biases[li];
    for (int j = 0; j < cfg.kernel_size; ++j) {
      const TapRange r = tap_range(length, static_cast<Eigen::Index>(j - centre) * dilation);
      if (r.rows == 0) continue;
      z.middleRows(r.out_begin, r.rows).noalias() +=
          stack.block(r.in_begin, 0, r.rows, in) * lw.taps[li][static_cast<std::size_t>(j)];
    }
    if (preacts) preacts->middleCols(static_cast<Eigen::Index>(l - 1) * growth, growth) = z;
    stack.middleCols(in, growth) = z.unaryExpr([](S v) { return activate(v); });
  }
}

}  // namespace

void EmbedderConfig::validate() const {
  if (conv_layers != 8) throw ValidationError("embedder: conv_layers must be 8");
  if (embedding_dim != 128) throw ValidationError("embedder: embedding_dim must be 128");
  if (input_channels < 1) throw ValidationError("embedder: input_channels must be positive");
  if (growth < 1) throw ValidationError("embedder: growth must be at least 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValidationError("embedder: kernel_size must be odd and positive");
  }
  if (dilations.size() != static_cast<std::size_t>(conv_layers)) {
    throw ValidationError("embedder: need one dilation per conv layer");
  }
  for (int d : dilations) {
    if (d < 1) throw ValidationError("embedder: dilations must be positive");
  }
}

int EmbedderConfig::layer_input_channels(int layer) const {
  return input_channels + (layer - 1) * growth;
}

int EmbedderConfig::stack_channels() const { return input_channels + conv_layers * growth; }

template <typename S>
Tensor<S>& EmbedderParams<S>::at(std::string_view name) {
  for (auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ValidationError("embedder: no tensor named '" + std::string(name) + "'");
}

template <typename S>
const Tensor<S>& EmbedderParams<S>::at(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw ValidationError("embedder: no tensor named '" + std::string(name) + "'");
}

template <typename S>
std::size_t EmbedderParams<S>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.data.size();
  return n;
}

template <typename S>
EmbedderParams<S> EmbedderParams<S>::zeros_like() const {
  EmbedderParams<S> z;
  z.config = config;
  z.tensors.reserve(tensors.size());
  for (const auto& t : tensors) z.tensors.push_back({t.name, t.shape, std::vector<S>(t.data.size(), S(0))});
  return z;
}

template <typename S>
EmbedderParams<S> init_params(const EmbedderConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbedderParams<S> p;
  p.config = cfg;
  for (int l = 1; l <= cfg.conv_layers; ++l) {
    const int in = cfg.layer_input_channels(l);
    Tensor<S> w{conv_name(l, "weight"), {cfg.growth, in, cfg.kernel_size}, {}};
    const double sd = std::sqrt(2.0 / static_cast<double>(in * cfg.kernel_size));
    w.data.resize(static_cast<std::size_t>(cfg.growth) * in * cfg.kernel_size);
    for (auto& v : w.data) v = static_cast<S>(sd * normal(rng));
    p.tensors.push_back(std::move(w));
    p.tensors.push_back({conv_name(l, "bias"), {cfg.growth}, std::vector<S>(static_cast<std::size_t>(cfg.growth), S(0))});
  }
  const int stack = cfg.stack_channels();
  Tensor<S> fw{"fc.weight", {cfg.embedding_dim, stack}, {}};
  fw.data.resize(static_cast<std::size_t>(cfg.embedding_dim) * stack);
  const double sd = std::sqrt(1.0 / static_cast<double>(stack));
  for (auto& v : fw.data) v = static_cast<S>(sd * normal(rng));
  p.tensors.push_back(std::move(fw));
  p.tensors.push_back({"fc.bias", {cfg.embedding_dim}, std::vector<S>(static_cast<std::size_t>(cfg.embedding_dim), S(0))});
  return p;
}

template <typename To, typename From>
EmbedderParams<To> cast_params(const EmbedderParams<From>& p) {
  EmbedderParams<To> out;
  out.config = p.config;
  for (const auto& t : p.tensors) {
    Tensor<To> c{t.name, t.shape, std::vector<To>(t.data.size())};
    for (std::size_t i = 0; i < t.data.size(); ++i) c.data[i] = static_cast<To>(t.data[i]);
    out.tensors.push_back(std::move(c));
  }
  return out;
}

template <typename S>
ForwardTape<S> forward_with_tape(const EmbedderParams<S>& params, const std::vector<Matrix<S>>& batch) {
  const auto& cfg = params.config;
  check_batch(cfg, batch);
  const LayerWeights<S> lw = unpack(params);
  const auto n = static_cast<Eigen::Index>(batch.size());
  ForwardTape<S> tape;
  tape.stacks.resize(batch.size());
  tape.preacts.resize(batch.size());
  tape.pooled.resize(n, cfg.stack_channels());
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto k = static_cast<std::size_t>(b);
    conv_stack(cfg, lw, batch[k], tape.stacks[k], &tape.preacts[k]);
    tape.pooled.row(b) = tape.stacks[k].colwise().mean();
  }
  tape.embeddings = tape.pooled * lw.fc_weight.transpose();
  tape.embeddings.rowwise() += lw.fc_bias.transpose();
  return tape;
}

template <typename S>
Matrix<S> forward(const EmbedderParams<S>& params, const std::vector<Matrix<S>>& batch) {
  const auto& cfg = params.config;
  check_batch(cfg, batch);
  const LayerWeights<S> lw = unpack(params);
  const auto n = static_cast<Eigen::Index>(batch.size());
  Matrix<S> pooled(n, cfg.stack_channels());
  Matrix<S> stack;
  for (Eigen::Index b = 0; b < n; ++b) {
    conv_stack<S>(cfg, lw, batch[static_cast<std::size_t>(b)], stack, nullptr);
    pooled.row(b) = stack.colwise().mean();
  }
  Matrix<S> out = pooled * lw.fc_weight.transpose();
  out.rowwise() += lw.fc_bias.transpose();
  return out;
}

template <typename S>
EmbedderParams<S> backward(const EmbedderParams<S>& params, const std::vector<Matrix<S>>& batch,
                           const ForwardTape<S>& tape, const Matrix<S>& upstream) {
  const auto& cfg = params.config;
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (upstream.rows() != n || upstream.cols() != cfg.embedding_dim) {
    throw ValidationError("embedder: upstream gradient must be " + std::to_string(n) + " x " +
                          std::to_string(cfg.embedding_dim));
  }
  if (tape.stacks.size() != batch.size()) {
    throw ValidationError("embedder: tape does not belong to this batch");
  }
  const LayerWeights<S> lw = unpack(params);
  const int growth = cfg.growth;
  const int centre = (cfg.kernel_size - 1) / 2;

  EmbedderParams<S> grads = params.zeros_like();
  const Matrix<S> fc_grad = upstream.transpose() * tape.pooled;  // dim x stack
  {
    auto& fw = grads.at("fc.weight");
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        fw.data.data(), fw.shape[0], fw.shape[1]) = fc_grad;
    auto& fb = grads.at("fc.bias");
    Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(fb.data.data(), cfg.embedding_dim) =
        upstream.colwise().sum().transpose();
  }
  const Matrix<S> pooled_grad = upstream * lw.fc_weight;  // B x stack

  std::vector<std::vector<Matrix<S>>> tap_grads(static_cast<std::size_t>(cfg.conv_layers));
  std::vector<Eigen::Matrix<S, 1, Eigen::Dynamic>> bias_grads(static_cast<std::size_t>(cfg.conv_layers));
  for (int l = 1; l <= cfg.conv_layers; ++l) {
    const auto li = static_cast<std::size_t>(l - 1);
    tap_grads[li].assign(static_cast<std::size_t>(cfg.kernel_size),
                         Matrix<S>::Zero(cfg.layer_input_channels(l), growth));
    bias_grads[li] = Eigen::Matrix<S, 1, Eigen::Dynamic>::Zero(growth);
  }

  Matrix<S> dstack;
  Matrix<S> dz;
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto k = static_cast<std::size_t>(b);
    const Matrix<S>& stack = tape.stacks[k];
    const Matrix<S>& pre = tape.preacts[k];
    const Eigen::Index length = stack.rows();
    // Global average pooling spreads the gradient evenly over time.
    dstack = (pooled_grad.row(b) / static_cast<S>(length)).replicate(length, 1);
    for (int l = cfg.conv_layers; l >= 1; --l) {
      const auto li = static_cast<std::size_t>(l - 1);
      const int in = cfg.layer_input_channels(l);
      const int dilation = cfg.dilations[li];
      const auto zcols = pre.middleCols(static_cast<Eigen::Index>(l - 1) * growth, growth);
      dz = dstack.middleCols(in, growth).cwiseProduct(zcols.unaryExpr([](S v) { return activate_grad(v); }));
      bias_grads[li] += dz.colwise().sum();
      for (int j = 0; j < cfg.kernel_size; ++j) {
        const TapRange r = tap_range(length, static_cast<Eigen::Index>(j - centre) * dilation);
        if (r.rows == 0) continue;
        const auto ju = static_cast<std::size_t>(j);
        tap_grads[li][ju].noalias() +=
            stack.block(r.in_begin, 0, r.rows, in).transpose() * dz.middleRows(r.out_begin, r.rows);
        dstack.block(r.in_begin, 0, r.rows, in).noalias() +=
            dz.middleRows(r.out_begin, r.rows) * lw.taps[li][ju].transpose();
      }
    }
  }
  for (int l = 1; l <= cfg.conv_layers; ++l) {
    const auto li = static_cast<std::size_t>(l - 1);
    scatter_taps(tap_grads[li], grads.at(conv_name(l, "weight")));
    auto& bias = grads.at(conv_name(l, "bias"));
    for (int g = 0; g < growth; ++g) bias.data[static_cast<std::size_t>(g)] = bias_grads[li](g);
  }
  return grads;
}

template <typename S>
EmbedderParams<S> backward(const EmbedderParams<S>& params, const std::vector<Matrix<S>>& batch,
                           const Matrix<S>& upstream) {
  const ForwardTape<S> tape = forward_with_tape(params, batch);
  return backward(params, batch, tape, upstream);
}

#define GAZEAUTH_INSTANTIATE(S)                                                                  \
  template struct EmbedderParams<S>;                                                             \
  template EmbedderParams<S> init_params<S>(const EmbedderConfig&, std::uint64_t);               \
  template Matrix<S> forward<S>(const EmbedderParams<S>&, const std::vector<Matrix<S>>&);        \
  template ForwardTape<S> forward_with_tape<S>(const EmbedderParams<S>&,                         \
                                               const std::vector<Matrix<S>>&);                   \
  template EmbedderParams<S> backward<S>(const EmbedderParams<S>&, const std::vector<Matrix<S>>&, \
                                         const ForwardTape<S>&, const Matrix<S>&);               \
  template EmbedderParams<S> backward<S>(const EmbedderParams<S>&, const std::vector<Matrix<S>>&, \
                                         const Matrix<S>&);

GAZEAUTH_INSTANTIATE(float)
GAZEAUTH_INSTANTIATE(double)
#undef GAZEAUTH_INSTANTIATE

template EmbedderParams<float> cast_params<float, double>(const EmbedderParams<double>&);
template EmbedderParams<double> cast_params<double, float>(const EmbedderParams<float>&);
template EmbedderParams<float> cast_params<float, float>(const EmbedderParams<float>&);
template EmbedderParams<double> cast_params<double, double>(const EmbedderParams<double>&);

}  // namespace gazeauth
