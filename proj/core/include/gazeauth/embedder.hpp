#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gazeauth {

// The layer count, dense concatenation, global average pooling and the
// 128-d output are fixed; the remaining knobs are tunable.
struct EmbedderConfig {
  int input_channels = 8;
  int conv_layers = 8;
  int growth = 32;
  int kernel_size = 3;
  std::vector<int> dilations{1, 2, 4, 8, 16, 32, 64, 1};
  int embedding_dim = 128;

  void validate() const;
  // Input width of conv layer `layer` (1-based): C + (layer - 1) * growth.
  int layer_input_channels(int layer) const;
  // Width of the final concatenated feature stack.
  int stack_channels() const;

  friend bool operator==(const EmbedderConfig&, const EmbedderConfig&) = default;
};

template <typename Scalar>
struct Tensor {
  std::string name;
  std::vector<int> shape;
  std::vector<Scalar> data;
};

// Tensors in fixed order: conv1.weight, conv1.bias, ..., conv8.bias,
// fc.weight, fc.bias. Conv weights are (out, in, kernel) row-major, the fc
// weight is (embedding_dim, stack_channels).
template <typename Scalar>
struct EmbedderParams {
  EmbedderConfig config;
  std::vector<Tensor<Scalar>> tensors;

  Tensor<Scalar>& at(std::string_view name);
  const Tensor<Scalar>& at(std::string_view name) const;
  std::size_t parameter_count() const;
  // Same names and shapes, all zero.
  EmbedderParams zeros_like() const;
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
EmbedderParams<Scalar> init_params(const EmbedderConfig& cfg, std::uint64_t seed);

template <typename To, typename From>
EmbedderParams<To> cast_params(const EmbedderParams<From>& p);

// Activations kept from a forward pass so that backward can reuse them.
template <typename Scalar>
struct ForwardTape {
  std::vector<Matrix<Scalar>> stacks;       // per sample: L x stack_channels
  std::vector<Matrix<Scalar>> preacts;      // per sample: L x (layers * growth)
  Matrix<Scalar> pooled;                    // B x stack_channels
  Matrix<Scalar> embeddings;                // B x embedding_dim
};

// batch: B windows of L x C (L may be anything >= 1). Returns B x 128.
template <typename Scalar>
Matrix<Scalar> forward(const EmbedderParams<Scalar>& params, const std::vector<Matrix<Scalar>>& batch);

template <typename Scalar>
ForwardTape<Scalar> forward_with_tape(const EmbedderParams<Scalar>& params,
                                      const std::vector<Matrix<Scalar>>& batch);

// Gradient of sum_{b,j} upstream(b, j) * embedding(b, j) w.r.t. every
// parameter tensor, returned in the layout of `params`.
template <typename Scalar>
EmbedderParams<Scalar> backward(const EmbedderParams<Scalar>& params,
                                const std::vector<Matrix<Scalar>>& batch,
                                const ForwardTape<Scalar>& tape, const Matrix<Scalar>& upstream);

template <typename Scalar>
EmbedderParams<Scalar> backward(const EmbedderParams<Scalar>& params,
                                const std::vector<Matrix<Scalar>>& batch,
                                const Matrix<Scalar>& upstream);

// Little-endian checkpoint: magic "EKYB1", config, then named float32 tensors.
void save_checkpoint(const EmbedderParams<float>& params, const std::filesystem::path& path);
EmbedderParams<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace gazeauth
