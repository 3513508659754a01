#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <cstring>
#include <fstream>
#include <random>

#include "../common/oracles.hpp"
#include "gazeauth/embedder.hpp"
#include "gazeauth/error.hpp"

using namespace gazeauth;

TEST(EmbedderConfig, DenseWidths) {
  EmbedderConfig cfg;
  EXPECT_EQ(cfg.layer_input_channels(1), 8);
  EXPECT_EQ(cfg.layer_input_channels(8), 8 + 7 * 32);
  EXPECT_EQ(cfg.stack_channels(), 8 + 8 * 32);
}

TEST(EmbedderConfig, FixedFactsAreEnforced) {
  EmbedderConfig cfg;
  cfg.conv_layers = 7;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = EmbedderConfig{};
  cfg.embedding_dim = 64;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = EmbedderConfig{};
  cfg.kernel_size = 4;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Embedder, OutputShapeAndTensorOrder) {
  EmbedderConfig cfg;
  cfg.input_channels = 4;
  cfg.growth = 4;
  const auto p = init_params<float>(cfg, 1);
  ASSERT_EQ(p.tensors.size(), 18u);
  EXPECT_EQ(p.tensors[0].name, "conv1.weight");
  EXPECT_EQ(p.tensors[0].shape, (std::vector<int>{4, 4, 3}));
  EXPECT_EQ(p.tensors[16].name, "fc.weight");
  EXPECT_EQ(p.tensors[16].shape, (std::vector<int>{128, 4 + 8 * 4}));
  std::vector<Matrix<float>> batch(3, Matrix<float>::Random(360, 4));
  const auto e = forward(p, batch);
  EXPECT_EQ(e.rows(), 3);
  EXPECT_EQ(e.cols(), 128);
  EXPECT_TRUE(e.allFinite());
}

TEST(Embedder, InitIsDeterministicAndHeScaled) {
  EmbedderConfig cfg;
  cfg.input_channels = 8;
  const auto a = init_params<double>(cfg, 5);
  const auto b = init_params<double>(cfg, 5);
  EXPECT_EQ(a.tensors[4].data, b.tensors[4].data);
  const auto& w = a.at("conv3.weight");
  double ss = 0.0;
  for (double v : w.data) ss += v * v;
  const double fan_in = static_cast<double>(cfg.layer_input_channels(3) * cfg.kernel_size);
  EXPECT_NEAR(ss / static_cast<double>(w.data.size()), 2.0 / fan_in, 0.25 * 2.0 / fan_in);
  for (double v : a.at("conv3.bias").data) EXPECT_EQ(v, 0.0);
}

TEST(Embedder, PaddingKeepsSamplesIndependentOfLength) {
  // A window's embedding depends on its own samples only.
  EmbedderConfig cfg;
  cfg.input_channels = 2;
  cfg.growth = 3;
  const auto p = init_params<double>(cfg, 2);
  Matrix<double> x = Matrix<double>::Random(50, 2);
  const auto one = forward(p, std::vector<Matrix<double>>{x});
  const auto two = forward(p, std::vector<Matrix<double>>{x, Matrix<double>::Random(50, 2)});
  EXPECT_LT((one.row(0) - two.row(0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Embedder, GradientsMatchFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 2; ++seed) {
    const auto r = oracle::check_embedder_gradients(oracle::tiny_embedder_config(), 16, 2, seed);
    EXPECT_LT(r.worst_relative_error, 1e-3) << "seed " << seed;
  }
}

TEST(Embedder, FloatAndDoubleAgree) {
  EmbedderConfig cfg;
  cfg.input_channels = 4;
  cfg.growth = 4;
  const auto pd = init_params<double>(cfg, 3);
  const auto pf = cast_params<float>(pd);
  Matrix<double> x = Matrix<double>::Random(360, 4);
  const auto ed = forward(pd, std::vector<Matrix<double>>{x});
  const auto ef = forward(pf, std::vector<Matrix<float>>{x.cast<float>()});
  EXPECT_LT((ed - ef.cast<double>()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  EmbedderConfig cfg;
  cfg.input_channels = 8;
  cfg.growth = 5;
  const auto p = init_params<float>(cfg, 9);
  const auto path = std::filesystem::temp_directory_path() / "gazeauth_unit_model.ekyb";
  save_checkpoint(p, path);
  const auto q = load_checkpoint(path);
  EXPECT_EQ(q.config, p.config);
  ASSERT_EQ(q.tensors.size(), p.tensors.size());
  for (std::size_t i = 0; i < p.tensors.size(); ++i) {
    EXPECT_EQ(q.tensors[i].name, p.tensors[i].name);
    EXPECT_EQ(q.tensors[i].shape, p.tensors[i].shape);
    EXPECT_EQ(std::memcmp(q.tensors[i].data.data(), p.tensors[i].data.data(), p.tensors[i].data.size() * 4), 0);
  }
}

TEST(Checkpoint, StartsWithMagicAndRejectsCorruption) {
  EmbedderConfig cfg;
  cfg.input_channels = 4;
  cfg.growth = 2;
  const auto path = std::filesystem::temp_directory_path() / "gazeauth_unit_bad.ekyb";
  save_checkpoint(init_params<float>(cfg, 1), path);
  std::string bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  EXPECT_EQ(bytes.substr(0, 5), "EKYB1");
  std::ofstream(path, std::ios::binary) << ("EKYB2" + bytes.substr(5));
  EXPECT_THROW(load_checkpoint(path), ValidationError);
  std::ofstream(path, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
  EXPECT_THROW(load_checkpoint(path), ValidationError);
  std::ofstream(path, std::ios::binary) << bytes << 'x';
  EXPECT_THROW(load_checkpoint(path), ValidationError);
}
