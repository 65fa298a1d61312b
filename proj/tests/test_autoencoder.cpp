#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "twae/autoencoder.hpp"

using namespace twae;
using twae::testing::central_differences;
using twae::testing::gaussian_set;
using twae::testing::relative_error;

namespace {

AutoEncoderParams with_values(AutoEncoderParams p, const std::vector<double>& v) {
  unflatten(p, v);
  return p;
}

}  // namespace

TEST(InitParams, DeterministicAndShaped) {
  const auto a = init_params({5, 7}, 3, 1), b = init_params({5, 7}, 3, 1);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, init_params({5, 7}, 3, 2));
  ASSERT_EQ(a.encoder.size(), 2u);
  EXPECT_EQ(a.encoder[0].weight.rows(), 7);
  EXPECT_EQ(a.encoder[0].weight.cols(), 5);
  EXPECT_EQ(a.encoder[1].weight.rows(), 3);
  EXPECT_EQ(a.decoder[0].weight.cols(), 3);
  EXPECT_EQ(a.decoder[1].weight.rows(), 5);
  EXPECT_EQ(a.parameter_count(), (5 * 7 + 7) + (7 * 3 + 3) + (3 * 7 + 7) + (7 * 5 + 5));
  EXPECT_THROW(init_params({}, 2, 1), Error);
  EXPECT_THROW(init_params({3}, 0, 1), Error);
}

TEST(InitParams, HeVariance) {
  const auto p = init_params({512, 256}, 4, 3);
  for (const auto& l : {p.encoder[0], p.encoder[1]}) {
    const double fan_in = static_cast<double>(l.weight.cols());
    const double var = l.weight.array().square().mean();
    if (fan_in >= 256) EXPECT_NEAR(var, 2.0 / fan_in, 0.2 * 2.0 / fan_in);
    EXPECT_EQ(l.bias.squaredNorm(), 0.0);
  }
}

TEST(Forward, ZeroInputFollowsBiasPath) {
  auto p = init_params({3, 4}, 2, 5);
  Rng rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto* stack : {&p.encoder, &p.decoder})
    for (auto& l : *stack)
      for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias(k) = normal(rng);
  // Oracle: propagate the biases by hand.
  Eigen::VectorXd h = Eigen::VectorXd::Zero(3);
  const auto run = [&](const std::vector<DenseLayer>& stack) {
    for (std::size_t k = 0; k < stack.size(); ++k) {
      h = stack[k].weight * h + stack[k].bias;
      if (k + 1 < stack.size()) h = h.cwiseMax(0.0);
    }
  };
  run(p.encoder);
  run(p.decoder);
  const PointSet out = decode(p, encode(p, PointSet(3, 1)));
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(out[0][static_cast<std::size_t>(k)], h(k), 1e-14);
}

TEST(Forward, IdentityLayer) {
  AutoEncoderParams p;
  p.layer_sizes = {3};
  p.latent_dim = 3;
  p.encoder.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)});
  p.decoder.push_back({Eigen::MatrixXd::Identity(3, 3), Eigen::VectorXd::Zero(3)});
  const PointSet x = gaussian_set(3, 5, 1);
  EXPECT_EQ(encode(p, x), x);
  EXPECT_EQ(decode(p, encode(p, x)), x);
}

TEST(Forward, ShapesAndOrder) {
  const auto p = init_params({6, 8}, 2, 7);
  const PointSet x = gaussian_set(6, 9, 2);
  const PointSet z = encode(p, x);
  EXPECT_EQ(z.dim(), 2u);
  EXPECT_EQ(z.size(), 9u);
  const PointSet xh = decode(p, z);
  EXPECT_EQ(xh.dim(), 6u);
  EXPECT_TRUE(xh.all_finite());
  const std::vector<std::size_t> last{8};
  EXPECT_EQ(encode(p, x.gather(last)), z.gather(last));
  EXPECT_THROW(encode(p, gaussian_set(5, 2, 1)), Error);
}

TEST(Forward, NonFiniteReportsLayer) {
  auto p = init_params({2, 3}, 2, 1);
  p.encoder[1].weight(0, 0) = std::numeric_limits<double>::infinity();
  try {
    encode(p, gaussian_set(2, 4, 1));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("encoder layer 1"), std::string::npos) << e.what();
  }
}

TEST(LossAndGrad, ReconstructionOnlyMatchesFiniteDifferences) {
  const auto p = init_params({3, 5}, 2, 11);
  const PointSet x = gaussian_set(3, 8, 3), prior = gaussian_set(2, 8, 4, 0.3);
  const EstimatorConfig cfg;
  const auto res = loss_and_grad(p, x, prior, 0.0, Estimator::SW, cfg, 1);
  const auto fd = central_differences(flatten(p), [&](const std::vector<double>& v) {
    return loss_value(with_values(p, v), x, prior, 0.0, Estimator::SW, cfg, 1);
  }, 1e-6);
  EXPECT_LE(relative_error(flatten(res.grads), fd), 1e-4);
}

TEST(LossAndGrad, FullLossMatchesFiniteDifferences) {
  const auto p = init_params({2, 4}, 2, 12);
  const PointSet x = gaussian_set(2, 8, 5), prior = gaussian_set(2, 8, 6, 0.5);
  for (Estimator est : {Estimator::SW, Estimator::GW, Estimator::GSW, Estimator::MAXSW}) {
    EstimatorConfig cfg;
    cfg.projections = 16;
    cfg.gsw_pivot_radius = 4.0;
    const auto res = loss_and_grad(p, x, prior, 0.7, est, cfg, 2);
    std::vector<double> fd;
    if (est == Estimator::MAXSW) {
      // The ascent direction depends on the parameters; differentiate at the returned direction.
      const auto dir = max_sw2(encode(p, x), prior, cfg.maxsw_iters, cfg.maxsw_step, 2).direction;
      const PointSet dirs(2, dir);
      fd = central_differences(flatten(p), [&](const std::vector<double>& v) {
        const auto q = with_values(p, v);
        return loss_value(q, x, prior, 0.0, est, cfg, 2) + 0.7 * sliced_w2(encode(q, x), prior, dirs);
      }, 1e-6);
    } else {
      fd = central_differences(flatten(p), [&](const std::vector<double>& v) {
        return loss_value(with_values(p, v), x, prior, 0.7, est, cfg, 2);
      }, 1e-6);
    }
    EXPECT_LE(relative_error(flatten(res.grads), fd), 1e-3) << to_string(est);
    EXPECT_NEAR(res.total(0.7), loss_value(p, x, prior, 0.7, est, cfg, 2), 1e-12) << to_string(est);
  }
}

TEST(LossAndGrad, PerfectAutoencoderOnPrior) {
  AutoEncoderParams p;
  p.layer_sizes = {2};
  p.latent_dim = 2;
  p.encoder.push_back({Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)});
  p.decoder.push_back({Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2)});
  const PointSet x = gaussian_set(2, 10, 7);
  const auto res = loss_and_grad(p, x, x, 1.0, Estimator::SW, EstimatorConfig{}, 3);
  EXPECT_EQ(res.recon, 0.0);
  EXPECT_EQ(res.latent, 0.0);
  EXPECT_EQ(squared_norm(res.grads), 0.0);
}

TEST(LossAndGrad, RejectsBatchMismatch) {
  const auto p = init_params({2}, 2, 1);
  EXPECT_THROW(loss_and_grad(p, gaussian_set(2, 4, 1), gaussian_set(2, 5, 1), 1.0, Estimator::SW, {}, 1), Error);
}

TEST(Adam, ZeroGradientLeavesParams) {
  auto p = init_params({3, 4}, 2, 1);
  const auto before = p;
  auto s = make_adam(p);
  adam_step(p, s, zeros_like(p));
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.step, 1u);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  auto p = init_params({2}, 1, 1);
  auto s = make_adam(p, 1e-3);
  auto g = zeros_like(p);
  for (auto a : g.arrays()) std::fill(a.begin(), a.end(), 0.37);
  std::vector<double> prev = flatten(p);
  for (int k = 0; k < 2000; ++k) {
    prev = flatten(p);
    adam_step(p, s, g);
  }
  const auto now = flatten(p);
  for (std::size_t i = 0; i < now.size(); ++i) EXPECT_NEAR(prev[i] - now[i], 1e-3, 1e-6);
}

TEST(Adam, DeterministicTrajectories) {
  const PointSet x = gaussian_set(3, 16, 1), prior = gaussian_set(2, 16, 2, 0.4);
  const auto run = [&] {
    auto p = init_params({3, 8}, 2, 4);
    auto s = make_adam(p, 1e-2);
    for (int k = 0; k < 10; ++k) adam_step(p, s, loss_and_grad(p, x, prior, 1.0, Estimator::SW, {}, k).grads);
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, OverfitsTinyBatch) {
  const PointSet x = gaussian_set(4, 8, 9);
  const PointSet prior = gaussian_set(2, 8, 10, 0.3);
  auto p = init_params({4, 16}, 2, 5);
  auto s = make_adam(p, 1e-2);
  const double first = loss_and_grad(p, x, prior, 0.0, Estimator::SW, {}, 0).recon;
  for (int k = 0; k < 100; ++k) adam_step(p, s, loss_and_grad(p, x, prior, 0.0, Estimator::SW, {}, 0).grads);
  EXPECT_LE(loss_and_grad(p, x, prior, 0.0, Estimator::SW, {}, 0).recon, 0.5 * first);
}

TEST(Checkpoint, RoundTripAndLayout) {
  const auto dir = std::filesystem::temp_directory_path() / "twae_ckpt_test";
  std::filesystem::create_directories(dir);
  const auto p = init_params({3, 5}, 2, 21);
  save_checkpoint(dir / "m", p, {42, 7});
  CheckpointInfo info;
  EXPECT_EQ(load_checkpoint(dir / "m", &info), p);
  EXPECT_EQ(info.seed, 42u);
  EXPECT_EQ(info.step, 7u);

  std::ifstream js(dir / "m.json");
  const auto manifest = nlohmann::json::parse(js);
  EXPECT_EQ(manifest.at("layer_sizes"), (std::vector<std::size_t>{3, 5}));
  EXPECT_EQ(manifest.at("latent_dim"), 2);
  EXPECT_EQ(std::filesystem::file_size(dir / "m.bin"), p.parameter_count() * 8);

  // First blob value is encoder weight (0, 0), little-endian.
  std::ifstream bin(dir / "m.bin", std::ios::binary);
  unsigned char b[8];
  bin.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  EXPECT_EQ(std::bit_cast<double>(bits), p.encoder[0].weight(0, 0));
  std::filesystem::remove_all(dir);
}

TEST(ParamAlgebra, FlattenAddScaled) {
  auto p = init_params({2, 3}, 1, 1);
  auto q = p;
  add_scaled(q, -1.0, p);
  EXPECT_EQ(squared_norm(q), 0.0);
  const auto v = flatten(p);
  auto r = zeros_like(p);
  unflatten(r, v);
  EXPECT_EQ(r, p);
  EXPECT_THROW(unflatten(r, std::vector<double>(3)), DimensionError);
}
