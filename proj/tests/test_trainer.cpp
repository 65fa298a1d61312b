#include <gtest/gtest.h>

#include <sstream>

#include "twae/trainer.hpp"

using namespace twae;

namespace {

TrainConfig small_config(std::size_t m) {
  TrainConfig c;
  c.m = m;
  c.chunk_size = 200;
  c.epochs = 1;
  c.latent_dim = 2;
  c.hidden = {16};
  c.estimator_config.projections = 50;
  c.eval_projections = 20;
  c.learning_rate = 1e-2;
  c.seed = 5;
  return c;
}

bool same_steps(const MetricsLog& a, const MetricsLog& b, std::size_t count) {
  if (a.steps.size() < count || b.steps.size() < count) return false;
  for (std::size_t s = 0; s < count; ++s) {
    const auto &x = a.steps[s], &y = b.steps[s];
    if (x.epoch != y.epoch || x.chunk != y.chunk || x.region != y.region || x.recon != y.recon ||
        x.latent != y.latent || x.correction_norm != y.correction_norm)
      return false;
  }
  return true;
}

bool same_epochs(const MetricsLog& a, const MetricsLog& b) {
  if (a.epochs.size() != b.epochs.size()) return false;
  for (std::size_t e = 0; e < a.epochs.size(); ++e)
    if (a.epochs[e].recon != b.epochs[e].recon || a.epochs[e].region_latent != b.epochs[e].region_latent ||
        a.epochs[e].global_latent != b.epochs[e].global_latent)
      return false;
  return true;
}

}  // namespace

TEST(TrainConfig, Validation) {
  TrainConfig c = small_config(4);
  EXPECT_NO_THROW(c.validate());
  c.chunk_size = 202;
  EXPECT_THROW(c.validate(), Error);
  c = small_config(4);
  c.alpha = -0.1;
  EXPECT_THROW(c.validate(), Error);
  c = small_config(4);
  c.m = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Trainer, SingleRegionEqualsBaseline) {
  TrainConfig c = small_config(1);
  c.epochs = 3;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 400, 1);
  const Tessellation whole(TessellationKind::CVT, PointSet{{0.0, 0.0}});
  const auto t = train_twae(c, data, whole);
  const auto b = train_baseline(c, data);
  ASSERT_EQ(t.log.steps.size(), 6u);
  EXPECT_TRUE(same_steps(t.log, b.log, 6));
  EXPECT_TRUE(same_epochs(t.log, b.log));
  EXPECT_EQ(t.params, b.params);
}

TEST(Trainer, ZeroAlphaEqualsPlain) {
  TrainConfig c = small_config(4);
  c.alpha = 0.0;
  c.epochs = 2;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 400, 2);
  const Tessellation tess = make_tessellation(c);
  const auto plain = train_twae(c, data, tess);
  const auto reg = train_twae_regularized(c, data, tess);
  EXPECT_EQ(plain.params, reg.params);
  ASSERT_EQ(plain.log.steps.size(), reg.log.steps.size());
  for (std::size_t s = 0; s < plain.log.steps.size(); ++s) {
    EXPECT_EQ(plain.log.steps[s].recon, reg.log.steps[s].recon);
    EXPECT_EQ(plain.log.steps[s].latent, reg.log.steps[s].latent);
  }
}

TEST(Trainer, ZeroLearningRateGivesZeroCorrection) {
  TrainConfig c = small_config(4);
  c.learning_rate = 0.0;
  c.alpha = 0.2;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 200, 3);
  const auto r = train_twae_regularized(c, data);
  for (const auto& s : r.log.steps) EXPECT_EQ(s.correction_norm, 0.0);
}

TEST(Trainer, CorrectionActiveAfterFirstStepOfChunk) {
  TrainConfig c = small_config(4);
  c.alpha = 0.2;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 400, 4);
  const auto r = train_twae_regularized(c, data);
  for (const auto& s : r.log.steps) {
    if (s.step == 0)
      EXPECT_EQ(s.correction_norm, 0.0);
    else
      EXPECT_GT(s.correction_norm, 0.0);
  }
}

TEST(Trainer, DeterministicLogs) {
  TrainConfig c = small_config(4);
  c.epochs = 2;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 400, 5);
  for (TrainerKind k : {TrainerKind::TWAE, TrainerKind::TWAE_REG, TrainerKind::BASELINE}) {
    const Tessellation tess = make_tessellation(c);
    const auto a = train(k, c, data, &tess), b = train(k, c, data, &tess);
    EXPECT_TRUE(same_steps(a.log, b.log, a.log.steps.size())) << to_string(k);
    EXPECT_TRUE(same_epochs(a.log, b.log)) << to_string(k);
    EXPECT_EQ(a.params, b.params);
  }
}

TEST(Trainer, ChunkingAndRegionCoverage) {
  TrainConfig c = small_config(5);
  c.epochs = 2;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 450, 6);  // two full chunks, 50 points dropped
  const auto r = train_twae(c, data);
  ASSERT_EQ(r.log.steps.size(), 2u * 2u * 5u);
  ASSERT_EQ(r.log.epochs.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e)
    for (std::size_t ch = 0; ch < 2; ++ch) {
      std::vector<int> seen(5, 0);
      for (const auto& s : r.log.steps)
        if (s.epoch == e && s.chunk == ch) ++seen[s.region];
      for (int v : seen) EXPECT_EQ(v, 1);
    }
  for (const auto& e : r.log.epochs) {
    EXPECT_GE(e.lcm_ms, 0.0);
    EXPECT_GE(e.backprop_ms, 0.0);
    EXPECT_GE(e.global_latent, 0.0);
  }
}

TEST(Trainer, BaselineSharesSchema) {
  const TrainConfig c = small_config(4);
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 200, 7);
  const auto r = train_baseline(c, data);
  std::ostringstream os;
  r.log.write_steps_csv(os);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "epoch,chunk,region,recon,latent,lcm_ms,step_ms");
  EXPECT_EQ(r.log.steps.size(), 4u);
  EXPECT_EQ(r.log.epochs.size(), 1u);
}

TEST(Trainer, RejectsSmallDatasetAndMismatchedTessellation) {
  const TrainConfig c = small_config(4);
  EXPECT_THROW(train_baseline(c, gen_gaussian_ring(8, 1.0, 0.1, 100, 1)), Error);
  const Tessellation wrong = lloyd_cvt({.dim = 2, .m = 3, .seed = 1}).tessellation;
  EXPECT_THROW(train_twae(c, gen_gaussian_ring(8, 1.0, 0.1, 400, 1), wrong), Error);
}

TEST(Trainer, AbortsOnNonFiniteLossWithDump) {
  TrainConfig c = small_config(1);
  c.learning_rate = 1e300;
  c.epochs = 3;
  const auto dump = std::filesystem::temp_directory_path() / "twae_abort_test";
  c.abort_dump = dump;
  EXPECT_THROW(train_baseline(c, gen_gaussian_ring(8, 1.0, 0.1, 400, 1)), NumericalError);
  EXPECT_TRUE(std::filesystem::exists(dump.string() + ".json"));
  std::filesystem::remove(dump.string() + ".json");
  std::filesystem::remove(dump.string() + ".bin");
}

TEST(Trainer, RegionLatentDecreasesOnRing) {
  TrainConfig c;
  c.m = 20;
  c.chunk_size = 1000;
  c.epochs = 50;
  c.latent_dim = 2;
  c.hidden = {32, 32};
  c.estimator_config.projections = 100;
  c.eval_projections = 50;
  c.seed = 11;
  const Dataset data = gen_gaussian_ring(8, 1.0, 0.1, 2000, 11);
  const auto r = train_twae(c, data);
  EXPECT_LT(r.log.epochs.back().region_latent, r.log.epochs.front().region_latent);
}
