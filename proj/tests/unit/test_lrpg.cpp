#include <gtest/gtest.h>

#include "lexirobust/envs.hpp"
#include "lexirobust/errors.hpp"
#include "lexirobust/lrpg.hpp"
#include "lexirobust/policy_gradient.hpp"

using namespace lexirobust;

namespace {

TrainConfig short_config(SecondaryObjective secondary, std::uint64_t seed) {
    TrainConfig c;
    c.name = to_string(secondary);
    c.secondary = secondary;
    c.steps = 20'000;
    c.checkpoint_every = 5'000;
    c.seed = seed;
    c.eval_kernels = {{"T1", {KernelKind::uniform, 0.5, 1.0, {}, {}}}};
    return c;
}

}  // namespace

TEST(TrainConfigValidation, RejectsInconsistentSettings) {
    TrainConfig c;
    c.secondary = SecondaryObjective::kd;
    c.estimator = PrimaryEstimator::reinforce;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.steps = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.warmup_fraction = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = TrainConfig{};
    c.eta = -1;
    EXPECT_THROW(c.validate(), ConfigError);
    EXPECT_NO_THROW(TrainConfig{}.validate());
}

TEST(LrpgTrain, DeterministicForSeed) {
    const Environment env = make_environment("lava_gap");
    const TrainConfig c = short_config(SecondaryObjective::kt, 3);
    const TrainResult a = lrpg_train(env, c);
    const TrainResult b = lrpg_train(env, c);
    EXPECT_EQ(a.params.theta(), b.params.theta());
    ASSERT_EQ(a.record.checkpoints.size(), b.record.checkpoints.size());
    EXPECT_EQ(a.record.checkpoints.back().objective_j, b.record.checkpoints.back().objective_j);
    const TrainResult other = lrpg_train(env, short_config(SecondaryObjective::kt, 4));
    EXPECT_NE(a.params.theta(), other.params.theta());
}

TEST(LrpgTrain, CheckpointsCoverTheBudget) {
    const Environment env = make_environment("lava_gap");
    const TrainResult r = lrpg_train(env, short_config(SecondaryObjective::none, 1));
    ASSERT_GE(r.record.checkpoints.size(), 4u);
    EXPECT_EQ(r.record.checkpoints.back().step, 20'000u);
    EXPECT_EQ(r.record.env, env.name);
    EXPECT_EQ(r.record.seed, 1u);
    for (const auto& c : r.record.checkpoints) {
        EXPECT_FALSE(c.secondary_active);
        EXPECT_DOUBLE_EQ(c.lambda, 0.0);
        ASSERT_EQ(c.regrets.size(), 1u);
        EXPECT_EQ(c.regrets[0].kernel, "T1");
        EXPECT_NEAR(c.objective_j, objective_j(env.mdp, r.params.policy()), c.step == 20'000 ? 1e-12 : 10.0);
    }
}

TEST(LrpgTrain, ActorCriticImprovesOnUniformPolicy) {
    const Environment env = make_environment("lava_gap");
    const double uniform = objective_j(env.mdp, Policy::uniform(env.mdp.n_states(), kGridActions));
    TrainConfig c = short_config(SecondaryObjective::none, 2);
    c.steps = 100'000;
    const TrainResult r = lrpg_train(env, c);
    EXPECT_GT(r.record.checkpoints.back().objective_j, uniform + 0.3);
}

TEST(LrpgTrain, ReinforceImprovesOnUniformPolicy) {
    const Environment env = make_environment("lava_gap");
    const double uniform = objective_j(env.mdp, Policy::uniform(env.mdp.n_states(), kGridActions));
    TrainConfig c = short_config(SecondaryObjective::kt, 2);
    c.estimator = PrimaryEstimator::reinforce;
    c.steps = 100'000;
    const TrainResult r = lrpg_train(env, c);
    EXPECT_GT(r.record.checkpoints.back().objective_j, uniform);
}

TEST(LrpgTrain, SecondaryObjectiveLowersKt) {
    const Environment env = make_environment("lava_gap");
    TrainConfig vanilla = short_config(SecondaryObjective::none, 5);
    vanilla.steps = 100'000;
    TrainConfig kt = vanilla;
    kt.secondary = SecondaryObjective::kt;
    const auto a = lrpg_train(env, vanilla).record.checkpoints.back();
    const auto b = lrpg_train(env, kt).record.checkpoints.back();
    EXPECT_TRUE(b.secondary_active);
    EXPECT_LT(b.objective_kt, a.objective_kt);
}

TEST(LrpgTrain, WarmupDelaysSecondaryObjective) {
    const Environment env = make_environment("lava_gap");
    TrainConfig c = short_config(SecondaryObjective::kt, 1);
    c.warmup_fraction = 0.5;
    const TrainResult r = lrpg_train(env, c);
    for (const auto& cp : r.record.checkpoints) EXPECT_EQ(cp.secondary_active, cp.step >= 10'000) << cp.step;
}

TEST(LrpgTrain, KdRunsOnExampleEnvironment) {
    const Environment env = make_environment("example1");
    TrainConfig c = short_config(SecondaryObjective::kd, 1);
    c.eval_kernels = {{"uniform", {KernelKind::uniform, 0.5, std::nullopt, {}, {}}}};
    c.kernel_tilde = {KernelKind::uniform, 0.5, std::nullopt, {}, {}};
    const TrainResult r = lrpg_train(env, c);
    EXPECT_TRUE(r.params.theta().allFinite());
    EXPECT_GE(r.record.checkpoints.back().regrets[0].regret, -1e-9);
}
