#include <cmath>

#include <gtest/gtest.h>

#include "lexirobust/envs.hpp"
#include "lexirobust/errors.hpp"
#include "lexirobust/noise_kernel.hpp"

using namespace lexirobust;

namespace {

std::size_t cell_index(int x, int y) { return static_cast<std::size_t>(y * 6 + x); }

}  // namespace

TEST(LavaGap, LayoutAndTerminal) {
    const Environment env = lava_gap_env(default_lava_gap_spec());
    ASSERT_EQ(env.mdp.n_states(), 37u);
    EXPECT_EQ(env.mdp.n_actions(), kGridActions);
    ASSERT_TRUE(env.terminal.has_value());
    EXPECT_EQ(*env.terminal, 36u);
    EXPECT_EQ(env.state_labels.size(), 37u);
    EXPECT_EQ(env.geometry.n_states(), 37u);
    EXPECT_DOUBLE_EQ(env.mdp.mu0()(0), 1.0);
    for (std::size_t u = 0; u < kGridActions; ++u) {
        EXPECT_DOUBLE_EQ(env.mdp.p(36, u, 36), 1.0);
        EXPECT_DOUBLE_EQ(env.mdp.r(36, u, 36), 0.0);
        EXPECT_DOUBLE_EQ(env.mdp.p(cell_index(2, 0), u, 36), 1.0);  // lava
        EXPECT_DOUBLE_EQ(env.mdp.p(cell_index(5, 5), u, 36), 1.0);  // goal
    }
    EXPECT_TRUE(env.geometry.is_pinned(36));
    EXPECT_TRUE(env.geometry.is_pinned(cell_index(2, 3)));
    EXPECT_FALSE(env.geometry.is_pinned(cell_index(2, 5)));  // the gap
}

TEST(LavaGap, SlipSplitsProbabilityPerpendicularly) {
    const Environment env = lava_gap_env(default_lava_gap_spec());
    const std::size_t start = cell_index(0, 0);
    // Right from the corner: 0.9 right, 0.05 down, 0.05 up (blocked, stays).
    EXPECT_NEAR(env.mdp.p(start, right, cell_index(1, 0)), 0.9, 1e-15);
    EXPECT_NEAR(env.mdp.p(start, right, cell_index(0, 1)), 0.05, 1e-15);
    EXPECT_NEAR(env.mdp.p(start, right, start), 0.05, 1e-15);
    const std::size_t inner = cell_index(4, 3);
    EXPECT_NEAR(env.mdp.p(inner, up, cell_index(4, 2)), 0.9, 1e-15);
    EXPECT_NEAR(env.mdp.p(inner, up, cell_index(3, 3)), 0.05, 1e-15);
    EXPECT_NEAR(env.mdp.p(inner, up, cell_index(5, 3)), 0.05, 1e-15);
}

TEST(LavaGap, RewardsOnEnteringGoal) {
    const Environment env = lava_gap_env(default_lava_gap_spec());
    EXPECT_DOUBLE_EQ(env.mdp.r(cell_index(4, 5), right, cell_index(5, 5)), 1.0);
    EXPECT_DOUBLE_EQ(env.mdp.r(cell_index(1, 0), right, cell_index(2, 0)), 0.0);
    EXPECT_DOUBLE_EQ(env.mdp.r(cell_index(0, 0), down, cell_index(0, 1)), 0.0);
}

TEST(LavaGap, OptimalValueFollowsShortestPath) {
    // Without slip the shortest safe path has 10 moves and the goal reward
    // arrives at t = 9.
    GridSpec spec = default_lava_gap_spec();
    spec.slip = 0.0;
    const Environment env = lava_gap_env(spec);
    const OptimalSolution best = solve_optimal(env.mdp);
    EXPECT_NEAR(objective_j(env.mdp, best.policy), std::pow(spec.gamma, 9), 1e-10);
}

TEST(LavaGap, WallsAndUnreachableGoal) {
    GridSpec spec = default_lava_gap_spec();
    spec.obstacles = {{4, 4}};
    EXPECT_EQ(lava_gap_env(spec).mdp.n_states(), 36u);

    GridSpec blocked = default_lava_gap_spec();
    blocked.lava.push_back({2, 5});
    EXPECT_THROW(lava_gap_env(blocked), InvalidInput);

    GridSpec outside = default_lava_gap_spec();
    outside.goal = {7, 7};
    EXPECT_THROW(lava_gap_env(outside), InvalidInput);
}

TEST(LavaGap, BoundedUniformKernelRespectsPinnedStates) {
    const Environment env = lava_gap_env(default_lava_gap_spec());
    const NoiseKernel T = make_kernel({KernelKind::uniform, 0.5, 1.0, {}, {}}, env.mdp.n_states(), &env.geometry);
    // (1, 1) sees its 3x3 box minus the two lava cells (2, 0) to (2, 2): 6 states.
    EXPECT_NEAR(T(cell_index(1, 1), cell_index(0, 0)), 1.0 / 6.0, 1e-15);
    EXPECT_DOUBLE_EQ(T(cell_index(1, 1), cell_index(2, 1)), 0.0);
    EXPECT_DOUBLE_EQ(T(36, 36), 1.0);
}

TEST(DynamicObstacles, WellFormedChain) {
    const Environment env = dynamic_obstacles_env(default_dynamic_obstacles_spec());
    const std::size_t n = env.mdp.n_states();
    ASSERT_TRUE(env.terminal.has_value());
    EXPECT_EQ(*env.terminal, n - 1);
    EXPECT_EQ(env.geometry.n_states(), n);
    EXPECT_EQ(env.state_labels.size(), n);
    for (std::size_t u = 0; u < kGridActions; ++u) EXPECT_DOUBLE_EQ(env.mdp.p(n - 1, u, n - 1), 1.0);
    EXPECT_TRUE(env.geometry.is_pinned(n - 1));
    // Some action from the start gains reward eventually.
    EXPECT_GT(objective_j(env.mdp, solve_optimal(env.mdp).policy), 0.0);
}

TEST(DynamicObstacles, CollisionsArePenalized) {
    const Environment env = dynamic_obstacles_env(default_dynamic_obstacles_spec());
    double lowest = 0.0;
    for (std::size_t u = 0; u < kGridActions; ++u) lowest = std::min(lowest, env.mdp.reward(u).minCoeff());
    EXPECT_DOUBLE_EQ(lowest, default_dynamic_obstacles_spec().collision_reward);
}

TEST(DynamicObstacles, StateLimitIsEnforced) {
    GridSpec spec = default_dynamic_obstacles_spec();
    spec.max_states = 5;
    EXPECT_THROW(dynamic_obstacles_env(spec), InvalidInput);
}

TEST(ExampleOne, TransitionsAndRewards) {
    const Domdp mdp = example1_mdp(0.9, Example1Rewards::single_action);
    for (std::size_t x = 0; x < 2; ++x) {
        for (std::size_t u = 0; u < 2; ++u) {
            EXPECT_DOUBLE_EQ(mdp.p(x, u, 0), 0.5);
            EXPECT_DOUBLE_EQ(mdp.expected_reward()(x, u), x == 0 && u == 0 ? 10.0 : 0.0);
        }
    }
    const Domdp constant = example1_mdp(0.9, Example1Rewards::constant_per_state);
    EXPECT_DOUBLE_EQ(constant.expected_reward()(0, 1), 10.0);
    EXPECT_DOUBLE_EQ(constant.expected_reward()(1, 0), 0.0);
}

TEST(MakeEnvironment, ByName) {
    EXPECT_EQ(make_environment("example1").mdp.n_states(), 2u);
    EXPECT_EQ(make_environment("lava_gap").mdp.n_states(), 37u);
    EXPECT_GT(make_environment("dynamic_obstacles").mdp.n_states(), 3u);
    EXPECT_THROW(make_environment("minigrid"), ConfigError);
}
