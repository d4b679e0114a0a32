#include <cmath>

#include <gtest/gtest.h>

#include "lexirobust/errors.hpp"
#include "lexirobust/policy_gradient.hpp"
#include "lexirobust/random_instances.hpp"
#include "lexirobust/robust_sets.hpp"
#include "test_support.hpp"

using namespace lexirobust;
using lexirobust::testing::finite_difference;
using lexirobust::testing::random_scores;

namespace {

Eigen::MatrixXd softmax_jacobian(const Eigen::VectorXd& p) {
    return Eigen::MatrixXd(p.asDiagonal()) - p * p.transpose();
}

/// 1/2 D(x)^2 with Q held fixed, written out from the definition.
double half_squared_disadvantage(const Eigen::MatrixXd& theta, const NoiseKernel& T, const Eigen::MatrixXd& Q,
                                 std::size_t x) {
    const Eigen::MatrixXd pi = softmax_rows(theta);
    const auto X = static_cast<Eigen::Index>(x);
    double d = 0.0;
    for (Eigen::Index u = 0; u < pi.cols(); ++u) {
        double disturbed = 0.0;
        for (Eigen::Index y = 0; y < pi.rows(); ++y) disturbed += T(x, static_cast<std::size_t>(y)) * pi(y, u);
        d += (pi(X, u) - disturbed) * Q(X, u);
    }
    return 0.5 * d * d;
}

}  // namespace

TEST(Softmax, RowsAreDistributionsAndStable) {
    Eigen::MatrixXd scores(2, 3);
    scores << 1000, 1000, -1000, 0, 1, 2;
    const Eigen::MatrixXd pi = softmax_rows(scores);
    EXPECT_NEAR(pi(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(pi(0, 2), 0.0, 1e-15);
    const double z = 1 + std::exp(1.0) + std::exp(2.0);
    EXPECT_NEAR(pi(1, 2), std::exp(2.0) / z, 1e-15);
    EXPECT_TRUE(pi.allFinite());
}

TEST(Schedules, ConstantAndHarmonic) {
    EXPECT_DOUBLE_EQ(LearningSchedule::constant(0.3)(1000), 0.3);
    const LearningSchedule h = LearningSchedule::harmonic(100.0, 100.0);
    EXPECT_DOUBLE_EQ(h(0), 1.0);
    EXPECT_DOUBLE_EQ(h(100), 0.5);
    EXPECT_TRUE(h.square_summable());
    EXPECT_FALSE(LearningSchedule::constant(1.0).square_summable());
}

TEST(ExactGradient, MatchesFiniteDifferences) {
    Rng rng(1);
    for (int trial = 0; trial < 10; ++trial) {
        const Domdp mdp = random_domdp(4, 3, 0.9, rng);
        const Eigen::MatrixXd theta = random_scores(4, 3, rng);
        const Eigen::MatrixXd fd = finite_difference(
            [&](const Eigen::MatrixXd& t) { return objective_j(mdp, SoftmaxPolicyParams(t).policy()); }, theta);
        const Eigen::MatrixXd g = exact_grad_j(mdp, SoftmaxPolicyParams(theta));
        EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
    }
}

TEST(PrimaryGradient, ActorCriticSingleTransition) {
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(2, 3));
    const Policy pi = params.policy();
    CriticTable critic(2, 3, LearningSchedule::constant(1.0));
    critic.update(1, 2, 4.0, 0, pi, 0.0);  // Q(1, 2) = 4
    ASSERT_DOUBLE_EQ(critic.Q()(1, 2), 4.0);
    const RolloutBatch batch{{1, 2, 0, 4.0, 0, false}};
    const Eigen::MatrixXd g = grad_k1(PrimaryEstimator::actor_critic, batch, params, 0.9, &critic);
    const double advantage = 4.0 - 4.0 / 3.0;
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(2, 3);
    expected.row(1) << -advantage / 3, -advantage / 3, advantage * 2.0 / 3.0;
    EXPECT_LT((g - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_THROW(grad_k1(PrimaryEstimator::actor_critic, batch, params, 0.9, nullptr), InvalidInput);
}

TEST(PrimaryGradient, ReinforceDiscountsLaterSteps) {
    Rng rng(2);
    const SoftmaxPolicyParams params(random_scores(3, 2, rng));
    const Eigen::MatrixXd pi = params.policy().matrix();
    const double gamma = 0.8;
    const RolloutBatch batch{{0, 1, 2, 1.0, 0, false}, {2, 0, 1, 3.0, 1, true}};
    const double G0 = 1.0 + gamma * 3.0;
    const double G1 = 3.0;
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(3, 2);
    Eigen::RowVector2d e1(0, 1);
    Eigen::RowVector2d e0(1, 0);
    expected.row(0) += G0 * (e1 - pi.row(0));
    expected.row(2) += gamma * G1 * (e0 - pi.row(2));
    const Eigen::MatrixXd g = grad_k1(PrimaryEstimator::reinforce, batch, params, gamma);
    EXPECT_LT((g - expected).cwiseAbs().maxCoeff(), 1e-14);

    const Eigen::VectorXd baseline = Eigen::Vector3d(0.5, 0.0, 1.0);
    expected.setZero();
    expected.row(0) += (G0 - 0.5) * (e1 - pi.row(0));
    expected.row(2) += gamma * (G1 - 1.0) * (e0 - pi.row(2));
    const Eigen::MatrixXd gb = grad_k1(PrimaryEstimator::reinforce, batch, params, gamma, nullptr, &baseline);
    EXPECT_LT((gb - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(PrimaryGradient, ReinforceIsUnbiased) {
    // Average of many single-episode estimates against the exact gradient on a
    // bandit-like chain where every episode lasts one step.
    Eigen::MatrixXd P0 = Eigen::MatrixXd::Zero(2, 2);
    P0.col(1).setOnes();
    Eigen::MatrixXd R0 = Eigen::MatrixXd::Zero(2, 2);
    Eigen::MatrixXd R1 = Eigen::MatrixXd::Zero(2, 2);
    R0(0, 1) = 1.0;
    R1(0, 1) = 3.0;
    const Domdp mdp({P0, P0}, {R0, R1}, 0.5, Eigen::Vector2d(1.0, 0.0));
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(2, 2));
    Rng rng(3);
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const std::size_t u = sample_index(params.policy().row(0), rng);
        const RolloutBatch batch{{0, u, 1, u == 0 ? 1.0 : 3.0, 0, true}};
        mean += grad_k1(PrimaryEstimator::reinforce, batch, params, 0.5) / n;
    }
    const Eigen::MatrixXd exact = exact_grad_j(mdp, params);
    EXPECT_NEAR(mean(0, 1), exact(0, 1), 0.02);
    EXPECT_NEAR(mean(0, 0), exact(0, 0), 0.02);
}

TEST(KtGradient, ExpectationMatchesExhaustiveSumAndFiniteDifferences) {
    Rng rng(4);
    const SoftmaxPolicyParams params(random_scores(4, 3, rng));
    const NoiseKernel T = random_kernel(4, KernelFamily::dense, rng);
    const Eigen::MatrixXd pi = params.policy().matrix();
    const std::size_t x = 2;

    // Exhaustive over y: J_x (pi_x - sum_y T(x,y) pi_y).
    const Eigen::VectorXd px = pi.row(2).transpose();
    Eigen::VectorXd exhaustive = Eigen::VectorXd::Zero(3);
    for (std::size_t y = 0; y < 4; ++y) {
        exhaustive += T(x, y) * softmax_jacobian(px) * (px - pi.row(static_cast<Eigen::Index>(y)).transpose());
    }
    // Gradient of 1/2 |pi_x - c|^2 with c = <pi,T>(x) held fixed.
    const Eigen::VectorXd target = (T.matrix().row(2) * pi).transpose();
    const Eigen::MatrixXd fd = finite_difference(
        [&](const Eigen::MatrixXd& t) {
            return 0.5 * (softmax_rows(t).row(2).transpose() - target).squaredNorm();
        },
        params.theta());
    EXPECT_LT((fd.row(2).transpose() - exhaustive).cwiseAbs().maxCoeff(), 1e-9);

    const std::vector<std::size_t> states(40000, x);
    const Eigen::MatrixXd sampled = grad_kt_approx(params, T, states, 5);
    EXPECT_LT((sampled.row(2).transpose() - exhaustive).cwiseAbs().maxCoeff(), 5e-3);
    EXPECT_DOUBLE_EQ(sampled.row(0).cwiseAbs().sum(), 0.0);
}

TEST(KtGradient, VanishesOnConstantPolicies) {
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Constant(3, 2, 0.7));
    const std::vector<std::size_t> states{0, 1, 2, 2};
    const Eigen::MatrixXd g = grad_kt_approx(params, NoiseKernel::uniform(3), states, 1);
    EXPECT_LT(g.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(KtObjective, MatchesDefinition) {
    Rng rng(6);
    const Domdp mdp = random_domdp(3, 2, 0.9, rng);
    const Policy pi = random_policy(3, 2, rng);
    const NoiseKernel T = NoiseKernel::uniform(3);
    const Eigen::VectorXd p = stationary_distribution(mdp, pi);
    const Eigen::MatrixXd diff = pi.matrix() - T.matrix() * pi.matrix();
    double expected = 0.0;
    for (Eigen::Index x = 0; x < 3; ++x) expected += p(x) * 0.5 * diff.row(x).squaredNorm();
    EXPECT_NEAR(objective_kt(mdp, pi, T), expected, 1e-14);
    EXPECT_NEAR(objective_kt(mdp, Policy::uniform(3, 2), T), 0.0, 1e-16);
}

TEST(KdObjective, MatchesDefinition) {
    Rng rng(7);
    const Domdp mdp = random_domdp(3, 2, 0.9, rng);
    const Policy pi = random_policy(3, 2, rng);
    const NoiseKernel T = random_kernel(3, KernelFamily::dense, rng);
    const Eigen::VectorXd p = discounted_occupancy(mdp, pi);
    const Eigen::VectorXd D = noise_disadvantages(mdp, pi, T);
    EXPECT_NEAR(objective_kd(mdp, pi, T, StateWeighting::occupancy), 0.5 * p.dot(D.cwiseProduct(D)), 1e-12);
    const ValueBundle v = policy_evaluate(mdp, pi);
    EXPECT_LT((disadvantages_from_q(pi, T, v.Q) - D).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(KdGradient, BatchSemiGradientMatchesFiniteDifferences) {
    Rng rng(8);
    const SoftmaxPolicyParams params(random_scores(4, 3, rng));
    const NoiseKernel T = random_kernel(4, KernelFamily::dense, rng);
    const Eigen::MatrixXd Q = random_scores(4, 3, rng, 3.0);
    const std::vector<std::size_t> states{1, 3, 3};
    const Eigen::MatrixXd fd = finite_difference(
        [&](const Eigen::MatrixXd& t) {
            double total = 0.0;
            for (auto x : states) total += half_squared_disadvantage(t, T, Q, x);
            return total / static_cast<double>(states.size());
        },
        params.theta());
    const Eigen::MatrixXd g = grad_kd(params, T, Q, states);
    EXPECT_LT((g - fd).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(KdGradient, WeightedExactVersionMatchesFiniteDifferences) {
    Rng rng(9);
    const Domdp mdp = random_domdp(4, 2, 0.9, rng);
    const SoftmaxPolicyParams params(random_scores(4, 2, rng));
    const NoiseKernel T = random_kernel(4, KernelFamily::dense, rng);
    const Eigen::MatrixXd Q = policy_evaluate(mdp, params.policy()).Q;
    const Eigen::VectorXd w = Eigen::Vector4d(0.1, 0.2, 0.3, 0.4);
    const Eigen::MatrixXd fd = finite_difference(
        [&](const Eigen::MatrixXd& t) {
            double total = 0.0;
            for (std::size_t x = 0; x < 4; ++x) total += w(static_cast<Eigen::Index>(x)) * half_squared_disadvantage(t, T, Q, x);
            return total;
        },
        params.theta());
    EXPECT_LT((grad_kd(mdp, params, T, w) - fd).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Critic, ConvergesToExactActionValues) {
    Rng rng(10);
    const Domdp mdp = random_domdp(3, 2, 0.5, rng);
    const Policy pi = random_policy(3, 2, rng);
    CriticTable critic(3, 2, LearningSchedule::harmonic(1.0, 1.0));
    std::uniform_int_distribution<std::size_t> state(0, 2);
    std::uniform_int_distribution<std::size_t> action(0, 1);
    for (int i = 0; i < 300000; ++i) {
        const std::size_t x = state(rng);
        const std::size_t u = action(rng);
        const std::size_t y = sample_next_state(mdp, x, u, rng);
        critic.update(x, u, mdp.r(x, u, y), y, pi, mdp.gamma());
    }
    const ValueBundle exact = policy_evaluate(mdp, pi);
    EXPECT_LT((critic.Q() - exact.Q).cwiseAbs().maxCoeff(), 0.03);
    EXPECT_LT(critic.bellman_residual(mdp, pi), 0.03);
    EXPECT_LT((critic.V(pi) - exact.V).cwiseAbs().maxCoeff(), 0.03);
}

TEST(LexiUpdate, CombinesGradientsAndUpdatesMultiplier) {
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(2, 2));
    LexiState state;
    state.lambda = 1.0;
    state.beta1 = 2.0;
    state.beta2 = 0.5;
    state.eta = 0.1;
    const Eigen::MatrixXd g1 = Eigen::MatrixXd::Constant(2, 2, 1.0);
    const Eigen::MatrixXd g2 = Eigen::MatrixXd::Constant(2, 2, -2.0);
    const LexiStep step = lexicographic_update(params, state, g1, g2, 2.0, 0.1);
    EXPECT_DOUBLE_EQ(step.k1_coefficient, 2.5);
    EXPECT_DOUBLE_EQ(step.k2_coefficient, 0.5);
    EXPECT_NEAR(step.params.theta()(0, 0), 0.1 * (2.5 * 1.0 + 0.5 * -2.0), 1e-15);
    // k_hat1 tracks K1 before convergence; eps = 0.99 k_hat1.
    EXPECT_DOUBLE_EQ(step.lexi.k_hat1, 2.0);
    EXPECT_DOUBLE_EQ(step.lexi.epsilon_t, 1.98);
    EXPECT_NEAR(step.lexi.lambda, 1.0 + 0.1 * (2.0 - 1.98 - 2.0), 1e-15);
}

TEST(LexiUpdate, MultiplierIsClampedAtZero) {
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(1, 2));
    LexiState state;
    state.lambda = 0.01;
    state.eta = 1.0;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 2);
    EXPECT_DOUBLE_EQ(lexicographic_update(params, state, zero, zero, 5.0, 1.0).lexi.lambda, 0.0);
}

TEST(LexiUpdate, FrozenEstimateAfterConvergence) {
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(1, 2));
    LexiState state;
    state.lambda = 1.0;
    state.eta = 0.1;
    state.k1_converged = true;
    state.k_hat1 = 3.0;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 2);
    const LexiStep step = lexicographic_update(params, state, zero, zero, 2.5, 1.0);
    EXPECT_DOUBLE_EQ(step.lexi.k_hat1, 3.0);
    EXPECT_NEAR(step.lexi.lambda, 1.0 + 0.1 * (3.0 - 2.97 - 2.5), 1e-15);

    LexiSettings absolute;
    absolute.epsilon = {EpsilonPolicy::Kind::absolute, 0.25};
    EXPECT_DOUBLE_EQ(lexicographic_update(params, state, zero, zero, 2.5, 1.0, absolute).lexi.epsilon_t, 0.25);
}

TEST(LexiUpdate, DetectsConvergenceOfStableValues) {
    SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(1, 2));
    LexiState state;
    LexiSettings settings;
    settings.convergence_window = 5;
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 2);
    for (int k = 0; k < 9; ++k) {
        state = lexicographic_update(params, state, zero, zero, 1.0, 1.0, settings).lexi;
        EXPECT_FALSE(state.k1_converged);
    }
    state = lexicographic_update(params, state, zero, zero, 1.0, 1.0, settings).lexi;
    EXPECT_TRUE(state.k1_converged);

    LexiState drifting;
    for (int k = 0; k < 30; ++k) {
        drifting = lexicographic_update(params, drifting, zero, zero, 1.0 + k, 1.0, settings).lexi;
    }
    EXPECT_FALSE(drifting.k1_converged);
}

TEST(LexiUpdate, RejectsNonFiniteAndMisshapenInput) {
    const SoftmaxPolicyParams params(Eigen::MatrixXd::Zero(2, 2));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(2, 2);
    g(1, 1) = std::nan("");
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    EXPECT_THROW(lexicographic_update(params, {}, g, zero, 1.0, 1.0), NumericalError);
    EXPECT_THROW(lexicographic_update(params, {}, zero, zero, std::nan(""), 1.0), NumericalError);
    EXPECT_THROW(lexicographic_update(params, {}, Eigen::MatrixXd::Zero(3, 2), zero, 1.0, 1.0), InvalidInput);
}

TEST(FixedPointIteration, UniformKernelReachesConstantPolicy) {
    Rng rng(11);
    const Domdp mdp = random_domdp(5, 3, 0.9, rng);
    const Policy start = random_policy(5, 3, rng);
    const auto result = fixed_point_iteration(start, NoiseKernel::uniform(5), LearningSchedule::harmonic(100, 100),
                                              100000, 3, mdp);
    EXPECT_TRUE(result.converged);
    EXPECT_LT(result.objective_kt, 1e-4);
    EXPECT_LT(row_spread(result.policy), 1e-3);
}

TEST(FixedPointIteration, IdentityKernelLeavesPolicyUnchanged) {
    Rng rng(12);
    const Domdp mdp = random_domdp(3, 2, 0.9, rng);
    const Policy start = random_policy(3, 2, rng);
    FixedPointIterationOptions options;
    options.threshold = -1.0;  // never stop early
    const auto result = fixed_point_iteration(start, NoiseKernel::identity(3), LearningSchedule::constant(0.5), 500,
                                              1, mdp, options);
    EXPECT_LT((result.policy.matrix() - start.matrix()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_EQ(result.steps, 500u);
}

TEST(FixedPointIteration, TraceRecordsObjective) {
    Rng rng(13);
    const Domdp mdp = random_domdp(4, 2, 0.9, rng);
    FixedPointIterationOptions options;
    options.trace_every = 100;
    options.threshold = -1.0;
    const auto result = fixed_point_iteration(random_policy(4, 2, rng), NoiseKernel::uniform(4),
                                              LearningSchedule::harmonic(100, 100), 1000, 2, mdp, options);
    EXPECT_EQ(result.trace.size(), 10u);
    EXPECT_LE(result.trace.back(), result.trace.front());
}
