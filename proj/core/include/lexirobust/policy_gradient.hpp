#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lexirobust/mdp.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust {

/// Row-wise softmax, stabilized by subtracting each row's maximum.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores);

/// One unconstrained score per (state, action); pi(x, .) = softmax(theta(x, .)).
class SoftmaxPolicyParams {
public:
    SoftmaxPolicyParams(std::size_t n_states, std::size_t n_actions);
    explicit SoftmaxPolicyParams(Eigen::MatrixXd theta);

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(theta_.rows()); }
    std::size_t n_actions() const noexcept { return static_cast<std::size_t>(theta_.cols()); }

    const Eigen::MatrixXd& theta() const noexcept { return theta_; }
    Eigen::MatrixXd& theta() noexcept { return theta_; }

    Policy policy() const { return Policy(softmax_rows(theta_)); }

private:
    Eigen::MatrixXd theta_;
};

/// Step sizes alpha_t: constant `a`, or harmonic a / (b + t), which satisfies
/// sum alpha_t = inf and sum alpha_t^2 < inf.
struct LearningSchedule {
    enum class Kind { constant, harmonic };

    Kind kind = Kind::constant;
    double a = 0.1;
    double b = 1.0;

    static LearningSchedule constant(double a) { return {Kind::constant, a, 1.0}; }
    static LearningSchedule harmonic(double a, double b) { return {Kind::harmonic, a, b}; }

    double operator()(std::size_t t) const;
    bool square_summable() const noexcept { return kind == Kind::harmonic; }
};

/// Tabular action-value critic trained with expected-SARSA TD(0), with a
/// per-(state, action) step count driving its schedule.
class CriticTable {
public:
    CriticTable(std::size_t n_states, std::size_t n_actions, LearningSchedule schedule);

    const Eigen::MatrixXd& Q() const noexcept { return q_; }
    Eigen::VectorXd V(const Policy& policy) const;

    void update(std::size_t x, std::size_t u, double reward, std::size_t next_state,
                const Policy& policy, double gamma);

    /// max |Q - (r + gamma P V)| against the exact model, for the given policy.
    double bellman_residual(const Domdp& mdp, const Policy& policy) const;

private:
    Eigen::MatrixXd q_;
    Eigen::Matrix<std::size_t, Eigen::Dynamic, Eigen::Dynamic> visits_;
    LearningSchedule schedule_;
};

/// One environment transition; `episode_end` marks the last transition of an
/// episode (absorbing state reached or horizon hit) and `time` is the step
/// index inside its episode.
struct Transition {
    std::size_t state = 0;
    std::size_t action = 0;
    std::size_t next_state = 0;
    double reward = 0.0;
    std::size_t time = 0;
    bool episode_end = false;
};

using RolloutBatch = std::vector<Transition>;

enum class PrimaryEstimator { reinforce, actor_critic };

/// Score-function estimate of grad K1 (ascent direction).
///
/// reinforce: per complete episode, sum_t gamma^t (G_t - b(x_t)) grad log pi(u_t | x_t),
/// averaged over episodes; `baseline` is a per-state table (zeros if null).
/// actor_critic: mean over transitions of (Q(x,u) - V(x)) grad log pi(u | x)
/// with Q from `critic`.
Eigen::MatrixXd grad_k1(PrimaryEstimator estimator, const RolloutBatch& batch,
                        const SoftmaxPolicyParams& params, double gamma,
                        const CriticTable* critic = nullptr,
                        const Eigen::VectorXd* baseline = nullptr);

/// Exact grad J(theta) by the policy-gradient theorem:
/// d(x) pi(x,u) (Q(x,u) - V(x)) with d the unnormalized discounted visitation.
Eigen::MatrixXd exact_grad_j(const Domdp& mdp, const SoftmaxPolicyParams& params);

/// Sampled approximate gradient of K_T~ (descent direction): for each state x
/// of the batch, y ~ T~(. | x) and (pi(x) - pi(y)) is pulled back through the
/// softmax Jacobian at x; averaged over the batch.
Eigen::MatrixXd grad_kt_approx(const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                               std::span<const std::size_t> states, Rng& rng);
Eigen::MatrixXd grad_kt_approx(const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                               std::span<const std::size_t> states, std::uint64_t seed);

/// K_T~ = sum_x p(x) 1/2 |pi(x) - <pi, T~>(x)|^2 with p from `weighting`.
double objective_kt(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel_tilde,
                    StateWeighting weighting = StateWeighting::stationary);
double objective_kt(const Domdp& mdp, const SoftmaxPolicyParams& params,
                    const NoiseKernel& kernel_tilde,
                    StateWeighting weighting = StateWeighting::stationary);

/// K_D = sum_x p(x) 1/2 D^pi(x, T~)^2 with exact values.
double objective_kd(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel_tilde,
                    StateWeighting weighting = StateWeighting::stationary);

/// Disadvantages computed from a critic table: D(x) = sum_u (pi - <pi,T~>)(x,u) Q(x,u).
Eigen::VectorXd disadvantages_from_q(const Policy& policy, const NoiseKernel& kernel_tilde,
                                     const Eigen::MatrixXd& Q);

/// Semi-gradient of 1/2 D(x)^2 holding Q fixed, through both pi(x) and the
/// disturbed average at x; averaged over the batch states.
Eigen::MatrixXd grad_kd(const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                        const Eigen::MatrixXd& Q, std::span<const std::size_t> states);

/// Desk-mode variant: exact Q and per-state weights p held fixed.
Eigen::MatrixXd grad_kd(const Domdp& mdp, const SoftmaxPolicyParams& params,
                        const NoiseKernel& kernel_tilde, const Eigen::VectorXd& weights);

/// Tolerance schedule eps_t. `fraction` yields factor * k_hat1, `absolute` a
/// fixed value.
struct EpsilonPolicy {
    enum class Kind { fraction, absolute };
    Kind kind = Kind::fraction;
    double value = 0.99;

    double operator()(double k_hat1) const { return kind == Kind::fraction ? value * k_hat1 : value; }
};

struct LexiState {
    double lambda = 0.0;
    double beta1 = 2.0;
    double beta2 = 1.0;
    double eta = 0.001;
    double k_hat1 = 0.0;
    double epsilon_t = 0.0;
    bool k1_converged = false;
    std::deque<double> k1_history;
};

struct LexiSettings {
    EpsilonPolicy epsilon;
    std::size_t convergence_window = 50;
    double convergence_tolerance = 0.01;
};

struct LexiStep {
    SoftmaxPolicyParams params;
    LexiState lexi;
    double k1_coefficient = 0.0;
    double k2_coefficient = 0.0;
};

/// One step of the lexicographic Lagrangian update. While K1 has not
/// converged, k_hat1 tracks `value_k1`; then
///   theta  <- theta + step * ((beta1 + lambda beta2) g1 + beta2 g2)
///   lambda <- max(0, lambda + eta (k_hat1 - eps_t - value_k1)).
/// Throws NumericalError on non-finite gradients.
LexiStep lexicographic_update(const SoftmaxPolicyParams& params, const LexiState& lexi,
                              const Eigen::MatrixXd& grad_k1, const Eigen::MatrixXd& grad_k2,
                              double value_k1, double step_size, const LexiSettings& settings = {});

struct FixedPointIterationOptions {
    double threshold = 1e-4;
    /// Record objective_kt every this many steps (0 disables the trace).
    std::size_t trace_every = 0;
    StateWeighting weighting = StateWeighting::stationary;
};

struct FixedPointIterationResult {
    Policy policy;
    double objective_kt = 0.0;
    bool converged = false;
    std::size_t steps = 0;
    std::vector<double> trace;
};

/// Tabular stochastic approximation pi(x) <- pi(x) - alpha_t (pi(x) - pi(y)),
/// y ~ T~(. | x), on states visited by a trajectory of `mdp` under the current
/// policy; rows are projected back onto the simplex when rounding leaves it.
FixedPointIterationResult fixed_point_iteration(const Policy& initial, const NoiseKernel& kernel_tilde,
                                                const LearningSchedule& schedule, std::size_t max_steps,
                                                std::uint64_t seed, const Domdp& mdp,
                                                const FixedPointIterationOptions& options = {});

}  // namespace lexirobust
