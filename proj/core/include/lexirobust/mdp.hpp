#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lexirobust {

using Rng = std::mt19937_64;

/// Entries of a probability row may drift from one by at most this much before
/// construction rejects them; smaller drift is renormalized away.
inline constexpr double kRenormalizeTolerance = 1e-9;

/// Checks that `row` is a probability distribution and renormalizes small
/// drift in place. Throws InvalidInput naming `what` otherwise.
void validate_distribution(Eigen::Ref<Eigen::VectorXd> row, const std::string& what);

/// Row-stochastic state -> action-distribution table.
class Policy {
public:
    Policy() = default;
    explicit Policy(Eigen::MatrixXd probabilities);

    static Policy uniform(std::size_t n_states, std::size_t n_actions);
    static Policy constant(std::size_t n_states, const Eigen::VectorXd& action_distribution);
    static Policy deterministic(std::span<const int> action_per_state, std::size_t n_actions);

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(pi_.rows()); }
    std::size_t n_actions() const noexcept { return static_cast<std::size_t>(pi_.cols()); }

    double operator()(std::size_t x, std::size_t u) const { return pi_(x, u); }
    auto row(std::size_t x) const { return pi_.row(static_cast<Eigen::Index>(x)); }
    const Eigen::MatrixXd& matrix() const noexcept { return pi_; }

private:
    Eigen::MatrixXd pi_;
};

/// Finite tabular MDP (X, U, P, R, gamma) with an initial distribution. The
/// observation kernel lives separately in NoiseKernel.
class Domdp {
public:
    /// `transitions[u]` and `rewards[u]` are |X| x |X| matrices indexed [x][y].
    Domdp(std::vector<Eigen::MatrixXd> transitions, std::vector<Eigen::MatrixXd> rewards,
          double gamma, Eigen::VectorXd mu0);

    /// Builds from nested [x][u][y] arrays, the layout of the JSON interchange format.
    static Domdp from_nested(const std::vector<std::vector<std::vector<double>>>& P,
                             const std::vector<std::vector<std::vector<double>>>& R,
                             double gamma, const std::vector<double>& mu0);

    std::size_t n_states() const noexcept { return n_states_; }
    std::size_t n_actions() const noexcept { return transitions_.size(); }
    double gamma() const noexcept { return gamma_; }
    const Eigen::VectorXd& mu0() const noexcept { return mu0_; }

    double p(std::size_t x, std::size_t u, std::size_t y) const { return transitions_[u](x, y); }
    double r(std::size_t x, std::size_t u, std::size_t y) const { return rewards_[u](x, y); }
    const Eigen::MatrixXd& transition(std::size_t u) const { return transitions_[u]; }
    const Eigen::MatrixXd& reward(std::size_t u) const { return rewards_[u]; }

    /// Expected one-step reward sum_y P(x,u,y) R(x,u,y), indexed [x][u].
    const Eigen::MatrixXd& expected_reward() const noexcept { return expected_reward_; }

    /// Copy with the reward tensor replaced; transitions, gamma and mu0 are kept.
    Domdp with_rewards(std::vector<Eigen::MatrixXd> rewards) const;

    /// Transition matrix of the chain induced by `policy`.
    Eigen::MatrixXd induced_transition(const Policy& policy) const;
    /// Expected one-step reward per state under `policy`.
    Eigen::VectorXd induced_reward(const Policy& policy) const;

    void check_policy(const Policy& policy) const;

private:
    std::size_t n_states_ = 0;
    std::vector<Eigen::MatrixXd> transitions_;
    std::vector<Eigen::MatrixXd> rewards_;
    Eigen::MatrixXd expected_reward_;
    double gamma_ = 0.0;
    Eigen::VectorXd mu0_;
};

struct ValueBundle {
    Eigen::VectorXd V;
    Eigen::MatrixXd Q;
    double bellman_residual = 0.0;
};

/// Exact evaluation by a dense solve of (I - gamma P_pi) V = r_pi.
ValueBundle policy_evaluate(const Domdp& mdp, const Policy& policy);

/// J(pi) = sum_x mu0(x) V(x).
double objective_j(const Domdp& mdp, const Policy& policy);

/// Iterative evaluation used as an independent cross-check of policy_evaluate.
Eigen::VectorXd evaluate_by_iteration(const Domdp& mdp, const Policy& policy,
                                      double tolerance = 1e-12,
                                      std::size_t max_iterations = 1'000'000);

/// Invariant distribution of the policy-induced chain, by power iteration.
/// Throws ErgodicityError when the chain is reducible, periodic or fails to
/// converge within `max_iterations`.
Eigen::VectorXd stationary_distribution(const Domdp& mdp, const Policy& policy,
                                        std::size_t max_iterations = 1'000'000);

/// Normalized discounted state occupancy (1 - gamma) mu0^T (I - gamma P_pi)^{-1}.
Eigen::VectorXd discounted_occupancy(const Domdp& mdp, const Policy& policy);

enum class StateWeighting { stationary, occupancy };

/// Per-state weights p^pi used by the robustness objectives.
Eigen::VectorXd state_weights(const Domdp& mdp, const Policy& policy, StateWeighting weighting);

struct OptimalSolution {
    Policy policy;
    Eigen::VectorXd V;
    std::size_t iterations = 0;
};

/// Exact policy iteration; ties go to the lowest action index.
OptimalSolution solve_optimal(const Domdp& mdp, std::size_t max_iterations = 10'000);

class NoiseKernel;

struct Step {
    std::size_t state = 0;
    std::size_t observed_state = 0;
    std::size_t action = 0;
    double reward = 0.0;
};

using Episode = std::vector<Step>;

struct TrajectoryOptions {
    std::size_t horizon = 100;
    /// The episode ends as soon as this state is reached.
    std::optional<std::size_t> stop_state;
};

using RowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

/// Draws an index from a probability row.
std::size_t sample_index(const RowRef& probabilities, Rng& rng);
std::size_t sample_next_state(const Domdp& mdp, std::size_t x, std::size_t u, Rng& rng);

/// Rolls out `policy`, acting on observations drawn from `kernel` when one is
/// given. The initial state is drawn from mu0.
Episode sample_trajectory(const Domdp& mdp, const Policy& policy, const NoiseKernel* kernel,
                          const TrajectoryOptions& options, Rng& rng);
Episode sample_trajectory(const Domdp& mdp, const Policy& policy, const NoiseKernel* kernel,
                          const TrajectoryOptions& options, std::uint64_t seed);

}  // namespace lexirobust
