#include "lexirobust/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <limits>
#include <queue>
#include <sstream>

#include "lexirobust/errors.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust {

namespace {

constexpr double kNegativeSlack = 1e-12;
constexpr double kSolveResidualLimit = 1e-8;
constexpr double kStationaryResidual = 1e-12;

}  // namespace

void validate_distribution(Eigen::Ref<Eigen::VectorXd> row, const std::string& what) {
    for (Eigen::Index i = 0; i < row.size(); ++i) {
        const double value = row(i);
        if (!std::isfinite(value)) {
            throw InvalidInput(what + ": non-finite entry at index " +
                               std::to_string(i));
        }
        if (value < -kNegativeSlack) {
            std::ostringstream msg;
            msg << what << ": negative entry " << value << " at index " << i;
            throw InvalidInput(msg.str());
        }
        if (value < 0.0) row(i) = 0.0;
    }
    const double sum = row.sum();
    if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
        std::ostringstream msg;
        msg.precision(17);
        msg << what << ": sums to " << sum << " (expected 1)";
        throw InvalidInput(msg.str());
    }
    if (sum != 1.0) row /= sum;
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(Eigen::MatrixXd probabilities) : pi_(std::move(probabilities)) {
    if (pi_.rows() == 0 || pi_.cols() == 0) throw InvalidInput("policy: empty table");
    for (Eigen::Index x = 0; x < pi_.rows(); ++x) {
        Eigen::VectorXd row = pi_.row(x).transpose();
        validate_distribution(row, "policy row " + std::to_string(x));
        pi_.row(x) = row.transpose();
    }
}

Policy Policy::uniform(std::size_t n_states, std::size_t n_actions) {
    return Policy(Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(n_states),
                                            static_cast<Eigen::Index>(n_actions),
                                            1.0 / static_cast<double>(n_actions)));
}

Policy Policy::constant(std::size_t n_states, const Eigen::VectorXd& action_distribution) {
    Eigen::MatrixXd pi(static_cast<Eigen::Index>(n_states), action_distribution.size());
    pi.rowwise() = action_distribution.transpose();
    return Policy(std::move(pi));
}

Policy Policy::deterministic(std::span<const int> action_per_state, std::size_t n_actions) {
    Eigen::MatrixXd pi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(action_per_state.size()),
                                               static_cast<Eigen::Index>(n_actions));
    for (std::size_t x = 0; x < action_per_state.size(); ++x) {
        const int u = action_per_state[x];
        if (u < 0 || static_cast<std::size_t>(u) >= n_actions) {
            throw InvalidInput("deterministic policy: action out of range at state " +
                               std::to_string(x));
        }
        pi(static_cast<Eigen::Index>(x), u) = 1.0;
    }
    return Policy(std::move(pi));
}

// ---------------------------------------------------------------------------
// Domdp

Domdp::Domdp(std::vector<Eigen::MatrixXd> transitions, std::vector<Eigen::MatrixXd> rewards,
             double gamma, Eigen::VectorXd mu0)
    : transitions_(std::move(transitions)),
      rewards_(std::move(rewards)),
      gamma_(gamma),
      mu0_(std::move(mu0)) {
    if (transitions_.empty()) throw InvalidInput("domdp: at least one action is required");
    n_states_ = static_cast<std::size_t>(transitions_.front().rows());
    if (n_states_ == 0) throw InvalidInput("domdp: at least one state is required");
    if (rewards_.size() != transitions_.size()) {
        throw InvalidInput("domdp: reward tensor has " + std::to_string(rewards_.size()) +
                           " actions, transition tensor has " +
                           std::to_string(transitions_.size()));
    }
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) {
        throw InvalidInput("domdp: gamma must lie in [0, 1), got " + std::to_string(gamma_));
    }
    const auto n = static_cast<Eigen::Index>(n_states_);
    if (mu0_.size() != n) throw InvalidInput("domdp: mu0 has wrong length");
    validate_distribution(mu0_, "mu0");
    for (std::size_t u = 0; u < transitions_.size(); ++u) {
        auto& P = transitions_[u];
        const auto& R = rewards_[u];
        if (P.rows() != n || P.cols() != n || R.rows() != n || R.cols() != n) {
            throw InvalidInput("domdp: tensor slice for action " + std::to_string(u) +
                               " is not " + std::to_string(n_states_) + "x" +
                               std::to_string(n_states_));
        }
        if (!R.allFinite()) throw InvalidInput("domdp: non-finite reward for action " + std::to_string(u));
        for (Eigen::Index x = 0; x < n; ++x) {
            Eigen::VectorXd row = P.row(x).transpose();
            validate_distribution(row, "P[" + std::to_string(x) + "][" + std::to_string(u) + "]");
            P.row(x) = row.transpose();
        }
    }
    expected_reward_.resize(n, static_cast<Eigen::Index>(n_actions()));
    for (std::size_t u = 0; u < n_actions(); ++u) {
        expected_reward_.col(static_cast<Eigen::Index>(u)) =
            transitions_[u].cwiseProduct(rewards_[u]).rowwise().sum();
    }
}

Domdp Domdp::from_nested(const std::vector<std::vector<std::vector<double>>>& P,
                         const std::vector<std::vector<std::vector<double>>>& R, double gamma,
                         const std::vector<double>& mu0) {
    const std::size_t n = P.size();
    if (n == 0 || R.size() != n) throw InvalidInput("domdp: P and R must have n_states rows");
    const std::size_t m = P.front().size();
    std::vector<Eigen::MatrixXd> transitions(m, Eigen::MatrixXd(n, n));
    std::vector<Eigen::MatrixXd> rewards(m, Eigen::MatrixXd(n, n));
    for (std::size_t x = 0; x < n; ++x) {
        if (P[x].size() != m || R[x].size() != m) {
            throw InvalidInput("domdp: state " + std::to_string(x) + " has inconsistent action count");
        }
        for (std::size_t u = 0; u < m; ++u) {
            if (P[x][u].size() != n || R[x][u].size() != n) {
                throw InvalidInput("domdp: entry [" + std::to_string(x) + "][" + std::to_string(u) +
                                   "] has wrong length");
            }
            for (std::size_t y = 0; y < n; ++y) {
                transitions[u](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = P[x][u][y];
                rewards[u](static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = R[x][u][y];
            }
        }
    }
    Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mu0.data(), static_cast<Eigen::Index>(mu0.size()));
    return Domdp(std::move(transitions), std::move(rewards), gamma, std::move(mu));
}

Domdp Domdp::with_rewards(std::vector<Eigen::MatrixXd> rewards) const {
    return Domdp(transitions_, std::move(rewards), gamma_, mu0_);
}

void Domdp::check_policy(const Policy& policy) const {
    if (policy.n_states() != n_states_ || policy.n_actions() != n_actions()) {
        throw InvalidInput("policy is " + std::to_string(policy.n_states()) + "x" +
                           std::to_string(policy.n_actions()) + ", mdp expects " +
                           std::to_string(n_states_) + "x" + std::to_string(n_actions()));
    }
}

Eigen::MatrixXd Domdp::induced_transition(const Policy& policy) const {
    check_policy(policy);
    const auto n = static_cast<Eigen::Index>(n_states_);
    Eigen::MatrixXd P_pi = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t u = 0; u < n_actions(); ++u) {
        P_pi.noalias() += policy.matrix().col(static_cast<Eigen::Index>(u)).asDiagonal() * transitions_[u];
    }
    return P_pi;
}

Eigen::VectorXd Domdp::induced_reward(const Policy& policy) const {
    check_policy(policy);
    return policy.matrix().cwiseProduct(expected_reward_).rowwise().sum();
}

// ---------------------------------------------------------------------------
// Evaluation

ValueBundle policy_evaluate(const Domdp& mdp, const Policy& policy) {
    const Eigen::MatrixXd P_pi = mdp.induced_transition(policy);
    const Eigen::VectorXd r_pi = mdp.induced_reward(policy);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * P_pi;

    ValueBundle out;
    out.V = A.partialPivLu().solve(r_pi);
    const double solve_residual = (A * out.V - r_pi).cwiseAbs().maxCoeff();
    if (!out.V.allFinite() || solve_residual > kSolveResidualLimit * std::max(1.0, r_pi.cwiseAbs().maxCoeff())) {
        throw NumericalError("policy_evaluate: linear solve residual too large", solve_residual);
    }

    out.Q.resize(n, static_cast<Eigen::Index>(mdp.n_actions()));
    for (std::size_t u = 0; u < mdp.n_actions(); ++u) {
        out.Q.col(static_cast<Eigen::Index>(u)) =
            mdp.expected_reward().col(static_cast<Eigen::Index>(u)) + mdp.gamma() * (mdp.transition(u) * out.V);
    }
    out.bellman_residual = (r_pi + mdp.gamma() * (P_pi * out.V) - out.V).cwiseAbs().maxCoeff();
    return out;
}

double objective_j(const Domdp& mdp, const Policy& policy) {
    return mdp.mu0().dot(policy_evaluate(mdp, policy).V);
}

Eigen::VectorXd evaluate_by_iteration(const Domdp& mdp, const Policy& policy, double tolerance,
                                      std::size_t max_iterations) {
    const Eigen::MatrixXd P_pi = mdp.induced_transition(policy);
    const Eigen::VectorXd r_pi = mdp.induced_reward(policy);
    Eigen::VectorXd V = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp.n_states()));
    for (std::size_t it = 0; it < max_iterations; ++it) {
        Eigen::VectorXd next = r_pi + mdp.gamma() * (P_pi * V);
        const double delta = (next - V).cwiseAbs().maxCoeff();
        V = std::move(next);
        if (delta < tolerance) return V;
    }
    throw NumericalError("evaluate_by_iteration: no convergence", 0.0);
}

namespace {

std::vector<std::vector<std::size_t>> support_graph(const Eigen::MatrixXd& P, bool reverse) {
    const auto n = static_cast<std::size_t>(P.rows());
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            if (P(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) > 0.0) {
                if (reverse) adj[y].push_back(x);
                else adj[x].push_back(y);
            }
        }
    }
    return adj;
}

std::vector<long> bfs_levels(const std::vector<std::vector<std::size_t>>& adj) {
    std::vector<long> level(adj.size(), -1);
    std::queue<std::size_t> frontier;
    level[0] = 0;
    frontier.push(0);
    while (!frontier.empty()) {
        const auto x = frontier.front();
        frontier.pop();
        for (auto y : adj[x]) {
            if (level[y] < 0) {
                level[y] = level[x] + 1;
                frontier.push(y);
            }
        }
    }
    return level;
}

}  // namespace

Eigen::VectorXd stationary_distribution(const Domdp& mdp, const Policy& policy,
                                        std::size_t max_iterations) {
    const Eigen::MatrixXd P_pi = mdp.induced_transition(policy);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());

    // Irreducibility: state 0 reaches everything and is reached from everything.
    const auto forward = support_graph(P_pi, false);
    const auto level = bfs_levels(forward);
    const auto backward = bfs_levels(support_graph(P_pi, true));
    for (std::size_t x = 0; x < level.size(); ++x) {
        if (level[x] < 0 || backward[x] < 0) {
            throw ErgodicityError("stationary_distribution: chain is reducible (state " +
                                  std::to_string(x) + " is not mutually reachable with state 0)",
                                  std::numeric_limits<double>::infinity());
        }
    }
    // Period: gcd of level[x] + 1 - level[y] over all edges x -> y.
    long period = 0;
    for (std::size_t x = 0; x < forward.size(); ++x) {
        for (auto y : forward[x]) period = std::gcd(period, std::abs(level[x] + 1 - level[y]));
    }
    if (period != 1) {
        throw ErgodicityError("stationary_distribution: chain is periodic with period " +
                                  std::to_string(period),
                              std::numeric_limits<double>::infinity());
    }

    Eigen::RowVectorXd p = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
    double residual = std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < max_iterations; ++it) {
        Eigen::RowVectorXd next = p * P_pi;
        next /= next.sum();
        residual = (next - p).cwiseAbs().sum();
        p = std::move(next);
        if (residual < kStationaryResidual) return p.transpose();
    }
    throw ErgodicityError("stationary_distribution: power iteration did not converge; chain may be "
                          "reducible or periodic",
                          residual);
}

Eigen::VectorXd discounted_occupancy(const Domdp& mdp, const Policy& policy) {
    const Eigen::MatrixXd P_pi = mdp.induced_transition(policy);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * P_pi.transpose();
    Eigen::VectorXd d = A.partialPivLu().solve(mdp.mu0());
    d *= (1.0 - mdp.gamma());
    d = d.cwiseMax(0.0);
    return d / d.sum();
}

Eigen::VectorXd state_weights(const Domdp& mdp, const Policy& policy, StateWeighting weighting) {
    switch (weighting) {
        case StateWeighting::stationary:
            return stationary_distribution(mdp, policy);
        case StateWeighting::occupancy:
            return discounted_occupancy(mdp, policy);
    }
    throw InvalidInput("unknown state weighting");
}

OptimalSolution solve_optimal(const Domdp& mdp, std::size_t max_iterations) {
    const auto n = mdp.n_states();
    const auto m = mdp.n_actions();
    std::vector<int> greedy(n, 0);
    Policy current = Policy::uniform(n, m);
    for (std::size_t it = 1; it <= max_iterations; ++it) {
        const ValueBundle values = policy_evaluate(mdp, current);
        std::vector<int> next(n, 0);
        for (std::size_t x = 0; x < n; ++x) {
            const auto q = values.Q.row(static_cast<Eigen::Index>(x));
            const double best = q.maxCoeff();
            const double slack = 1e-12 * std::max(1.0, std::abs(best));
            // Keep the incumbent action on ties so the iteration terminates.
            int choice = -1;
            if (it > 1 && q(greedy[x]) >= best - slack) choice = greedy[x];
            for (std::size_t u = 0; choice < 0 && u < m; ++u) {
                if (q(static_cast<Eigen::Index>(u)) >= best - slack) choice = static_cast<int>(u);
            }
            next[x] = choice;
        }
        if (it > 1 && next == greedy) return {current, values.V, it};
        greedy = std::move(next);
        current = Policy::deterministic(greedy, m);
    }
    throw NumericalError("solve_optimal: policy iteration did not converge", 0.0);
}

// ---------------------------------------------------------------------------
// Sampling

std::size_t sample_index(const RowRef& probabilities, Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double draw = unit(rng);
    double cumulative = 0.0;
    const Eigen::Index last = probabilities.size() - 1;
    for (Eigen::Index i = 0; i < last; ++i) {
        cumulative += probabilities(i);
        if (draw < cumulative) return static_cast<std::size_t>(i);
    }
    // Skip trailing zero-probability entries left over from rounding.
    Eigen::Index i = last;
    while (i > 0 && probabilities(i) <= 0.0) --i;
    return static_cast<std::size_t>(i);
}

std::size_t sample_next_state(const Domdp& mdp, std::size_t x, std::size_t u, Rng& rng) {
    return sample_index(mdp.transition(u).row(static_cast<Eigen::Index>(x)), rng);
}

Episode sample_trajectory(const Domdp& mdp, const Policy& policy, const NoiseKernel* kernel,
                          const TrajectoryOptions& options, Rng& rng) {
    mdp.check_policy(policy);
    if (options.horizon == 0) throw InvalidInput("sample_trajectory: horizon must be >= 1");
    if (kernel != nullptr && kernel->n_states() != mdp.n_states()) {
        throw InvalidInput("sample_trajectory: kernel size does not match the mdp");
    }
    // Observations draw from their own stream so that an identity kernel and
    // no kernel give the same trajectory.
    Rng observation_rng(rng());
    Episode episode;
    episode.reserve(options.horizon);
    std::size_t x = sample_index(mdp.mu0().transpose(), rng);
    for (std::size_t t = 0; t < options.horizon; ++t) {
        if (options.stop_state && x == *options.stop_state) break;
        Step step;
        step.state = x;
        step.observed_state = kernel != nullptr ? sample_index(kernel->row(x), observation_rng) : x;
        step.action = sample_index(policy.row(step.observed_state), rng);
        const std::size_t y = sample_next_state(mdp, x, step.action, rng);
        step.reward = mdp.r(x, step.action, y);
        episode.push_back(step);
        x = y;
    }
    return episode;
}

Episode sample_trajectory(const Domdp& mdp, const Policy& policy, const NoiseKernel* kernel,
                          const TrajectoryOptions& options, std::uint64_t seed) {
    Rng rng(seed);
    return sample_trajectory(mdp, policy, kernel, options, rng);
}

}  // namespace lexirobust
