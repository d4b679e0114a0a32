#include "lexirobust/policy_gradient.hpp"

#include <cmath>
#include <numeric>

#include "lexirobust/errors.hpp"
#include "lexirobust/simplex.hpp"

namespace lexirobust {

namespace {

/// J_x^T w for the softmax Jacobian J_x = diag(p) - p p^T (symmetric).
Eigen::RowVectorXd softmax_pullback(const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& w) {
    return p.cwiseProduct(w) - p * p.dot(w);
}

void require_states(std::span<const std::size_t> states, std::size_t n_states, const char* who) {
    if (states.empty()) throw InvalidInput(std::string(who) + ": empty state batch");
    for (auto x : states) {
        if (x >= n_states) throw InvalidInput(std::string(who) + ": state index out of range");
    }
}

}  // namespace

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& scores) {
    Eigen::MatrixXd out = scores.colwise() - scores.rowwise().maxCoeff();
    out = out.array().exp().matrix();
    const Eigen::VectorXd sums = out.rowwise().sum();
    return sums.cwiseInverse().asDiagonal() * out;
}

SoftmaxPolicyParams::SoftmaxPolicyParams(std::size_t n_states, std::size_t n_actions)
    : theta_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions))) {
    if (n_states == 0 || n_actions == 0) throw InvalidInput("softmax params: empty table");
}

SoftmaxPolicyParams::SoftmaxPolicyParams(Eigen::MatrixXd theta) : theta_(std::move(theta)) {
    if (theta_.size() == 0) throw InvalidInput("softmax params: empty table");
    if (!theta_.allFinite()) throw InvalidInput("softmax params: non-finite score");
}

double LearningSchedule::operator()(std::size_t t) const {
    switch (kind) {
        case Kind::constant: return a;
        case Kind::harmonic: return a / (b + static_cast<double>(t));
    }
    return a;
}

// ---------------------------------------------------------------------------
// Critic

CriticTable::CriticTable(std::size_t n_states, std::size_t n_actions, LearningSchedule schedule)
    : q_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions))),
      visits_(decltype(visits_)::Zero(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions))),
      schedule_(schedule) {}

Eigen::VectorXd CriticTable::V(const Policy& policy) const {
    return policy.matrix().cwiseProduct(q_).rowwise().sum();
}

void CriticTable::update(std::size_t x, std::size_t u, double reward, std::size_t next_state,
                         const Policy& policy, double gamma) {
    const auto xi = static_cast<Eigen::Index>(x);
    const auto ui = static_cast<Eigen::Index>(u);
    const auto yi = static_cast<Eigen::Index>(next_state);
    const double alpha = schedule_(visits_(xi, ui)++);
    const double target = reward + gamma * policy.row(next_state).dot(q_.row(yi));
    q_(xi, ui) += alpha * (target - q_(xi, ui));
}

double CriticTable::bellman_residual(const Domdp& mdp, const Policy& policy) const {
    const Eigen::VectorXd v = V(policy);
    double worst = 0.0;
    for (std::size_t u = 0; u < mdp.n_actions(); ++u) {
        const auto ui = static_cast<Eigen::Index>(u);
        const Eigen::VectorXd target = mdp.expected_reward().col(ui) + mdp.gamma() * (mdp.transition(u) * v);
        worst = std::max(worst, (q_.col(ui) - target).cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Primary objective

Eigen::MatrixXd grad_k1(PrimaryEstimator estimator, const RolloutBatch& batch,
                        const SoftmaxPolicyParams& params, double gamma, const CriticTable* critic,
                        const Eigen::VectorXd* baseline) {
    if (batch.empty()) throw InvalidInput("grad_k1: empty rollout batch");
    const Eigen::MatrixXd pi = softmax_rows(params.theta());
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());

    auto add_score = [&](const Transition& tr, double weight) {
        const auto x = static_cast<Eigen::Index>(tr.state);
        grad.row(x) -= weight * pi.row(x);
        grad(x, static_cast<Eigen::Index>(tr.action)) += weight;
    };

    if (estimator == PrimaryEstimator::actor_critic) {
        if (critic == nullptr) throw InvalidInput("grad_k1: actor_critic requires a critic");
        const Eigen::MatrixXd& Q = critic->Q();
        for (const auto& tr : batch) {
            const auto x = static_cast<Eigen::Index>(tr.state);
            const double advantage = Q(x, static_cast<Eigen::Index>(tr.action)) - pi.row(x).dot(Q.row(x));
            add_score(tr, advantage);
        }
        return grad / static_cast<double>(batch.size());
    }

    std::size_t episodes = 0;
    std::size_t begin = 0;
    while (begin < batch.size()) {
        std::size_t end = begin;
        while (end < batch.size() && !batch[end].episode_end) ++end;
        if (end == batch.size()) --end;  // trailing partial episode ends at the batch edge
        double G = 0.0;
        for (std::size_t i = end + 1; i-- > begin;) {
            const Transition& tr = batch[i];
            G = tr.reward + gamma * G;
            const double b = baseline != nullptr ? (*baseline)(static_cast<Eigen::Index>(tr.state)) : 0.0;
            add_score(tr, std::pow(gamma, static_cast<double>(tr.time)) * (G - b));
        }
        ++episodes;
        begin = end + 1;
    }
    return grad / static_cast<double>(episodes);
}

Eigen::MatrixXd exact_grad_j(const Domdp& mdp, const SoftmaxPolicyParams& params) {
    const Policy policy = params.policy();
    const ValueBundle values = policy_evaluate(mdp, policy);
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    const Eigen::MatrixXd A =
        Eigen::MatrixXd::Identity(n, n) - mdp.gamma() * mdp.induced_transition(policy).transpose();
    const Eigen::VectorXd visitation = A.partialPivLu().solve(mdp.mu0());
    const Eigen::MatrixXd advantage = values.Q.colwise() - values.V;
    return visitation.asDiagonal() * policy.matrix().cwiseProduct(advantage);
}

// ---------------------------------------------------------------------------
// Robustness objectives

Eigen::MatrixXd grad_kt_approx(const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                               std::span<const std::size_t> states, Rng& rng) {
    if (kernel_tilde.n_states() != params.n_states()) {
        throw InvalidInput("grad_kt_approx: kernel and policy sizes differ");
    }
    require_states(states, params.n_states(), "grad_kt_approx");
    const Eigen::MatrixXd pi = softmax_rows(params.theta());
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
    for (auto x : states) {
        const std::size_t y = sample_index(kernel_tilde.row(x), rng);
        const auto xi = static_cast<Eigen::Index>(x);
        grad.row(xi) += softmax_pullback(pi.row(xi), pi.row(xi) - pi.row(static_cast<Eigen::Index>(y)));
    }
    return grad / static_cast<double>(states.size());
}

Eigen::MatrixXd grad_kt_approx(const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                               std::span<const std::size_t> states, std::uint64_t seed) {
    Rng rng(seed);
    return grad_kt_approx(params, kernel_tilde, states, rng);
}

double objective_kt(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel_tilde,
                    StateWeighting weighting) {
    const Eigen::VectorXd p = state_weights(mdp, policy, weighting);
    const Eigen::MatrixXd diff = policy.matrix() - disturb_policy(policy, kernel_tilde).matrix();
    return 0.5 * p.dot(diff.rowwise().squaredNorm());
}

double objective_kt(const Domdp& mdp, const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                    StateWeighting weighting) {
    return objective_kt(mdp, params.policy(), kernel_tilde, weighting);
}

double objective_kd(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel_tilde,
                    StateWeighting weighting) {
    const Eigen::VectorXd p = state_weights(mdp, policy, weighting);
    const Eigen::VectorXd D = noise_disadvantages(mdp, policy, kernel_tilde);
    return 0.5 * p.dot(D.cwiseAbs2());
}

Eigen::VectorXd disadvantages_from_q(const Policy& policy, const NoiseKernel& kernel_tilde,
                                     const Eigen::MatrixXd& Q) {
    const Eigen::MatrixXd diff = policy.matrix() - kernel_tilde.matrix() * policy.matrix();
    return diff.cwiseProduct(Q).rowwise().sum();
}

namespace {

/// Adds weight * D(x) * grad D(x) for one state, Q held fixed.
void accumulate_kd(Eigen::MatrixXd& grad, const Eigen::MatrixXd& pi, const Eigen::MatrixXd& disturbed,
                   const NoiseKernel& kernel, const Eigen::MatrixXd& Q, Eigen::Index x, double weight) {
    const Eigen::RowVectorXd q = Q.row(x);
    const double D = (pi.row(x) - disturbed.row(x)).dot(q);
    if (D == 0.0 || weight == 0.0) return;
    const double scale = weight * D;
    grad.row(x) += scale * softmax_pullback(pi.row(x), q);
    for (Eigen::Index y = 0; y < pi.rows(); ++y) {
        const double t = kernel(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
        if (t == 0.0) continue;
        grad.row(y) -= scale * t * softmax_pullback(pi.row(y), q);
    }
}

}  // namespace

Eigen::MatrixXd grad_kd(const SoftmaxPolicyParams& params, const NoiseKernel& kernel_tilde,
                        const Eigen::MatrixXd& Q, std::span<const std::size_t> states) {
    if (kernel_tilde.n_states() != params.n_states() || Q.rows() != params.theta().rows() ||
        Q.cols() != params.theta().cols()) {
        throw InvalidInput("grad_kd: kernel, critic and policy sizes differ");
    }
    require_states(states, params.n_states(), "grad_kd");
    const Eigen::MatrixXd pi = softmax_rows(params.theta());
    const Eigen::MatrixXd disturbed = kernel_tilde.matrix() * pi;
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
    for (auto x : states) accumulate_kd(grad, pi, disturbed, kernel_tilde, Q, static_cast<Eigen::Index>(x), 1.0);
    return grad / static_cast<double>(states.size());
}

Eigen::MatrixXd grad_kd(const Domdp& mdp, const SoftmaxPolicyParams& params,
                        const NoiseKernel& kernel_tilde, const Eigen::VectorXd& weights) {
    if (weights.size() != static_cast<Eigen::Index>(mdp.n_states())) {
        throw InvalidInput("grad_kd: weight vector has wrong length");
    }
    const Policy policy = params.policy();
    const ValueBundle values = policy_evaluate(mdp, policy);
    const Eigen::MatrixXd& pi = policy.matrix();
    const Eigen::MatrixXd disturbed = kernel_tilde.matrix() * pi;
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(pi.rows(), pi.cols());
    for (Eigen::Index x = 0; x < pi.rows(); ++x) accumulate_kd(grad, pi, disturbed, kernel_tilde, values.Q, x, weights(x));
    return grad;
}

// ---------------------------------------------------------------------------
// Lexicographic update

LexiStep lexicographic_update(const SoftmaxPolicyParams& params, const LexiState& lexi,
                              const Eigen::MatrixXd& grad_k1, const Eigen::MatrixXd& grad_k2,
                              double value_k1, double step_size, const LexiSettings& settings) {
    const auto& theta = params.theta();
    if (grad_k1.rows() != theta.rows() || grad_k1.cols() != theta.cols() ||
        grad_k2.rows() != theta.rows() || grad_k2.cols() != theta.cols()) {
        throw InvalidInput("lexicographic_update: gradient shape differs from theta");
    }
    if (!grad_k1.allFinite() || !grad_k2.allFinite() || !std::isfinite(value_k1)) {
        throw NumericalError("lexicographic_update: non-finite gradient or objective value",
                             std::numeric_limits<double>::quiet_NaN());
    }

    LexiStep out{params, lexi, 0.0, 0.0};
    LexiState& next = out.lexi;
    if (!next.k1_converged) {
        next.k_hat1 = value_k1;
        const std::size_t window = settings.convergence_window;
        next.k1_history.push_back(value_k1);
        while (next.k1_history.size() > 2 * window) next.k1_history.pop_front();
        if (window > 0 && next.k1_history.size() == 2 * window) {
            const auto mid = next.k1_history.begin() + static_cast<std::ptrdiff_t>(window);
            const double previous = std::accumulate(next.k1_history.begin(), mid, 0.0) / static_cast<double>(window);
            const double recent = std::accumulate(mid, next.k1_history.end(), 0.0) / static_cast<double>(window);
            if (std::abs(recent) > 1e-12 &&
                std::abs(recent - previous) <= settings.convergence_tolerance * std::abs(recent)) {
                next.k1_converged = true;
            }
        }
    }
    next.epsilon_t = settings.epsilon(next.k_hat1);

    out.k1_coefficient = next.beta1 + next.lambda * next.beta2;
    out.k2_coefficient = next.beta2;
    out.params.theta() += step_size * (out.k1_coefficient * grad_k1 + out.k2_coefficient * grad_k2);

    next.lambda = std::max(0.0, next.lambda + next.eta * (next.k_hat1 - next.epsilon_t - value_k1));
    return out;
}

// ---------------------------------------------------------------------------
// Tabular fixed-point iteration

FixedPointIterationResult fixed_point_iteration(const Policy& initial, const NoiseKernel& kernel_tilde,
                                                const LearningSchedule& schedule, std::size_t max_steps,
                                                std::uint64_t seed, const Domdp& mdp,
                                                const FixedPointIterationOptions& options) {
    mdp.check_policy(initial);
    if (kernel_tilde.n_states() != initial.n_states()) {
        throw InvalidInput("fixed_point_iteration: kernel and policy sizes differ");
    }
    Rng rng(seed);
    Eigen::MatrixXd pi = initial.matrix();
    FixedPointIterationResult result;
    std::size_t x = sample_index(mdp.mu0().transpose(), rng);
    for (std::size_t t = 0; t < max_steps; ++t) {
        const std::size_t y = sample_index(kernel_tilde.row(x), rng);
        if (y != x) {
            const auto xi = static_cast<Eigen::Index>(x);
            Eigen::RowVectorXd row = pi.row(xi) - schedule(t) * (pi.row(xi) - pi.row(static_cast<Eigen::Index>(y)));
            if (row.minCoeff() < 0.0 || std::abs(row.sum() - 1.0) > 1e-12) {
                row = project_to_simplex(row.transpose()).transpose();
            }
            pi.row(xi) = row;
        }
        if (options.trace_every > 0 && (t + 1) % options.trace_every == 0) {
            result.trace.push_back(objective_kt(mdp, Policy(pi), kernel_tilde, options.weighting));
        }
        const std::size_t u = sample_index(pi.row(static_cast<Eigen::Index>(x)), rng);
        x = sample_next_state(mdp, x, u, rng);
    }
    result.policy = Policy(pi);
    result.steps = max_steps;
    result.objective_kt = objective_kt(mdp, result.policy, kernel_tilde, options.weighting);
    result.converged = result.objective_kt < options.threshold;
    return result;
}

}  // namespace lexirobust
