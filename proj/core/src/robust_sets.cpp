#include "lexirobust/robust_sets.hpp"

#include <algorithm>
#include <cmath>

#include "lexirobust/errors.hpp"
#include "lexirobust/random_instances.hpp"
#include "lexirobust/simplex.hpp"

namespace lexirobust {

namespace {

constexpr std::size_t kProjectionIterations = 10'000;
constexpr double kProjectionStall = 1e-12;
constexpr double kProjectionTarget = 1e-13;
constexpr std::size_t kErgodicityProbes = 20;
constexpr double kErgodicityMass = 1e-6;

}  // namespace

bool SetMembershipReport::chain_holds() const {
    return (!in_constant || in_fixed_point) && (!in_fixed_point || in_zero_disadvantage) &&
           (!in_zero_disadvantage || in_max_robust);
}

double row_spread(const Policy& policy) {
    const auto& pi = policy.matrix();
    return (pi.colwise().maxCoeff() - pi.colwise().minCoeff()).maxCoeff();
}

double fixed_point_gap(const Policy& policy, const NoiseKernel& kernel) {
    if (kernel.n_states() != policy.n_states()) {
        throw InvalidInput("fixed_point_gap: kernel and policy sizes differ");
    }
    return (kernel.matrix() * policy.matrix() - policy.matrix()).cwiseAbs().maxCoeff();
}

bool is_constant_policy(const Policy& policy, double tolerance) {
    return row_spread(policy) <= tolerance;
}

bool is_fixed_point(const Policy& policy, const NoiseKernel& kernel, double tolerance) {
    return fixed_point_gap(policy, kernel) <= tolerance;
}

bool is_zero_disadvantage(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel,
                          double tolerance) {
    const ValueBundle values = policy_evaluate(mdp, policy);
    const double scale = std::max(1.0, values.Q.cwiseAbs().maxCoeff());
    return noise_disadvantages(values, policy, kernel).cwiseAbs().maxCoeff() <= tolerance * scale;
}

SetMembershipReport classify_policy(const Domdp& mdp, const Policy& policy,
                                    const NoiseKernel& kernel, const SetTolerances& tolerances,
                                    std::size_t policy_id, std::string stratum) {
    SetMembershipReport report;
    report.policy_id = policy_id;
    report.stratum = std::move(stratum);
    report.tolerances = tolerances;

    const ValueBundle values = policy_evaluate(mdp, policy);
    report.objective = mdp.mu0().dot(values.V);
    report.regret = report.objective - objective_j(mdp, disturb_policy(policy, kernel));
    report.max_abs_disadvantage = noise_disadvantages(values, policy, kernel).cwiseAbs().maxCoeff();
    report.fixed_point_gap = fixed_point_gap(policy, kernel);
    report.row_spread = row_spread(policy);

    const double q_scale = std::max(1.0, values.Q.cwiseAbs().maxCoeff());
    report.in_constant = report.row_spread <= tolerances.constant;
    report.in_fixed_point = report.fixed_point_gap <= tolerances.fixed_point;
    report.in_zero_disadvantage = report.max_abs_disadvantage <= tolerances.zero_disadvantage * q_scale;
    report.in_max_robust = report.regret <= tolerances.regret * (1.0 + std::abs(report.objective));
    return report;
}

FixedPointBasis fixed_point_basis(const NoiseKernel& kernel) {
    const auto n = static_cast<Eigen::Index>(kernel.n_states());
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - kernel.matrix();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const auto& sigma = svd.singularValues();
    Eigen::Index rank = 0;
    while (rank < sigma.size() && sigma(rank) > kNullSpaceCutoff) ++rank;
    FixedPointBasis out;
    if (rank == n) {
        // Numerically impossible for a stochastic T; keep the all-ones direction.
        out.basis = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
        return out;
    }
    out.basis = svd.matrixV().rightCols(n - rank);
    return out;
}

Policy sample_fixed_point_policy(const NoiseKernel& kernel, std::size_t n_actions,
                                 std::uint64_t seed) {
    Rng rng(seed);
    const std::size_t n = kernel.n_states();
    const Policy initial = random_policy(n, n_actions, rng);
    const FixedPointBasis basis = fixed_point_basis(kernel);
    const Eigen::MatrixXd projector = basis.basis * basis.basis.transpose();

    Eigen::MatrixXd current = initial.matrix();
    for (std::size_t it = 0; it < kProjectionIterations; ++it) {
        const Eigen::MatrixXd on_subspace = projector * current;
        if ((on_subspace - current).cwiseAbs().maxCoeff() <= kProjectionTarget) break;
        Eigen::MatrixXd next = project_rows_to_simplex(on_subspace);
        const double change = (next - current).cwiseAbs().maxCoeff();
        current = std::move(next);
        if (change < kProjectionStall) break;
    }
    Policy candidate(current);
    if (is_fixed_point(candidate, kernel, SetTolerances{}.fixed_point)) return candidate;
    return Policy::constant(n, initial.matrix().colwise().mean().transpose());
}

Domdp build_reward_upper(const Domdp& mdp, double c) {
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    return mdp.with_rewards(std::vector<Eigen::MatrixXd>(mdp.n_actions(), Eigen::MatrixXd::Constant(n, n, c)));
}

Domdp build_reward_lower(const Domdp& mdp, std::size_t target_state, std::size_t target_action,
                         double c, std::uint64_t seed) {
    if (target_state >= mdp.n_states() || target_action >= mdp.n_actions()) {
        throw InvalidInput("build_reward_lower: target out of range");
    }
    Rng rng(seed);
    for (std::size_t probe = 0; probe < kErgodicityProbes; ++probe) {
        const Policy policy = random_policy(mdp.n_states(), mdp.n_actions(), rng);
        const Eigen::VectorXd p = stationary_distribution(mdp, policy);
        if (p.minCoeff() <= kErgodicityMass) {
            throw ErgodicityError("build_reward_lower: stationary mass " + std::to_string(p.minCoeff()) +
                                      " below 1e-6 under a sampled policy",
                                  p.minCoeff());
        }
    }
    const auto n = static_cast<Eigen::Index>(mdp.n_states());
    std::vector<Eigen::MatrixXd> rewards(mdp.n_actions(), Eigen::MatrixXd::Zero(n, n));
    rewards[target_action].row(static_cast<Eigen::Index>(target_state)).setConstant(c);
    return mdp.with_rewards(std::move(rewards));
}

void InclusionReport::merge(InclusionReport other) {
    n_triples += other.n_triples;
    n_convexity_checks += other.n_convexity_checks;
    auto append = [](auto& into, auto& from) {
        into.insert(into.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
    };
    append(violations, other.violations);
    append(convexity_violations, other.convexity_violations);
    append(nonconvexity_witnesses, other.nonconvexity_witnesses);
    append(reports, other.reports);
    tolerances = other.tolerances;
}

InclusionReport verify_inclusion_chain(const Domdp& mdp, const NoiseKernel& kernel,
                                       std::uint64_t seed, const InclusionOptions& options) {
    if (kernel.n_states() != mdp.n_states()) {
        throw InvalidInput("verify_inclusion_chain: kernel and mdp sizes differ");
    }
    Rng rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t n = mdp.n_states();
    const std::size_t m = mdp.n_actions();

    InclusionReport report;
    report.tolerances = options.tolerances;
    std::vector<Policy> constants;
    std::vector<Policy> fixed_points;
    std::vector<Policy> zero_disadvantage;

    auto record = [&](const Policy& policy, const char* stratum) {
        SetMembershipReport r = classify_policy(mdp, policy, kernel, options.tolerances,
                                                report.n_triples, stratum);
        ++report.n_triples;
        if (r.in_zero_disadvantage) zero_disadvantage.push_back(policy);
        if (!r.chain_holds()) report.violations.push_back(r);
        if (options.keep_reports) report.reports.push_back(std::move(r));
    };

    for (std::size_t i = 0; i < options.samples_per_stratum; ++i) {
        record(random_policy(n, m, rng), "random");

        Policy constant = random_constant_policy(n, m, rng);
        record(constant, "constant");
        constants.push_back(std::move(constant));

        Policy fixed = sample_fixed_point_policy(kernel, m, rng());
        record(fixed, "fixed_point");

        const double alpha = unit(rng);
        const Policy noisy = disturb_policy(random_policy(n, m, rng), kernel);
        record(Policy(alpha * fixed.matrix() + (1.0 - alpha) * noisy.matrix()), "disturbed_mixture");
        fixed_points.push_back(std::move(fixed));
    }

    auto pick = [&](const std::vector<Policy>& pool) -> const Policy& {
        std::uniform_int_distribution<std::size_t> index(0, pool.size() - 1);
        return pool[index(rng)];
    };
    for (std::size_t k = 0; k < options.convexity_pairs && !constants.empty(); ++k) {
        const double alpha = unit(rng);
        const Policy& a = pick(constants);
        const Policy& b = pick(constants);
        const Policy mixture(alpha * a.matrix() + (1.0 - alpha) * b.matrix());
        ++report.n_convexity_checks;
        const double spread = row_spread(mixture);
        if (spread > options.convexity_tolerance) {
            report.convexity_violations.push_back({"constant", alpha, spread, a.matrix(), b.matrix()});
        }

        const Policy& c = pick(fixed_points);
        const Policy& d = pick(fixed_points);
        // Only members at the convexity tolerance qualify as a pair inside the set.
        if (fixed_point_gap(c, kernel) <= options.convexity_tolerance &&
            fixed_point_gap(d, kernel) <= options.convexity_tolerance) {
            const Policy fixed_mixture(alpha * c.matrix() + (1.0 - alpha) * d.matrix());
            ++report.n_convexity_checks;
            const double gap = fixed_point_gap(fixed_mixture, kernel);
            if (gap > options.convexity_tolerance) {
                report.convexity_violations.push_back({"fixed_point", alpha, gap, c.matrix(), d.matrix()});
            }
        }

        if (zero_disadvantage.size() >= 2) {
            const Policy& e = pick(zero_disadvantage);
            const Policy& f = pick(zero_disadvantage);
            const Policy zd_mixture(alpha * e.matrix() + (1.0 - alpha) * f.matrix());
            const ValueBundle values = policy_evaluate(mdp, zd_mixture);
            const double scale = std::max(1.0, values.Q.cwiseAbs().maxCoeff());
            const double worst = noise_disadvantages(values, zd_mixture, kernel).cwiseAbs().maxCoeff();
            if (worst > options.tolerances.zero_disadvantage * scale) {
                report.nonconvexity_witnesses.push_back({"zero_disadvantage", alpha, worst, e.matrix(), f.matrix()});
            }
        }
    }
    return report;
}

}  // namespace lexirobust
