#include "lexirobust/suites.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lexirobust/envs.hpp"
#include "lexirobust/policy_gradient.hpp"
#include "lexirobust/random_instances.hpp"

namespace lexirobust {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Instance {
    Domdp mdp;
    Rng rng;
};

/// The i-th random instance of a population; each gets its own generator.
Instance make_instance(const RandomInstanceOptions& o, std::size_t i) {
    Rng rng(o.seed * 0x9E3779B97F4A7C15ULL + i);
    std::uniform_int_distribution<std::size_t> states(o.min_states, o.max_states);
    std::uniform_int_distribution<std::size_t> actions(o.min_actions, o.max_actions);
    std::uniform_real_distribution<double> gamma(o.gamma_low, o.gamma_high);
    const std::size_t n = states(rng);
    const std::size_t m = actions(rng);
    Domdp mdp = random_domdp(n, m, gamma(rng), rng);
    if (o.constant_reward) {
        std::uniform_real_distribution<double> level(-5.0, 5.0);
        mdp = mdp.with_rewards(std::vector<Eigen::MatrixXd>(m, Eigen::MatrixXd::Constant(
                                                                   static_cast<Eigen::Index>(n),
                                                                   static_cast<Eigen::Index>(n), level(rng))));
    }
    return {std::move(mdp), rng};
}

std::string format(const char* fmt, auto... args) {
    char buffer[512];
    std::snprintf(buffer, sizeof buffer, fmt, args...);
    return buffer;
}

}  // namespace

InclusionSuiteResult inclusion_suite(const RandomInstanceOptions& instances, const InclusionOptions& options) {
    const auto start = Clock::now();
    InclusionSuiteResult result;
    result.report.tolerances = options.tolerances;
    double worst_regret_in_zero_disadvantage = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < instances.n_mdps; ++i) {
        Instance inst = make_instance(instances, i);
        const NoiseKernel kernel = random_kernel(inst.mdp.n_states(), i, inst.rng);
        InclusionOptions local = options;
        local.keep_reports = true;
        InclusionReport report = verify_inclusion_chain(inst.mdp, kernel, inst.rng(), local);
        for (const auto& r : report.reports) {
            if (r.in_zero_disadvantage) worst_regret_in_zero_disadvantage = std::max(worst_regret_in_zero_disadvantage, r.regret);
        }
        if (!options.keep_reports) report.reports.clear();
        result.report.merge(std::move(report));
    }
    auto& out = result.outcome;
    out.name = "inclusion_chain";
    out.checks = result.report.n_triples;
    out.failures = result.report.violations.size() + result.report.convexity_violations.size();
    out.passed = result.report.ok();
    out.seconds = seconds_since(start);
    out.detail = format("%zu triples over %zu mdps, %zu chain violations, %zu convexity violations, "
                        "%zu zero-disadvantage non-convexity witnesses, max regret inside zero-disadvantage set %.3g",
                        result.report.n_triples, instances.n_mdps, result.report.violations.size(),
                        result.report.convexity_violations.size(), result.report.nonconvexity_witnesses.size(),
                        worst_regret_in_zero_disadvantage);
    return result;
}

SuiteOutcome convexity_suite(const RandomInstanceOptions& instances, std::size_t pairs_per_kernel,
                             double tolerance, std::size_t min_checks) {
    const auto start = Clock::now();
    std::size_t constant_checks = 0;
    std::size_t fixed_checks = 0;
    std::size_t failures = 0;
    double worst_spread = 0.0;
    double worst_gap = 0.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < instances.n_mdps; ++i) {
        Instance inst = make_instance(instances, i);
        const std::size_t n = inst.mdp.n_states();
        const std::size_t m = inst.mdp.n_actions();
        const NoiseKernel kernel = random_kernel(n, i, inst.rng);
        for (std::size_t k = 0; k < pairs_per_kernel; ++k) {
            const double alpha = unit(inst.rng);
            const Policy a = random_constant_policy(n, m, inst.rng);
            const Policy b = random_constant_policy(n, m, inst.rng);
            const double spread = row_spread(Policy(alpha * a.matrix() + (1.0 - alpha) * b.matrix()));
            worst_spread = std::max(worst_spread, spread);
            ++constant_checks;
            if (spread > tolerance) ++failures;

            const Policy c = sample_fixed_point_policy(kernel, m, inst.rng());
            const Policy d = sample_fixed_point_policy(kernel, m, inst.rng());
            if (fixed_point_gap(c, kernel) > tolerance || fixed_point_gap(d, kernel) > tolerance) continue;
            const double gap = fixed_point_gap(Policy(alpha * c.matrix() + (1.0 - alpha) * d.matrix()), kernel);
            worst_gap = std::max(worst_gap, gap);
            ++fixed_checks;
            if (gap > tolerance) ++failures;
        }
    }
    SuiteOutcome out;
    out.name = "convexity";
    out.checks = constant_checks + fixed_checks;
    out.failures = failures;
    out.passed = failures == 0 && constant_checks >= min_checks && fixed_checks >= min_checks;
    out.seconds = seconds_since(start);
    out.detail = format("%zu constant mixtures (max spread %.2e), %zu fixed-point mixtures (max gap %.2e), "
                        "%zu outside tolerance %.0e",
                        constant_checks, worst_spread, fixed_checks, worst_gap, failures, tolerance);
    return out;
}

SuiteOutcome constant_reward_suite(const RandomInstanceOptions& instances, std::size_t policies_per_mdp,
                                   std::size_t kernels_per_mdp, double tolerance) {
    const auto start = Clock::now();
    RandomInstanceOptions constant = instances;
    constant.constant_reward = true;
    std::size_t checks = 0;
    std::size_t failures = 0;
    double worst = 0.0;
    for (std::size_t i = 0; i < constant.n_mdps; ++i) {
        Instance inst = make_instance(constant, i);
        for (std::size_t k = 0; k < kernels_per_mdp; ++k) {
            const NoiseKernel kernel = random_kernel(inst.mdp.n_states(), i + k, inst.rng);
            for (std::size_t p = 0; p < policies_per_mdp; ++p) {
                const Policy policy = random_policy(inst.mdp.n_states(), inst.mdp.n_actions(), inst.rng);
                const double regret = std::abs(robustness_regret(inst.mdp, policy, kernel));
                worst = std::max(worst, regret);
                ++checks;
                if (regret > tolerance) ++failures;
            }
        }
    }
    SuiteOutcome out;
    out.name = "constant_reward";
    out.checks = checks;
    out.failures = failures;
    out.passed = failures == 0 && checks > 0;
    out.seconds = seconds_since(start);
    out.detail = format("%zu (policy, kernel) pairs, max |regret| %.2e (tolerance %.0e)", checks, worst, tolerance);
    return out;
}

SuiteOutcome single_reward_suite(const RandomInstanceOptions& instances, std::size_t policies_per_mdp,
                                 double deviation, double reward, double threshold) {
    const auto start = Clock::now();
    std::size_t checks = 0;
    std::size_t failures = 0;
    double smallest = std::numeric_limits<double>::infinity();
    std::uniform_int_distribution<std::size_t> family(0, 3);  // dense, block, transient, permutation
    for (std::size_t i = 0; i < instances.n_mdps; ++i) {
        Instance inst = make_instance(instances, i);
        const std::size_t n = inst.mdp.n_states();
        const std::size_t m = inst.mdp.n_actions();
        std::size_t found = 0;
        for (std::size_t attempt = 0; found < policies_per_mdp && attempt < 50 * policies_per_mdp; ++attempt) {
            const NoiseKernel kernel = random_kernel(n, family(inst.rng), inst.rng);
            const Policy policy = random_policy(n, m, inst.rng);
            const Eigen::MatrixXd diff = policy.matrix() - disturb_policy(policy, kernel).matrix();
            Eigen::Index x = 0;
            Eigen::Index u = 0;
            if (diff.maxCoeff(&x, &u) < deviation) continue;
            const Domdp target = build_reward_lower(inst.mdp, static_cast<std::size_t>(x),
                                                    static_cast<std::size_t>(u), reward, inst.rng());
            const double regret = robustness_regret(target, policy, kernel);
            smallest = std::min(smallest, regret);
            ++checks;
            ++found;
            if (!(regret > threshold)) ++failures;
        }
    }
    SuiteOutcome out;
    out.name = "single_reward";
    out.checks = checks;
    out.failures = failures;
    out.passed = failures == 0 && checks > 0;
    out.seconds = seconds_since(start);
    out.detail = format("%zu policies with deviation >= %.2g at the rewarded pair, smallest regret %.3e "
                        "(threshold %.0e), %zu at or below",
                        checks, deviation, smallest, threshold, failures);
    return out;
}

SuiteOutcome fixed_point_iteration_suite(const FixedPointIterationSuiteOptions& options) {
    const auto start = Clock::now();
    Rng rng(options.seed);
    const Domdp mdp = random_domdp(options.n_states, options.n_actions, options.gamma, rng);
    const NoiseKernel uniform = NoiseKernel::uniform(options.n_states);
    const LearningSchedule schedule = LearningSchedule::harmonic(100.0, 100.0);
    std::size_t failures = 0;
    double worst_kt = 0.0;
    double worst_spread = 0.0;
    for (std::size_t s = 0; s < options.n_seeds; ++s) {
        const Policy initial = random_policy(options.n_states, options.n_actions, rng);
        const auto result = fixed_point_iteration(initial, uniform, schedule, options.max_steps, rng(), mdp);
        const double spread = row_spread(result.policy);
        worst_kt = std::max(worst_kt, result.objective_kt);
        worst_spread = std::max(worst_spread, spread);
        if (!(result.objective_kt < options.kt_threshold) || !(spread < options.spread_threshold)) ++failures;
    }
    SuiteOutcome out;
    out.name = "fixed_point_iteration";
    out.checks = options.n_seeds;
    out.failures = failures;
    out.passed = failures == 0;
    out.seconds = seconds_since(start);
    out.detail = format("%zu/%zu seeds converged within %zu steps, max K_T %.2e (< %.0e), max row spread %.2e (< %.0e)",
                        options.n_seeds - failures, options.n_seeds, options.max_steps, worst_kt,
                        options.kt_threshold, worst_spread, options.spread_threshold);
    return out;
}

SuiteOutcome example1_suite(const std::vector<double>& gammas, double tolerance) {
    const auto start = Clock::now();
    std::size_t failures = 0;
    double worst = 0.0;
    const int actions[] = {0, 1};
    const Policy policy = Policy::deterministic(actions, 2);
    const NoiseKernel uniform = NoiseKernel::uniform(2);
    std::ostringstream values;
    for (double gamma : gammas) {
        const Domdp mdp = example1_mdp(gamma, Example1Rewards::single_action);
        const double regret = robustness_regret(mdp, policy, uniform);
        const double closed_form = 5.0 / (1.0 - gamma) * (policy(0, 0) - 0.5);
        const double error = std::abs(regret - closed_form);
        worst = std::max(worst, error);
        if (!(error <= tolerance)) ++failures;
        values << " gamma=" << gamma << ":" << regret;
    }
    SuiteOutcome out;
    out.name = "example1";
    out.checks = gammas.size();
    out.failures = failures;
    out.passed = failures == 0;
    out.seconds = seconds_since(start);
    out.detail = format("regrets%s, max |exact - closed form| %.2e (tolerance %.0e)", values.str().c_str(), worst,
                        tolerance);
    return out;
}

SuiteOutcome gradient_suite(std::size_t n_states, std::size_t n_actions, std::size_t n_thetas,
                            double relative_tolerance, std::uint64_t seed) {
    const auto start = Clock::now();
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> gamma(0.8, 0.95);
    constexpr double h = 1e-5;
    std::size_t failures = 0;
    double worst = 0.0;
    for (std::size_t k = 0; k < n_thetas; ++k) {
        const Domdp mdp = random_domdp(n_states, n_actions, gamma(rng), rng);
        Eigen::MatrixXd theta(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = normal(rng);
        const Eigen::MatrixXd analytic = exact_grad_j(mdp, SoftmaxPolicyParams(theta));
        Eigen::MatrixXd numeric(theta.rows(), theta.cols());
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            Eigen::MatrixXd plus = theta;
            Eigen::MatrixXd minus = theta;
            plus(i) += h;
            minus(i) -= h;
            numeric(i) = (objective_j(mdp, SoftmaxPolicyParams(plus).policy()) -
                          objective_j(mdp, SoftmaxPolicyParams(minus).policy())) / (2.0 * h);
        }
        const double relative = (analytic - numeric).cwiseAbs().maxCoeff() /
                                std::max(numeric.cwiseAbs().maxCoeff(), 1e-12);
        worst = std::max(worst, relative);
        if (!(relative <= relative_tolerance)) ++failures;
    }
    SuiteOutcome out;
    out.name = "gradient";
    out.checks = n_thetas;
    out.failures = failures;
    out.passed = failures == 0;
    out.seconds = seconds_since(start);
    out.detail = format("%zu random theta on %zu-state mdps, max relative error %.2e (tolerance %.0e)", n_thetas,
                        n_states, worst, relative_tolerance);
    return out;
}

}  // namespace lexirobust
