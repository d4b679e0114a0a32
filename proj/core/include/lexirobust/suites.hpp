#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lexirobust/robust_sets.hpp"

namespace lexirobust {

/// Outcome of one verification suite; `detail` is a one-line account of what
/// was measured.
struct SuiteOutcome {
    std::string name;
    bool passed = false;
    std::size_t checks = 0;
    std::size_t failures = 0;
    std::string detail;
    double seconds = 0.0;
};

/// Shape of the random DOMDP population a suite draws from.
struct RandomInstanceOptions {
    std::size_t n_mdps = 100;
    std::size_t min_states = 2;
    std::size_t max_states = 6;
    std::size_t min_actions = 2;
    std::size_t max_actions = 4;
    double gamma_low = 0.8;
    double gamma_high = 0.99;
    std::uint64_t seed = 1;
    /// Replace every reward by one constant per instance.
    bool constant_reward = false;
};

struct InclusionSuiteResult {
    SuiteOutcome outcome;
    InclusionReport report;
};

/// Inclusion chain over random (mdp, kernel) pairs; kernels cycle through
/// every structural family.
InclusionSuiteResult inclusion_suite(const RandomInstanceOptions& instances,
                                     const InclusionOptions& options = {});

/// Convexity of the constant and fixed-point sets: `pairs_per_kernel` random
/// mixtures of each kind per random kernel. Passes when no mixture leaves its
/// set at `tolerance` and at least `min_checks` mixtures of each kind were tested.
SuiteOutcome convexity_suite(const RandomInstanceOptions& instances, std::size_t pairs_per_kernel,
                             double tolerance = 1e-10, std::size_t min_checks = 10'000);

/// Constant rewards make every (policy, kernel) pair regret-free.
SuiteOutcome constant_reward_suite(const RandomInstanceOptions& instances, std::size_t policies_per_mdp,
                                   std::size_t kernels_per_mdp, double tolerance = 1e-8);

/// Rewarding a single (x*, u*) where pi(x*, u*) - <pi,T>(x*, u*) >= deviation
/// gives a strictly positive regret.
SuiteOutcome single_reward_suite(const RandomInstanceOptions& instances, std::size_t policies_per_mdp,
                                 double deviation = 0.1, double reward = 10.0, double threshold = 1e-6);

struct FixedPointIterationSuiteOptions {
    std::size_t n_states = 5;
    std::size_t n_actions = 3;
    double gamma = 0.9;
    std::size_t n_seeds = 10;
    std::size_t max_steps = 100'000;
    double kt_threshold = 1e-4;
    double spread_threshold = 1e-3;
    std::uint64_t seed = 1;
};

/// Tabular fixed-point iteration with alpha_t = 1 / (1 + t/100) and the
/// uniform kernel on a random ergodic MDP, once per seed.
SuiteOutcome fixed_point_iteration_suite(const FixedPointIterationSuiteOptions& options);

/// Exact Example-1 regret against 5/(1-gamma) (pi(x1,u1) - 1/2) for the
/// deterministic policy (u1 at x1, u2 at x2) under the uniform kernel.
SuiteOutcome example1_suite(const std::vector<double>& gammas = {0.5, 0.9, 0.99}, double tolerance = 1e-8);

/// Exact policy gradient of J against central finite differences.
SuiteOutcome gradient_suite(std::size_t n_states = 4, std::size_t n_actions = 3, std::size_t n_thetas = 20,
                            double relative_tolerance = 1e-5, std::uint64_t seed = 1);

}  // namespace lexirobust
