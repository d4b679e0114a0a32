#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lexirobust/mdp.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust {

/// Membership tolerances, one per set. The zero-disadvantage tolerance is
/// scaled by max(1, |Q|_inf) and the regret tolerance by 1 + |J(pi)|.
struct SetTolerances {
    double constant = 1e-10;
    double fixed_point = 1e-9;
    double zero_disadvantage = 1e-8;
    double regret = 1e-8;
};

/// Membership of one policy in the constant / fixed-point / zero-disadvantage
/// / maximally-robust sets for a given (mdp, kernel).
struct SetMembershipReport {
    std::size_t policy_id = 0;
    std::string stratum;
    bool in_constant = false;
    bool in_fixed_point = false;
    bool in_zero_disadvantage = false;
    bool in_max_robust = false;
    double regret = 0.0;
    double objective = 0.0;
    double max_abs_disadvantage = 0.0;
    double fixed_point_gap = 0.0;
    double row_spread = 0.0;
    SetTolerances tolerances;

    /// constant => fixed point => zero disadvantage => regret within tolerance.
    bool chain_holds() const;
};

/// Largest |pi(x, u) - pi(y, u)| over states x, y and actions u.
double row_spread(const Policy& policy);

/// Largest |<pi, T>(x, u) - pi(x, u)|.
double fixed_point_gap(const Policy& policy, const NoiseKernel& kernel);

bool is_constant_policy(const Policy& policy, double tolerance = SetTolerances{}.constant);
bool is_fixed_point(const Policy& policy, const NoiseKernel& kernel,
                    double tolerance = SetTolerances{}.fixed_point);
/// `tolerance` is scaled by max(1, |Q|_inf).
bool is_zero_disadvantage(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel,
                          double tolerance = SetTolerances{}.zero_disadvantage);

SetMembershipReport classify_policy(const Domdp& mdp, const Policy& policy,
                                    const NoiseKernel& kernel,
                                    const SetTolerances& tolerances = {},
                                    std::size_t policy_id = 0, std::string stratum = {});

/// Orthonormal basis of null(I - T), the column space that fixed-point
/// policies live in.
struct FixedPointBasis {
    Eigen::MatrixXd basis;  // n_states x dimension
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(basis.cols()); }
};

inline constexpr double kNullSpaceCutoff = 1e-10;

FixedPointBasis fixed_point_basis(const NoiseKernel& kernel);

/// Random fixed point of <., T>: the initial draw is random_policy(...) from
/// Rng(seed); its columns are projected onto null(I - T) and its rows onto the
/// simplex, alternately, until both constraints hold. Falls back to a
/// constant policy when the alternation stalls short of a fixed point.
Policy sample_fixed_point_policy(const NoiseKernel& kernel, std::size_t n_actions,
                                 std::uint64_t seed);

/// Copy of `mdp` with every reward equal to `c`: all policies are maximally
/// robust.
Domdp build_reward_upper(const Domdp& mdp, double c);

/// Copy of `mdp` rewarding `c` only at (target_state, target_action). Checks
/// ergodicity on 20 random policies (minimum stationary mass above 1e-6) and
/// throws ErgodicityError otherwise.
Domdp build_reward_lower(const Domdp& mdp, std::size_t target_state, std::size_t target_action,
                         double c, std::uint64_t seed = 0);

struct ConvexityRecord {
    std::string set;  // "constant", "fixed_point" or "zero_disadvantage"
    double alpha = 0.0;
    double gap = 0.0;  // spread or fixed-point gap (or max |D|) of the mixture
    Eigen::MatrixXd first;
    Eigen::MatrixXd second;
};

struct InclusionOptions {
    std::size_t samples_per_stratum = 200;
    std::size_t convexity_pairs = 50;
    SetTolerances tolerances;
    double convexity_tolerance = 1e-10;
    bool keep_reports = false;
};

struct InclusionReport {
    std::size_t n_triples = 0;
    std::size_t n_convexity_checks = 0;
    std::vector<SetMembershipReport> violations;
    std::vector<ConvexityRecord> convexity_violations;
    /// Pairs in the zero-disadvantage set whose mixture leaves it. Recorded,
    /// never treated as failures: that set need not be convex.
    std::vector<ConvexityRecord> nonconvexity_witnesses;
    std::vector<SetMembershipReport> reports;
    SetTolerances tolerances;

    void merge(InclusionReport other);
    bool ok() const noexcept { return violations.empty() && convexity_violations.empty(); }
};

/// Samples policies from the random, random-constant, fixed-point and
/// disturbed-mixture strata, checks the inclusion chain on each and the
/// convexity of the constant and fixed-point sets under random mixtures.
InclusionReport verify_inclusion_chain(const Domdp& mdp, const NoiseKernel& kernel,
                                       std::uint64_t seed, const InclusionOptions& options = {});

}  // namespace lexirobust
