#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lexirobust/mdp.hpp"

namespace lexirobust {

/// Default tolerance on the robustness regret for kappa-robustness checks.
inline constexpr double kRegretTolerance = 1e-8;

/// Row-stochastic observation kernel: T(x, y) is the probability of observing
/// y while the true state is x.
class NoiseKernel {
public:
    NoiseKernel() = default;
    explicit NoiseKernel(Eigen::MatrixXd transition);

    static NoiseKernel identity(std::size_t n_states);
    static NoiseKernel uniform(std::size_t n_states);

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(t_.rows()); }
    double operator()(std::size_t x, std::size_t y) const { return t_(x, y); }
    auto row(std::size_t x) const { return t_.row(static_cast<Eigen::Index>(x)); }
    const Eigen::MatrixXd& matrix() const noexcept { return t_; }

    /// Induced infinity-norm (max absolute row sum); one for every valid kernel.
    double sup_norm() const;

private:
    Eigen::MatrixXd t_;
};

/// <pi, T>(x, u) = sum_y T(y | x) pi(y, u).
Policy disturb_policy(const Policy& policy, const NoiseKernel& kernel);

/// rho(pi, T) = J(pi) - J(<pi, T>). Signed: noise can also help.
double robustness_regret(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel);

bool is_kappa_robust(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel,
                     double kappa, double tolerance = kRegretTolerance);

/// D^pi(x, T) = V^pi(x) - sum_u <pi, T>(x, u) Q^pi(x, u).
double noise_disadvantage(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel,
                          std::size_t state);

/// D^pi(., T) for every state, from an already computed value bundle of `policy`.
Eigen::VectorXd noise_disadvantages(const ValueBundle& values, const Policy& policy,
                                    const NoiseKernel& kernel);
Eigen::VectorXd noise_disadvantages(const Domdp& mdp, const Policy& policy,
                                    const NoiseKernel& kernel);

/// Embedding of states used by geometric kernels. Pinned states (terminal or
/// absorbing ones) always observe themselves and are never observed from
/// other states.
struct StateGeometry {
    Eigen::MatrixXd coordinates;  // one row per state
    std::vector<bool> pinned;

    std::size_t n_states() const noexcept { return static_cast<std::size_t>(coordinates.rows()); }
    bool is_pinned(std::size_t x) const { return !pinned.empty() && pinned[x]; }
};

enum class KernelKind { identity, uniform, gaussian, deterministic, mixture };

struct MixtureComponent;

/// Declarative description of a kernel.
///
/// - identity: one-hot diagonal.
/// - uniform: 1/|X| everywhere. With a geometry, pinned states are excluded and,
///   when `bound` is set, support is limited to states within Chebyshev
///   distance `bound` (a box of radius `bound` around the true state).
/// - gaussian: weights exp(-d^2 / (2 sigma^2)) over states at Euclidean
///   distance d <= bound, renormalized per row. Requires a geometry.
/// - deterministic: T(map[x] | x) = 1.
/// - mixture: weighted sum of component kernels, weights normalized to one.
struct KernelSpec {
    KernelKind kind = KernelKind::identity;
    double sigma = 0.5;
    std::optional<double> bound;
    std::vector<std::size_t> map;
    std::vector<MixtureComponent> components;
};

struct MixtureComponent {
    double weight = 0.0;
    KernelSpec kernel;
};

NoiseKernel make_kernel(const KernelSpec& spec, std::size_t n_states,
                        const StateGeometry* geometry = nullptr);

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

}  // namespace lexirobust
