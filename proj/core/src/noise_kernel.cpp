#include "lexirobust/noise_kernel.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "lexirobust/errors.hpp"

namespace lexirobust {

NoiseKernel::NoiseKernel(Eigen::MatrixXd transition) : t_(std::move(transition)) {
    if (t_.rows() == 0 || t_.rows() != t_.cols()) {
        throw InvalidInput("noise kernel must be a non-empty square matrix");
    }
    for (Eigen::Index x = 0; x < t_.rows(); ++x) {
        Eigen::VectorXd row = t_.row(x).transpose();
        validate_distribution(row, "noise kernel row " + std::to_string(x));
        t_.row(x) = row.transpose();
    }
}

NoiseKernel NoiseKernel::identity(std::size_t n_states) {
    const auto n = static_cast<Eigen::Index>(n_states);
    return NoiseKernel(Eigen::MatrixXd::Identity(n, n));
}

NoiseKernel NoiseKernel::uniform(std::size_t n_states) {
    const auto n = static_cast<Eigen::Index>(n_states);
    return NoiseKernel(Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n_states)));
}

double NoiseKernel::sup_norm() const { return t_.cwiseAbs().rowwise().sum().maxCoeff(); }

Policy disturb_policy(const Policy& policy, const NoiseKernel& kernel) {
    if (kernel.n_states() != policy.n_states()) {
        throw InvalidInput("disturb_policy: kernel has " + std::to_string(kernel.n_states()) +
                           " states, policy has " + std::to_string(policy.n_states()));
    }
    return Policy(kernel.matrix() * policy.matrix());
}

double robustness_regret(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel) {
    return objective_j(mdp, policy) - objective_j(mdp, disturb_policy(policy, kernel));
}

bool is_kappa_robust(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel,
                     double kappa, double tolerance) {
    if (kappa < 0.0) throw InvalidInput("is_kappa_robust: kappa must be non-negative");
    if (std::isinf(kappa)) return true;
    return robustness_regret(mdp, policy, kernel) <= kappa + tolerance;
}

Eigen::VectorXd noise_disadvantages(const ValueBundle& values, const Policy& policy,
                                    const NoiseKernel& kernel) {
    const Policy disturbed = disturb_policy(policy, kernel);
    return values.V - disturbed.matrix().cwiseProduct(values.Q).rowwise().sum();
}

Eigen::VectorXd noise_disadvantages(const Domdp& mdp, const Policy& policy,
                                    const NoiseKernel& kernel) {
    return noise_disadvantages(policy_evaluate(mdp, policy), policy, kernel);
}

double noise_disadvantage(const Domdp& mdp, const Policy& policy, const NoiseKernel& kernel,
                          std::size_t state) {
    if (state >= mdp.n_states()) throw InvalidInput("noise_disadvantage: state out of range");
    return noise_disadvantages(mdp, policy, kernel)(static_cast<Eigen::Index>(state));
}

namespace {

const StateGeometry& require_geometry(const StateGeometry* geometry, std::size_t n_states,
                                      const char* kind) {
    if (geometry == nullptr) {
        throw InvalidInput(std::string(kind) + " kernel requires a state geometry");
    }
    if (geometry->n_states() != n_states) {
        throw InvalidInput(std::string(kind) + " kernel: geometry has " +
                           std::to_string(geometry->n_states()) + " states, expected " +
                           std::to_string(n_states));
    }
    return *geometry;
}

/// Fills non-pinned rows with weight(distance-row), pins the rest, and
/// normalizes. `weight` returns a non-negative weight for target y of row x.
template <typename Weight>
Eigen::MatrixXd geometric_rows(const StateGeometry& geometry, const char* kind, Weight weight) {
    const auto n = static_cast<Eigen::Index>(geometry.n_states());
    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x) {
        if (geometry.is_pinned(static_cast<std::size_t>(x))) {
            T(x, x) = 1.0;
            continue;
        }
        for (Eigen::Index y = 0; y < n; ++y) {
            if (geometry.is_pinned(static_cast<std::size_t>(y))) continue;
            T(x, y) = weight(x, y);
        }
        const double sum = T.row(x).sum();
        if (!(sum > 0.0)) {
            throw InvalidInput(std::string(kind) + " kernel: empty support at state " +
                               std::to_string(x));
        }
        T.row(x) /= sum;
    }
    return T;
}

}  // namespace

NoiseKernel make_kernel(const KernelSpec& spec, std::size_t n_states, const StateGeometry* geometry) {
    if (n_states == 0) throw InvalidInput("make_kernel: no states");
    const auto n = static_cast<Eigen::Index>(n_states);
    switch (spec.kind) {
        case KernelKind::identity:
            return NoiseKernel::identity(n_states);
        case KernelKind::uniform: {
            if (geometry == nullptr) {
                if (spec.bound) throw InvalidInput("bounded uniform kernel requires a state geometry");
                return NoiseKernel::uniform(n_states);
            }
            const auto& g = require_geometry(geometry, n_states, "uniform");
            const double bound = spec.bound.value_or(std::numeric_limits<double>::infinity());
            return NoiseKernel(geometric_rows(g, "uniform", [&](Eigen::Index x, Eigen::Index y) {
                const double d = (g.coordinates.row(x) - g.coordinates.row(y)).cwiseAbs().maxCoeff();
                return d <= bound ? 1.0 : 0.0;
            }));
        }
        case KernelKind::gaussian: {
            const auto& g = require_geometry(geometry, n_states, "gaussian");
            if (!(spec.sigma > 0.0)) throw InvalidInput("gaussian kernel: sigma must be positive");
            const double bound = spec.bound.value_or(std::numeric_limits<double>::infinity());
            const double scale = 2.0 * spec.sigma * spec.sigma;
            return NoiseKernel(geometric_rows(g, "gaussian", [&](Eigen::Index x, Eigen::Index y) {
                const double d2 = (g.coordinates.row(x) - g.coordinates.row(y)).squaredNorm();
                return std::sqrt(d2) <= bound ? std::exp(-d2 / scale) : 0.0;
            }));
        }
        case KernelKind::deterministic: {
            if (spec.map.size() != n_states) {
                throw InvalidInput("deterministic kernel: map has " + std::to_string(spec.map.size()) +
                                   " entries, expected " + std::to_string(n_states));
            }
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
            for (std::size_t x = 0; x < n_states; ++x) {
                if (spec.map[x] >= n_states) {
                    throw InvalidInput("deterministic kernel: target out of range at state " +
                                       std::to_string(x));
                }
                T(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(spec.map[x])) = 1.0;
            }
            return NoiseKernel(std::move(T));
        }
        case KernelKind::mixture: {
            if (spec.components.empty()) throw InvalidInput("mixture kernel: no components");
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
            double total = 0.0;
            for (const auto& component : spec.components) {
                if (component.weight < 0.0) throw InvalidInput("mixture kernel: negative weight");
                T += component.weight * make_kernel(component.kernel, n_states, geometry).matrix();
                total += component.weight;
            }
            if (!(total > 0.0)) throw InvalidInput("mixture kernel: weights sum to zero");
            return NoiseKernel(T / total);
        }
    }
    throw InvalidInput("make_kernel: unknown kind");
}

const char* to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::identity: return "identity";
        case KernelKind::uniform: return "uniform";
        case KernelKind::gaussian: return "gaussian";
        case KernelKind::deterministic: return "deterministic";
        case KernelKind::mixture: return "mixture";
    }
    return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "identity") return KernelKind::identity;
    if (name == "uniform") return KernelKind::uniform;
    if (name == "gaussian") return KernelKind::gaussian;
    if (name == "deterministic") return KernelKind::deterministic;
    if (name == "mixture") return KernelKind::mixture;
    throw InvalidInput("unknown kernel kind '" + name + "'");
}

}  // namespace lexirobust
