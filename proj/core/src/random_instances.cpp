#include "lexirobust/random_instances.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace lexirobust {

Eigen::VectorXd random_distribution(std::size_t n, Rng& rng, double alpha) {
    std::gamma_distribution<double> draw(alpha, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = draw(rng);
    const double sum = v.sum();
    if (!(sum > 0.0)) {
        // Every draw underflowed; fall back to a vertex.
        v.setZero();
        v(0) = 1.0;
        return v;
    }
    return v / sum;
}

Policy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
    std::bernoulli_distribution sharpen(0.25);
    Eigen::MatrixXd pi(static_cast<Eigen::Index>(n_states), static_cast<Eigen::Index>(n_actions));
    for (Eigen::Index x = 0; x < pi.rows(); ++x) {
        const double alpha = sharpen(rng) ? 0.2 : 1.0;
        pi.row(x) = random_distribution(n_actions, rng, alpha).transpose();
    }
    return Policy(std::move(pi));
}

Policy random_constant_policy(std::size_t n_states, std::size_t n_actions, Rng& rng) {
    return Policy::constant(n_states, random_distribution(n_actions, rng));
}

Domdp random_domdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(n_states);
    std::uniform_real_distribution<double> reward(-1.0, 1.0);
    std::vector<Eigen::MatrixXd> P(n_actions, Eigen::MatrixXd(n, n));
    std::vector<Eigen::MatrixXd> R(n_actions, Eigen::MatrixXd(n, n));
    for (std::size_t u = 0; u < n_actions; ++u) {
        for (Eigen::Index x = 0; x < n; ++x) {
            P[u].row(x) = (0.05 / static_cast<double>(n_states) +
                           0.95 * random_distribution(n_states, rng).array()).matrix().transpose();
            for (Eigen::Index y = 0; y < n; ++y) R[u](x, y) = reward(rng);
        }
    }
    return Domdp(std::move(P), std::move(R), gamma, random_distribution(n_states, rng));
}

namespace {

/// Random partition of 0..n-1 into `k` non-empty blocks.
std::vector<std::vector<std::size_t>> random_blocks(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> blocks(k);
    for (std::size_t i = 0; i < n; ++i) {
        if (i < k) {
            blocks[i].push_back(order[i]);
        } else {
            std::uniform_int_distribution<std::size_t> pick(0, k - 1);
            blocks[pick(rng)].push_back(order[i]);
        }
    }
    return blocks;
}

void fill_block(Eigen::MatrixXd& T, const std::vector<std::size_t>& block, Rng& rng) {
    for (auto x : block) {
        const Eigen::VectorXd w = random_distribution(block.size(), rng);
        for (std::size_t j = 0; j < block.size(); ++j) {
            T(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(block[j])) = w(static_cast<Eigen::Index>(j));
        }
    }
}

}  // namespace

NoiseKernel random_kernel(std::size_t n_states, KernelFamily family, Rng& rng) {
    const auto n = static_cast<Eigen::Index>(n_states);
    if (n_states == 1) return NoiseKernel::identity(1);
    switch (family) {
        case KernelFamily::dense: {
            Eigen::MatrixXd T(n, n);
            for (Eigen::Index x = 0; x < n; ++x) T.row(x) = random_distribution(n_states, rng).transpose();
            return NoiseKernel(std::move(T));
        }
        case KernelFamily::block: {
            std::uniform_int_distribution<std::size_t> count(2, std::min<std::size_t>(3, n_states));
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
            for (const auto& block : random_blocks(n_states, count(rng), rng)) fill_block(T, block, rng);
            return NoiseKernel(std::move(T));
        }
        case KernelFamily::transient: {
            // Closed blocks on all but the last state of a shuffled order; that
            // state spreads its mass over everything, making it transient.
            std::vector<std::size_t> order(n_states);
            std::iota(order.begin(), order.end(), 0);
            std::shuffle(order.begin(), order.end(), rng);
            const std::size_t transient = order.back();
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
            std::vector<std::size_t> rest(order.begin(), order.end() - 1);
            const std::size_t k = rest.size() >= 2 ? 2 : 1;
            auto blocks = random_blocks(rest.size(), k, rng);
            for (auto& block : blocks) {
                for (auto& idx : block) idx = rest[idx];
                fill_block(T, block, rng);
            }
            T.row(static_cast<Eigen::Index>(transient)) = random_distribution(n_states, rng).transpose();
            return NoiseKernel(std::move(T));
        }
        case KernelFamily::permutation: {
            std::vector<std::size_t> perm(n_states);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
            for (std::size_t x = 0; x < n_states; ++x) {
                T(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(perm[x])) = 1.0;
            }
            return NoiseKernel(std::move(T));
        }
        case KernelFamily::identity:
            return NoiseKernel::identity(n_states);
        case KernelFamily::uniform:
            return NoiseKernel::uniform(n_states);
    }
    return NoiseKernel::identity(n_states);
}

NoiseKernel random_kernel(std::size_t n_states, std::size_t index, Rng& rng) {
    static constexpr KernelFamily kFamilies[] = {KernelFamily::dense,       KernelFamily::block,
                                                 KernelFamily::transient,   KernelFamily::permutation,
                                                 KernelFamily::uniform,     KernelFamily::identity};
    return random_kernel(n_states, kFamilies[index % std::size(kFamilies)], rng);
}

}  // namespace lexirobust
