#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "lexirobust/mdp.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust {

/// Flat Dirichlet(alpha) draw of dimension `n`.
Eigen::VectorXd random_distribution(std::size_t n, Rng& rng, double alpha = 1.0);

/// Policy with independent Dirichlet rows; a share of rows is sharpened
/// towards a single action so near-deterministic policies also appear.
Policy random_policy(std::size_t n_states, std::size_t n_actions, Rng& rng);

Policy random_constant_policy(std::size_t n_states, std::size_t n_actions, Rng& rng);

/// Dense transitions with strictly positive rows (ergodic under every
/// policy), rewards uniform in [-1, 1].
Domdp random_domdp(std::size_t n_states, std::size_t n_actions, double gamma, Rng& rng);

enum class KernelFamily { dense, block, transient, permutation, identity, uniform };

/// Random kernel of the given structural family. Block and permutation
/// kernels have fixed-point spaces larger than the constants.
NoiseKernel random_kernel(std::size_t n_states, KernelFamily family, Rng& rng);

/// Cycles through every family, so a sweep over `index` covers all of them.
NoiseKernel random_kernel(std::size_t n_states, std::size_t index, Rng& rng);

}  // namespace lexirobust
