#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "lexirobust/envs.hpp"
#include "lexirobust/noise_kernel.hpp"
#include "lexirobust/policy_gradient.hpp"

namespace lexirobust {

enum class SecondaryObjective { none, kt, kd };

const char* to_string(SecondaryObjective objective);
const char* to_string(PrimaryEstimator estimator);

struct NamedKernel {
    std::string name;
    KernelSpec spec;
};

struct TrainConfig {
    std::string name = "vanilla";
    PrimaryEstimator estimator = PrimaryEstimator::actor_critic;
    SecondaryObjective secondary = SecondaryObjective::none;
    /// Training kernel of the secondary objective (also used for diagnostics).
    KernelSpec kernel_tilde{KernelKind::uniform, 0.5, 1.0, {}, {}};
    LexiSettings lexi;
    double beta1 = 2.0;
    double beta2 = 1.0;
    double eta = 0.001;
    double lambda0 = 0.0;
    /// Fraction of the step budget trained on the primary objective alone.
    double warmup_fraction = 1.0 / 3.0;
    std::size_t steps = 200'000;
    /// Environment steps per update.
    std::size_t rollout_length = 100;
    LearningSchedule actor_schedule = LearningSchedule::constant(20.0);
    LearningSchedule critic_schedule = LearningSchedule::constant(0.2);
    /// Step size of the per-state return baseline used by reinforce.
    double baseline_rate = 0.1;
    /// Episodes averaged into the running K1 estimate.
    std::size_t k1_window = 50;
    std::size_t checkpoint_every = 10'000;
    std::vector<NamedKernel> eval_kernels;
    std::uint64_t seed = 0;

    /// Throws ConfigError on inconsistent settings (e.g. kd without a critic).
    void validate() const;
};

struct KernelRegret {
    std::string kernel;
    double regret = 0.0;
};

struct Checkpoint {
    std::size_t step = 0;
    std::size_t update = 0;
    std::size_t episodes = 0;
    bool secondary_active = false;
    double objective_j = 0.0;
    double k1_estimate = 0.0;
    double objective_kt = 0.0;
    double objective_kd = 0.0;
    double lambda = 0.0;
    double epsilon_t = 0.0;
    double k_hat1 = 0.0;
    bool k1_converged = false;
    std::vector<KernelRegret> regrets;
};

struct RunRecord {
    std::string run;
    std::string env;
    std::uint64_t seed = 0;
    std::vector<Checkpoint> checkpoints;
};

struct TrainResult {
    SoftmaxPolicyParams params;
    RunRecord record;
};

/// Trains a softmax policy on the undisturbed environment with the
/// lexicographic update: the primary gradient from rollouts (reinforce or
/// actor-critic), and after the warmup fraction the secondary gradient
/// -grad K_T~ or -grad K_D on the states of the latest rollout.
TrainResult lrpg_train(const Environment& env, const TrainConfig& config);

}  // namespace lexirobust
