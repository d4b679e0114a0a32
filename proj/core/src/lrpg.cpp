#include "lexirobust/lrpg.hpp"

#include <cmath>
#include <deque>
#include <numeric>

#include "lexirobust/errors.hpp"

namespace lexirobust {

const char* to_string(SecondaryObjective objective) {
    switch (objective) {
        case SecondaryObjective::none: return "none";
        case SecondaryObjective::kt: return "kt";
        case SecondaryObjective::kd: return "kd";
    }
    return "unknown";
}

const char* to_string(PrimaryEstimator estimator) {
    return estimator == PrimaryEstimator::reinforce ? "reinforce" : "actor_critic";
}

void TrainConfig::validate() const {
    if (secondary == SecondaryObjective::kd && estimator != PrimaryEstimator::actor_critic) {
        throw ConfigError(name + ": secondary objective kd needs the actor_critic estimator (a critic)");
    }
    if (steps == 0) throw ConfigError(name + ": steps must be positive");
    if (rollout_length == 0) throw ConfigError(name + ": rollout_length must be positive");
    if (checkpoint_every == 0) throw ConfigError(name + ": checkpoint_every must be positive");
    if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0)) {
        throw ConfigError(name + ": warmup_fraction must lie in [0, 1]");
    }
    if (eta < 0.0 || beta1 < 0.0 || beta2 < 0.0 || lambda0 < 0.0) {
        throw ConfigError(name + ": beta1, beta2, eta and lambda must be non-negative");
    }
    if (k1_window == 0) throw ConfigError(name + ": k1_window must be positive");
}

namespace {

class Trainer {
public:
    Trainer(const Environment& env, const TrainConfig& config)
        : env_(env),
          config_(config),
          mdp_(env.mdp),
          rng_(config.seed),
          params_(mdp_.n_states(), mdp_.n_actions()),
          critic_(mdp_.n_states(), mdp_.n_actions(), config.critic_schedule),
          baseline_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mdp_.n_states()))),
          kernel_tilde_(make_kernel(config.kernel_tilde, mdp_.n_states(), &env.geometry)) {
        lexi_.lambda = config.lambda0;
        lexi_.beta1 = config.beta1;
        lexi_.beta2 = config.beta2;
        lexi_.eta = config.eta;
        for (const auto& k : config.eval_kernels) {
            eval_kernels_.emplace_back(k.name, make_kernel(k.spec, mdp_.n_states(), &env.geometry));
        }
        record_.run = config.name;
        record_.env = env.name;
        record_.seed = config.seed;
        state_ = sample_index(mdp_.mu0().transpose(), rng_);
    }

    TrainResult run() {
        const auto warmup_steps = static_cast<std::size_t>(config_.warmup_fraction * static_cast<double>(config_.steps));
        auto secondary_active = [&] { return config_.secondary != SecondaryObjective::none && steps_ >= warmup_steps; };
        std::size_t next_checkpoint = 0;
        while (steps_ < config_.steps) {
            if (steps_ >= next_checkpoint) {
                checkpoint(secondary_active());
                next_checkpoint += config_.checkpoint_every;
            }
            const bool active = secondary_active();
            const RolloutBatch batch = rollout();
            update(batch, active);
        }
        checkpoint(secondary_active());
        return {params_, std::move(record_)};
    }

private:
    RolloutBatch rollout() {
        const Policy policy = params_.policy();
        const bool actor_critic = config_.estimator == PrimaryEstimator::actor_critic;
        RolloutBatch batch;
        batch.reserve(config_.rollout_length);
        while (steps_ < config_.steps) {
            const std::size_t u = sample_index(policy.row(state_), rng_);
            const std::size_t y = sample_next_state(mdp_, state_, u, rng_);
            const double r = mdp_.r(state_, u, y);
            const bool end = (env_.terminal && y == *env_.terminal) || episode_time_ + 1 >= env_.horizon;
            batch.push_back({state_, u, y, r, episode_time_, end});
            if (actor_critic) critic_.update(state_, u, r, y, policy, mdp_.gamma());
            episode_return_ += episode_discount_ * r;
            episode_discount_ *= mdp_.gamma();
            ++steps_;
            if (end) {
                finish_episode();
            } else {
                state_ = y;
                ++episode_time_;
            }
            // Reinforce consumes whole episodes; actor-critic cuts the stream anywhere.
            if (batch.size() >= config_.rollout_length && (actor_critic || end)) break;
        }
        return batch;
    }

    void finish_episode() {
        returns_.push_back(episode_return_);
        if (returns_.size() > config_.k1_window) returns_.pop_front();
        ++episodes_;
        episode_return_ = 0.0;
        episode_discount_ = 1.0;
        episode_time_ = 0;
        state_ = sample_index(mdp_.mu0().transpose(), rng_);
    }

    double k1_estimate() const {
        if (returns_.empty()) return 0.0;
        return std::accumulate(returns_.begin(), returns_.end(), 0.0) / static_cast<double>(returns_.size());
    }

    void update(const RolloutBatch& batch, bool secondary_active) {
        if (batch.empty()) return;
        const Eigen::MatrixXd g1 = config_.estimator == PrimaryEstimator::actor_critic
                                       ? grad_k1(PrimaryEstimator::actor_critic, batch, params_, mdp_.gamma(), &critic_)
                                       : grad_k1(PrimaryEstimator::reinforce, batch, params_, mdp_.gamma(), nullptr,
                                                 &baseline_);
        if (config_.estimator == PrimaryEstimator::reinforce) update_baseline(batch);

        Eigen::MatrixXd g2 = Eigen::MatrixXd::Zero(g1.rows(), g1.cols());
        if (secondary_active) {
            std::vector<std::size_t> states;
            states.reserve(batch.size());
            for (const auto& tr : batch) states.push_back(tr.state);
            // Ascent on K2 = -K, so the descent directions are negated.
            if (config_.secondary == SecondaryObjective::kt) {
                g2 = -grad_kt_approx(params_, kernel_tilde_, states, rng_);
            } else {
                g2 = -grad_kd(params_, kernel_tilde_, critic_.Q(), states);
            }
        }

        const double lambda_before = lexi_.lambda;
        LexiStep step = lexicographic_update(params_, lexi_, g1, g2, k1_estimate(),
                                             config_.actor_schedule(updates_), config_.lexi);
        params_ = std::move(step.params);
        lexi_ = std::move(step.lexi);
        // The multiplier only moves while the secondary objective is in play.
        if (!secondary_active) lexi_.lambda = lambda_before;
        ++updates_;
    }

    void update_baseline(const RolloutBatch& batch) {
        double G = 0.0;
        for (std::size_t i = batch.size(); i-- > 0;) {
            const Transition& tr = batch[i];
            if (tr.episode_end) G = 0.0;
            G = tr.reward + mdp_.gamma() * G;
            auto& b = baseline_(static_cast<Eigen::Index>(tr.state));
            b += config_.baseline_rate * (G - b);
        }
    }

    void checkpoint(bool secondary_active) {
        const Policy policy = params_.policy();
        Checkpoint c;
        c.step = steps_;
        c.update = updates_;
        c.episodes = episodes_;
        c.secondary_active = secondary_active;
        c.objective_j = objective_j(mdp_, policy);
        c.k1_estimate = k1_estimate();
        c.objective_kt = objective_kt(mdp_, policy, kernel_tilde_, env_.weighting);
        c.objective_kd = objective_kd(mdp_, policy, kernel_tilde_, env_.weighting);
        c.lambda = lexi_.lambda;
        c.epsilon_t = lexi_.epsilon_t;
        c.k_hat1 = lexi_.k_hat1;
        c.k1_converged = lexi_.k1_converged;
        for (const auto& [name, kernel] : eval_kernels_) {
            c.regrets.push_back({name, robustness_regret(mdp_, policy, kernel)});
        }
        record_.checkpoints.push_back(std::move(c));
    }

    const Environment& env_;
    const TrainConfig& config_;
    const Domdp& mdp_;
    Rng rng_;
    SoftmaxPolicyParams params_;
    CriticTable critic_;
    Eigen::VectorXd baseline_;
    NoiseKernel kernel_tilde_;
    std::vector<std::pair<std::string, NoiseKernel>> eval_kernels_;
    LexiState lexi_;
    RunRecord record_;

    std::size_t state_ = 0;
    std::size_t steps_ = 0;
    std::size_t updates_ = 0;
    std::size_t episodes_ = 0;
    std::size_t episode_time_ = 0;
    double episode_return_ = 0.0;
    double episode_discount_ = 1.0;
    std::deque<double> returns_;
};

}  // namespace

TrainResult lrpg_train(const Environment& env, const TrainConfig& config) {
    config.validate();
    Trainer trainer(env, config);
    return trainer.run();
}

}  // namespace lexirobust
