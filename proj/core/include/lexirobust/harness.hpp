#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lexirobust/envs.hpp"
#include "lexirobust/lrpg.hpp"
#include "lexirobust/suites.hpp"

namespace lexirobust {

/// Evaluation noise setting; no spec means noiseless rollouts.
struct EvalKernel {
    std::string name;
    std::optional<KernelSpec> spec;
};

/// The three evaluation settings of the campaigns: noiseless, "T1" (uniform
/// over the Chebyshev-radius-1 box) and "T2" (Gaussian, sigma 0.5, radius 2).
std::vector<EvalKernel> default_eval_kernels();

struct CampaignConfig {
    std::string name = "campaign";
    std::string env = "lava_gap";
    std::optional<GridSpec> grid;
    std::vector<TrainConfig> variants;
    std::vector<std::uint64_t> seeds;
    std::vector<EvalKernel> eval_kernels = default_eval_kernels();
    std::size_t n_traj = 100;
    std::uint64_t eval_seed = 20'240'601;
};

/// Campaign document:
///   {"name", "env", "grid": GridSpec, "seeds": [...] | "n_seeds": k,
///    "eval_kernels": [{"name", "kind", ...}], "n_traj", "eval_seed",
///    "defaults": {train settings}, "variants": [{train settings}]}.
/// Each variant is `defaults` merge-patched with its own object. Train
/// settings: name, estimator, secondary (none | kt | kd | kt_uniform |
/// kt_gaussian), kernel_tilde, beta1, beta2, eta, lambda0,
/// epsilon {kind, value}, convergence_window, convergence_tolerance,
/// warmup_fraction, steps, rollout_length, actor_schedule {kind, a, b},
/// critic_schedule, baseline_rate, k1_window, checkpoint_every.
/// Unknown keys and invalid variants raise ConfigError.
CampaignConfig campaign_from_json(const std::string& text);

/// Canonical, fully expanded form; campaign_from_json reads it back unchanged.
std::string campaign_to_json(const CampaignConfig& config);

/// FNV-1a (64 bit) of the canonical JSON, as 16 hex digits.
std::string config_hash(const CampaignConfig& config);

/// LavaGap campaign: vanilla, kt_uniform, kt_gaussian and kd over seeds 0..9.
CampaignConfig default_campaign();

Environment campaign_environment(const CampaignConfig& config);

/// The noisy evaluation kernels, in the form TrainConfig::eval_kernels expects.
std::vector<NamedKernel> noisy_eval_kernels(const std::vector<EvalKernel>& kernels);

struct RunOutcome {
    std::string variant;
    std::uint64_t seed = 0;
    std::optional<TrainResult> result;
    std::string error;

    bool ok() const noexcept { return result.has_value(); }
};

struct CampaignResult {
    CampaignConfig config;
    /// Variant-major, seeds in configuration order.
    std::vector<RunOutcome> runs;

    std::size_t failures() const;
};

/// Validates every variant (ConfigError before any training), then runs all
/// (variant, seed) pairs on up to `jobs` threads. A failing run is recorded
/// and the others continue. Output does not depend on `jobs`.
CampaignResult run_campaign(const CampaignConfig& config, std::size_t jobs = 1);

/// Writes config.json, manifest.json, summary.csv and
/// runs/<variant>/seed_<s>/{record.jsonl, policy.json}.
void write_campaign(const CampaignResult& result, const std::filesystem::path& dir);

struct PolicyEntry {
    std::string variant;
    std::uint64_t seed = 0;
    Policy policy;
};

/// A campaign read back from disk: successful runs with their policies, and
/// the runs that failed or whose artifacts are missing.
struct CampaignDirectory {
    CampaignConfig config;
    std::vector<PolicyEntry> policies;
    std::vector<std::string> missing;
    std::size_t expected_runs = 0;

    bool partial() const noexcept { return !missing.empty(); }
};

/// Throws InvalidInput when `dir` holds no campaign manifest.
CampaignDirectory load_campaign(const std::filesystem::path& dir);

struct EvaluationRow {
    std::string variant;
    std::uint64_t seed = 0;
    std::string kernel;
    std::size_t n_traj = 0;
    double mean_return = 0.0;
    double stderr_return = 0.0;
    /// Exact discounted objective of the undisturbed policy.
    double objective_j = 0.0;
    /// Exact regret J(pi) - J(<pi, T>); zero for the noiseless setting.
    double exact_regret = 0.0;
};

/// Mean undiscounted return of `n_traj` episodes. The episode stream depends
/// only on `seed`, so kernels are compared on common random numbers.
/// Throws InvalidInput on a policy / environment dimension mismatch.
EvaluationRow evaluate_policy(const Environment& env, const Policy& policy, const EvalKernel& kernel,
                              std::size_t n_traj, std::uint64_t seed);

/// Every (policy, kernel) pair, policy-major. A policy's evaluation seed
/// mixes `eval_seed` with its training seed.
std::vector<EvaluationRow> evaluate_policies(const Environment& env, const std::vector<PolicyEntry>& policies,
                                             const std::vector<EvalKernel>& kernels, std::size_t n_traj,
                                             std::uint64_t eval_seed, std::size_t jobs = 1);

/// evaluation.csv and evaluation.jsonl.
void write_evaluation(const std::vector<EvaluationRow>& rows, const std::filesystem::path& dir);
std::vector<EvaluationRow> read_evaluation(const std::filesystem::path& dir);

/// One (variant, kernel) cell: statistics over seeds of the per-seed mean
/// returns. std is the sample standard deviation, quartiles interpolate
/// linearly.
struct TableCell {
    std::string env;
    std::string variant;
    std::string kernel;
    std::size_t n_seeds = 0;
    double median = 0.0;
    double mean = 0.0;
    double std = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double median_regret = 0.0;

    double iqr() const noexcept { return q3 - q1; }
};

/// Cells ordered by first appearance of variant, then kernel.
std::vector<TableCell> aggregate(const std::vector<EvaluationRow>& rows, const std::string& env);

double median(std::vector<double> values);
/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);

std::string table_csv(const std::vector<TableCell>& cells);
/// Variants as rows, kernels as columns, "median [q1, q3]" per cell.
std::string table_text(const std::vector<TableCell>& cells, const std::vector<std::string>& missing = {});
/// One line per (run, kernel): exact J, exact regret and mean return.
std::string scatter_csv(const std::vector<EvaluationRow>& rows);

struct ReportSummary {
    std::vector<TableCell> cells;
    bool partial = false;
    std::vector<std::string> missing;
};

/// Evaluates the campaign in `dir` unless evaluation.jsonl exists, then
/// writes table.csv, table.txt, scatter.csv and report.json. An empty
/// campaign throws InvalidInput before anything is written.
ReportSummary write_report(const std::filesystem::path& dir, std::size_t jobs = 1);

/// Train, evaluate and report in one go.
ReportSummary run_full_campaign(const CampaignConfig& config, const std::filesystem::path& dir,
                                std::size_t jobs = 1);

/// Settings of the verify command.
struct VerifyConfig {
    RandomInstanceOptions instances;
    InclusionOptions inclusion;
    std::size_t convexity_pairs_per_kernel = 100;
    std::size_t policies_per_mdp = 20;
    std::size_t kernels_per_mdp = 5;
    FixedPointIterationSuiteOptions fixed_point;
    /// Suites to run; empty runs all of: inclusion, convexity,
    /// constant_reward, single_reward, fixed_point_iteration, example1, gradient.
    std::vector<std::string> suites;
    /// Explicit (mdp, kernel) pairs checked by the inclusion suite in
    /// addition to the random ones.
    std::vector<std::pair<Domdp, NoiseKernel>> explicit_instances;
};

/// {"seed", "n_mdps", "min_states", "max_states", "min_actions", "max_actions",
///  "gamma_low", "gamma_high", "constant_reward", "samples_per_stratum",
///  "convexity_pairs", "policies_per_mdp", "kernels_per_mdp", "suites": [...],
///  "instances": [{"mdp": DOMDP, "kernel": {"T": ...}}]}. Invalid MDPs or
/// kernels raise InvalidInput naming the offending row.
VerifyConfig verify_config_from_json(const std::string& text);

struct VerifyResult {
    std::vector<SuiteOutcome> outcomes;
    InclusionReport inclusion;

    bool passed() const;
};

VerifyResult run_verify(const VerifyConfig& config);

/// report.json, memberships.csv and, on violations, counterexamples.json.
void write_verify(const VerifyResult& result, const std::filesystem::path& dir);

}  // namespace lexirobust
