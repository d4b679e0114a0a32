// lexirobust: verification suites, training campaigns, noisy evaluation and
// reports for observationally-disturbed MDPs.
//
// Exit codes: 0 success, 1 verification violation, 2 configuration or input
// error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lexirobust/envs.hpp"
#include "lexirobust/errors.hpp"
#include "lexirobust/harness.hpp"
#include "lexirobust/io.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace fs = std::filesystem;
using namespace lexirobust;

namespace {

enum ExitCode { kOk = 0, kViolation = 1, kConfigError = 2, kRuntimeFailure = 3 };

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::size_t jobs = 1;
};

void add_common(CLI::App* app, CommonFlags& flags, const std::string& out_help) {
    app->add_option("--config", flags.config, "JSON configuration file");
    app->add_option("--seed", flags.seed, "Seed override");
    app->add_option("--out", flags.out, out_help);
    app->add_option("--jobs", flags.jobs, "Parallel workers")->check(CLI::PositiveNumber);
}

int cmd_verify(const CommonFlags& flags) {
    VerifyConfig config = flags.config.empty() ? VerifyConfig{} : verify_config_from_json(read_text_file(flags.config));
    if (flags.seed) {
        config.instances.seed = *flags.seed;
        config.fixed_point.seed = *flags.seed;
    }
    const VerifyResult result = run_verify(config);
    for (const auto& o : result.outcomes) {
        std::printf("%-22s %s  %s (%.2fs)\n", o.name.c_str(), o.passed ? "PASS" : "FAIL", o.detail.c_str(), o.seconds);
    }
    const fs::path out = flags.out.empty() ? fs::path("verify_report") : fs::path(flags.out);
    write_verify(result, out);
    std::printf("report written to %s\n", out.string().c_str());
    return result.passed() ? kOk : kViolation;
}

CampaignConfig load_campaign_config(const CommonFlags& flags) {
    CampaignConfig config = flags.config.empty() ? default_campaign() : campaign_from_json(read_text_file(flags.config));
    if (flags.seed) config.seeds = {*flags.seed};
    return config;
}

int cmd_train(const CommonFlags& flags) {
    if (flags.out.empty()) throw ConfigError("train: --out is required");
    const CampaignConfig config = load_campaign_config(flags);
    std::printf("campaign %s (%s): %zu variant(s) x %zu seed(s), hash %s\n", config.name.c_str(), config.env.c_str(),
                config.variants.size(), config.seeds.size(), config_hash(config).c_str());
    const CampaignResult result = run_campaign(config, flags.jobs);
    write_campaign(result, flags.out);
    for (const auto& run : result.runs) {
        if (run.ok()) {
            const Checkpoint& c = run.result->record.checkpoints.back();
            std::printf("%-14s seed %-4llu J %.4f  K_T %.3e  K_D %.3e  lambda %.4f\n", run.variant.c_str(),
                        static_cast<unsigned long long>(run.seed), c.objective_j, c.objective_kt, c.objective_kd,
                        c.lambda);
        } else {
            std::printf("%-14s seed %-4llu FAILED: %s\n", run.variant.c_str(),
                        static_cast<unsigned long long>(run.seed), run.error.c_str());
        }
    }
    std::printf("artifacts written to %s\n", flags.out.c_str());
    return result.failures() == 0 ? kOk : kRuntimeFailure;
}

struct EvaluateFlags {
    std::string policy;
    std::string env = "lava_gap";
    std::string grid;
    std::size_t n_traj = 100;
};

int cmd_evaluate(const CommonFlags& flags, const EvaluateFlags& eval) {
    if (!eval.policy.empty()) {
        std::optional<GridSpec> grid;
        if (!eval.grid.empty()) grid = grid_spec_from_json(read_text_file(eval.grid));
        const Environment env = make_environment(eval.env, grid);
        const Policy policy = policy_from_json(read_text_file(eval.policy));
        const std::vector<PolicyEntry> entries{{"policy", flags.seed.value_or(0), policy}};
        const auto rows = evaluate_policies(env, entries, default_eval_kernels(), eval.n_traj,
                                            CampaignConfig{}.eval_seed, flags.jobs);
        std::printf("kernel,n_traj,mean_return,stderr_return,objective_j,exact_regret\n");
        for (const auto& r : rows) {
            std::printf("%s,%zu,%.6f,%.6f,%.6f,%.6g\n", r.kernel.c_str(), r.n_traj, r.mean_return, r.stderr_return,
                        r.objective_j, r.exact_regret);
        }
        return kOk;
    }
    if (flags.out.empty()) throw ConfigError("evaluate: give a campaign directory with --out, or --policy");
    const CampaignDirectory campaign = load_campaign(flags.out);
    if (campaign.policies.empty()) throw InvalidInput("campaign in '" + flags.out + "' has no completed runs");
    CampaignConfig config = campaign.config;
    if (!flags.config.empty()) {
        // Evaluation settings may be overridden; training settings stay as recorded.
        const CampaignConfig other = campaign_from_json(read_text_file(flags.config));
        config.eval_kernels = other.eval_kernels;
        config.n_traj = other.n_traj;
        config.eval_seed = other.eval_seed;
    }
    if (flags.seed) config.eval_seed = *flags.seed;
    const Environment env = campaign_environment(config);
    const auto rows = evaluate_policies(env, campaign.policies, config.eval_kernels, config.n_traj, config.eval_seed,
                                        flags.jobs);
    write_evaluation(rows, flags.out);
    if (campaign.partial()) {
        std::fprintf(stderr, "warning: %zu run(s) missing from the campaign\n", campaign.missing.size());
    }
    std::printf("%s", table_text(aggregate(rows, config.env), campaign.missing).c_str());
    return kOk;
}

int cmd_report(const CommonFlags& flags) {
    if (flags.out.empty()) throw ConfigError("report: --out must name the campaign directory");
    const ReportSummary summary = write_report(flags.out, flags.jobs);
    std::printf("%s", table_text(summary.cells, summary.missing).c_str());
    std::printf("report written to %s%s\n", flags.out.c_str(), summary.partial ? " (partial)" : "");
    return kOk;
}

int cmd_example1(const CommonFlags& flags) {
    const int actions[] = {0, 1};
    const Policy policy = Policy::deterministic(actions, 2);
    const NoiseKernel uniform = NoiseKernel::uniform(2);
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    std::printf("policy: u1 at x1, u2 at x2; uniform observation noise\n");
    std::printf("%-6s %-22s %-10s %-10s %-10s %-12s %-10s\n", "gamma", "rewards", "J(pi)", "J(<pi,T>)", "regret",
                "closed form", "max |D|");
    for (double gamma : {0.5, 0.9, 0.99}) {
        for (auto rewards : {Example1Rewards::single_action, Example1Rewards::constant_per_state}) {
            const Domdp mdp = example1_mdp(gamma, rewards);
            const double j = objective_j(mdp, policy);
            const double j_noisy = objective_j(mdp, disturb_policy(policy, uniform));
            const double regret = robustness_regret(mdp, policy, uniform);
            const bool single = rewards == Example1Rewards::single_action;
            const double closed_form = single ? 5.0 / (1.0 - gamma) * (policy(0, 0) - 0.5) : 0.0;
            const double max_d = noise_disadvantages(mdp, policy, uniform).cwiseAbs().maxCoeff();
            const char* label = single ? "R(x1,u1)=10" : "R(x1,.)=10";
            std::printf("%-6.2f %-22s %-10.4f %-10.4f %-10.4f %-12.4f %-10.4f\n", gamma, label, j, j_noisy, regret,
                        closed_form, max_d);
            out.push_back({{"gamma", gamma},
                           {"rewards", single ? "single_action" : "constant_per_state"},
                           {"objective", j},
                           {"disturbed_objective", j_noisy},
                           {"regret", regret},
                           {"closed_form", closed_form},
                           {"max_abs_disadvantage", max_d}});
        }
    }
    if (!flags.out.empty()) {
        fs::create_directories(flags.out);
        write_text_file(fs::path(flags.out) / "example1.json", out.dump(2) + "\n");
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robustness of policies under observation noise: verification, training and evaluation"};
    app.require_subcommand(1);

    CommonFlags verify_flags;
    CommonFlags train_flags;
    CommonFlags evaluate_flags;
    CommonFlags report_flags;
    CommonFlags example_flags;
    EvaluateFlags eval;

    auto* verify = app.add_subcommand("verify", "Run the set-inclusion, convexity, regret and gradient suites");
    add_common(verify, verify_flags, "Report directory (default verify_report)");
    auto* train = app.add_subcommand("train", "Train every (variant, seed) run of a campaign");
    add_common(train, train_flags, "Campaign directory");
    auto* evaluate = app.add_subcommand("evaluate", "Roll out trained policies under the evaluation kernels");
    add_common(evaluate, evaluate_flags, "Campaign directory");
    evaluate->add_option("--policy", eval.policy, "Evaluate a single policy JSON instead of a campaign");
    evaluate->add_option("--env", eval.env, "Environment of --policy");
    evaluate->add_option("--grid", eval.grid, "GridSpec JSON for --env");
    evaluate->add_option("--n-traj", eval.n_traj, "Episodes per (policy, kernel) for --policy")
        ->check(CLI::PositiveNumber);
    auto* report = app.add_subcommand("report", "Aggregate a campaign into tables and scatter data");
    add_common(report, report_flags, "Campaign directory");
    auto* example1 = app.add_subcommand("example1", "Print the two-state worked example");
    add_common(example1, example_flags, "Optional directory for example1.json");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*verify) return cmd_verify(verify_flags);
        if (*train) return cmd_train(train_flags);
        if (*evaluate) return cmd_evaluate(evaluate_flags, eval);
        if (*report) return cmd_report(report_flags);
        if (*example1) return cmd_example1(example_flags);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigError;
    } catch (const InvalidInput& e) {
        std::fprintf(stderr, "invalid input: %s\n", e.what());
        return kConfigError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kRuntimeFailure;
    }
    return kRuntimeFailure;
}
