// Acceptance run: one PASS/FAIL line per criterion. The optional argument is
// the working directory for the training campaigns.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lexirobust/harness.hpp"
#include "lexirobust/io.hpp"
#include "lexirobust/suites.hpp"

namespace fs = std::filesystem;
using namespace lexirobust;

namespace {

// Pinned thresholds.
constexpr double kInclusionSeconds = 120.0;
constexpr double kConvexitySeconds = 30.0;
constexpr double kFixedPointSeconds = 60.0;
constexpr double kCampaignSeconds = 30.0 * 60.0;
constexpr std::size_t kPoliciesPerStratum = 200;
constexpr std::size_t kMixtures = 10'000;
constexpr double kConvexityTolerance = 1e-10;
constexpr double kConstantRewardTolerance = 1e-8;
constexpr double kSingleRewardDeviation = 0.1;
constexpr double kSingleRewardThreshold = 1e-6;
constexpr double kExampleTolerance = 1e-8;
constexpr double kGradientTolerance = 1e-5;
constexpr std::size_t kRobustWins = 7;
constexpr double kNoiselessShortfall = 0.05;
constexpr double kKdObjectiveSlack = 0.05;
constexpr std::size_t kKdWins = 6;

int failures = 0;

void report(int criterion, bool passed, const std::string& detail) {
    std::printf("criterion %d: %s  %s\n", criterion, passed ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!passed) ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string timing(double seconds, double limit) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " [%.1fs, limit %.0fs]", seconds, limit);
    return buf;
}

RandomInstanceOptions population() {
    RandomInstanceOptions o;
    o.n_mdps = 100;
    o.max_states = 6;
    o.max_actions = 4;
    o.gamma_low = 0.8;
    o.gamma_high = 0.99;
    o.seed = 1;
    return o;
}

void criterion_1() {
    InclusionOptions options;
    options.samples_per_stratum = kPoliciesPerStratum;
    const auto start = std::chrono::steady_clock::now();
    const InclusionSuiteResult r = inclusion_suite(population(), options);
    const double s = seconds_since(start);
    report(1, r.outcome.passed && r.report.violations.empty() && s <= kInclusionSeconds,
           r.outcome.detail + timing(s, kInclusionSeconds));
}

void criterion_2() {
    const auto start = std::chrono::steady_clock::now();
    const SuiteOutcome o = convexity_suite(population(), kMixtures / population().n_mdps, kConvexityTolerance, kMixtures);
    const double s = seconds_since(start);
    report(2, o.passed && s <= kConvexitySeconds, o.detail + timing(s, kConvexitySeconds));
}

void criterion_3() {
    RandomInstanceOptions constant = population();
    constant.constant_reward = true;
    const SuiteOutcome a = constant_reward_suite(constant, 20, 5, kConstantRewardTolerance);
    const SuiteOutcome b = single_reward_suite(population(), 20, kSingleRewardDeviation, 10.0, kSingleRewardThreshold);
    report(3, a.passed && b.passed, "(i) " + a.detail + "; (ii) " + b.detail);
}

void criterion_4() {
    FixedPointIterationSuiteOptions options;
    options.n_states = 5;
    options.n_seeds = 10;
    options.max_steps = 100'000;
    options.kt_threshold = 1e-4;
    options.spread_threshold = 1e-3;
    const auto start = std::chrono::steady_clock::now();
    const SuiteOutcome o = fixed_point_iteration_suite(options);
    const double s = seconds_since(start);
    report(4, o.passed && o.failures == 0 && s <= kFixedPointSeconds, o.detail + timing(s, kFixedPointSeconds));
}

void criterion_5() {
    const SuiteOutcome o = example1_suite({0.5, 0.9, 0.99}, kExampleTolerance);
    report(5, o.passed, o.detail);
}

void criterion_6() {
    const SuiteOutcome o = gradient_suite(4, 3, 20, kGradientTolerance, 1);
    report(6, o.passed, o.detail);
}

using RowIndex = std::map<std::pair<std::string, std::string>, std::map<std::uint64_t, EvaluationRow>>;

RowIndex index_rows(const std::vector<EvaluationRow>& rows) {
    RowIndex index;
    for (const auto& r : rows) index[{r.variant, r.kernel}][r.seed] = r;
    return index;
}

void criteria_7_and_8(const fs::path& dir, const CampaignConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    run_full_campaign(config, dir);
    const double s = seconds_since(start);
    const RowIndex rows = index_rows(read_evaluation(dir));
    const auto& seeds = config.seeds;

    std::size_t wins = 0;
    std::vector<double> robust_clean;
    std::vector<double> vanilla_clean;
    std::size_t clean_within = 0;
    for (std::uint64_t seed : seeds) {
        const double kt = rows.at({"kt_uniform", "T1"}).at(seed).mean_return;
        const double vanilla = rows.at({"vanilla", "T1"}).at(seed).mean_return;
        if (kt > vanilla) ++wins;
        const double kt_clean = rows.at({"kt_uniform", "none"}).at(seed).mean_return;
        const double vanilla_clean_s = rows.at({"vanilla", "none"}).at(seed).mean_return;
        robust_clean.push_back(kt_clean);
        vanilla_clean.push_back(vanilla_clean_s);
        if (kt_clean >= (1.0 - kNoiselessShortfall) * vanilla_clean_s) ++clean_within;
    }
    const double robust_median = median(robust_clean);
    const double vanilla_median = median(vanilla_clean);
    const bool clean_ok = robust_median >= (1.0 - kNoiselessShortfall) * vanilla_median;
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "kt_uniform beats vanilla under T1 in %zu/%zu seeds (need %zu); median noiseless return %.3f vs "
                  "vanilla %.3f (need >= %.0f%%), per seed within 5%% in %zu/%zu",
                  wins, seeds.size(), kRobustWins, robust_median, vanilla_median, 100.0 * (1.0 - kNoiselessShortfall),
                  clean_within, seeds.size());
    report(7, wins >= kRobustWins && clean_ok && s <= kCampaignSeconds, buf + timing(s, kCampaignSeconds));

    std::size_t objective_ok = 0;
    std::size_t regret_ok = 0;
    for (std::uint64_t seed : seeds) {
        const EvaluationRow& kd = rows.at({"kd", "T1"}).at(seed);
        const EvaluationRow& kt = rows.at({"kt_uniform", "T1"}).at(seed);
        const EvaluationRow& vanilla = rows.at({"vanilla", "T1"}).at(seed);
        if (kd.objective_j >= kt.objective_j - kKdObjectiveSlack) ++objective_ok;
        if (kd.exact_regret < vanilla.exact_regret) ++regret_ok;
    }
    std::snprintf(buf, sizeof buf,
                  "kd J >= kt_uniform J - %.2f in %zu/%zu seeds; kd T1 regret below vanilla in %zu/%zu seeds (need %zu)",
                  kKdObjectiveSlack, objective_ok, seeds.size(), regret_ok, seeds.size(), kKdWins);
    report(8, objective_ok >= kKdWins && regret_ok >= kKdWins, buf);
}

void criterion_9(const fs::path& first, const fs::path& second, const CampaignConfig& config) {
    run_full_campaign(config, second, 2);
    std::vector<std::string> differing;
    const char* files[] = {"summary.csv", "evaluation.csv", "table.csv", "scatter.csv"};
    for (const char* f : files) {
        if (read_text_file(first / f) != read_text_file(second / f)) differing.push_back(f);
    }
    std::string detail = "rerun (2 workers) of the full campaign: ";
    if (differing.empty()) {
        detail += "summary.csv, evaluation.csv, table.csv and scatter.csv byte-identical";
    } else {
        detail += "differs in";
        for (const auto& f : differing) detail += " " + f;
    }
    report(9, differing.empty(), detail);
}

template <typename F>
void guarded(int criterion, F&& f) {
    try {
        f();
    } catch (const std::exception& e) {
        report(criterion, false, std::string("error: ") + e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "lexirobust_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    guarded(1, criterion_1);
    guarded(2, criterion_2);
    guarded(3, criterion_3);
    guarded(4, criterion_4);
    guarded(5, criterion_5);
    guarded(6, criterion_6);

    const CampaignConfig config = default_campaign();
    bool campaign_ok = true;
    try {
        criteria_7_and_8(work / "campaign", config);
    } catch (const std::exception& e) {
        campaign_ok = false;
        report(7, false, std::string("error: ") + e.what());
        report(8, false, "campaign did not complete");
    }
    if (campaign_ok) {
        guarded(9, [&] { criterion_9(work / "campaign", work / "campaign_rerun", config); });
    } else {
        report(9, false, "campaign did not complete");
    }

    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
