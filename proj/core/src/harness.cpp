#include "lexirobust/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "json_util.hpp"
#include "lexirobust/io.hpp"

namespace lexirobust {

namespace fs = std::filesystem;
using detail::get_or;
using detail::Json;

namespace {

const std::set<std::string> kCampaignKeys = {"name",       "env",     "grid",      "seeds",    "n_seeds",
                                             "eval_kernels", "n_traj", "eval_seed", "defaults", "variants"};
const std::set<std::string> kTrainKeys = {
    "name",         "estimator",   "secondary",          "kernel_tilde",          "beta1",
    "beta2",        "eta",         "lambda0",            "epsilon",               "convergence_window",
    "convergence_tolerance", "warmup_fraction", "steps", "rollout_length",       "actor_schedule",
    "critic_schedule", "baseline_rate", "k1_window",     "checkpoint_every"};
const std::set<std::string> kEvalKernelKeys = {"name", "kind", "sigma", "bound", "map", "components"};
const std::set<std::string> kScheduleKeys = {"kind", "a", "b"};
const std::set<std::string> kEpsilonKeys = {"kind", "value"};
const std::set<std::string> kVerifyKeys = {
    "seed",        "n_mdps",          "min_states",       "max_states",      "min_actions",
    "max_actions", "gamma_low",       "gamma_high",       "constant_reward", "samples_per_stratum",
    "convexity_pairs", "convexity_pairs_per_kernel", "policies_per_mdp", "kernels_per_mdp",
    "fixed_point_steps", "fixed_point_seeds", "suites",  "instances"};
const std::vector<std::string> kAllSuites = {"inclusion",  "convexity",             "constant_reward", "single_reward",
                                             "fixed_point_iteration", "example1", "gradient"};

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) throw ConfigError(where + ": unknown key '" + item.key() + "'");
    }
}

void check_name(const std::string& name, const std::string& what) {
    const bool ok = !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
    if (!ok) throw ConfigError(what + " '" + name + "' must be non-empty and use only [A-Za-z0-9_.-]");
}

KernelSpec uniform_box(double radius) { return {KernelKind::uniform, 0.5, radius, {}, {}}; }
KernelSpec gaussian_disc(double sigma, double radius) { return {KernelKind::gaussian, sigma, radius, {}, {}}; }

Json schedule_json(const LearningSchedule& s) {
    return {{"kind", s.kind == LearningSchedule::Kind::constant ? "constant" : "harmonic"}, {"a", s.a}, {"b", s.b}};
}

LearningSchedule schedule_from(const Json& j, const std::string& where) {
    check_keys(j, kScheduleKeys, where);
    LearningSchedule s;
    const auto kind = get_or<std::string>(j, "kind", "constant");
    if (kind == "constant") {
        s.kind = LearningSchedule::Kind::constant;
    } else if (kind == "harmonic") {
        s.kind = LearningSchedule::Kind::harmonic;
    } else {
        throw ConfigError(where + ": unknown schedule kind '" + kind + "'");
    }
    s.a = get_or(j, "a", s.a);
    s.b = get_or(j, "b", s.b);
    if (!(s.a > 0.0) || !(s.b > 0.0)) throw ConfigError(where + ": a and b must be positive");
    return s;
}

Json train_json(const TrainConfig& c) {
    Json j;
    j["name"] = c.name;
    j["estimator"] = to_string(c.estimator);
    j["secondary"] = to_string(c.secondary);
    j["kernel_tilde"] = detail::kernel_spec_json(c.kernel_tilde);
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eta"] = c.eta;
    j["lambda0"] = c.lambda0;
    j["epsilon"] = {{"kind", c.lexi.epsilon.kind == EpsilonPolicy::Kind::fraction ? "fraction" : "absolute"},
                    {"value", c.lexi.epsilon.value}};
    j["convergence_window"] = c.lexi.convergence_window;
    j["convergence_tolerance"] = c.lexi.convergence_tolerance;
    j["warmup_fraction"] = c.warmup_fraction;
    j["steps"] = c.steps;
    j["rollout_length"] = c.rollout_length;
    j["actor_schedule"] = schedule_json(c.actor_schedule);
    j["critic_schedule"] = schedule_json(c.critic_schedule);
    j["baseline_rate"] = c.baseline_rate;
    j["k1_window"] = c.k1_window;
    j["checkpoint_every"] = c.checkpoint_every;
    return j;
}

TrainConfig train_from(const Json& j, const std::string& where) {
    check_keys(j, kTrainKeys, where);
    TrainConfig c;
    c.name = get_or(j, "name", c.name);
    check_name(c.name, "variant name");
    const auto estimator = get_or<std::string>(j, "estimator", to_string(c.estimator));
    if (estimator == "actor_critic") {
        c.estimator = PrimaryEstimator::actor_critic;
    } else if (estimator == "reinforce") {
        c.estimator = PrimaryEstimator::reinforce;
    } else {
        throw ConfigError(where + ": unknown estimator '" + estimator + "'");
    }
    const auto secondary = get_or<std::string>(j, "secondary", "none");
    if (secondary == "none") {
        c.secondary = SecondaryObjective::none;
    } else if (secondary == "kt") {
        c.secondary = SecondaryObjective::kt;
    } else if (secondary == "kd") {
        c.secondary = SecondaryObjective::kd;
    } else if (secondary == "kt_uniform") {
        c.secondary = SecondaryObjective::kt;
        c.kernel_tilde = uniform_box(1.0);
    } else if (secondary == "kt_gaussian") {
        c.secondary = SecondaryObjective::kt;
        c.kernel_tilde = gaussian_disc(0.5, 2.0);
    } else {
        throw ConfigError(where + ": unknown secondary objective '" + secondary + "'");
    }
    if (j.contains("kernel_tilde")) c.kernel_tilde = detail::kernel_spec_from(j.at("kernel_tilde"));
    c.beta1 = get_or(j, "beta1", c.beta1);
    c.beta2 = get_or(j, "beta2", c.beta2);
    c.eta = get_or(j, "eta", c.eta);
    c.lambda0 = get_or(j, "lambda0", c.lambda0);
    if (j.contains("epsilon")) {
        const Json& e = j.at("epsilon");
        check_keys(e, kEpsilonKeys, where + ".epsilon");
        const auto kind = get_or<std::string>(e, "kind", "fraction");
        if (kind == "fraction") {
            c.lexi.epsilon.kind = EpsilonPolicy::Kind::fraction;
        } else if (kind == "absolute") {
            c.lexi.epsilon.kind = EpsilonPolicy::Kind::absolute;
        } else {
            throw ConfigError(where + ".epsilon: unknown kind '" + kind + "'");
        }
        c.lexi.epsilon.value = get_or(e, "value", c.lexi.epsilon.value);
    }
    c.lexi.convergence_window = get_or(j, "convergence_window", c.lexi.convergence_window);
    c.lexi.convergence_tolerance = get_or(j, "convergence_tolerance", c.lexi.convergence_tolerance);
    c.warmup_fraction = get_or(j, "warmup_fraction", c.warmup_fraction);
    c.steps = get_or(j, "steps", c.steps);
    c.rollout_length = get_or(j, "rollout_length", c.rollout_length);
    if (j.contains("actor_schedule")) c.actor_schedule = schedule_from(j.at("actor_schedule"), where + ".actor_schedule");
    if (j.contains("critic_schedule")) {
        c.critic_schedule = schedule_from(j.at("critic_schedule"), where + ".critic_schedule");
    }
    c.baseline_rate = get_or(j, "baseline_rate", c.baseline_rate);
    c.k1_window = get_or(j, "k1_window", c.k1_window);
    c.checkpoint_every = get_or(j, "checkpoint_every", c.checkpoint_every);
    if (c.lexi.convergence_window == 0) throw ConfigError(where + ": convergence_window must be positive");
    c.validate();
    return c;
}

Json eval_kernel_json(const EvalKernel& k) {
    Json j;
    j["name"] = k.name;
    if (k.spec) {
        const Json spec = detail::kernel_spec_json(*k.spec);
        for (const auto& item : spec.items()) j[item.key()] = item.value();
    }
    return j;
}

EvalKernel eval_kernel_from(const Json& j) {
    check_keys(j, kEvalKernelKeys, "eval_kernels");
    EvalKernel k;
    k.name = get_or<std::string>(j, "name", "");
    check_name(k.name, "evaluation kernel name");
    if (j.contains("kind")) {
        Json spec = j;
        spec.erase("name");
        k.spec = detail::kernel_spec_from(spec);
    }
    return k;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Runs body(0..n-1) on up to `jobs` threads and rethrows the first failure
/// by index.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
    std::vector<std::exception_ptr> errors(n);
    auto guarded = [&](std::size_t i) {
        try {
            body(i);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };
    jobs = std::min(std::max<std::size_t>(jobs, 1), std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) guarded(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        workers.reserve(jobs);
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) guarded(i);
            });
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

std::string num(double v) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.10g", v);
    return buffer;
}

std::string run_label(const std::string& variant, std::uint64_t seed) {
    return variant + "/seed_" + std::to_string(seed);
}

fs::path run_dir(const fs::path& dir, const std::string& variant, std::uint64_t seed) {
    return dir / "runs" / variant / ("seed_" + std::to_string(seed));
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json cell_json(const TableCell& c) {
    return {{"env", c.env},       {"variant", c.variant}, {"kernel", c.kernel}, {"n_seeds", c.n_seeds},
            {"median", c.median}, {"mean", c.mean},       {"std", c.std},       {"q1", c.q1},
            {"q3", c.q3},         {"iqr", c.iqr()},       {"median_regret", c.median_regret}};
}

}  // namespace

std::vector<EvalKernel> default_eval_kernels() {
    return {{"none", std::nullopt}, {"T1", uniform_box(1.0)}, {"T2", gaussian_disc(0.5, 2.0)}};
}

CampaignConfig campaign_from_json(const std::string& text) {
    const Json j = detail::parse_json(text, "campaign config");
    check_keys(j, kCampaignKeys, "campaign config");
    CampaignConfig c;
    c.name = get_or(j, "name", c.name);
    check_name(c.name, "campaign name");
    c.env = get_or(j, "env", c.env);
    if (j.contains("grid")) c.grid = grid_spec_from_json(j.at("grid").dump());
    if (j.contains("seeds") && j.contains("n_seeds")) throw ConfigError("campaign config: give seeds or n_seeds, not both");
    if (j.contains("seeds")) {
        c.seeds = get_or(j, "seeds", c.seeds);
    } else {
        c.seeds.resize(get_or<std::size_t>(j, "n_seeds", 10));
        std::iota(c.seeds.begin(), c.seeds.end(), std::uint64_t{0});
    }
    if (j.contains("eval_kernels")) {
        if (!j.at("eval_kernels").is_array()) throw ConfigError("eval_kernels: expected an array");
        c.eval_kernels.clear();
        for (const auto& k : j.at("eval_kernels")) c.eval_kernels.push_back(eval_kernel_from(k));
    }
    c.n_traj = get_or(j, "n_traj", c.n_traj);
    c.eval_seed = get_or(j, "eval_seed", c.eval_seed);

    const Json defaults = j.contains("defaults") ? j.at("defaults") : Json::object();
    if (!defaults.is_object()) throw ConfigError("defaults: expected an object");
    if (!j.contains("variants") || !j.at("variants").is_array()) {
        throw ConfigError("campaign config: 'variants' must be an array");
    }
    if (j.at("variants").empty()) throw ConfigError("campaign config: 'variants' is empty");
    for (std::size_t i = 0; i < j.at("variants").size(); ++i) {
        Json merged = defaults;
        merged.merge_patch(j.at("variants")[i]);
        c.variants.push_back(train_from(merged, "variants[" + std::to_string(i) + "]"));
    }

    std::set<std::string> names;
    for (const auto& v : c.variants) {
        if (!names.insert(v.name).second) throw ConfigError("duplicate variant name '" + v.name + "'");
    }
    names.clear();
    for (const auto& k : c.eval_kernels) {
        if (!names.insert(k.name).second) throw ConfigError("duplicate evaluation kernel '" + k.name + "'");
    }
    if (std::set<std::uint64_t>(c.seeds.begin(), c.seeds.end()).size() != c.seeds.size()) {
        throw ConfigError("duplicate seeds");
    }
    if (c.n_traj == 0) throw ConfigError("n_traj must be positive");
    return c;
}

std::string campaign_to_json(const CampaignConfig& config) {
    Json j;
    j["name"] = config.name;
    j["env"] = config.env;
    if (config.grid) j["grid"] = Json::parse(grid_spec_to_json(*config.grid));
    j["seeds"] = config.seeds;
    Json kernels = Json::array();
    for (const auto& k : config.eval_kernels) kernels.push_back(eval_kernel_json(k));
    j["eval_kernels"] = std::move(kernels);
    j["n_traj"] = config.n_traj;
    j["eval_seed"] = config.eval_seed;
    Json variants = Json::array();
    for (const auto& v : config.variants) variants.push_back(train_json(v));
    j["variants"] = std::move(variants);
    return dump(j);
}

std::string config_hash(const CampaignConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : campaign_to_json(config)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
    return buffer;
}

CampaignConfig default_campaign() {
    CampaignConfig c;
    c.name = "lava_gap";
    c.env = "lava_gap";
    c.seeds.resize(10);
    std::iota(c.seeds.begin(), c.seeds.end(), std::uint64_t{0});

    TrainConfig vanilla;
    vanilla.name = "vanilla";
    TrainConfig kt_uniform = vanilla;
    kt_uniform.name = "kt_uniform";
    kt_uniform.secondary = SecondaryObjective::kt;
    kt_uniform.kernel_tilde = uniform_box(1.0);
    TrainConfig kt_gaussian = kt_uniform;
    kt_gaussian.name = "kt_gaussian";
    kt_gaussian.kernel_tilde = gaussian_disc(0.5, 2.0);
    TrainConfig kd = kt_uniform;
    kd.name = "kd";
    kd.secondary = SecondaryObjective::kd;
    c.variants = {vanilla, kt_uniform, kt_gaussian, kd};
    return c;
}

Environment campaign_environment(const CampaignConfig& config) {
    try {
        return make_environment(config.env, config.grid);
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("environment: ") + e.what());
    }
}

std::vector<NamedKernel> noisy_eval_kernels(const std::vector<EvalKernel>& kernels) {
    std::vector<NamedKernel> out;
    for (const auto& k : kernels) {
        if (k.spec) out.push_back({k.name, *k.spec});
    }
    return out;
}

std::size_t CampaignResult::failures() const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const auto& r) { return !r.ok(); }));
}

CampaignResult run_campaign(const CampaignConfig& config, std::size_t jobs) {
    if (config.variants.empty() || config.seeds.empty()) throw ConfigError("campaign has no runs");
    const Environment env = campaign_environment(config);
    const auto eval = noisy_eval_kernels(config.eval_kernels);
    for (const auto& v : config.variants) {
        v.validate();
        try {
            make_kernel(v.kernel_tilde, env.mdp.n_states(), &env.geometry);
        } catch (const InvalidInput& e) {
            throw ConfigError(v.name + ": kernel_tilde: " + e.what());
        }
    }
    for (const auto& k : eval) {
        try {
            make_kernel(k.spec, env.mdp.n_states(), &env.geometry);
        } catch (const InvalidInput& e) {
            throw ConfigError("evaluation kernel " + k.name + ": " + e.what());
        }
    }

    CampaignResult result;
    result.config = config;
    for (const auto& v : config.variants) {
        for (auto seed : config.seeds) result.runs.push_back({v.name, seed, std::nullopt, {}});
    }
    parallel_for(result.runs.size(), jobs, [&](std::size_t i) {
        RunOutcome& run = result.runs[i];
        TrainConfig c = config.variants[i / config.seeds.size()];
        c.seed = run.seed;
        c.eval_kernels = eval;
        try {
            run.result = lrpg_train(env, c);
        } catch (const std::exception& e) {
            run.error = e.what();
        }
    });
    return result;
}

void write_campaign(const CampaignResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    write_text_file(dir / "config.json", campaign_to_json(result.config));

    Json runs = Json::array();
    Json failures = Json::array();
    std::ostringstream summary;
    summary << "variant,seed,status,step,objective_j,k1_estimate,objective_kt,objective_kd,lambda,epsilon_t,k_hat1,"
               "k1_converged,kernel,exact_regret\n";
    for (const auto& run : result.runs) {
        const fs::path path = run_dir(dir, run.variant, run.seed);
        Json entry{{"variant", run.variant},
                   {"seed", run.seed},
                   {"status", run.ok() ? "ok" : "failed"},
                   {"path", fs::relative(path, dir).generic_string()}};
        if (run.ok()) {
            fs::create_directories(path);
            write_text_file(path / "record.jsonl", run_record_to_jsonl(run.result->record));
            write_text_file(path / "policy.json", policy_to_json(run.result->params.policy()));
        } else {
            entry["error"] = run.error;
            failures.push_back({{"variant", run.variant}, {"seed", run.seed}, {"error", run.error}});
        }
        runs.push_back(std::move(entry));

        for (const auto& k : result.config.eval_kernels) {
            summary << run.variant << ',' << run.seed << ',' << (run.ok() ? "ok" : "failed") << ',';
            if (!run.ok() || run.result->record.checkpoints.empty()) {
                summary << ",,,,,,,," << k.name << ",\n";
                continue;
            }
            const Checkpoint& c = run.result->record.checkpoints.back();
            double regret = 0.0;
            for (const auto& r : c.regrets) {
                if (r.kernel == k.name) regret = r.regret;
            }
            summary << c.step << ',' << num(c.objective_j) << ',' << num(c.k1_estimate) << ','
                    << num(c.objective_kt) << ',' << num(c.objective_kd) << ',' << num(c.lambda) << ','
                    << num(c.epsilon_t) << ',' << num(c.k_hat1) << ',' << (c.k1_converged ? 1 : 0) << ','
                    << k.name << ',' << num(regret) << '\n';
        }
    }
    Json manifest;
    manifest["name"] = result.config.name;
    manifest["env"] = result.config.env;
    manifest["config_hash"] = config_hash(result.config);
    manifest["n_runs"] = result.runs.size();
    manifest["completed"] = result.runs.size() - result.failures();
    manifest["failures"] = std::move(failures);
    manifest["runs"] = std::move(runs);
    write_text_file(dir / "manifest.json", dump(manifest));
    write_text_file(dir / "summary.csv", summary.str());
}

CampaignDirectory load_campaign(const fs::path& dir) {
    if (!fs::exists(dir / "manifest.json")) {
        throw InvalidInput("no campaign manifest in '" + dir.string() + "'");
    }
    CampaignDirectory out;
    out.config = campaign_from_json(read_text_file(dir / "config.json"));
    const Json manifest = detail::parse_json(read_text_file(dir / "manifest.json"), "manifest");
    if (!manifest.contains("runs") || !manifest.at("runs").is_array()) {
        throw InvalidInput("manifest without a 'runs' array");
    }
    out.expected_runs = out.config.variants.size() * out.config.seeds.size();
    std::set<std::string> listed;
    for (const auto& run : manifest.at("runs")) {
        const auto variant = run.at("variant").get<std::string>();
        const auto seed = run.at("seed").get<std::uint64_t>();
        listed.insert(run_label(variant, seed));
        const fs::path policy = run_dir(dir, variant, seed) / "policy.json";
        if (run.value("status", "") != "ok") {
            out.missing.push_back(run_label(variant, seed) + " (failed: " + run.value("error", "") + ")");
        } else if (!fs::exists(policy)) {
            out.missing.push_back(run_label(variant, seed) + " (policy.json missing)");
        } else {
            out.policies.push_back({variant, seed, policy_from_json(read_text_file(policy))});
        }
    }
    for (const auto& v : out.config.variants) {
        for (auto seed : out.config.seeds) {
            if (!listed.contains(run_label(v.name, seed))) out.missing.push_back(run_label(v.name, seed) + " (not run)");
        }
    }
    return out;
}

EvaluationRow evaluate_policy(const Environment& env, const Policy& policy, const EvalKernel& kernel,
                              std::size_t n_traj, std::uint64_t seed) {
    env.mdp.check_policy(policy);
    if (n_traj == 0) throw InvalidInput("evaluate_policy: n_traj must be positive");
    std::optional<NoiseKernel> T;
    if (kernel.spec) T = make_kernel(*kernel.spec, env.mdp.n_states(), &env.geometry);
    Rng rng(seed);
    std::vector<double> returns;
    returns.reserve(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        const Episode episode = sample_trajectory(env.mdp, policy, T ? &*T : nullptr, env.trajectory_options(), rng);
        double total = 0.0;
        for (const auto& step : episode) total += step.reward;
        returns.push_back(total);
    }
    const double n = static_cast<double>(n_traj);
    const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / n;
    double ss = 0.0;
    for (double r : returns) ss += (r - mean) * (r - mean);
    EvaluationRow row;
    row.kernel = kernel.name;
    row.n_traj = n_traj;
    row.mean_return = mean;
    row.stderr_return = n_traj > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    row.objective_j = objective_j(env.mdp, policy);
    row.exact_regret = T ? robustness_regret(env.mdp, policy, *T) : 0.0;
    return row;
}

std::vector<EvaluationRow> evaluate_policies(const Environment& env, const std::vector<PolicyEntry>& policies,
                                             const std::vector<EvalKernel>& kernels, std::size_t n_traj,
                                             std::uint64_t eval_seed, std::size_t jobs) {
    std::vector<EvaluationRow> rows(policies.size() * kernels.size());
    parallel_for(rows.size(), jobs, [&](std::size_t i) {
        const PolicyEntry& p = policies[i / kernels.size()];
        EvaluationRow row = evaluate_policy(env, p.policy, kernels[i % kernels.size()], n_traj,
                                            splitmix64(eval_seed ^ splitmix64(p.seed)));
        row.variant = p.variant;
        row.seed = p.seed;
        rows[i] = std::move(row);
    });
    return rows;
}

void write_evaluation(const std::vector<EvaluationRow>& rows, const fs::path& dir) {
    fs::create_directories(dir);
    std::ostringstream csv;
    std::ostringstream jsonl;
    csv << "variant,seed,kernel,n_traj,mean_return,stderr_return,objective_j,exact_regret\n";
    for (const auto& r : rows) {
        csv << r.variant << ',' << r.seed << ',' << r.kernel << ',' << r.n_traj << ',' << num(r.mean_return) << ','
            << num(r.stderr_return) << ',' << num(r.objective_j) << ',' << num(r.exact_regret) << '\n';
        Json j{{"variant", r.variant},         {"seed", r.seed},
               {"kernel", r.kernel},           {"n_traj", r.n_traj},
               {"mean_return", r.mean_return}, {"stderr_return", r.stderr_return},
               {"objective_j", r.objective_j}, {"exact_regret", r.exact_regret}};
        jsonl << j.dump() << '\n';
    }
    write_text_file(dir / "evaluation.csv", csv.str());
    write_text_file(dir / "evaluation.jsonl", jsonl.str());
}

std::vector<EvaluationRow> read_evaluation(const fs::path& dir) {
    std::istringstream in(read_text_file(dir / "evaluation.jsonl"));
    std::vector<EvaluationRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const Json j = detail::parse_json(line, "evaluation.jsonl");
        try {
            rows.push_back({j.at("variant").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                            j.at("kernel").get<std::string>(), j.at("n_traj").get<std::size_t>(),
                            j.at("mean_return").get<double>(), j.at("stderr_return").get<double>(),
                            j.at("objective_j").get<double>(), j.at("exact_regret").get<double>()});
        } catch (const nlohmann::json::exception& e) {
            throw InvalidInput(std::string("evaluation.jsonl: ") + e.what());
        }
    }
    return rows;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InvalidInput("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw InvalidInput("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double position = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(position));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (position - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

std::vector<TableCell> aggregate(const std::vector<EvaluationRow>& rows, const std::string& env) {
    std::vector<std::string> variants;
    std::vector<std::string> kernels;
    std::map<std::pair<std::string, std::string>, std::vector<const EvaluationRow*>> groups;
    for (const auto& r : rows) {
        if (std::find(variants.begin(), variants.end(), r.variant) == variants.end()) variants.push_back(r.variant);
        if (std::find(kernels.begin(), kernels.end(), r.kernel) == kernels.end()) kernels.push_back(r.kernel);
        groups[{r.variant, r.kernel}].push_back(&r);
    }
    std::vector<TableCell> cells;
    for (const auto& v : variants) {
        for (const auto& k : kernels) {
            const auto it = groups.find({v, k});
            if (it == groups.end()) continue;
            std::vector<double> means;
            std::vector<double> regrets;
            for (const auto* r : it->second) {
                means.push_back(r->mean_return);
                regrets.push_back(r->exact_regret);
            }
            TableCell c;
            c.env = env;
            c.variant = v;
            c.kernel = k;
            c.n_seeds = means.size();
            c.median = median(means);
            c.mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(means.size());
            double ss = 0.0;
            for (double m : means) ss += (m - c.mean) * (m - c.mean);
            c.std = means.size() > 1 ? std::sqrt(ss / static_cast<double>(means.size() - 1)) : 0.0;
            c.q1 = quantile(means, 0.25);
            c.q3 = quantile(means, 0.75);
            c.median_regret = median(regrets);
            cells.push_back(c);
        }
    }
    return cells;
}

std::string table_csv(const std::vector<TableCell>& cells) {
    std::ostringstream out;
    out << "env,variant,kernel,n_seeds,median_return,mean_return,std_return,q1_return,q3_return,iqr_return,"
           "median_exact_regret\n";
    for (const auto& c : cells) {
        out << c.env << ',' << c.variant << ',' << c.kernel << ',' << c.n_seeds << ',' << num(c.median) << ','
            << num(c.mean) << ',' << num(c.std) << ',' << num(c.q1) << ',' << num(c.q3) << ',' << num(c.iqr()) << ','
            << num(c.median_regret) << '\n';
    }
    return out.str();
}

std::string table_text(const std::vector<TableCell>& cells, const std::vector<std::string>& missing) {
    std::vector<std::string> variants;
    std::vector<std::string> kernels;
    std::map<std::pair<std::string, std::string>, std::string> text;
    for (const auto& c : cells) {
        if (std::find(variants.begin(), variants.end(), c.variant) == variants.end()) variants.push_back(c.variant);
        if (std::find(kernels.begin(), kernels.end(), c.kernel) == kernels.end()) kernels.push_back(c.kernel);
        char buffer[128];
        std::snprintf(buffer, sizeof buffer, "%.3f [%.3f, %.3f] sd %.3f", c.median, c.q1, c.q3, c.std);
        text[{c.variant, c.kernel}] = buffer;
    }
    std::size_t first = std::string("variant").size();
    for (const auto& v : variants) first = std::max(first, v.size());
    std::vector<std::size_t> widths;
    for (const auto& k : kernels) {
        std::size_t w = k.size();
        for (const auto& v : variants) w = std::max(w, text[{v, k}].size());
        widths.push_back(w);
    }
    std::ostringstream out;
    if (!missing.empty()) {
        out << "PARTIAL REPORT: " << missing.size() << " run(s) missing\n";
        for (const auto& m : missing) out << "  " << m << '\n';
    }
    out << "env " << (cells.empty() ? std::string("?") : cells.front().env)
        << ": median over seeds of mean undiscounted return, [q1, q3] and sd across seeds\n";
    auto pad = [](const std::string& s, std::size_t w) { return s + std::string(w - s.size() + 2, ' '); };
    out << pad("variant", first);
    for (std::size_t i = 0; i < kernels.size(); ++i) out << pad(kernels[i], widths[i]);
    out << '\n';
    for (const auto& v : variants) {
        out << pad(v, first);
        for (std::size_t i = 0; i < kernels.size(); ++i) out << pad(text[{v, kernels[i]}], widths[i]);
        out << '\n';
    }
    return out.str();
}

std::string scatter_csv(const std::vector<EvaluationRow>& rows) {
    std::ostringstream out;
    out << "variant,seed,kernel,objective_j,exact_regret,mean_return\n";
    for (const auto& r : rows) {
        out << r.variant << ',' << r.seed << ',' << r.kernel << ',' << num(r.objective_j) << ','
            << num(r.exact_regret) << ',' << num(r.mean_return) << '\n';
    }
    return out.str();
}

ReportSummary write_report(const fs::path& dir, std::size_t jobs) {
    const CampaignDirectory campaign = load_campaign(dir);
    if (campaign.policies.empty()) throw InvalidInput("campaign in '" + dir.string() + "' has no completed runs");
    std::vector<EvaluationRow> rows;
    if (fs::exists(dir / "evaluation.jsonl")) {
        rows = read_evaluation(dir);
    } else {
        const Environment env = campaign_environment(campaign.config);
        rows = evaluate_policies(env, campaign.policies, campaign.config.eval_kernels, campaign.config.n_traj,
                                 campaign.config.eval_seed, jobs);
        write_evaluation(rows, dir);
    }
    if (rows.empty()) throw InvalidInput("campaign in '" + dir.string() + "' has no evaluation rows");

    ReportSummary summary;
    summary.cells = aggregate(rows, campaign.config.env);
    summary.missing = campaign.missing;
    summary.partial = campaign.partial();

    std::vector<EvaluationRow> noisy;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(noisy), [&](const EvaluationRow& r) {
        return std::any_of(campaign.config.eval_kernels.begin(), campaign.config.eval_kernels.end(),
                           [&](const EvalKernel& k) { return k.name == r.kernel && k.spec; });
    });
    Json report;
    report["name"] = campaign.config.name;
    report["config_hash"] = config_hash(campaign.config);
    report["partial"] = summary.partial;
    report["expected_runs"] = campaign.expected_runs;
    report["completed_runs"] = campaign.policies.size();
    report["missing"] = summary.missing;
    Json cells = Json::array();
    for (const auto& c : summary.cells) cells.push_back(cell_json(c));
    report["cells"] = std::move(cells);

    write_text_file(dir / "table.csv", table_csv(summary.cells));
    write_text_file(dir / "table.txt", table_text(summary.cells, summary.missing));
    write_text_file(dir / "scatter.csv", scatter_csv(noisy));
    write_text_file(dir / "report.json", dump(report));
    return summary;
}

ReportSummary run_full_campaign(const CampaignConfig& config, const fs::path& dir, std::size_t jobs) {
    const CampaignResult result = run_campaign(config, jobs);
    write_campaign(result, dir);
    fs::remove(dir / "evaluation.jsonl");
    return write_report(dir, jobs);
}

VerifyConfig verify_config_from_json(const std::string& text) {
    const Json j = detail::parse_json(text, "verify config");
    check_keys(j, kVerifyKeys, "verify config");
    VerifyConfig c;
    auto& r = c.instances;
    r.seed = get_or(j, "seed", r.seed);
    r.n_mdps = get_or(j, "n_mdps", r.n_mdps);
    r.min_states = get_or(j, "min_states", r.min_states);
    r.max_states = get_or(j, "max_states", r.max_states);
    r.min_actions = get_or(j, "min_actions", r.min_actions);
    r.max_actions = get_or(j, "max_actions", r.max_actions);
    r.gamma_low = get_or(j, "gamma_low", r.gamma_low);
    r.gamma_high = get_or(j, "gamma_high", r.gamma_high);
    r.constant_reward = get_or(j, "constant_reward", r.constant_reward);
    if (r.min_states < 1 || r.min_states > r.max_states || r.min_actions < 1 || r.min_actions > r.max_actions) {
        throw ConfigError("verify config: state / action ranges are empty");
    }
    if (!(0.0 <= r.gamma_low && r.gamma_low <= r.gamma_high && r.gamma_high < 1.0)) {
        throw ConfigError("verify config: need 0 <= gamma_low <= gamma_high < 1");
    }
    c.inclusion.samples_per_stratum = get_or(j, "samples_per_stratum", c.inclusion.samples_per_stratum);
    c.inclusion.convexity_pairs = get_or(j, "convexity_pairs", c.inclusion.convexity_pairs);
    c.convexity_pairs_per_kernel = get_or(j, "convexity_pairs_per_kernel", c.convexity_pairs_per_kernel);
    c.policies_per_mdp = get_or(j, "policies_per_mdp", c.policies_per_mdp);
    c.kernels_per_mdp = get_or(j, "kernels_per_mdp", c.kernels_per_mdp);
    c.fixed_point.max_steps = get_or(j, "fixed_point_steps", c.fixed_point.max_steps);
    c.fixed_point.n_seeds = get_or(j, "fixed_point_seeds", c.fixed_point.n_seeds);
    c.fixed_point.seed = r.seed;
    c.suites = get_or(j, "suites", c.suites);
    for (const auto& s : c.suites) {
        if (std::find(kAllSuites.begin(), kAllSuites.end(), s) == kAllSuites.end()) {
            throw ConfigError("verify config: unknown suite '" + s + "'");
        }
    }
    if (j.contains("instances")) {
        for (const auto& inst : j.at("instances")) {
            if (!inst.contains("mdp") || !inst.contains("kernel")) {
                throw ConfigError("verify config: each instance needs 'mdp' and 'kernel'");
            }
            Domdp mdp = domdp_from_json(inst.at("mdp").dump());
            NoiseKernel kernel = kernel_from_json(inst.at("kernel").dump());
            if (kernel.n_states() != mdp.n_states()) {
                throw InvalidInput("verify config: kernel size does not match the mdp");
            }
            c.explicit_instances.emplace_back(std::move(mdp), std::move(kernel));
        }
    }
    return c;
}

bool VerifyResult::passed() const {
    return std::all_of(outcomes.begin(), outcomes.end(), [](const auto& o) { return o.passed; });
}

VerifyResult run_verify(const VerifyConfig& config) {
    const std::vector<std::string>& suites = config.suites.empty() ? kAllSuites : config.suites;
    auto wanted = [&](const char* name) { return std::find(suites.begin(), suites.end(), name) != suites.end(); };
    VerifyResult result;
    if (wanted("inclusion")) {
        InclusionOptions options = config.inclusion;
        options.keep_reports = true;
        InclusionSuiteResult r = inclusion_suite(config.instances, options);
        for (std::size_t i = 0; i < config.explicit_instances.size(); ++i) {
            const auto& [mdp, kernel] = config.explicit_instances[i];
            r.report.merge(verify_inclusion_chain(mdp, kernel, config.instances.seed + i, options));
        }
        if (!config.explicit_instances.empty()) {
            r.outcome.checks = r.report.n_triples;
            r.outcome.failures = r.report.violations.size() + r.report.convexity_violations.size();
            r.outcome.passed = r.report.ok();
            r.outcome.detail += "; plus " + std::to_string(config.explicit_instances.size()) + " explicit instance(s)";
        }
        result.outcomes.push_back(r.outcome);
        result.inclusion = std::move(r.report);
    }
    if (wanted("convexity")) {
        result.outcomes.push_back(convexity_suite(config.instances, config.convexity_pairs_per_kernel));
    }
    if (wanted("constant_reward")) {
        result.outcomes.push_back(
            constant_reward_suite(config.instances, config.policies_per_mdp, config.kernels_per_mdp));
    }
    if (wanted("single_reward")) {
        result.outcomes.push_back(single_reward_suite(config.instances, config.policies_per_mdp));
    }
    if (wanted("fixed_point_iteration")) result.outcomes.push_back(fixed_point_iteration_suite(config.fixed_point));
    if (wanted("example1")) result.outcomes.push_back(example1_suite());
    if (wanted("gradient")) result.outcomes.push_back(gradient_suite(4, 3, 20, 1e-5, config.instances.seed));
    return result;
}

void write_verify(const VerifyResult& result, const fs::path& dir) {
    fs::create_directories(dir);
    Json report;
    report["passed"] = result.passed();
    Json suites = Json::array();
    for (const auto& o : result.outcomes) {
        suites.push_back({{"name", o.name},
                          {"passed", o.passed},
                          {"checks", o.checks},
                          {"failures", o.failures},
                          {"detail", o.detail},
                          {"seconds", o.seconds}});
    }
    report["suites"] = std::move(suites);
    const auto& inc = result.inclusion;
    report["inclusion"] = {{"n_triples", inc.n_triples},
                           {"n_convexity_checks", inc.n_convexity_checks},
                           {"chain_violations", inc.violations.size()},
                           {"convexity_violations", inc.convexity_violations.size()},
                           {"nonconvexity_witnesses", inc.nonconvexity_witnesses.size()},
                           {"tolerances",
                            {{"constant", inc.tolerances.constant},
                             {"fixed_point", inc.tolerances.fixed_point},
                             {"zero_disadvantage", inc.tolerances.zero_disadvantage},
                             {"regret", inc.tolerances.regret}}}};
    write_text_file(dir / "report.json", dump(report));

    std::ostringstream csv;
    csv << "index,policy_id,stratum,in_constant,in_fixed_point,in_zero_disadvantage,in_max_robust,regret,objective,"
           "max_abs_disadvantage,fixed_point_gap,row_spread,chain_holds\n";
    for (std::size_t i = 0; i < inc.reports.size(); ++i) {
        const auto& r = inc.reports[i];
        csv << i << ',' << r.policy_id << ',' << r.stratum << ',' << r.in_constant << ',' << r.in_fixed_point << ','
            << r.in_zero_disadvantage << ',' << r.in_max_robust << ',' << num(r.regret) << ',' << num(r.objective)
            << ',' << num(r.max_abs_disadvantage) << ',' << num(r.fixed_point_gap) << ',' << num(r.row_spread) << ','
            << r.chain_holds() << '\n';
    }
    write_text_file(dir / "memberships.csv", csv.str());

    if (!inc.ok()) {
        Json counterexamples;
        Json chain = Json::array();
        for (const auto& r : inc.violations) {
            chain.push_back({{"policy_id", r.policy_id},
                             {"stratum", r.stratum},
                             {"in_constant", r.in_constant},
                             {"in_fixed_point", r.in_fixed_point},
                             {"in_zero_disadvantage", r.in_zero_disadvantage},
                             {"in_max_robust", r.in_max_robust},
                             {"regret", r.regret},
                             {"max_abs_disadvantage", r.max_abs_disadvantage}});
        }
        Json convexity = Json::array();
        for (const auto& c : inc.convexity_violations) {
            convexity.push_back({{"set", c.set},
                                 {"alpha", c.alpha},
                                 {"gap", c.gap},
                                 {"first", detail::matrix_to_json(c.first)},
                                 {"second", detail::matrix_to_json(c.second)}});
        }
        counterexamples["chain"] = std::move(chain);
        counterexamples["convexity"] = std::move(convexity);
        write_text_file(dir / "counterexamples.json", dump(counterexamples));
    }
}

}  // namespace lexirobust
