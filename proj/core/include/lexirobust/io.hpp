#pragma once

#include <filesystem>
#include <string>

#include "lexirobust/envs.hpp"
#include "lexirobust/lrpg.hpp"
#include "lexirobust/mdp.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust {

/// DOMDP document: {n_states, n_actions, gamma, mu0, P[x][u][y], R}. R may be
/// given as [x][u][y], [x][u] or [x]; lower-rank forms are broadcast.
Domdp domdp_from_json(const std::string& text);
std::string domdp_to_json(const Domdp& mdp);

/// Kernel spec: {"kind", "sigma", "bound", "map", "components": [{"weight", "kernel"}]}.
KernelSpec kernel_spec_from_json(const std::string& text);
std::string kernel_spec_to_json(const KernelSpec& spec);

/// Dense kernel document {"n_states", "T": [[...]]}.
NoiseKernel kernel_from_json(const std::string& text);
std::string kernel_to_json(const NoiseKernel& kernel);

/// {width, height, lava, obstacles, goal, start, rewards: {goal, lava, step, collision},
///  slip, gamma, horizon, static_obstacles, max_states}; missing keys keep defaults.
GridSpec grid_spec_from_json(const std::string& text);
std::string grid_spec_to_json(const GridSpec& spec);

/// {"n_states", "n_actions", "pi": [[...]]}.
Policy policy_from_json(const std::string& text);
std::string policy_to_json(const Policy& policy);

/// One JSON line per checkpoint.
std::string run_record_to_jsonl(const RunRecord& record);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace lexirobust
