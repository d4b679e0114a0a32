#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "lexirobust/mdp.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust {

/// Grid cell; y grows downwards.
struct Cell {
    int x = 0;
    int y = 0;
    friend bool operator==(const Cell&, const Cell&) = default;
};

struct GridSpec {
    int width = 6;
    int height = 6;
    std::vector<Cell> lava;
    /// Walls for lava_gap_env, moving (or static) obstacles for dynamic_obstacles_env.
    std::vector<Cell> obstacles;
    Cell goal{5, 5};
    std::vector<Cell> start{{0, 0}};
    double goal_reward = 1.0;
    double lava_reward = 0.0;
    double step_reward = 0.0;
    double collision_reward = -1.0;
    double slip = 0.0;
    double gamma = 0.99;
    bool static_obstacles = false;
    std::size_t max_states = 5000;
    std::size_t horizon = 100;
};

/// Actions in every grid environment.
enum GridAction : std::size_t { up = 0, down = 1, left = 2, right = 3 };
inline constexpr std::size_t kGridActions = 4;

/// A compiled environment: the DOMDP, a state embedding for geometric noise
/// kernels, and the episode interface used by samplers.
struct Environment {
    std::string name;
    Domdp mdp;
    StateGeometry geometry;
    /// Absorbing state that ends an episode, if the task is episodic.
    std::optional<std::size_t> terminal;
    StateWeighting weighting = StateWeighting::stationary;
    std::size_t horizon = 100;
    /// Human-readable label per state.
    std::vector<std::string> state_labels;

    TrajectoryOptions trajectory_options() const { return {horizon, terminal}; }
};

enum class Example1Rewards { constant_per_state, single_action };

/// Two states, two actions, P(x_i, u, x_j) = 1/2, uniform mu0.
/// constant_per_state: R(x1, ., .) = 10, else 0.
/// single_action: R(x1, u1, .) = 10, else 0.
Domdp example1_mdp(double gamma, Example1Rewards rewards);
Environment example1_env(double gamma, Example1Rewards rewards);

/// Gridworld with lava. States are the non-wall cells (lava and goal cells
/// included) followed by one absorbing terminal. Entering lava pays
/// lava_reward, entering the goal pays goal_reward, any other move pays
/// step_reward; lava and goal cells then move to the terminal. Each action
/// moves in its direction with probability 1 - slip and to each perpendicular
/// direction with probability slip / 2; blocked moves stay put.
/// Throws InvalidInput when the goal is unreachable from a start cell.
Environment lava_gap_env(const GridSpec& spec);

/// The 6x6 grid used by the training campaigns: a lava column at x = 2 whose
/// only gap is in the bottom row, start top-left, goal bottom-right, slip 0.1.
GridSpec default_lava_gap_spec();

/// Gridworld whose state is (agent cell, obstacle cells), restricted to the
/// configurations reachable from the start cells, plus goal and collision
/// states and a terminal. The agent moves first; walking into an obstacle
/// pays collision_reward. Then each obstacle moves to a uniformly chosen free
/// neighbour (not the goal, not the agent), or stays when none is free.
/// Throws InvalidInput when the reachable state count exceeds spec.max_states.
Environment dynamic_obstacles_env(const GridSpec& spec);

GridSpec default_dynamic_obstacles_spec();

/// Environment by name: "example1", "lava_gap" or "dynamic_obstacles".
Environment make_environment(const std::string& name, const std::optional<GridSpec>& spec = std::nullopt);

}  // namespace lexirobust
