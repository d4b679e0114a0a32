#include "lexirobust/envs.hpp"

#include <algorithm>
#include <deque>
#include <map>

#include "lexirobust/errors.hpp"

namespace lexirobust {

namespace {

constexpr Cell kMoves[kGridActions] = {{0, -1}, {0, 1}, {-1, 0}, {1, 0}};
// Perpendicular directions reached by slipping, per action.
constexpr std::size_t kSlips[kGridActions][2] = {{left, right}, {left, right}, {up, down}, {up, down}};

bool contains(const std::vector<Cell>& cells, Cell c) {
    return std::find(cells.begin(), cells.end(), c) != cells.end();
}

std::string cell_label(Cell c) {
    return "(" + std::to_string(c.x) + "," + std::to_string(c.y) + ")";
}

/// Shared grid bookkeeping: bounds, walls and the outcome distribution of
/// one action from one cell.
class Grid {
public:
    Grid(const GridSpec& spec, const std::vector<Cell>& walls) : spec_(spec), walls_(walls) {
        if (spec.width <= 0 || spec.height <= 0) throw InvalidInput("grid: width and height must be positive");
        if (spec.slip < 0.0 || spec.slip > 1.0) throw InvalidInput("grid: slip must lie in [0, 1]");
        if (!inside(spec.goal)) throw InvalidInput("grid: goal outside the grid");
        if (spec.start.empty()) throw InvalidInput("grid: no start cell");
        if (contains(spec.lava, spec.goal)) throw InvalidInput("grid: goal cell is lava");
        for (Cell c : spec.lava) {
            if (!inside(c)) throw InvalidInput("grid: lava cell " + cell_label(c) + " outside the grid");
        }
        for (Cell s : spec.start) {
            if (!inside(s) || blocked(s)) throw InvalidInput("grid: start cell " + cell_label(s) + " not free");
            if (s == spec.goal || contains(spec.lava, s)) {
                throw InvalidInput("grid: start cell " + cell_label(s) + " is lava or goal");
            }
        }
    }

    bool inside(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < spec_.width && c.y < spec_.height; }
    bool blocked(Cell c) const { return !inside(c) || contains(walls_, c); }

    Cell move(Cell c, std::size_t direction) const {
        const Cell next{c.x + kMoves[direction].x, c.y + kMoves[direction].y};
        return blocked(next) ? c : next;
    }

    /// (destination, probability) pairs for action `u` at `c`; duplicates merged.
    std::vector<std::pair<Cell, double>> outcomes(Cell c, std::size_t u) const {
        std::vector<std::pair<Cell, double>> out;
        auto add = [&](Cell d, double p) {
            if (p <= 0.0) return;
            for (auto& [cell, q] : out) {
                if (cell == d) {
                    q += p;
                    return;
                }
            }
            out.emplace_back(d, p);
        };
        add(move(c, u), 1.0 - spec_.slip);
        add(move(c, kSlips[u][0]), 0.5 * spec_.slip);
        add(move(c, kSlips[u][1]), 0.5 * spec_.slip);
        return out;
    }

private:
    const GridSpec& spec_;
    std::vector<Cell> walls_;
};

Eigen::VectorXd start_distribution(const std::vector<std::size_t>& start_states, std::size_t n) {
    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (auto s : start_states) mu0(static_cast<Eigen::Index>(s)) += 1.0 / static_cast<double>(start_states.size());
    return mu0;
}

}  // namespace

Domdp example1_mdp(double gamma, Example1Rewards rewards) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("example1_mdp: gamma must lie in (0, 1)");
    const Eigen::MatrixXd half = Eigen::MatrixXd::Constant(2, 2, 0.5);
    std::vector<Eigen::MatrixXd> R(2, Eigen::MatrixXd::Zero(2, 2));
    R[0].row(0).setConstant(10.0);
    if (rewards == Example1Rewards::constant_per_state) R[1].row(0).setConstant(10.0);
    return Domdp({half, half}, std::move(R), gamma, Eigen::VectorXd::Constant(2, 0.5));
}

Environment example1_env(double gamma, Example1Rewards rewards) {
    Environment env{"example1", example1_mdp(gamma, rewards), {}, std::nullopt,
                    StateWeighting::stationary, 100, {"x1", "x2"}};
    env.geometry.coordinates = Eigen::MatrixXd(2, 1);
    env.geometry.coordinates << 0.0, 1.0;
    env.geometry.pinned = {false, false};
    return env;
}

Environment lava_gap_env(const GridSpec& spec) {
    const Grid grid(spec, spec.obstacles);

    std::map<std::pair<int, int>, std::size_t> index;
    std::vector<Cell> cells;
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            const Cell c{x, y};
            if (grid.blocked(c)) continue;
            index[{x, y}] = cells.size();
            cells.push_back(c);
        }
    }
    const std::size_t terminal = cells.size();
    const std::size_t n = cells.size() + 1;
    const auto ni = static_cast<Eigen::Index>(n);
    auto id = [&](Cell c) { return index.at({c.x, c.y}); };
    auto absorbing = [&](Cell c) { return c == spec.goal || contains(spec.lava, c); };

    // The goal must be reachable from every start without touching lava.
    {
        std::vector<bool> seen(cells.size(), false);
        std::deque<Cell> frontier;
        for (Cell s : spec.start) {
            seen[id(s)] = true;
            frontier.push_back(s);
        }
        while (!frontier.empty()) {
            const Cell c = frontier.front();
            frontier.pop_front();
            if (absorbing(c)) continue;
            for (std::size_t d = 0; d < kGridActions; ++d) {
                const Cell next = grid.move(c, d);
                if (contains(spec.lava, next) || seen[id(next)]) continue;
                seen[id(next)] = true;
                frontier.push_back(next);
            }
        }
        if (!seen[id(spec.goal)]) throw InvalidInput("lava_gap_env: goal unreachable from the start cells");
    }

    std::vector<Eigen::MatrixXd> P(kGridActions, Eigen::MatrixXd::Zero(ni, ni));
    std::vector<Eigen::MatrixXd> R(kGridActions, Eigen::MatrixXd::Zero(ni, ni));
    for (std::size_t u = 0; u < kGridActions; ++u) {
        P[u](static_cast<Eigen::Index>(terminal), static_cast<Eigen::Index>(terminal)) = 1.0;
        for (std::size_t s = 0; s < cells.size(); ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            if (absorbing(cells[s])) {
                P[u](si, static_cast<Eigen::Index>(terminal)) = 1.0;
                continue;
            }
            for (const auto& [dest, prob] : grid.outcomes(cells[s], u)) {
                const auto di = static_cast<Eigen::Index>(id(dest));
                P[u](si, di) += prob;
                R[u](si, di) = dest == spec.goal          ? spec.goal_reward
                               : contains(spec.lava, dest) ? spec.lava_reward
                                                           : spec.step_reward;
            }
        }
    }

    std::vector<std::size_t> starts;
    for (Cell s : spec.start) starts.push_back(id(s));

    Environment env{"lava_gap", Domdp(std::move(P), std::move(R), spec.gamma, start_distribution(starts, n)),
                    {}, terminal, StateWeighting::occupancy, spec.horizon, {}};
    env.geometry.coordinates = Eigen::MatrixXd::Zero(ni, 2);
    env.geometry.pinned.assign(n, false);
    for (std::size_t s = 0; s < cells.size(); ++s) {
        env.geometry.coordinates(static_cast<Eigen::Index>(s), 0) = cells[s].x;
        env.geometry.coordinates(static_cast<Eigen::Index>(s), 1) = cells[s].y;
        env.geometry.pinned[s] = absorbing(cells[s]);
        env.state_labels.push_back(cell_label(cells[s]) + (cells[s] == spec.goal         ? " goal"
                                                           : contains(spec.lava, cells[s]) ? " lava"
                                                                                           : ""));
    }
    env.geometry.coordinates.row(static_cast<Eigen::Index>(terminal)).setConstant(-1.0);
    env.geometry.pinned[terminal] = true;
    env.state_labels.push_back("terminal");
    return env;
}

GridSpec default_lava_gap_spec() {
    GridSpec spec;
    spec.width = 6;
    spec.height = 6;
    spec.goal = {5, 5};
    spec.start = {{0, 0}};
    for (int y = 0; y < spec.height - 1; ++y) spec.lava.push_back({2, y});
    spec.slip = 0.1;
    spec.gamma = 0.99;
    spec.horizon = 100;
    return spec;
}

Environment dynamic_obstacles_env(const GridSpec& spec) {
    const Grid grid(spec, {});
    const std::size_t k = spec.obstacles.size();
    for (Cell o : spec.obstacles) {
        if (!grid.inside(o) || o == spec.goal) throw InvalidInput("dynamic_obstacles_env: bad obstacle " + cell_label(o));
    }

    using Config = std::vector<Cell>;  // agent followed by the obstacles
    auto key = [](const Config& c) {
        std::vector<int> out;
        for (Cell cell : c) {
            out.push_back(cell.x);
            out.push_back(cell.y);
        }
        return out;
    };
    std::map<std::vector<int>, std::size_t> index;
    std::vector<Config> configs;
    std::deque<std::size_t> frontier;
    auto intern = [&](const Config& c) {
        auto [it, inserted] = index.emplace(key(c), configs.size());
        if (inserted) {
            if (configs.size() >= spec.max_states) {
                throw InvalidInput("dynamic_obstacles_env: more than " + std::to_string(spec.max_states) +
                                   " reachable states");
            }
            configs.push_back(c);
            frontier.push_back(it->second);
        }
        return it->second;
    };

    // Distribution over obstacle placements after the obstacles move.
    auto obstacle_moves = [&](const Config& from, Cell agent) {
        std::vector<std::pair<Config, double>> out{{Config{agent}, 1.0}};
        for (std::size_t i = 0; i < k; ++i) {
            const Cell o = from[1 + i];
            std::vector<Cell> options;
            if (!spec.static_obstacles) {
                for (std::size_t d = 0; d < kGridActions; ++d) {
                    const Cell next{o.x + kMoves[d].x, o.y + kMoves[d].y};
                    if (grid.inside(next) && next != spec.goal && next != agent) options.push_back(next);
                }
            }
            if (options.empty()) options.push_back(o);
            std::vector<std::pair<Config, double>> grown;
            for (const auto& [partial, p] : out) {
                for (Cell c : options) {
                    Config next = partial;
                    next.push_back(c);
                    grown.emplace_back(std::move(next), p / static_cast<double>(options.size()));
                }
            }
            out = std::move(grown);
        }
        return out;
    };

    struct Edge {
        std::size_t from;
        std::size_t action;
        std::size_t to;  // config index, or a sentinel below
        double p;
        double r;
    };
    constexpr std::size_t kGoal = static_cast<std::size_t>(-1);
    constexpr std::size_t kCollided = static_cast<std::size_t>(-2);

    std::vector<std::size_t> starts;
    for (Cell s : spec.start) {
        if (contains(spec.obstacles, s)) throw InvalidInput("dynamic_obstacles_env: start cell holds an obstacle");
        Config c{s};
        c.insert(c.end(), spec.obstacles.begin(), spec.obstacles.end());
        starts.push_back(intern(c));
    }

    std::vector<Edge> edges;
    bool goal_reached = false;
    bool collision_reached = false;
    while (!frontier.empty()) {
        const std::size_t s = frontier.front();
        frontier.pop_front();
        const Config current = configs[s];
        const Config obstacles(current.begin() + 1, current.end());
        for (std::size_t u = 0; u < kGridActions; ++u) {
            for (const auto& [dest, prob] : grid.outcomes(current[0], u)) {
                if (dest == spec.goal) {
                    edges.push_back({s, u, kGoal, prob, spec.goal_reward});
                    goal_reached = true;
                } else if (contains(obstacles, dest)) {
                    edges.push_back({s, u, kCollided, prob, spec.collision_reward});
                    collision_reached = true;
                } else {
                    for (const auto& [next, q] : obstacle_moves(current, dest)) {
                        edges.push_back({s, u, intern(next), prob * q, spec.step_reward});
                    }
                }
            }
        }
    }
    if (!goal_reached) throw InvalidInput("dynamic_obstacles_env: goal unreachable from the start cells");

    const std::size_t goal_state = configs.size();
    std::size_t next_free = goal_state + 1;
    const std::size_t collided_state = collision_reached ? next_free++ : goal_state;
    const std::size_t terminal = next_free++;
    const std::size_t n = next_free;
    const auto ni = static_cast<Eigen::Index>(n);
    if (n > spec.max_states) {
        throw InvalidInput("dynamic_obstacles_env: more than " + std::to_string(spec.max_states) + " states");
    }

    std::vector<Eigen::MatrixXd> P(kGridActions, Eigen::MatrixXd::Zero(ni, ni));
    std::vector<Eigen::MatrixXd> R(kGridActions, Eigen::MatrixXd::Zero(ni, ni));
    for (const Edge& e : edges) {
        const std::size_t to = e.to == kGoal ? goal_state : e.to == kCollided ? collided_state : e.to;
        const auto fi = static_cast<Eigen::Index>(e.from);
        const auto ti = static_cast<Eigen::Index>(to);
        P[e.action](fi, ti) += e.p;
        R[e.action](fi, ti) = e.r;
    }
    for (std::size_t u = 0; u < kGridActions; ++u) {
        for (std::size_t s : {goal_state, collided_state, terminal}) {
            P[u](static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(terminal)) = 1.0;
        }
    }

    Environment env{"dynamic_obstacles", Domdp(std::move(P), std::move(R), spec.gamma, start_distribution(starts, n)),
                    {}, terminal, StateWeighting::occupancy, spec.horizon, {}};
    // Coordinates of the agent and of every obstacle; sinks sit apart and are pinned.
    const auto dims = static_cast<Eigen::Index>(2 * (k + 1));
    env.geometry.coordinates = Eigen::MatrixXd::Constant(ni, dims, -1.0);
    env.geometry.pinned.assign(n, true);
    for (std::size_t s = 0; s < configs.size(); ++s) {
        std::string label;
        for (std::size_t i = 0; i < configs[s].size(); ++i) {
            env.geometry.coordinates(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(2 * i)) = configs[s][i].x;
            env.geometry.coordinates(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(2 * i + 1)) = configs[s][i].y;
            label += (i == 0 ? "agent" : " obstacle") + cell_label(configs[s][i]);
        }
        env.geometry.pinned[s] = false;
        env.state_labels.push_back(std::move(label));
    }
    env.state_labels.push_back("goal");
    if (collision_reached) env.state_labels.push_back("collided");
    env.state_labels.push_back("terminal");
    return env;
}

GridSpec default_dynamic_obstacles_spec() {
    GridSpec spec;
    spec.width = 4;
    spec.height = 4;
    spec.goal = {3, 3};
    spec.start = {{0, 0}};
    spec.obstacles = {{2, 1}};
    spec.slip = 0.0;
    spec.gamma = 0.95;
    return spec;
}

Environment make_environment(const std::string& name, const std::optional<GridSpec>& spec) {
    if (name == "example1") return example1_env(0.9, Example1Rewards::single_action);
    if (name == "lava_gap") return lava_gap_env(spec.value_or(default_lava_gap_spec()));
    if (name == "dynamic_obstacles") return dynamic_obstacles_env(spec.value_or(default_dynamic_obstacles_spec()));
    throw ConfigError("unknown environment '" + name + "'");
}

}  // namespace lexirobust
