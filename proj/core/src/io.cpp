#include "lexirobust/io.hpp"

#include <fstream>
#include <sstream>

#include "json_util.hpp"

namespace lexirobust {

namespace detail {

Json parse_json(const std::string& text, const char* what) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string(what) + ": malformed JSON: " + e.what());
    }
}

Json matrix_to_json(const Eigen::MatrixXd& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const Json& j, const char* what) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw InvalidInput(std::string(what) + ": expected a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const Json& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw InvalidInput(std::string(what) + ": row " + std::to_string(i) + " has the wrong length");
        }
        for (Eigen::Index c = 0; c < cols; ++c) {
            const Json& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) {
                throw InvalidInput(std::string(what) + ": non-numeric entry in row " + std::to_string(i));
            }
            m(i, c) = v.get<double>();
        }
    }
    return m;
}

Json kernel_spec_json(const KernelSpec& spec) {
    Json j;
    j["kind"] = to_string(spec.kind);
    if (spec.kind == KernelKind::gaussian) j["sigma"] = spec.sigma;
    if (spec.bound) j["bound"] = *spec.bound;
    if (!spec.map.empty()) j["map"] = spec.map;
    if (!spec.components.empty()) {
        Json components = Json::array();
        for (const auto& c : spec.components) {
            components.push_back({{"weight", c.weight}, {"kernel", kernel_spec_json(c.kernel)}});
        }
        j["components"] = std::move(components);
    }
    return j;
}

KernelSpec kernel_spec_from(const Json& j) {
    if (j.is_string()) return KernelSpec{kernel_kind_from_string(j.get<std::string>()), 0.5, {}, {}, {}};
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("kernel spec: expected an object with 'kind'");
    KernelSpec spec;
    try {
        spec.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
    } catch (const InvalidInput& e) {
        throw ConfigError(std::string("kernel spec: ") + e.what());
    }
    spec.sigma = get_or(j, "sigma", spec.sigma);
    if (j.contains("bound") && !j.at("bound").is_null()) spec.bound = get_or(j, "bound", 0.0);
    spec.map = get_or(j, "map", std::vector<std::size_t>{});
    if (j.contains("components")) {
        for (const auto& c : j.at("components")) {
            if (!c.contains("kernel")) throw ConfigError("mixture component without 'kernel'");
            spec.components.push_back({get_or(c, "weight", 1.0), kernel_spec_from(c.at("kernel"))});
        }
    }
    return spec;
}

Json checkpoint_json(const RunRecord& record, const Checkpoint& c) {
    Json j;
    j["run"] = record.run;
    j["env"] = record.env;
    j["seed"] = record.seed;
    j["step"] = c.step;
    j["update"] = c.update;
    j["episodes"] = c.episodes;
    j["secondary_active"] = c.secondary_active;
    j["objective_j"] = c.objective_j;
    j["k1_estimate"] = c.k1_estimate;
    j["objective_kt"] = c.objective_kt;
    j["objective_kd"] = c.objective_kd;
    j["lambda"] = c.lambda;
    j["epsilon_t"] = c.epsilon_t;
    j["k_hat1"] = c.k_hat1;
    j["k1_converged"] = c.k1_converged;
    Json regrets = Json::object();
    for (const auto& r : c.regrets) regrets[r.kernel] = r.regret;
    j["regrets"] = std::move(regrets);
    return j;
}

}  // namespace detail

using detail::Json;

namespace {

using Nested = std::vector<std::vector<std::vector<double>>>;

Nested broadcast_rewards(const Json& R, std::size_t n, std::size_t m) {
    auto numeric_depth = [](const Json& j) {
        int depth = 0;
        const Json* cur = &j;
        while (cur->is_array() && !cur->empty()) {
            ++depth;
            cur = &(*cur)[0];
        }
        return cur->is_number() ? depth : -1;
    };
    const int depth = numeric_depth(R);
    Nested out(n, std::vector<std::vector<double>>(m, std::vector<double>(n, 0.0)));
    try {
        if (depth == 3) return R.get<Nested>();
        if (depth == 2) {
            const auto r = R.get<std::vector<std::vector<double>>>();
            if (r.size() != n) throw InvalidInput("R: expected one row per state");
            for (std::size_t x = 0; x < n; ++x) {
                if (r[x].size() != m) throw InvalidInput("R: expected one entry per action in row " + std::to_string(x));
                for (std::size_t u = 0; u < m; ++u) out[x][u].assign(n, r[x][u]);
            }
            return out;
        }
        if (depth == 1) {
            const auto r = R.get<std::vector<double>>();
            if (r.size() != n) throw InvalidInput("R: expected one entry per state");
            for (std::size_t x = 0; x < n; ++x) {
                for (std::size_t u = 0; u < m; ++u) out[x][u].assign(n, r[x]);
            }
            return out;
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("R: ") + e.what());
    }
    throw InvalidInput("R: expected a numeric array of rank 1, 2 or 3");
}

Json cells_json(const std::vector<Cell>& cells) {
    Json out = Json::array();
    for (Cell c : cells) out.push_back({c.x, c.y});
    return out;
}

Cell cell_from(const Json& j) {
    if (!j.is_array() || j.size() != 2) throw ConfigError("grid spec: cells are [x, y] pairs");
    return {j[0].get<int>(), j[1].get<int>()};
}

std::vector<Cell> cells_from(const Json& j, const char* key) {
    std::vector<Cell> out;
    if (!j.contains(key)) return out;
    for (const auto& c : j.at(key)) out.push_back(cell_from(c));
    return out;
}

}  // namespace

Domdp domdp_from_json(const std::string& text) {
    const Json j = detail::parse_json(text, "domdp");
    for (const char* key : {"gamma", "mu0", "P", "R"}) {
        if (!j.contains(key)) throw InvalidInput(std::string("domdp: missing field '") + key + "'");
    }
    Nested P;
    std::vector<double> mu0;
    double gamma = 0.0;
    try {
        P = j.at("P").get<Nested>();
        mu0 = j.at("mu0").get<std::vector<double>>();
        gamma = j.at("gamma").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("domdp: ") + e.what());
    }
    const std::size_t n = P.size();
    const std::size_t m = n > 0 ? P[0].size() : 0;
    if (j.contains("n_states") && j.at("n_states").get<std::size_t>() != n) {
        throw InvalidInput("domdp: n_states disagrees with P");
    }
    if (j.contains("n_actions") && j.at("n_actions").get<std::size_t>() != m) {
        throw InvalidInput("domdp: n_actions disagrees with P");
    }
    return Domdp::from_nested(P, broadcast_rewards(j.at("R"), n, m), gamma, mu0);
}

std::string domdp_to_json(const Domdp& mdp) {
    const std::size_t n = mdp.n_states();
    const std::size_t m = mdp.n_actions();
    Nested P(n, std::vector<std::vector<double>>(m, std::vector<double>(n)));
    Nested R = P;
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t u = 0; u < m; ++u) {
            for (std::size_t y = 0; y < n; ++y) {
                P[x][u][y] = mdp.p(x, u, y);
                R[x][u][y] = mdp.r(x, u, y);
            }
        }
    }
    Json j;
    j["n_states"] = n;
    j["n_actions"] = m;
    j["gamma"] = mdp.gamma();
    j["mu0"] = std::vector<double>(mdp.mu0().data(), mdp.mu0().data() + mdp.mu0().size());
    j["P"] = P;
    j["R"] = R;
    return j.dump();
}

KernelSpec kernel_spec_from_json(const std::string& text) {
    return detail::kernel_spec_from(detail::parse_json(text, "kernel spec"));
}

std::string kernel_spec_to_json(const KernelSpec& spec) { return detail::kernel_spec_json(spec).dump(); }

NoiseKernel kernel_from_json(const std::string& text) {
    const Json j = detail::parse_json(text, "kernel");
    if (!j.contains("T")) throw InvalidInput("kernel: missing field 'T'");
    const Eigen::MatrixXd T = detail::matrix_from_json(j.at("T"), "kernel T");
    if (j.contains("n_states") && j.at("n_states").get<Eigen::Index>() != T.rows()) {
        throw InvalidInput("kernel: n_states disagrees with T");
    }
    return NoiseKernel(T);
}

std::string kernel_to_json(const NoiseKernel& kernel) {
    Json j;
    j["n_states"] = kernel.n_states();
    j["T"] = detail::matrix_to_json(kernel.matrix());
    return j.dump();
}

GridSpec grid_spec_from_json(const std::string& text) {
    const Json j = detail::parse_json(text, "grid spec");
    if (!j.is_object()) throw ConfigError("grid spec: expected an object");
    GridSpec spec;
    using detail::get_or;
    spec.width = get_or(j, "width", spec.width);
    spec.height = get_or(j, "height", spec.height);
    if (j.contains("lava")) spec.lava = cells_from(j, "lava");
    if (j.contains("obstacles")) spec.obstacles = cells_from(j, "obstacles");
    if (j.contains("goal")) spec.goal = cell_from(j.at("goal"));
    if (j.contains("start")) spec.start = cells_from(j, "start");
    if (j.contains("rewards")) {
        const Json& r = j.at("rewards");
        spec.goal_reward = get_or(r, "goal", spec.goal_reward);
        spec.lava_reward = get_or(r, "lava", spec.lava_reward);
        spec.step_reward = get_or(r, "step", spec.step_reward);
        spec.collision_reward = get_or(r, "collision", spec.collision_reward);
    }
    spec.slip = get_or(j, "slip", spec.slip);
    spec.gamma = get_or(j, "gamma", spec.gamma);
    spec.horizon = get_or(j, "horizon", spec.horizon);
    spec.static_obstacles = get_or(j, "static_obstacles", spec.static_obstacles);
    spec.max_states = get_or(j, "max_states", spec.max_states);
    return spec;
}

std::string grid_spec_to_json(const GridSpec& spec) {
    Json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["lava"] = cells_json(spec.lava);
    j["obstacles"] = cells_json(spec.obstacles);
    j["goal"] = {spec.goal.x, spec.goal.y};
    j["start"] = cells_json(spec.start);
    j["rewards"] = {{"goal", spec.goal_reward},
                    {"lava", spec.lava_reward},
                    {"step", spec.step_reward},
                    {"collision", spec.collision_reward}};
    j["slip"] = spec.slip;
    j["gamma"] = spec.gamma;
    j["horizon"] = spec.horizon;
    j["static_obstacles"] = spec.static_obstacles;
    j["max_states"] = spec.max_states;
    return j.dump();
}

Policy policy_from_json(const std::string& text) {
    const Json j = detail::parse_json(text, "policy");
    if (!j.contains("pi")) throw InvalidInput("policy: missing field 'pi'");
    return Policy(detail::matrix_from_json(j.at("pi"), "policy pi"));
}

std::string policy_to_json(const Policy& policy) {
    Json j;
    j["n_states"] = policy.n_states();
    j["n_actions"] = policy.n_actions();
    j["pi"] = detail::matrix_to_json(policy.matrix());
    return j.dump();
}

std::string run_record_to_jsonl(const RunRecord& record) {
    std::string out;
    for (const auto& c : record.checkpoints) {
        out += detail::checkpoint_json(record, c).dump();
        out += '\n';
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("failed writing " + path.string());
}

}  // namespace lexirobust
