#pragma once

// Private JSON helpers shared by io.cpp and harness.cpp.

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lexirobust/errors.hpp"
#include "lexirobust/lrpg.hpp"
#include "lexirobust/noise_kernel.hpp"

namespace lexirobust::detail {

using Json = nlohmann::ordered_json;

Json parse_json(const std::string& text, const char* what);

Json matrix_to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from_json(const Json& j, const char* what);

Json kernel_spec_json(const KernelSpec& spec);
KernelSpec kernel_spec_from(const Json& j);

Json checkpoint_json(const RunRecord& record, const Checkpoint& c);

/// Fetches `key` from an object with a typed default; a type mismatch
/// becomes a ConfigError naming the key.
template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
    }
}

}  // namespace lexirobust::detail
