#include "lexirobust/simplex.hpp"

#include <algorithm>
#include <functional>
#include <vector>

namespace lexirobust {

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    std::vector<double> sorted(v.data(), v.data() + v.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double threshold = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
        if (sorted[k] - candidate > 0.0) threshold = candidate;
    }
    return (v.array() - threshold).cwiseMax(0.0).matrix();
}

Eigen::MatrixXd project_rows_to_simplex(const Eigen::MatrixXd& table) {
    Eigen::MatrixXd out(table.rows(), table.cols());
    for (Eigen::Index x = 0; x < table.rows(); ++x) {
        out.row(x) = project_to_simplex(table.row(x).transpose()).transpose();
    }
    return out;
}

}  // namespace lexirobust
