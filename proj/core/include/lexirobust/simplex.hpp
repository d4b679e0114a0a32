#pragma once

#include <Eigen/Dense>

namespace lexirobust {

/// Euclidean projection of `v` onto the probability simplex (sort-based).
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

/// Row-wise projection of a table onto the product of simplices.
Eigen::MatrixXd project_rows_to_simplex(const Eigen::MatrixXd& table);

}  // namespace lexirobust
