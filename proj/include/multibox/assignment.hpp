#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

namespace multibox {

/// Minimum-cost assignment of every row to a distinct column of a
/// rows <= cols cost matrix (shortest augmenting path with potentials,
/// O(rows^2 * cols)). Returns the column chosen for each row.
///
/// Columns are scanned in index order and only strictly better candidates
/// replace the incumbent, so ties resolve towards the lowest indices.
std::vector<int> min_cost_assignment(const Eigen::MatrixXd& cost);

}  // namespace multibox
