#pragma once

#include <Eigen/Dense>

namespace centile {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

}  // namespace centile
