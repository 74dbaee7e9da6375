#pragma once

#include <Eigen/Dense>
#include <limits>

namespace bilevel {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace bilevel
