#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace p3ls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Seed = std::uint64_t;

}  // namespace p3ls
