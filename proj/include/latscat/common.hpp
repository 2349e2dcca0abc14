#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace latscat {

using Complex = std::complex<double>;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using CVecX = Eigen::VectorXcd;
using CMatX = Eigen::MatrixXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

}  // namespace latscat
