#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace imstab {

// Twice-differentiable test function with analytic derivatives.
struct SmoothFunction {
    std::string name;
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
};

// Monomial x_i^k in dimension d.
SmoothFunction monomial(int d, int coord, int k);

// Fixed battery spanning odd/even and bounded/unbounded behavior:
// {x_i, x_i^2, x_i^3, x_i x_j, sin(x_i), exp(-|x|^2/2)}.
std::vector<SmoothFunction> test_function_battery(int d);

}  // namespace imstab
