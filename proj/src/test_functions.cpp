#include "imstab/test_functions.hpp"

#include <cmath>
#include <stdexcept>

namespace imstab {

SmoothFunction monomial(int d, int coord, int k) {
    if (coord < 0 || coord >= d) throw std::invalid_argument("monomial: bad coordinate");
    SmoothFunction f;
    f.name = "x" + std::to_string(coord) + "^" + std::to_string(k);
    f.value = [coord, k](const Eigen::VectorXd& x) { return std::pow(x[coord], k); };
    f.gradient = [d, coord, k](const Eigen::VectorXd& x) {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
        g[coord] = k * std::pow(x[coord], k - 1);
        return g;
    };
    f.hessian = [d, coord, k](const Eigen::VectorXd& x) {
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
        h(coord, coord) = k * (k - 1) * (k >= 2 ? std::pow(x[coord], k - 2) : 0.0);
        return h;
    };
    return f;
}

std::vector<SmoothFunction> test_function_battery(int d) {
    std::vector<SmoothFunction> out;
    for (int i = 0; i < d; ++i) {
        out.push_back(monomial(d, i, 1));
        out.push_back(monomial(d, i, 2));
        out.push_back(monomial(d, i, 3));
    }
    for (int i = 0; i < d; ++i)
        for (int j = i + 1; j < d; ++j) {
            SmoothFunction f;
            f.name = "x" + std::to_string(i) + "*x" + std::to_string(j);
            f.value = [i, j](const Eigen::VectorXd& x) { return x[i] * x[j]; };
            f.gradient = [d, i, j](const Eigen::VectorXd& x) {
                Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
                g[i] = x[j];
                g[j] = x[i];
                return g;
            };
            f.hessian = [d, i, j](const Eigen::VectorXd&) {
                Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
                h(i, j) = 1.0;
                h(j, i) = 1.0;
                return h;
            };
            out.push_back(std::move(f));
        }
    for (int i = 0; i < d; ++i) {
        SmoothFunction f;
        f.name = "sin_x" + std::to_string(i);
        f.value = [i](const Eigen::VectorXd& x) { return std::sin(x[i]); };
        f.gradient = [d, i](const Eigen::VectorXd& x) {
            Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
            g[i] = std::cos(x[i]);
            return g;
        };
        f.hessian = [d, i](const Eigen::VectorXd& x) {
            Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
            h(i, i) = -std::sin(x[i]);
            return h;
        };
        out.push_back(std::move(f));
    }
    {
        SmoothFunction f;
        f.name = "gauss_bump";
        f.value = [](const Eigen::VectorXd& x) { return std::exp(-0.5 * x.squaredNorm()); };
        f.gradient = [](const Eigen::VectorXd& x) {
            return Eigen::VectorXd(-std::exp(-0.5 * x.squaredNorm()) * x);
        };
        f.hessian = [d](const Eigen::VectorXd& x) {
            double e = std::exp(-0.5 * x.squaredNorm());
            return Eigen::MatrixXd(e * (x * x.transpose() - Eigen::MatrixXd::Identity(d, d)));
        };
        out.push_back(std::move(f));
    }
    return out;
}

}  // namespace imstab
