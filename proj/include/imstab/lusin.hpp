#pragma once

#include <Eigen/Dense>
#include <functional>

namespace imstab {

// Empirical witness for the two-point Lipschitz-like property of a field F:
// the smallest (in weighted L^p) g >= 1 with g_i + g_j >= |F_i - F_j|/|x_i - x_j|
// over all sample pairs. Convex program solved by dual coordinate ascent.
struct LusinWitness {
    Eigen::MatrixXd points;   // after merging coincident samples
    Eigen::VectorXd weights;
    Eigen::VectorXd g_values;
    double norm_p = 0.0;      // (sum w_i g_i^p)^(1/p)
    double objective = 0.0;   // sum w_i g_i^p
    double kkt_residual = 0.0;
    long active_pairs = 0;
    bool converged = false;
};

struct LusinOptions {
    double kkt_tol = 1e-9;
    int max_sweeps = 20000;
    double merge_tol = 1e-12;
};

// field returns any matrix (a column for vector fields); the pairwise slopes
// use its Frobenius norm. p must be >= 2 (2 and 4 are the exponents the
// bound evaluations need).
LusinWitness estimate_lusin_witness(
    const Eigen::MatrixXd& points,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& weights, double p, const LusinOptions& opts = {});

}  // namespace imstab
