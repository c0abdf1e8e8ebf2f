#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "imstab/measures.hpp"
#include "imstab/sde.hpp"

namespace imstab {

// Ground costs as functions of the squared distance.
struct TransportCost {
    enum class Kind { quadratic, truncated_quadratic, truncated_first, logarithmic };
    Kind kind = Kind::quadratic;
    double R = 0.0;
    double delta = 0.0;

    static TransportCost w2();
    static TransportCost w2_truncated(double R);
    static TransportCost w1_truncated(double R);
    static TransportCost log_cost(double delta);

    double of_sqdist(double d2) const;
};

struct CouplingPlan {
    struct Entry {
        int i, j;
        double mass;
    };
    std::vector<Entry> entries;
    double cost_value = 0.0;
    double marginal_error = 0.0;  // max deviation of plan marginals from the inputs
    Eigen::Index n = 0, m = 0;

    Eigen::MatrixXd dense() const;
};

// Exact optimal transport between small empirical measures (n*m <= 1e7).
CouplingPlan solve_ot(const EmpiricalMeasure& A, const EmpiricalMeasure& B,
                      const TransportCost& cost);

// Quantile coupling on the line: exact W2 for sorted uniform clouds of equal
// size; the fast path for convergence diagnostics.
double w2_sorted_1d(const EmpiricalMeasure& A, const EmpiricalMeasure& B);

// Entropy-regularized W2 point estimate (log-domain fixed-point iteration)
// for clouds beyond the exact-solver scale. Never used in inequality checks;
// the regularization biases the value by O(reg * log n).
double w2_entropic(const EmpiricalMeasure& A, const EmpiricalMeasure& B, double reg = 0.01,
                   int max_iter = 2000);

// Closed-form W2 between Gaussians.
double w2_gaussian_oracle(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                          const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2);

struct SlackReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double slack = 0.0;   // rhs - lhs
    double log_cost = 0.0;  // the D_delta value entering the bound
};

// Interpolation bound: truncated quadratic cost against the logarithmic one,
// with a flag for the first-order variant.
SlackReport check_interpolation(const EmpiricalMeasure& A, const EmpiricalMeasure& B, double R,
                                double delta, double eps, bool first_order = false);

// Optimized-epsilon corollary; requires 0 < delta < R.
SlackReport check_eps_optimized(const EmpiricalMeasure& A, const EmpiricalMeasure& B, double R,
                                double delta);

struct TruncationReport {
    double w2_sq = 0.0;
    double truncated_sq = 0.0;  // W2_{2,R}^2 at R = C M ln(max(M,2))
    double slack = 0.0;
    double R = 0.0;
    double implied_C = 0.0;  // smallest constant that makes the bound hold here
    bool constant_too_small = false;
};

TruncationReport check_truncation_lemma(const EmpiricalMeasure& A, const EmpiricalMeasure& B,
                                        double M, double C);

// Mean of ln(1 + |X_t - Y_t|^2 / delta^2) over the coupled ensemble, with
// standard error; upper-bounds the logarithmic transport cost between the
// marginals.
std::pair<double, double> coupled_log_cost(const TrajectoryEnsemble& e, double t, double delta);

struct FiniteTimeScenario {
    DiffusionPair pair;   // x-process invariant mu, y-process invariant nu
    MeasureSpec mu, nu;
    double p = p_infinity;      // exponent in the relative-density norm
    double g_norm_2q = 0.0;     // Lusin witness norm of the x-process fields
    long n_traj = 10000;
    double dt = 1e-3;
    std::uint64_t seed = 1;
};

struct FiniteTimeReport {
    double lhs = 0.0, lhs_se = 0.0;
    double rhs = 0.0;
    double slack = 0.0;
    double density_norm = 0.0, drift_l1 = 0.0, diff_l2 = 0.0;
};

// Coupled processes started from X0 = Y0 ~ nu; compares the coupled log-cost
// at time t against 2t (10 * density_norm * g^2 + drift_l1/delta + 2 diff_l2^2/delta^2).
FiniteTimeReport check_finite_time_bound(const FiniteTimeScenario& sc, double t, double delta);

}  // namespace imstab
