#include "imstab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "imstab/network_simplex.hpp"
#include "imstab/parallel.hpp"

namespace imstab {

TransportCost TransportCost::w2() { return TransportCost{Kind::quadratic, 0.0, 0.0}; }

TransportCost TransportCost::w2_truncated(double R) {
    if (!(R > 0.0)) throw std::invalid_argument("truncated cost requires R > 0");
    return TransportCost{Kind::truncated_quadratic, R, 0.0};
}

TransportCost TransportCost::w1_truncated(double R) {
    if (!(R > 0.0)) throw std::invalid_argument("truncated cost requires R > 0");
    return TransportCost{Kind::truncated_first, R, 0.0};
}

TransportCost TransportCost::log_cost(double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("logarithmic cost requires delta > 0");
    return TransportCost{Kind::logarithmic, 0.0, delta};
}

double TransportCost::of_sqdist(double d2) const {
    switch (kind) {
        case Kind::quadratic: return d2;
        case Kind::truncated_quadratic: return std::min(d2, R);
        case Kind::truncated_first: return std::min(std::sqrt(d2), R);
        case Kind::logarithmic: return std::log1p(d2 / (delta * delta));
    }
    return 0.0;
}

Eigen::MatrixXd CouplingPlan::dense() const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, m);
    for (const Entry& e : entries) out(e.i, e.j) += e.mass;
    return out;
}

CouplingPlan solve_ot(const EmpiricalMeasure& A, const EmpiricalMeasure& B,
                      const TransportCost& cost) {
    A.validate();
    B.validate();
    if (A.dim() != B.dim()) throw std::invalid_argument("solve_ot: dimension mismatch");
    const long n = A.size(), m = B.size();
    if (n * m > 10'000'000L)
        throw std::invalid_argument(
            "solve_ot: n*m exceeds the exact-solver scale (1e7); subsample the inputs");

    Eigen::MatrixXd C(n, m);
    parallel_for(n, [&](long i) {
        for (long j = 0; j < m; ++j) {
            double d2 = (A.points.row(i) - B.points.row(j)).squaredNorm();
            C(i, j) = cost.of_sqdist(d2);
        }
    });

    TransportSimplex simplex;
    TransportSimplex::Status st = simplex.solve(A.weights, B.weights, C);
    if (st == TransportSimplex::Status::infeasible)
        throw std::runtime_error("solve_ot: infeasible marginals");
    if (st == TransportSimplex::Status::pivot_limit)
        throw std::runtime_error("solve_ot: pivot limit reached");

    CouplingPlan plan;
    plan.n = n;
    plan.m = m;
    Eigen::VectorXd row_sum = Eigen::VectorXd::Zero(n), col_sum = Eigen::VectorXd::Zero(m);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < m; ++j) {
            double f = simplex.flow(static_cast<int>(i), static_cast<int>(j));
            if (f > 0.0) {
                plan.entries.push_back({static_cast<int>(i), static_cast<int>(j), f});
                row_sum[i] += f;
                col_sum[j] += f;
            }
        }
    plan.cost_value = simplex.total_cost();
    plan.marginal_error = std::max((row_sum - A.weights).cwiseAbs().maxCoeff(),
                                   (col_sum - B.weights).cwiseAbs().maxCoeff());
    return plan;
}

double w2_sorted_1d(const EmpiricalMeasure& A, const EmpiricalMeasure& B) {
    if (A.dim() != 1 || B.dim() != 1) throw std::invalid_argument("w2_sorted_1d: 1-d only");
    if (A.size() != B.size())
        throw std::invalid_argument("w2_sorted_1d: equal sample sizes required");
    std::vector<double> a(A.size()), b(B.size());
    for (Eigen::Index i = 0; i < A.size(); ++i) a[i] = A.points(i, 0);
    for (Eigen::Index i = 0; i < B.size(); ++i) b[i] = B.points(i, 0);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s / double(a.size()));
}

double w2_entropic(const EmpiricalMeasure& A, const EmpiricalMeasure& B, double reg,
                   int max_iter) {
    A.validate();
    B.validate();
    if (A.dim() != B.dim()) throw std::invalid_argument("w2_entropic: dimension mismatch");
    if (!(reg > 0.0)) throw std::invalid_argument("w2_entropic: regularization must be positive");
    const long n = A.size(), m = B.size();
    Eigen::MatrixXd C(n, m);
    parallel_for(n, [&](long i) {
        for (long j = 0; j < m; ++j)
            C(i, j) = (A.points.row(i) - B.points.row(j)).squaredNorm();
    });
    Eigen::VectorXd log_a = A.weights.array().max(1e-300).log();
    Eigen::VectorXd log_b = B.weights.array().max(1e-300).log();
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n), g = Eigen::VectorXd::Zero(m);
    auto soft_min_rows = [&](const Eigen::VectorXd& pot, Eigen::VectorXd& out, bool over_cols) {
        // out_i = -reg * log sum_j exp((-C_ij + pot_j)/reg + log_w_j)
        long rows = over_cols ? n : m;
        long cols = over_cols ? m : n;
        const Eigen::VectorXd& lw = over_cols ? log_b : log_a;
        out.resize(rows);
        for (long i = 0; i < rows; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (long j = 0; j < cols; ++j) {
                double v = (-(over_cols ? C(i, j) : C(j, i)) + pot[j]) / reg + lw[j];
                best = std::max(best, v);
            }
            double acc = 0.0;
            for (long j = 0; j < cols; ++j) {
                double v = (-(over_cols ? C(i, j) : C(j, i)) + pot[j]) / reg + lw[j];
                acc += std::exp(v - best);
            }
            out[i] = -reg * (best + std::log(acc));
        }
    };
    Eigen::VectorXd f_new(n), g_new(m);
    for (int it = 0; it < max_iter; ++it) {
        soft_min_rows(g, f_new, true);
        soft_min_rows(f_new, g_new, false);
        double delta = (f_new - f).cwiseAbs().maxCoeff() + (g_new - g).cwiseAbs().maxCoeff();
        f = f_new;
        g = g_new;
        if (delta < 1e-10 * reg) break;
    }
    // transport cost under the regularized plan
    double cost = 0.0;
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < m; ++j) {
            double lp = (f[i] + g[j] - C(i, j)) / reg + log_a[i] + log_b[j];
            cost += std::exp(lp) * C(i, j);
        }
    return std::sqrt(std::max(cost, 0.0));
}

double w2_gaussian_oracle(const Eigen::VectorXd& mean1, const Eigen::MatrixXd& cov1,
                          const Eigen::VectorXd& mean2, const Eigen::MatrixXd& cov2) {
    Eigen::MatrixXd s1 = spd_sqrt(cov1);
    Eigen::MatrixXd mid = spd_sqrt(s1 * cov2 * s1);
    double trace_term = cov1.trace() + cov2.trace() - 2.0 * mid.trace();
    double w2sq = (mean1 - mean2).squaredNorm() + std::max(trace_term, 0.0);
    return std::sqrt(w2sq);
}

SlackReport check_interpolation(const EmpiricalMeasure& A, const EmpiricalMeasure& B, double R,
                                double delta, double eps, bool first_order) {
    if (!(R > 0.0 && delta > 0.0 && eps > 0.0))
        throw std::invalid_argument("check_interpolation: R, delta, eps must be positive");
    SlackReport rep;
    TransportCost trunc =
        first_order ? TransportCost::w1_truncated(R) : TransportCost::w2_truncated(R);
    rep.lhs = solve_ot(A, B, trunc).cost_value;
    double D = solve_ot(A, B, TransportCost::log_cost(delta)).cost_value;
    rep.log_cost = D;
    if (first_order)
        rep.rhs = delta * std::exp(D / eps) + R * eps +
                  R * D / std::log1p(R / (delta * delta));
    else
        rep.rhs = delta * delta * std::exp(D / eps) + R * eps +
                  R * D / std::log1p(R * R / (delta * delta));
    rep.slack = rep.rhs - rep.lhs;
    return rep;
}

SlackReport check_eps_optimized(const EmpiricalMeasure& A, const EmpiricalMeasure& B, double R,
                                double delta) {
    if (!(delta > 0.0) || !(delta < R))
        throw std::invalid_argument("check_eps_optimized: requires 0 < delta < R");
    SlackReport rep;
    rep.lhs = solve_ot(A, B, TransportCost::w2_truncated(R)).cost_value;
    double D = solve_ot(A, B, TransportCost::log_cost(delta)).cost_value;
    rep.log_cost = D;
    rep.rhs = 2.0 * R * (delta + D / std::log1p(R / delta));
    rep.slack = rep.rhs - rep.lhs;
    return rep;
}

TruncationReport check_truncation_lemma(const EmpiricalMeasure& A, const EmpiricalMeasure& B,
                                        double M, double C) {
    TruncationReport rep;
    rep.w2_sq = solve_ot(A, B, TransportCost::w2()).cost_value;
    rep.R = C * M * std::log(std::max(M, 2.0));
    rep.truncated_sq =
        rep.R > 0.0 ? solve_ot(A, B, TransportCost::w2_truncated(rep.R)).cost_value : 0.0;
    rep.slack = 2.0 * rep.truncated_sq - rep.w2_sq;
    rep.constant_too_small = rep.slack < 0.0;

    // smallest C for which 2 W~^2_{2, C M ln M} >= W2^2 on this instance
    if (rep.w2_sq <= 0.0 || M <= 0.0) {
        rep.implied_C = 0.0;
        return rep;
    }
    double scale = M * std::log(std::max(M, 2.0));
    double lo = 0.0, hi = std::max(1.0, C);
    auto holds = [&](double cc) {
        double R = cc * scale;
        if (R <= 0.0) return false;
        double t = solve_ot(A, B, TransportCost::w2_truncated(R)).cost_value;
        return 2.0 * t >= rep.w2_sq;
    };
    while (!holds(hi)) {
        hi *= 2.0;
        if (hi > 1e9) {
            rep.implied_C = std::numeric_limits<double>::infinity();
            return rep;
        }
    }
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        if (holds(mid))
            hi = mid;
        else
            lo = mid;
    }
    rep.implied_C = hi;
    return rep;
}

std::pair<double, double> coupled_log_cost(const TrajectoryEnsemble& e, double t, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("coupled_log_cost: delta must be positive");
    bool exact = false;
    std::size_t idx = e.time_index(t, &exact);
    double d2 = delta * delta;
    double mean = 0.0;
    std::vector<double> vals(e.n_traj);
    for (long k = 0; k < e.n_traj; ++k) {
        double z2 = 0.0;
        for (int c = 0; c < e.dimension; ++c) {
            double z = e.x_at(k, idx, c) - e.y_at(k, idx, c);
            z2 += z * z;
        }
        vals[k] = std::log1p(z2 / d2);
        mean += vals[k];
    }
    mean /= double(e.n_traj);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= std::max<long>(1, e.n_traj - 1);
    return {mean, std::sqrt(var / double(e.n_traj))};
}

FiniteTimeReport check_finite_time_bound(const FiniteTimeScenario& sc, double t, double delta) {
    if (!(sc.g_norm_2q > 0.0))
        throw std::invalid_argument("check_finite_time_bound: witness norm missing (must be > 0)");
    if (!(delta > 0.0))
        throw std::invalid_argument("check_finite_time_bound: delta must be positive");

    FiniteTimeReport rep;
    rep.density_norm = relative_density_norm(sc.nu, sc.mu, sc.p);
    if (!std::isfinite(rep.density_norm))
        throw std::runtime_error("check_finite_time_bound: relative density norm is infinite");
    FieldDiscrepancy fd = field_discrepancy(sc.pair, sc.nu, sc.n_traj, sc.seed + 1);
    rep.drift_l1 = fd.drift_l1;
    rep.diff_l2 = fd.diff_l2;

    TrajectoryEnsemble ens =
        simulate_coupled(sc.pair, InitialCondition::from_measure(sc.nu), std::max(t, sc.dt),
                         sc.dt, sc.n_traj, sc.seed, {t});
    auto [lhs, se] = coupled_log_cost(ens, t, delta);
    rep.lhs = lhs;
    rep.lhs_se = se;
    rep.rhs = 2.0 * t *
              (10.0 * rep.density_norm * sc.g_norm_2q * sc.g_norm_2q + rep.drift_l1 / delta +
               2.0 * rep.diff_l2 * rep.diff_l2 / (delta * delta));
    rep.slack = rep.rhs - rep.lhs;
    return rep;
}

}  // namespace imstab
