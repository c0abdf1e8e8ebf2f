#include "imstab/lusin.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace imstab {

namespace {

struct PairConstraint {
    int i, j;
    double c;
    double lambda = 0.0;
};

// primal value of one coordinate given its accumulated multiplier mass;
// the floor g >= 1 absorbs the nonnegativity multiplier
double primal_g(double s, double w, double p) {
    if (s <= 0.0) return 1.0;
    return std::max(1.0, std::pow(s / (p * w), 1.0 / (p - 1.0)));
}

}  // namespace

LusinWitness estimate_lusin_witness(
    const Eigen::MatrixXd& points,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& field,
    const Eigen::VectorXd& weights, double p, const LusinOptions& opts) {
    if (points.rows() != weights.size())
        throw std::invalid_argument("lusin: points/weights size mismatch");
    if (!(p >= 2.0)) throw std::invalid_argument("lusin: p must be >= 2");
    if (points.rows() > 2000)
        throw std::invalid_argument("lusin: sample too large for the O(n^2) constraint set");

    // merge coincident points (they would produce unbounded slopes)
    const long n_in = points.rows();
    std::vector<long> keep;
    std::vector<double> w_merged;
    for (long i = 0; i < n_in; ++i) {
        bool dup = false;
        for (std::size_t k = 0; k < keep.size(); ++k) {
            if ((points.row(i) - points.row(keep[k])).norm() < opts.merge_tol) {
                w_merged[k] += weights[i];
                dup = true;
                break;
            }
        }
        if (!dup) {
            keep.push_back(i);
            w_merged.push_back(weights[i]);
        }
    }
    const long n = static_cast<long>(keep.size());
    LusinWitness out;
    out.points.resize(n, points.cols());
    out.weights.resize(n);
    for (long k = 0; k < n; ++k) {
        out.points.row(k) = points.row(keep[k]);
        out.weights[k] = w_merged[k];
    }

    std::vector<Eigen::MatrixXd> f_vals(n);
    for (long k = 0; k < n; ++k) f_vals[k] = field(out.points.row(k).transpose());

    // pairwise slopes; pairs with c <= 2 are already satisfied by the floor
    std::vector<PairConstraint> cons;
    double c_max = 0.0;
    for (long i = 0; i < n; ++i)
        for (long j = i + 1; j < n; ++j) {
            double dist = (out.points.row(i) - out.points.row(j)).norm();
            double c = (f_vals[i] - f_vals[j]).norm() / dist;
            c_max = std::max(c_max, c);
            if (c > 2.0) cons.push_back({static_cast<int>(i), static_cast<int>(j), c});
        }

    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);  // sum of multipliers per point
    Eigen::VectorXd g = Eigen::VectorXd::Ones(n);

    auto refresh_g = [&](long i) { g[i] = primal_g(s[i], out.weights[i], p); };

    double kkt = 0.0;
    int sweep = 0;
    bool converged = cons.empty();
    for (; sweep < opts.max_sweeps && !converged; ++sweep) {
        double max_change = 0.0;
        for (PairConstraint& pc : cons) {
            double base_i = s[pc.i] - pc.lambda;
            double base_j = s[pc.j] - pc.lambda;
            auto gap = [&](double lam) {
                return primal_g(base_i + lam, out.weights[pc.i], p) +
                       primal_g(base_j + lam, out.weights[pc.j], p) - pc.c;
            };
            double lam_new;
            if (gap(0.0) >= 0.0) {
                lam_new = 0.0;
            } else {
                double hi = std::max(1.0, 2.0 * pc.lambda);
                int guard = 0;
                while (gap(hi) < 0.0 && guard++ < 200) hi *= 2.0;
                double lo = 0.0;
                for (int it = 0; it < 80; ++it) {
                    double mid = 0.5 * (lo + hi);
                    if (gap(mid) < 0.0)
                        lo = mid;
                    else
                        hi = mid;
                }
                lam_new = hi;
            }
            double d = lam_new - pc.lambda;
            if (d != 0.0) {
                s[pc.i] += d;
                s[pc.j] += d;
                pc.lambda = lam_new;
                refresh_g(pc.i);
                refresh_g(pc.j);
                max_change = std::max(max_change, std::abs(d));
            }
        }
        // KKT: primal feasibility and complementary slackness
        kkt = 0.0;
        for (const PairConstraint& pc : cons) {
            double slack = g[pc.i] + g[pc.j] - pc.c;
            kkt = std::max(kkt, std::max(0.0, -slack));
            kkt = std::max(kkt, std::abs(pc.lambda * slack));
        }
        if (kkt < opts.kkt_tol && max_change < 1e-12 * (1.0 + c_max)) {
            converged = true;
            break;
        }
        if (kkt < opts.kkt_tol && sweep > 2) {
            converged = true;
            break;
        }
    }

    out.g_values = g;
    out.kkt_residual = kkt;
    out.converged = converged;
    out.active_pairs = 0;
    for (const PairConstraint& pc : cons)
        if (pc.lambda > 1e-12) ++out.active_pairs;
    out.objective = 0.0;
    for (long i = 0; i < n; ++i) out.objective += out.weights[i] * std::pow(g[i], p);
    out.norm_p = std::pow(out.objective, 1.0 / p);
    return out;
}

}  // namespace imstab
