#include <cmath>
#include <stdexcept>

#include "imstab/sde.hpp"
#include "imstab/transport.hpp"

namespace imstab {

namespace {

// W2 point estimate between two uniform clouds: quantile coupling in 1-d,
// the exact solver up to n = 2000, the entropic estimate beyond.
double w2_between(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    if (a.dim() == 1 && a.size() == b.size()) return w2_sorted_1d(a, b);
    if (a.size() <= 2000 && b.size() <= 2000)
        return std::sqrt(solve_ot(a, b, TransportCost::w2()).cost_value);
    long cap = 3000;
    auto shrink = [&](const EmpiricalMeasure& m) {
        if (m.size() <= cap) return m;
        Eigen::MatrixXd pts(cap, m.dim());
        long stride = m.size() / cap;
        for (long i = 0; i < cap; ++i) pts.row(i) = m.points.row(i * stride);
        return EmpiricalMeasure::uniform(std::move(pts));
    };
    return w2_entropic(shrink(a), shrink(b), 0.02, 200);
}

}  // namespace

ConvergenceProfile estimate_convergence(const DiffusionHalf& half, const MeasureSpec& target,
                                        const Eigen::VectorXd& x0,
                                        const std::vector<double>& times, long n_traj, double dt,
                                        std::uint64_t seed) {
    if (times.size() < 2)
        throw std::invalid_argument("estimate_convergence: need at least two observation times "
                                    "(fit is underdetermined)");
    ConvergenceProfile prof;
    double t_max = 0.0;
    for (double t : times) t_max = std::max(t_max, t);

    DiffusionPair pair;
    pair.dimension = static_cast<int>(x0.size());
    pair.x = half;
    pair.y = half;
    TrajectoryEnsemble ens = simulate_coupled(pair, InitialCondition::at_point(x0),
                                              std::max(t_max, dt), dt, n_traj, seed, times);

    // sampling noise floor: W2 between two independent equilibrium samples
    EmpiricalMeasure ref1 = sample(target, static_cast<int>(n_traj), seed, 1001);
    EmpiricalMeasure ref2 = sample(target, static_cast<int>(n_traj), seed, 1002);
    prof.noise_floor = w2_between(ref1, ref2);

    // distance of the initial point mass to the target
    prof.w2_initial = std::sqrt(x0.squaredNorm() + second_moment(target));

    for (double t : times) {
        EmpiricalMeasure marg = marginal_at(ens, t, WhichProcess::x);
        EmpiricalMeasure ref = sample(target, static_cast<int>(n_traj), seed, 2000 + prof.times.size());
        double w2 = w2_between(marg, ref);
        prof.times.push_back(t);
        prof.w2_estimates.push_back(w2);
        prof.in_fit_window.push_back(w2 > 3.0 * prof.noise_floor);
    }

    // least squares on ln w2(t) = ln(C_H * W2(mu0, mu)) - kappa t
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int nfit = 0;
    for (std::size_t i = 0; i < prof.times.size(); ++i) {
        if (!prof.in_fit_window[i]) continue;
        double x = prof.times[i], y = std::log(prof.w2_estimates[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++nfit;
    }
    if (nfit < 2) {
        prof.fit_ok = false;
        return prof;
    }
    double denom = nfit * sxx - sx * sx;
    if (std::abs(denom) < 1e-14) {
        prof.fit_ok = false;
        return prof;
    }
    double slope = (nfit * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / nfit;
    prof.fitted_kappa = -slope;
    prof.fitted_CH = std::exp(intercept) / prof.w2_initial;
    double res = 0.0;
    for (std::size_t i = 0; i < prof.times.size(); ++i) {
        if (!prof.in_fit_window[i]) continue;
        double pred = intercept + slope * prof.times[i];
        double err = std::log(prof.w2_estimates[i]) - pred;
        res += err * err;
    }
    prof.fit_residual = std::sqrt(res / nfit);
    prof.fit_ok = true;
    return prof;
}

}  // namespace imstab
