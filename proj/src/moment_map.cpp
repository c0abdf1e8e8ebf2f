#include "imstab/moment_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "imstab/interp.hpp"

namespace imstab {

namespace {

// Hand off to the conditioned tail pass once the outgoing tail mass drops
// below e^{-7}: forward integration amplifies boundary error by e^S, while
// the tail quadrature form is cancellation-free, so an early handoff keeps
// the seam mismatch small.
constexpr double tail_switch_S = 7.0;
constexpr double quantile_spacing = 0.005;  // dense quantile table; its O(h^4)
                                            // error is amplified e^S-fold by
                                            // the forward pass
constexpr double tail_spacing = 0.01;       // continuation cells (refined exactly)

// 15-point Gauss-Legendre (same rule as the density tables)
constexpr double glx[15] = {
    -0.987992518020485428489565718587, -0.937273392400705904307758947710,
    -0.848206583410427216200648320774, -0.724417731360170047416186054614,
    -0.570972172608538847537226737254, -0.394151347077563369897207370981,
    -0.201194093997434522300628303395, 0.0,
    0.201194093997434522300628303395,  0.394151347077563369897207370981,
    0.570972172608538847537226737254,  0.724417731360170047416186054614,
    0.848206583410427216200648320774,  0.937273392400705904307758947710,
    0.987992518020485428489565718587};
constexpr double glw[15] = {
    0.030753241996117268354628393577, 0.070366047488108124709267416451,
    0.107159220467171935011869546686, 0.139570677926154314447804794511,
    0.166269205816993933553200860481, 0.186161000015562211026800561866,
    0.198431485327111576456118326444, 0.202578241925561272880620199968,
    0.198431485327111576456118326444, 0.186161000015562211026800561866,
    0.166269205816993933553200860481, 0.139570677926154314447804794511,
    0.107159220467171935011869546686, 0.070366047488108124709267416451,
    0.030753241996117268354628393577};

// Dormand-Prince 5(4) tableau (autonomous system, node fractions unused)
constexpr double dpa[7][6] = {
    {},
    {1.0 / 5},
    {3.0 / 40, 9.0 / 40},
    {44.0 / 45, -56.0 / 15, 32.0 / 9},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
    {35.0 / 384, 0.0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
constexpr double dpb5[7] = {35.0 / 384,      0.0,  500.0 / 1113, 125.0 / 192,
                            -2187.0 / 6784, 11.0 / 84, 0.0};
constexpr double dpb4[7] = {5179.0 / 57600,  0.0,        7571.0 / 16695, 393.0 / 640,
                            -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

struct State {
    double phi, S;
};

// One half-line of the shooting problem in mirrored coordinates xi >= 0:
//   dphi/dxi = q(S),  dS/dxi = exp(S - phi),
// where S is the log of the outgoing tail mass of the source and q maps it
// to the (mirrored, nonnegative past the median) target quantile.
class HalfLineSolver {
public:
    HalfLineSolver(const DensityTable1d& table, bool upper, double T, double S_cap,
                   double ode_tol)
        : table_(table), upper_(upper), T_(T), S_cap_(S_cap), tol_(ode_tol) {
        sigma_min_ = 5e-3;
        sigma_max_ = S_cap + 52.0;
        build_quantile_dense();
    }

    double quantile(double S) const {
        if (S < sigma_min_ || S > sigma_max_) return std::numeric_limits<double>::quiet_NaN();
        return qdense_.eval(S);
    }

    // true when the density is too heavy: the tail mass collapses before xi = T
    bool classify_heavy(double c, double S0) const {
        State y{c, S0};
        double xi = 0.0, h = 1e-3;
        for (long step = 0; step < 500000 && xi < T_; ++step) {
            h = std::min(h, T_ - xi);
            double err;
            State yn = rk_step(y, h, err);
            if (err > 1.0 || !std::isfinite(yn.S)) {
                h *= std::max(0.2, 0.9 * std::pow(std::max(err, 1e-30), -0.2));
                if (h < 1e-15) return true;  // stalled at a singularity: collapse
                continue;
            }
            xi += h;
            y = yn;
            h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-30), -0.2)));
            if (y.S > S_cap_) return true;
        }
        return false;
    }

    struct HalfResult {
        std::vector<double> phi, q, phi_second, tail;  // per node, xi increasing
    };

    // Node-exact forward pass; past S = tail_switch_S the remaining nodes come
    // from the conditioned quadrature continuation. `accurate` controls the
    // in-cell treatment of the tail integral (exact refinement vs linear),
    // only the cheap variant is used inside outer search loops.
    HalfResult final_pass(double c, double S0, const std::vector<double>& nodes,
                          bool accurate = true) const {
        HalfResult res;
        std::size_t n = nodes.size();
        res.phi.assign(n, 0.0);
        res.q.assign(n, 0.0);
        res.phi_second.assign(n, 0.0);
        res.tail.assign(n, 0.0);

        State y{c, S0};
        double xi = 0.0, h = 1e-4;
        std::size_t handoff = n;
        for (std::size_t j = 0; j < n; ++j) {
            double target_xi = nodes[j];
            while (xi < target_xi) {
                double hs = std::min(h, target_xi - xi);
                double err;
                State yn = rk_step(y, hs, err);
                if (err > 1.0 || !std::isfinite(yn.S)) {
                    h = hs * std::max(0.2, 0.9 * std::pow(std::max(err, 1e-30), -0.2));
                    if (h < 1e-15)
                        throw std::runtime_error("moment map: forward pass hit a singularity");
                    continue;
                }
                xi += hs;
                y = yn;
                if (hs == h || err > 0.5)
                    h = hs * std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-30), -0.2)));
            }
            store_node(res, j, y);
            if (y.S >= tail_switch_S && j + 1 < n) {
                handoff = j;
                break;
            }
        }
        if (handoff < n) tail_continuation(res, nodes, handoff, accurate);
        return res;
    }

    double sigma_max() const { return sigma_max_; }

private:
    void build_quantile_dense() {
        int count = static_cast<int>(std::ceil((sigma_max_ - sigma_min_) / quantile_spacing)) + 1;
        std::vector<double> s(count), x(count), d(count);
        for (int k = 0; k < count; ++k) {
            double sig = sigma_min_ + quantile_spacing * k;
            s[k] = sig;
            double q = upper_ ? table_.quantile_log_upper(-sig) : -table_.quantile_log_lower(-sig);
            x[k] = q;
            double rho = table_.density(upper_ ? q : -q);
            d[k] = std::exp(-sig) / std::max(rho, 1e-300);
        }
        qdense_ = MonotoneCubic::with_derivatives(std::move(s), std::move(x), std::move(d));
    }

    void derivs(const State& y, double& dphi, double& dS) const {
        dphi = quantile(y.S);
        dS = std::exp(y.S - y.phi);
    }

    State rk_step(const State& y, double h, double& err) const {
        double kphi[7], kS[7];
        State stage = y;
        derivs(stage, kphi[0], kS[0]);
        for (int s = 1; s < 7; ++s) {
            stage.phi = y.phi;
            stage.S = y.S;
            for (int j = 0; j < s; ++j) {
                stage.phi += h * dpa[s][j] * kphi[j];
                stage.S += h * dpa[s][j] * kS[j];
            }
            derivs(stage, kphi[s], kS[s]);
        }
        State out = y;
        double e_phi = 0.0, e_S = 0.0;
        for (int s = 0; s < 7; ++s) {
            out.phi += h * dpb5[s] * kphi[s];
            out.S += h * dpb5[s] * kS[s];
            e_phi += h * (dpb5[s] - dpb4[s]) * kphi[s];
            e_S += h * (dpb5[s] - dpb4[s]) * kS[s];
        }
        double sc_phi = tol_ + tol_ * std::abs(out.phi);
        double sc_S = tol_ + tol_ * std::abs(out.S);
        err = std::max(std::abs(e_phi) / sc_phi, std::abs(e_S) / sc_S);
        if (!std::isfinite(out.phi) || !std::isfinite(out.S)) err = 2.0;
        return out;
    }

    void store_node(HalfResult& res, std::size_t j, const State& y) const {
        res.phi[j] = y.phi;
        res.q[j] = quantile(y.S);
        double rho = table_.density(upper_ ? res.q[j] : -res.q[j]);
        res.phi_second[j] = std::exp(-y.phi) / std::max(rho, 1e-300);
        res.tail[j] = std::exp(-y.S);
    }

    // integral over one log-tail cell of q(s) e^{-s}
    double cell_mass(double lo, double hi) const {
        double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
        double acc = 0.0;
        for (int i = 0; i < 15; ++i) {
            double s = mid + half * glx[i];
            acc += glw[i] * half * quantile(s) * std::exp(-s);
        }
        return acc;
    }

    // From the handoff node onward the density-at-tail w(S) is the plain tail
    // integral int_S^inf q(s) e^{-s} ds (no cancellation), and the node
    // positions follow from dx/dS = e^{-S} / w(S).
    void tail_continuation(HalfResult& res, const std::vector<double>& nodes,
                           std::size_t handoff, bool accurate) const {
        double S_a = -std::log(res.tail[handoff]);
        double xi_a = nodes[handoff];
        double S_top = sigma_max_ - 1.0;
        int cells = static_cast<int>(std::ceil((S_top - S_a) / tail_spacing));
        std::vector<double> Sg(cells + 1), w(cells + 1), xg(cells + 1);
        for (int k = 0; k <= cells; ++k) Sg[k] = S_a + (S_top - S_a) * k / cells;
        w[cells] = 0.0;
        for (int k = cells - 1; k >= 0; --k) w[k] = w[k + 1] + cell_mass(Sg[k], Sg[k + 1]);

        // w inside cell k: exact partial-cell refinement, or the linear
        // shortcut for search loops (relative error ~1e-5)
        auto w_in = [&](int k, double s) {
            if (accurate) return w[k + 1] + cell_mass(s, Sg[k + 1]);
            double t = (s - Sg[k]) / (Sg[k + 1] - Sg[k]);
            return w[k] * (1.0 - t) + w[k + 1] * t;
        };
        auto x_segment = [&](int k, double lo, double hi) {
            double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
            double acc = 0.0;
            for (int i = 0; i < 15; ++i) {
                double s = mid + half * glx[i];
                acc += glw[i] * half * std::exp(-s) / std::max(w_in(k, s), 1e-300);
            }
            return acc;
        };
        xg[0] = xi_a;
        for (int k = 0; k < cells; ++k) {
            xg[k + 1] = xg[k] + x_segment(k, Sg[k], Sg[k + 1]);
            if (xg[k + 1] > T_ * 1.05 && k + 2 <= cells) {
                cells = k + 1;
                Sg.resize(cells + 1);
                w.resize(cells + 1);
                xg.resize(cells + 1);
                break;
            }
        }
        if (xg[cells] < nodes.back())
            throw std::runtime_error("moment map: tail continuation did not reach the grid end");

        for (std::size_t j = handoff + 1; j < nodes.size(); ++j) {
            double xj = nodes[j];
            int k = static_cast<int>(std::upper_bound(xg.begin(), xg.end(), xj) - xg.begin()) - 1;
            k = std::clamp(k, 0, cells - 1);
            // Newton in S within the cell
            double s = Sg[k] + (Sg[k + 1] - Sg[k]) * std::clamp((xj - xg[k]) /
                                    std::max(xg[k + 1] - xg[k], 1e-300), 0.0, 1.0);
            for (int it = 0; it < 40; ++it) {
                double g = xg[k] + x_segment(k, Sg[k], s) - xj;
                double dg = std::exp(-s) / std::max(w_in(k, s), 1e-300);
                double sn = s - g / dg;
                sn = std::clamp(sn, Sg[k], Sg[k + 1]);
                if (std::abs(sn - s) < 1e-14 * (1.0 + std::abs(s))) {
                    s = sn;
                    break;
                }
                s = sn;
            }
            double wj = w[k + 1] + cell_mass(s, Sg[k + 1]);
            res.phi[j] = -std::log(std::max(wj, 1e-300));
            res.q[j] = quantile(s);
            double rho = table_.density(upper_ ? res.q[j] : -res.q[j]);
            res.phi_second[j] = wj / std::max(rho, 1e-300);
            res.tail[j] = std::exp(-s);
        }
    }

    const DensityTable1d& table_;
    bool upper_;
    double T_, S_cap_, tol_;
    double sigma_min_ = 0.0, sigma_max_ = 0.0;
    MonotoneCubic qdense_;
};

bool looks_symmetric(const MeasureSpec& target) {
    Eigen::VectorXd v(1);
    for (double x : {0.37, 1.1, 2.6, 4.9}) {
        v[0] = x;
        double a = target.log_density(v);
        v[0] = -x;
        double b = target.log_density(v);
        if (std::abs(a - b) > 1e-11 * (1.0 + std::abs(a))) return false;
    }
    return true;
}

double estimate_alpha(const MeasureSpec& target, const DensityTable1d& table) {
    if (target.convexity_alpha) return *target.convexity_alpha;
    if (!target.log_density_hessian) return 0.25;
    double vpp_min = std::numeric_limits<double>::infinity();
    Eigen::VectorXd v(1);
    for (int i = 0; i <= 256; ++i) {
        v[0] = table.x_lo() + (table.x_hi() - table.x_lo()) * i / 256.0;
        double vpp = -target.log_density_hessian(v)(0, 0);
        if (!(vpp > 0.0))
            throw std::invalid_argument("moment map: target not log-concave on grid");
        vpp_min = std::min(vpp_min, vpp);
    }
    return std::min(vpp_min, 1.0);
}

double bisect_phi0(const HalfLineSolver& solver, double S0, double c_guess,
                   int iters = 80) {
    double lo = c_guess, hi = c_guess;
    int widen = 0;
    while (!solver.classify_heavy(lo, S0)) {
        lo -= 1.5;
        if (++widen > 40)
            throw std::runtime_error("moment map: bisection bracket not found (low side)");
    }
    widen = 0;
    while (solver.classify_heavy(hi, S0)) {
        hi += 1.5;
        if (++widen > 40)
            throw std::runtime_error("moment map: bisection bracket not found (high side)");
    }
    for (int it = 0; it < iters; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (solver.classify_heavy(mid, S0))
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

MomentMap1D solve_moment_map_1d(const MeasureSpec& target, const MomentMapParams& params,
                                double tol) {
    if (target.dimension != 1)
        throw std::invalid_argument("moment map: target must be one-dimensional");
    if (params.nodes < 33 || params.nodes % 2 == 0)
        throw std::invalid_argument("moment map: node count must be odd and at least 33");

    // preliminary table for scale and centering checks
    auto log_density_scalar = [ld = target.log_density](double x) {
        Eigen::VectorXd v(1);
        v[0] = x;
        return ld(v);
    };
    DensityTable1d prelim = DensityTable1d::auto_range(log_density_scalar);
    double sigma_t = std::sqrt(prelim.second_moment());
    if (std::abs(prelim.mean()) > 1e-8 * std::max(1.0, sigma_t))
        throw std::invalid_argument("moment map: target is not centered");

    const double T = params.half_width_sigmas * sigma_t;
    double alpha_hat = estimate_alpha(target, prelim);
    double A = 0.5 * prelim.abs_moment(1.0);
    double c_guess = -std::log(std::max(A, 1e-12));
    double S_cap = std::abs(c_guess) + 3.0 + T * T / (2.0 * alpha_hat) +
                   std::log(T / alpha_hat + 10.0) + 10.0;

    // target table wide enough to resolve quantiles at the deepest tail used
    auto table = std::make_shared<DensityTable1d>(
        DensityTable1d::auto_range(log_density_scalar, S_cap + 56.0, 8192));

    bool symmetric = looks_symmetric(target);
    const int n = params.nodes;
    const int center = (n - 1) / 2;
    Eigen::VectorXd grid(n);
    for (int i = 0; i < n; ++i) grid[i] = -T + 2.0 * T * i / (n - 1);
    grid[center] = 0.0;
    std::vector<double> right_nodes(center + 1);
    for (int j = 0; j <= center; ++j) right_nodes[j] = grid[center + j];

    MomentMap1D map;
    map.grid = grid;
    map.phi.resize(n);
    map.phi_prime.resize(n);
    map.phi_second.resize(n);
    map.source_cdf.resize(n);
    map.upper_tail.resize(n);
    map.target = target;
    map.target_table = table;

    HalfLineSolver right(*table, true, T, S_cap, tol > 0 ? tol : params.ode_tol);

    if (symmetric) {
        const double S0 = std::log(2.0);
        double c = bisect_phi0(right, S0, c_guess);
        auto half = right.final_pass(c, S0, right_nodes);
        map.phi_at_zero = c;
        for (int j = 0; j <= center; ++j) {
            map.phi[center + j] = half.phi[j];
            map.phi[center - j] = half.phi[j];
            map.phi_prime[center + j] = half.q[j];
            map.phi_prime[center - j] = -half.q[j];
            map.phi_second[center + j] = half.phi_second[j];
            map.phi_second[center - j] = half.phi_second[j];
            map.upper_tail[center + j] = half.tail[j];
            map.source_cdf[center + j] = 1.0 - half.tail[j];
            map.source_cdf[center - j] = half.tail[j];
            map.upper_tail[center - j] = 1.0 - half.tail[j];
        }
        map.centering_residual = 0.0;  // enforced by the mirror construction
    } else {
        HalfLineSolver left(*table, false, T, S_cap, tol > 0 ? tol : params.ode_tol);
        // Two-parameter shooting. The tail conditions alone leave the
        // translation of the source free within the finite window, so the
        // outer parameter G(0) targets the centering directly: inner
        // bisection makes the right half critical, the outer level zeroes
        // the source mean (a crashing left half counts as mean -inf).
        auto compose = [&](double g0, double c, HalfLineSolver::HalfResult& hr,
                           HalfLineSolver::HalfResult& hl, bool accurate) {
            hr = right.final_pass(c, -std::log1p(-g0), right_nodes, accurate);
            hl = left.final_pass(c, -std::log(g0), right_nodes, accurate);
        };
        auto fill_map = [&](const HalfLineSolver::HalfResult& hr,
                            const HalfLineSolver::HalfResult& hl) {
            for (int j = 0; j <= center; ++j) {
                map.phi[center + j] = hr.phi[j];
                map.phi_prime[center + j] = hr.q[j];
                map.phi_second[center + j] = hr.phi_second[j];
                map.upper_tail[center + j] = hr.tail[j];
                map.source_cdf[center + j] = 1.0 - hr.tail[j];
                map.phi[center - j] = hl.phi[j];
                map.phi_prime[center - j] = -hl.q[j];
                map.phi_second[center - j] = hl.phi_second[j];
                map.source_cdf[center - j] = hl.tail[j];
                map.upper_tail[center - j] = 1.0 - hl.tail[j];
            }
        };
        auto source_mean = [&]() {
            double h = grid[1] - grid[0];
            double acc = 0.0;
            for (int i = 0; i + 2 < n; i += 2) {
                double f0 = grid[i] * std::exp(-map.phi[i]);
                double f1 = grid[i + 1] * std::exp(-map.phi[i + 1]);
                double f2 = grid[i + 2] * std::exp(-map.phi[i + 2]);
                acc += h / 3.0 * (f0 + 4.0 * f1 + f2);
            }
            return acc;
        };
        // Outer residual: the source mean, decreasing in g0. A left half too
        // light to cover the window counts as +inf (need more left mass), a
        // left half too heavy for its tail continuation as -inf.
        auto mean_at = [&](double g0) {
            double c = bisect_phi0(right, -std::log1p(-g0), c_guess);
            HalfLineSolver::HalfResult hr, hl;
            try {
                compose(g0, c, hr, hl, false);
            } catch (const std::runtime_error&) {
                return -std::numeric_limits<double>::infinity();
            }
            if (hl.tail.back() > 1e-6) return std::numeric_limits<double>::infinity();
            fill_map(hr, hl);
            return source_mean();
        };
        // bracket the zero of the (decreasing) mean
        double g_lo = 0.5, g_hi = 0.5;
        if (mean_at(0.5) > 0.0) {
            do {
                g_hi = 0.5 * (g_hi + 0.99);
                if (g_hi > 0.985) break;
            } while (mean_at(g_hi) > 0.0);
        } else {
            do {
                g_lo = 0.5 * (g_lo + 0.01);
                if (g_lo < 0.015) break;
            } while (mean_at(g_lo) < 0.0);
        }
        if (!(mean_at(g_lo) > 0.0) || !(mean_at(g_hi) < 0.0))
            throw std::runtime_error(
                "moment map: two-parameter shooting failed to bracket the centering "
                "(strongly asymmetric target)");
        for (int it = 0; it < 40; ++it) {
            double mid = 0.5 * (g_lo + g_hi);
            if (mean_at(mid) > 0.0)
                g_lo = mid;
            else
                g_hi = mid;
        }
        double g0 = g_hi;  // the valid (non-collapsing) side of the bracket
        double c = bisect_phi0(right, -std::log1p(-g0), c_guess);
        HalfLineSolver::HalfResult hr, hl;
        compose(g0, c, hr, hl, true);
        fill_map(hr, hl);
        map.phi_at_zero = c;
        map.centering_residual = source_mean();
    }

    // invariants: convexity, mass coverage
    for (int i = 0; i < n; ++i)
        if (!(map.phi_second[i] > 0.0))
            throw std::runtime_error("moment map: solved potential lost convexity");
    double eps_mass = std::max(map.source_cdf[0], map.upper_tail[n - 1]);
    if (eps_mass > 1e-8)
        throw std::runtime_error("moment map: source mass does not cover the grid (eps=" +
                                 std::to_string(eps_mass) + ")");
    return map;
}

double monge_ampere_residual(const MomentMap1D& map) {
    double worst = 0.0;
    for (int i = 0; i < map.grid.size(); ++i) {
        double lhs = std::exp(-map.phi[i]);
        double rho = map.target_table->density(map.phi_prime[i]);
        double rhs = rho * map.phi_second[i];
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(lhs, 1e-300));
    }
    return worst;
}

double pushforward_residual(const MomentMap1D& map) {
    double worst = 0.0;
    for (int i = 0; i < map.grid.size(); ++i) {
        double err;
        if (map.grid[i] >= 0.0)
            err = std::abs(map.target_table->ccdf(map.phi_prime[i]) - map.upper_tail[i]);
        else
            err = std::abs(map.target_table->cdf(map.phi_prime[i]) - map.source_cdf[i]);
        worst = std::max(worst, err);
    }
    return worst;
}

HessianBoundsReport hessian_bounds_check(const MomentMap1D& map, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("hessian_bounds_check: alpha must lie in (0,1]");
    HessianBoundsReport rep;
    rep.alpha = alpha;
    rep.min_second = map.phi_second.minCoeff();
    rep.max_second = map.phi_second.maxCoeff();
    rep.pass = rep.min_second >= alpha - 1e-6 && rep.max_second <= 1.0 / alpha + 1e-6;
    return rep;
}

MomentMapProduct tensorize(std::vector<MomentMap1D> factors) {
    if (factors.empty()) throw std::invalid_argument("tensorize: needs at least one factor");
    MomentMapProduct p;
    p.factors = std::move(factors);
    return p;
}

double pushforward_residual(const MomentMapProduct& map) {
    double worst = 0.0;
    for (const auto& f : map.factors) worst = std::max(worst, pushforward_residual(f));
    return worst;
}

}  // namespace imstab
