#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "imstab/moment_map.hpp"

using namespace imstab;

namespace {
constexpr double half_log_two_pi = 0.91893853320467274178032973640562;

MeasureSpec logcosh_measure(double eps = 0.3) {
    return make_gibbs_1d(
        [eps](double x) {
            return 0.5 * x * x +
                   eps * (std::abs(x) + std::log1p(std::exp(-2.0 * std::abs(x))) - std::log(2.0));
        },
        [eps](double x) { return x + eps * std::tanh(x); },
        [eps](double x) {
            double t = std::tanh(x);
            return 1.0 + eps * (1.0 - t * t);
        });
}

// the quadratic potential solves the problem for the standard normal target
MomentMap1D analytic_gaussian_map(const MeasureSpec& target, int nodes = 2049, double T = 6.0) {
    MomentMap1D map;
    map.grid.resize(nodes);
    map.phi.resize(nodes);
    map.phi_prime.resize(nodes);
    map.phi_second.resize(nodes);
    map.source_cdf.resize(nodes);
    map.upper_tail.resize(nodes);
    map.target = target;
    map.target_table = target.table1d_ptr();
    for (int i = 0; i < nodes; ++i) {
        double x = -T + 2.0 * T * i / (nodes - 1);
        map.grid[i] = x;
        map.phi[i] = 0.5 * x * x + half_log_two_pi;
        map.phi_prime[i] = x;
        map.phi_second[i] = 1.0;
        map.source_cdf[i] = map.target_table->cdf(x);
        map.upper_tail[i] = map.target_table->ccdf(x);
    }
    map.phi_at_zero = half_log_two_pi;
    return map;
}

}  // namespace

TEST_CASE("gaussian target recovers the quadratic potential") {
    MeasureSpec target = make_gaussian1d(0.0, 1.0);
    MomentMap1D map = solve_moment_map_1d(target);

    SUBCASE("phi matches x^2/2 + ln sqrt(2 pi) inside [-4,4]") {
        double worst_phi = 0.0, worst_sec = 0.0;
        for (int i = 0; i < map.grid.size(); ++i) {
            double x = map.grid[i];
            if (std::abs(x) > 4.0) continue;
            worst_phi = std::max(worst_phi,
                                 std::abs(map.phi[i] - (0.5 * x * x + half_log_two_pi)));
            worst_sec = std::max(worst_sec, std::abs(map.phi_second[i] - 1.0));
        }
        CHECK(worst_phi < 1e-6);
        CHECK(worst_sec < 1e-6);
    }
    SUBCASE("curvature stays pinned across the whole grid") {
        CHECK(std::abs(map.phi_second.minCoeff() - 1.0) < 1e-6);
        CHECK(std::abs(map.phi_second.maxCoeff() - 1.0) < 1e-6);
    }
    SUBCASE("source density equals the target density") {
        for (int i = 0; i < map.grid.size(); i += 64) {
            double rho = map.target_table->density(map.grid[i]);
            CHECK(std::abs(std::exp(-map.phi[i]) - rho) < 1e-6);
        }
    }
    SUBCASE("residuals") {
        CHECK(monge_ampere_residual(map) < 1e-6);
        CHECK(pushforward_residual(map) < 1e-8);
    }
    SUBCASE("hessian bounds pass with equality at alpha = 1") {
        HessianBoundsReport hb = hessian_bounds_check(map, 1.0);
        CHECK(hb.pass);
        CHECK(hb.min_second == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(hb.max_second == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("analytic gaussian map has tiny residuals and detectors fire on perturbations") {
    MeasureSpec target = make_gaussian1d(0.0, 1.0);
    MomentMap1D map = analytic_gaussian_map(target);
    CHECK(monge_ampere_residual(map) < 1e-10);
    CHECK(pushforward_residual(map) < 1e-8);

    SUBCASE("potential perturbation trips the equation residual") {
        MomentMap1D bad = map;
        for (int i = 0; i < bad.grid.size(); ++i) bad.phi[i] += 0.01 * bad.grid[i] * bad.grid[i];
        CHECK(monge_ampere_residual(bad) > 1e-3);
    }
    SUBCASE("gradient perturbation trips the pushforward residual") {
        MomentMap1D bad = map;
        bad.phi_prime *= 1.01;
        CHECK(pushforward_residual(bad) > 1e-3);
    }
}

TEST_CASE("scaled gaussian target gives a linear gradient with slope s") {
    MeasureSpec target = make_gaussian1d(0.0, 4.0);
    MomentMap1D map = solve_moment_map_1d(target);
    CHECK(monge_ampere_residual(map) < 1e-6);
    CHECK(pushforward_residual(map) < 1e-6);
    // source is N(0, 1/s) and phi'(x) = s x, so phi'' is constantly s
    CHECK(map.phi_second.minCoeff() == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(map.phi_second.maxCoeff() == doctest::Approx(4.0).epsilon(1e-6));
    int center = (static_cast<int>(map.grid.size()) - 1) / 2;
    int probe = center + 256;
    CHECK(map.phi_prime[probe] == doctest::Approx(4.0 * map.grid[probe]).epsilon(1e-8));
}

TEST_CASE("log-cosh target") {
    MeasureSpec target = logcosh_measure();
    MomentMap1D map = solve_moment_map_1d(target);
    SUBCASE("residuals within solver tolerance") {
        CHECK(monge_ampere_residual(map) < 1e-6);
        CHECK(pushforward_residual(map) < 1e-6);
    }
    SUBCASE("hessian bounds hold at alpha = 1/1.3") {
        HessianBoundsReport hb = hessian_bounds_check(map, 1.0 / 1.3);
        CHECK(hb.pass);
        CHECK(hb.min_second >= 1.0 / 1.3 - 1e-6);
        CHECK(hb.max_second <= 1.3 + 1e-6);
    }
    SUBCASE("tighter alpha is genuinely violated and reported") {
        HessianBoundsReport hb = hessian_bounds_check(map, 0.99);
        CHECK(!hb.pass);
    }
    SUBCASE("mass coverage and centering") {
        int n = static_cast<int>(map.grid.size());
        CHECK(map.source_cdf[0] < 1e-8);
        CHECK(map.upper_tail[n - 1] < 1e-8);
        CHECK(std::abs(map.centering_residual) < 1e-6);
    }
}

TEST_CASE("independent closed-form route: source density equals the tail moment") {
    // Substituting the pushforward relation into the equation shows the
    // source density at x must equal int_{phi'(x)}^inf t rho(t) dt. That
    // integral is computable directly from the target table, giving a
    // pointwise oracle for phi that never touches the shooting solver.
    for (MeasureSpec target : {make_gaussian1d(0.0, 1.0), logcosh_measure()}) {
        MomentMap1D map = solve_moment_map_1d(target);
        double worst = 0.0;
        for (int i = 0; i < map.grid.size(); ++i) {
            if (std::min(map.source_cdf[i], map.upper_tail[i]) < 1e-14) continue;
            double lhs = std::exp(-map.phi[i]);
            double rhs = map.target_table->upper_partial_first_moment(map.phi_prime[i]);
            worst = std::max(worst, std::abs(lhs - rhs) / lhs);
        }
        CHECK(worst < 1e-7);
    }
}

TEST_CASE("curvature equals the derivative of the gradient") {
    // finite differences of phi' give a route to phi'' that is independent
    // of the equation used to store it
    MeasureSpec target = logcosh_measure();
    MomentMap1D map = solve_moment_map_1d(target);
    double h = map.grid[1] - map.grid[0];
    double worst = 0.0;
    for (int i = 2; i + 2 < map.grid.size(); ++i) {
        double fd = (-map.phi_prime[i + 2] + 8.0 * map.phi_prime[i + 1] -
                     8.0 * map.phi_prime[i - 1] + map.phi_prime[i - 2]) /
                    (12.0 * h);
        worst = std::max(worst, std::abs(fd - map.phi_second[i]));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("two grid resolutions agree on the curvature") {
    MeasureSpec target = logcosh_measure();
    MomentMapParams coarse;
    coarse.nodes = 2049;
    MomentMapParams fine;
    fine.nodes = 4097;
    MomentMap1D a = solve_moment_map_1d(target, coarse);
    MomentMap1D b = solve_moment_map_1d(target, fine);
    double worst = 0.0;
    for (int i = 0; i < a.grid.size(); ++i) {
        // coarse node i sits at fine node 2i
        worst = std::max(worst, std::abs(a.phi_second[i] - b.phi_second[2 * i]));
        CHECK(a.grid[i] == doctest::Approx(b.grid[2 * i]).epsilon(1e-14));
    }
    CHECK(worst < 1e-5);
}

TEST_CASE("mildly asymmetric target is solved best-effort") {
    // convex with curvature in [1, 1.25]; the measure builder recentres it
    MeasureSpec target = make_gibbs_1d(
        [](double x) {
            double y = x - 0.5;
            return 0.5 * x * x +
                   0.25 * (std::abs(y) + std::log1p(std::exp(-2.0 * std::abs(y))) - std::log(2.0));
        },
        [](double x) { return x + 0.25 * std::tanh(x - 0.5); },
        [](double x) {
            double t = std::tanh(x - 0.5);
            return 1.0 + 0.25 * (1.0 - t * t);
        });
    MomentMap1D map = solve_moment_map_1d(target);
    CHECK(monge_ampere_residual(map) < 1e-5);
    CHECK(pushforward_residual(map) < 1e-5);
    CHECK(std::abs(map.centering_residual) < 1e-5);
    HessianBoundsReport hb = hessian_bounds_check(map, *target.convexity_alpha);
    CHECK(hb.pass);
}

TEST_CASE("rejected inputs") {
    SUBCASE("uncentered target") {
        CHECK_THROWS_AS(solve_moment_map_1d(make_gaussian1d(1.0, 1.0)), std::invalid_argument);
    }
    SUBCASE("multivariate target") {
        MeasureSpec g2 =
            make_gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
        CHECK_THROWS_AS(solve_moment_map_1d(g2), std::invalid_argument);
    }
    SUBCASE("even node counts") {
        MomentMapParams p;
        p.nodes = 4096;
        CHECK_THROWS_AS(solve_moment_map_1d(make_gaussian1d(0.0, 1.0), p),
                        std::invalid_argument);
    }
}

TEST_CASE("tensorization") {
    MeasureSpec g1 = make_gaussian1d(0.0, 1.0);
    MeasureSpec g4 = make_gaussian1d(0.0, 4.0);
    MomentMap1D m1 = solve_moment_map_1d(g1);
    MomentMap1D m4 = solve_moment_map_1d(g4);
    MomentMapProduct prod = tensorize({m1, m4});
    CHECK(prod.dimension() == 2);
    CHECK(pushforward_residual(prod) < 1e-6);
    CHECK_THROWS_AS(tensorize({}), std::invalid_argument);
}
