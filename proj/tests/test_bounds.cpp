#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "imstab/bounds.hpp"
#include "imstab/moment_map.hpp"
#include "imstab/quadrature.hpp"
#include "imstab/stein.hpp"

using namespace imstab;

namespace {

DiffusionPair scaled_ou_pair(int d, double s) {
    DiffusionPair p;
    p.dimension = d;
    p.x.drift = linear_drift(d, -1.0);
    p.x.noise = isotropic_noise(d, std::sqrt(2.0));
    p.y.drift = linear_drift(d, -1.0);
    p.y.noise = isotropic_noise(d, std::sqrt(2.0 * s));
    return p;
}

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

ScenarioSpec scaled_ou_scenario(int d, double s) {
    ScenarioSpec sc;
    sc.name = "ou_scaled";
    sc.theorem = 2;
    sc.dimension = d;
    sc.mu = make_gaussian(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
    sc.nu = make_gaussian(Eigen::VectorXd::Zero(d), s * Eigen::MatrixXd::Identity(d, d));
    sc.pair = scaled_ou_pair(d, s);
    sc.L = 1.0;
    sc.kappa = 1.0;
    sc.C_H = 1.0;
    sc.n_samples = 600;
    sc.n_replicates = 4;
    sc.n_traj = 3000;
    sc.seed = 11;
    return sc;
}

}  // namespace

TEST_CASE("discrepancy report") {
    SUBCASE("identical pair vanishes") {
        DiffusionPair p = scaled_ou_pair(1, 1.0);
        MeasureSpec nu = make_gaussian1d(0.0, 1.0);
        DiscrepancyReport r = discrepancy_beta(p, nu, 2000, 3);
        CHECK(r.drift_l1 == 0.0);
        CHECK(r.drift_l2 == 0.0);
        CHECK(r.diff_l2 == 0.0);
        CHECK(r.beta_thm1() == 0.0);
        CHECK(r.beta_thm2() == 0.0);
    }
    SUBCASE("constant fields are exact") {
        for (int d : {1, 2}) {
            double s = 0.25;
            DiffusionPair p = scaled_ou_pair(d, s);
            MeasureSpec nu = make_gaussian(Eigen::VectorXd::Zero(d),
                                           s * Eigen::MatrixXd::Identity(d, d));
            DiscrepancyReport r = discrepancy_beta(p, nu, 1000, 5);
            CHECK(r.diff_l2 ==
                  doctest::Approx(std::sqrt(2.0 * d) * (1.0 - std::sqrt(s))).epsilon(1e-12));
            CHECK(r.beta_thm1() == doctest::Approx(r.diff_l2));
        }
    }
    SUBCASE("perturbed drift matches quadrature") {
        double eps = 0.3;
        DiffusionPair p;
        p.dimension = 1;
        p.x.drift = linear_drift(1, -1.0);
        p.x.noise = isotropic_noise(1, std::sqrt(2.0));
        p.y.drift = drift_from_scalar([eps](double x) { return -x + eps * std::sin(x); });
        p.y.noise = p.x.noise;
        MeasureSpec nu = make_gaussian1d(0.0, 1.0);
        DiscrepancyReport r = discrepancy_beta(p, nu, 100000, 7);
        const DensityTable1d& t = nu.table1d();
        double expected = eps * integrate_or_throw(
                                    [&](double x) { return std::abs(std::sin(x)) * t.density(x); },
                                    t.x_lo(), t.x_hi(), 1e-10, 1e-9);
        CHECK(std::abs(r.drift_l1 - expected) < 3.0 * r.drift_l1_se);
    }
}

TEST_CASE("truncated-distance bound evaluator") {
    SUBCASE("hand substitution") {
        double beta = 2.0 / (std::exp(1.0) - 1.0);  // makes ln(1 + R/beta) = 1... almost
        // choose beta so that ln(1+R/beta) = e^0: with R=2, beta = 2/(e-1) gives ln(e)=1
        double v = theorem1_rhs(2.0, beta, 1.0, 1.0, 1.0, 1.0, 0.5, 0.5);
        CHECK(v == doctest::Approx(400.0).epsilon(1e-12));
    }
    SUBCASE("domain violations are rejected by name") {
        CHECK_THROWS_WITH_AS(theorem1_rhs(0.5, 0.1, 1, 1, 1, 1, 1, 1),
                             doctest::Contains("R > 1"), std::invalid_argument);
        CHECK_THROWS_AS(theorem1_rhs(2.0, 0.0, 1, 1, 1, 1, 1, 1), std::invalid_argument);
        // beta so large that the iterated logarithm is undefined
        CHECK_THROWS_AS(theorem1_rhs(2.0, 1e9, 1, 1, 1, 1, 1, 1), std::invalid_argument);
        CHECK_THROWS_AS(theorem1_rhs(2.0, 0.1, 1, 1, 1, 1, 0.0, 0.0), std::invalid_argument);
    }
    SUBCASE("doubling the contraction constant quadruples the value") {
        double v1 = theorem1_rhs(2.0, 0.1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        double v2 = theorem1_rhs(2.0, 0.1, 1.0, 1.0, 1.0, 2.0, 1.0, 1.0);
        CHECK(v2 == doctest::Approx(4.0 * v1).epsilon(1e-12));
    }
    SUBCASE("monotone in the norms, antitone in beta") {
        double base = theorem1_rhs(2.0, 0.1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        CHECK(theorem1_rhs(2.0, 0.1, 1.1, 1.0, 1.0, 1.0, 1.0, 1.0) > base);
        CHECK(theorem1_rhs(2.0, 0.1, 1.0, 1.1, 1.0, 1.0, 1.0, 1.0) > base);
        CHECK(theorem1_rhs(2.0, 0.05, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0) < base);
    }
}

TEST_CASE("lipschitz bound evaluator") {
    CHECK(theorem2_rhs(1.0, 1.0, 1.0, 0.1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(theorem2_rhs(1.0, 1.0, 1.0, 0.0) == 0.0);
    CHECK(theorem2_rhs(0.0, 1.0, 1.0, 0.4) == doctest::Approx(15.0 * 0.4).epsilon(1e-12));
    // linear in beta
    CHECK(theorem2_rhs(2.0, 0.5, 1.3, 0.2) ==
          doctest::Approx(2.0 * theorem2_rhs(2.0, 0.5, 1.3, 0.1)).epsilon(1e-12));
    CHECK_THROWS_AS(theorem2_rhs(1.0, 0.0, 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("kernel-discrepancy bound evaluator") {
    SUBCASE("lipschitz clause hand value") {
        Theorem3Result r =
            theorem3_rhs(1.0, 1, 2.0, 0.2, 1.0, Theorem3Variant::lipschitz, 0.0);
        CHECK(r.value == doctest::Approx(20.0).epsilon(1e-12));
        CHECK(!r.dimension_condition_unverified);
    }
    SUBCASE("halving alpha scales the general clause by 2^6") {
        Theorem3Result a = theorem3_rhs(1.0, 2, 3.0, 0.1, 1.0, Theorem3Variant::general, {});
        Theorem3Result b = theorem3_rhs(0.5, 2, 3.0, 0.1, 1.0, Theorem3Variant::general, {});
        CHECK(b.value == doctest::Approx(64.0 * a.value).epsilon(1e-12));
    }
    SUBCASE("radial clause carries the dimension flag") {
        Theorem3Result r = theorem3_rhs(0.9, 2, 3.0, 0.1, 1.0, Theorem3Variant::radial, {});
        CHECK(r.dimension_condition_unverified);
        CHECK(r.value > 0.0);
    }
    SUBCASE("rejections") {
        CHECK_THROWS_AS(theorem3_rhs(1.0, 2, 0.9, 0.1, 1.0, Theorem3Variant::general, {}),
                        std::invalid_argument);
        CHECK_THROWS_AS(theorem3_rhs(1.0, 2, 3.0, 0.1, 1.0, Theorem3Variant::lipschitz, {}),
                        std::invalid_argument);
        CHECK_THROWS_AS(theorem3_rhs(1.5, 2, 3.0, 0.1, 1.0, Theorem3Variant::general, {}),
                        std::invalid_argument);
    }
}

TEST_CASE("scenario verification: scaled OU against the lipschitz bound") {
    double s = 0.25;
    ScenarioSpec sc = scaled_ou_scenario(1, s);
    BoundReport rep = verify_scenario(sc);
    double expect_lhs = std::abs(1.0 - std::sqrt(s));
    double expect_beta = std::sqrt(2.0) * (1.0 - std::sqrt(s));
    CHECK(rep.metric == "W2");
    CHECK(rep.beta == doctest::Approx(expect_beta).epsilon(1e-12));
    CHECK(rep.rhs == doctest::Approx(30.0 * expect_beta).epsilon(1e-12));
    CHECK(std::abs(rep.lhs - expect_lhs) / expect_lhs < 0.05);
    CHECK(std::abs(rep.lhs_oracle - expect_lhs) < 1e-12);
    CHECK(rep.verdict == "holds");
    CHECK(rep.slack >= 3.0 * rep.lhs_se);
    CHECK(rep.kappa_source == "analytic");
}

TEST_CASE("scenario verification: identical pair holds with zero slack margin") {
    ScenarioSpec sc = scaled_ou_scenario(1, 1.0);
    BoundReport rep = verify_scenario(sc);
    CHECK(rep.lhs == 0.0);
    CHECK(rep.lhs_se == 0.0);
    CHECK(rep.rhs == 0.0);
    CHECK(rep.verdict == "holds");
}

TEST_CASE("scenario verification: fitted contraction constants") {
    ScenarioSpec sc = scaled_ou_scenario(1, 0.5);
    sc.fit_kappa = true;
    sc.fit_x0 = Eigen::VectorXd::Constant(1, 3.0);
    sc.fit_times = {0.25, 0.5, 1.0, 1.5, 2.0, 2.5};
    sc.n_traj = 4096;
    BoundReport rep = verify_scenario(sc);
    CHECK(rep.kappa_source == "fitted");
    CHECK(rep.kappa > 0.9);
    CHECK(rep.kappa < 1.1);
    CHECK(rep.C_H > 0.8);
    CHECK(rep.C_H < 1.25);
    CHECK(rep.verdict == "holds");
}

TEST_CASE("scenario verification: kernel-discrepancy bound variants") {
    // constant kernels differ by a scale; drift shared
    ScenarioSpec sc;
    sc.theorem = 3;
    sc.dimension = 1;
    sc.mu = make_gaussian1d(0.0, 1.2);   // alpha = 1/1.2, M = 1.2 > 1
    sc.nu = make_gaussian1d(0.0, 0.9);
    sc.pair = scaled_ou_pair(1, 0.9 / 1.2);
    sc.pair.x.noise = isotropic_noise(1, std::sqrt(2.0 * 1.2));
    sc.pair.y.noise = isotropic_noise(1, std::sqrt(2.0 * 0.9));
    sc.p = p_infinity;
    sc.n_samples = 500;
    sc.n_replicates = 3;
    sc.n_traj = 2000;
    sc.seed = 29;
    SUBCASE("lipschitz clause with constant coefficients") {
        sc.t3_variant = Theorem3Variant::lipschitz;
        sc.L = 0.0;
        BoundReport rep = verify_scenario(sc);
        CHECK(rep.metric == "W2-squared");
        CHECK(rep.alpha == doctest::Approx(1.0 / 1.2));
        CHECK(rep.rhs == doctest::Approx(100.0 * std::pow(1.0 / 1.2, -1.0) * rep.beta));
        CHECK(rep.verdict == "holds");
    }
    SUBCASE("general clause with the explicit constant") {
        sc.t3_variant = Theorem3Variant::general;
        sc.theorem3_C = 1.0;
        BoundReport rep = verify_scenario(sc);
        CHECK(rep.M == doctest::Approx(1.2).epsilon(1e-9));
        CHECK(rep.C == 1.0);
        CHECK((rep.verdict == "holds" || rep.verdict == "inconclusive"));
    }
    SUBCASE("radial clause carries the dimension flag into the report") {
        sc.t3_variant = Theorem3Variant::radial;
        sc.p = 2.0;
        BoundReport rep = verify_scenario(sc);
        CHECK(rep.t3_dimension_flag);
    }
}

TEST_CASE("scenario verification: burn-in equilibrium sampling") {
    ScenarioSpec sc = scaled_ou_scenario(1, 0.5);
    sc.analytic_equilibrium = false;
    sc.burn_in_T = 8.0;
    sc.dt = 4e-3;
    sc.n_samples = 400;
    sc.n_replicates = 2;
    BoundReport rep = verify_scenario(sc);
    CHECK(rep.equilibrium_source == "burn-in");
    CHECK(rep.verdict == "holds");
    double expect_lhs = std::abs(1.0 - std::sqrt(0.5));
    CHECK(std::abs(rep.lhs - expect_lhs) / expect_lhs < 0.25);
}

TEST_CASE("scenario verification: truncated-distance bound end to end") {
    // x-process: OU with invariant N(0,1); y-process: kernel SDE of the
    // log-cosh measure; relative density nu/mu is bounded
    MeasureSpec lc = logcosh_measure();
    SteinKernelField kernel = kernel_from_moment_map(solve_moment_map_1d(lc));

    ScenarioSpec sc;
    sc.name = "ou_vs_logcosh_kernel";
    sc.theorem = 1;
    sc.dimension = 1;
    sc.mu = make_gaussian1d(0.0, 1.0);
    sc.nu = lc;
    sc.pair.dimension = 1;
    sc.pair.x.drift = linear_drift(1, -1.0);
    sc.pair.x.noise = isotropic_noise(1, std::sqrt(2.0));
    sc.pair.y = stein_sde(kernel);
    sc.R = 4.0;
    sc.p = p_infinity;
    sc.kappa = 1.0;
    sc.C_H = 1.0;
    sc.empirical_g = true;
    sc.witness_samples = 128;
    sc.n_samples = 500;
    sc.n_replicates = 3;
    sc.n_traj = 2000;
    sc.seed = 23;
    BoundReport rep = verify_scenario(sc);
    CHECK(rep.metric == "truncated-W2-squared");
    CHECK(rep.q == 1.0);
    CHECK(rep.g_source == "lusin-empirical");
    CHECK(rep.g_norm >= 1.0);
    CHECK(std::isfinite(rep.density_norm));
    CHECK(rep.beta > 0.0);
    CHECK((rep.verdict == "holds" || rep.verdict == "inconclusive"));
    CHECK(rep.rhs > 0.0);
}
