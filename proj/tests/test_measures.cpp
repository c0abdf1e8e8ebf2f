#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "imstab/measures.hpp"
#include "imstab/quadrature.hpp"

using namespace imstab;

namespace {
constexpr double log_two_pi = 1.8378770664093454835606594728112;

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

Eigen::VectorXd vec1(double x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
}
}  // namespace

TEST_CASE("standard normal log-density at the origin") {
    MeasureSpec g = make_gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    double ld = g.log_density(Eigen::VectorXd::Zero(2)) - g.log_normalization;
    CHECK(ld == doctest::Approx(-log_two_pi).epsilon(1e-12));
}

TEST_CASE("gaussian second moment by construction") {
    MeasureSpec g = make_gaussian1d(0.0, 4.0);
    CHECK(second_moment(g) == doctest::Approx(4.0).epsilon(1e-9));
    MeasureSpec g3 = make_gaussian(Eigen::VectorXd::Zero(3), Eigen::MatrixXd::Identity(3, 3));
    double se = 0.0;
    double m2 = second_moment(g3, &se);
    CHECK(se > 0.0);  // Monte Carlo path in d=3
    CHECK(std::abs(m2 - 3.0) < 3.0 * se);
}

TEST_CASE("indefinite covariance rejected") {
    Eigen::MatrixXd c(2, 2);
    c << 1, 2, 2, 1;  // eigenvalues 3 and -1
    CHECK_THROWS_AS(make_gaussian(Eigen::VectorXd::Zero(2), c), std::invalid_argument);
}

TEST_CASE("gibbs quadratic potential matches the gaussian") {
    MeasureSpec gb = make_gibbs_1d([](double x) { return 0.5 * x * x; },
                                   [](double x) { return x; }, [](double) { return 1.0; });
    MeasureSpec ga = make_gaussian1d(0.0, 1.0);
    for (double x = -5.0; x <= 5.0; x += 0.5) {
        double a = gb.log_density(vec1(x)) - gb.log_normalization;
        double b = ga.log_density(vec1(x)) - ga.log_normalization;
        CHECK(std::abs(a - b) < 1e-10);
    }
}

TEST_CASE("gibbs log-cosh curvature range sets alpha") {
    MeasureSpec m = logcosh_measure();
    REQUIRE(m.convexity_alpha.has_value());
    CHECK(*m.convexity_alpha == doctest::Approx(1.0 / 1.3).epsilon(1e-9));
    // second moment: quadrature against Monte Carlo
    double quad = second_moment(m);
    EmpiricalMeasure s = sample(m, 200000, 11);
    Eigen::ArrayXd sq = s.points.col(0).array().square();
    double mc = sq.mean();
    double se = std::sqrt((sq - mc).square().sum() / (sq.size() - 1) / sq.size());
    CHECK(std::abs(quad - mc) < 3.0 * se);
}

TEST_CASE("non-integrable potential rejected") {
    CHECK_THROWS(make_gibbs_1d([](double x) { return -x * x; }, [](double x) { return -2.0 * x; },
                               [](double) { return -2.0; }));
}

TEST_CASE("quadrature mass is one") {
    MeasureSpec m = logcosh_measure();
    const DensityTable1d& t = m.table1d();
    double mass = integrate_or_throw([&](double x) { return t.density(x); }, t.x_lo(), t.x_hi(),
                                     1e-12, 1e-12);
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));

    MeasureSpec g2 = make_gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    QuadResult r = integrate2d(
        [&](double x, double y) {
            Eigen::VectorXd v(2);
            v << x, y;
            return std::exp(g2.log_density(v) - g2.log_normalization);
        },
        -8, 8, -8, 8, 1e-8, 1e-8);
    CHECK(std::abs(r.value - 1.0) < 1e-5);
}

TEST_CASE("relative density norm basics") {
    MeasureSpec g1 = make_gaussian1d(0.0, 1.0);
    MeasureSpec g2 = make_gaussian1d(0.0, 2.0);
    SUBCASE("identical measures give 1 for every p") {
        for (double p : {1.0, 2.0, 4.0})
            CHECK(relative_density_norm(g1, g1, p) == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(relative_density_norm(g1, g1, p_infinity) == doctest::Approx(1.0).epsilon(1e-8));
    }
    SUBCASE("narrow over wide is bounded, sup at the origin") {
        CHECK(relative_density_norm(g1, g2, p_infinity) ==
              doctest::Approx(std::sqrt(2.0)).epsilon(1e-6));
    }
    SUBCASE("wide over narrow diverges in the tails") {
        CHECK(std::isinf(relative_density_norm(g2, g1, p_infinity)));
    }
    SUBCASE("nondecreasing in p") {
        double last = 0.0;
        for (double p : {1.0, 2.0, 4.0}) {
            double v = relative_density_norm(g1, g2, p);
            CHECK(v >= last - 1e-12);
            last = v;
        }
        CHECK(relative_density_norm(g1, g2, p_infinity) >= last - 1e-9);
    }
}

TEST_CASE("sub-exponential parameter") {
    MeasureSpec g1 = make_gaussian1d(0.0, 1.0);
    CHECK(subexp_parameter(g1, 8) == doctest::Approx(0.5).epsilon(1e-9));
    MeasureSpec g4 = make_gaussian1d(0.0, 4.0);
    CHECK(subexp_parameter(g4, 8) == doctest::Approx(1.0).epsilon(1e-9));

    SUBCASE("point mass has parameter zero") {
        EmpiricalMeasure pm;
        pm.points = Eigen::MatrixXd::Zero(1, 1);
        pm.weights = Eigen::VectorXd::Ones(1);
        CHECK(subexp_parameter(pm, 8) == 0.0);
    }
    SUBCASE("degree-one homogeneity under scaling") {
        EmpiricalMeasure s = sample(g1, 5000, 3);
        double m1 = subexp_parameter(s, 6);
        EmpiricalMeasure s2 = s;
        s2.points *= 2.0;
        CHECK(subexp_parameter(s2, 6) == doctest::Approx(2.0 * m1).epsilon(1e-12));
    }
    CHECK_THROWS_AS(subexp_parameter(g1, 1), std::invalid_argument);
}

TEST_CASE("sampling: determinism and law of large numbers") {
    MeasureSpec g = make_gaussian1d(0.0, 1.0);
    const int n = 100000;
    EmpiricalMeasure a = sample(g, n, 7);
    EmpiricalMeasure b = sample(g, n, 7);
    CHECK(a.points == b.points);  // bitwise reproducible
    CHECK(std::abs(a.mean()[0]) < 3.0 / std::sqrt(double(n)));

    MeasureSpec g4 = make_gaussian1d(0.0, 4.0);
    EmpiricalMeasure s = sample(g4, n, 13);
    Eigen::ArrayXd sq = s.points.col(0).array().square();
    double var = sq.mean();
    double se = std::sqrt((sq - var).square().sum() / (n - 1) / n);
    CHECK(std::abs(var - 4.0) < 3.0 * se);

    EmpiricalMeasure c = sample(g, n, 8);
    CHECK(a.points != c.points);
}

TEST_CASE("gibbs sampler matches its own quadrature moments") {
    MeasureSpec m = logcosh_measure();
    const int n = 100000;
    EmpiricalMeasure s = sample(m, n, 5);
    CHECK(std::abs(s.mean()[0]) < 3.0 * std::sqrt(second_moment(m) / n));
    Eigen::ArrayXd sq = s.points.col(0).array().square();
    double mc = sq.mean();
    double se = std::sqrt((sq - mc).square().sum() / (n - 1) / n);
    CHECK(std::abs(mc - second_moment(m)) < 3.0 * se);
}

TEST_CASE("declared convexity matches sampled curvature") {
    for (MeasureSpec m : {make_gaussian1d(0.0, 4.0), logcosh_measure()}) {
        REQUIRE(m.convexity_alpha.has_value());
        double alpha = *m.convexity_alpha;
        EmpiricalMeasure s = sample(m, 200, 31);
        for (int i = 0; i < s.size(); ++i) {
            double vpp = -m.log_density_hessian(s.points.row(i).transpose())(0, 0);
            CHECK(vpp >= alpha - 1e-6);
            CHECK(vpp <= 1.0 / alpha + 1e-6);
        }
    }
}

TEST_CASE("empirical measure validation") {
    EmpiricalMeasure m;
    m.points = Eigen::MatrixXd::Zero(2, 1);
    m.weights = Eigen::VectorXd::Constant(2, 0.5);
    CHECK_NOTHROW(m.validate());
    m.weights[0] = 0.7;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
    m.weights[0] = 0.5;
    m.points(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
