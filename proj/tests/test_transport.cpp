#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "imstab/rng.hpp"
#include "imstab/transport.hpp"

using namespace imstab;

namespace {

EmpiricalMeasure cloud_1d(std::initializer_list<double> xs) {
    Eigen::MatrixXd p(static_cast<long>(xs.size()), 1);
    long i = 0;
    for (double x : xs) p(i++, 0) = x;
    return EmpiricalMeasure::uniform(std::move(p));
}

EmpiricalMeasure random_cloud(int n, int d, std::uint64_t seed, double spread = 1.0,
                              bool random_weights = false) {
    CounterRng rng(seed, 0);
    Eigen::MatrixXd p(n, d);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < d; ++j) p(i, j) = spread * rng.normal(i * d + j);
    EmpiricalMeasure m = EmpiricalMeasure::uniform(std::move(p));
    if (random_weights) {
        for (int i = 0; i < n; ++i) m.weights[i] = 0.1 + rng.uniform(1000 + i);
        m.weights /= m.weights.sum();
    }
    return m;
}

// exhaustive assignment oracle for equal-size uniform clouds
double brute_force_cost(const EmpiricalMeasure& A, const EmpiricalMeasure& B,
                        const TransportCost& cost) {
    int n = static_cast<int>(A.size());
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do {
        double c = 0.0;
        for (int i = 0; i < n; ++i)
            c += cost.of_sqdist((A.points.row(i) - B.points.row(perm[i])).squaredNorm());
        best = std::min(best, c / n);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// quantile-coupling oracle for weighted 1-d quadratic transport
double quantile_coupling_cost_1d(const EmpiricalMeasure& A, const EmpiricalMeasure& B) {
    std::vector<int> ia(A.size()), ib(B.size());
    std::iota(ia.begin(), ia.end(), 0);
    std::iota(ib.begin(), ib.end(), 0);
    std::sort(ia.begin(), ia.end(),
              [&](int u, int v) { return A.points(u, 0) < A.points(v, 0); });
    std::sort(ib.begin(), ib.end(),
              [&](int u, int v) { return B.points(u, 0) < B.points(v, 0); });
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    double wa = A.weights[ia[0]], wb = B.weights[ib[0]];
    while (i < ia.size() && j < ib.size()) {
        double m = std::min(wa, wb);
        double dx = A.points(ia[i], 0) - B.points(ib[j], 0);
        cost += m * dx * dx;
        wa -= m;
        wb -= m;
        if (wa <= 1e-15 && ++i < ia.size()) wa = A.weights[ia[i]];
        if (wb <= 1e-15 && ++j < ib.size()) wb = B.weights[ib[j]];
    }
    return cost;
}

}  // namespace

TEST_CASE("cost kinds validate their parameters") {
    CHECK_THROWS_AS(TransportCost::w2_truncated(0.0), std::invalid_argument);
    CHECK_THROWS_AS(TransportCost::log_cost(-1.0), std::invalid_argument);
    CHECK(TransportCost::w2().of_sqdist(9.0) == 9.0);
    CHECK(TransportCost::w2_truncated(4.0).of_sqdist(9.0) == 4.0);
    CHECK(TransportCost::w1_truncated(2.0).of_sqdist(9.0) == 2.0);
    CHECK(TransportCost::log_cost(1.0).of_sqdist(1.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("identity coupling on identical clouds") {
    EmpiricalMeasure A = cloud_1d({0.0, 1.0});
    CouplingPlan plan = solve_ot(A, A, TransportCost::w2());
    CHECK(plan.cost_value == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(plan.marginal_error < 1e-12);
}

TEST_CASE("truncation caps the pair cost") {
    EmpiricalMeasure A = cloud_1d({0.0});
    EmpiricalMeasure B = cloud_1d({3.0});
    CHECK(solve_ot(A, B, TransportCost::w2_truncated(4.0)).cost_value == doctest::Approx(4.0));
    CHECK(solve_ot(A, B, TransportCost::w2()).cost_value == doctest::Approx(9.0));
}

TEST_CASE("exact solver equals the permutation oracle") {
    std::vector<TransportCost> costs = {TransportCost::w2(), TransportCost::w2_truncated(4.0),
                                        TransportCost::w1_truncated(1.0),
                                        TransportCost::log_cost(0.5)};
    for (int d = 1; d <= 3; ++d) {
        for (std::uint64_t seed = 1; seed <= 4; ++seed) {
            EmpiricalMeasure A = random_cloud(6, d, seed);
            EmpiricalMeasure B = random_cloud(6, d, seed + 100, 1.5);
            for (const auto& c : costs) {
                CouplingPlan plan = solve_ot(A, B, c);
                double brute = brute_force_cost(A, B, c);
                CHECK(plan.cost_value == doctest::Approx(brute).epsilon(1e-9));
                CHECK(plan.marginal_error < 1e-9);
            }
        }
    }
    // n = 7 once, quadratic
    EmpiricalMeasure A = random_cloud(7, 2, 42);
    EmpiricalMeasure B = random_cloud(7, 2, 43);
    CHECK(solve_ot(A, B, TransportCost::w2()).cost_value ==
          doctest::Approx(brute_force_cost(A, B, TransportCost::w2())).epsilon(1e-9));
}

TEST_CASE("weighted 1-d quadratic transport equals the quantile coupling") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        EmpiricalMeasure A = random_cloud(23, 1, seed, 1.0, true);
        EmpiricalMeasure B = random_cloud(17, 1, seed + 7, 2.0, true);
        CouplingPlan plan = solve_ot(A, B, TransportCost::w2());
        CHECK(plan.cost_value ==
              doctest::Approx(quantile_coupling_cost_1d(A, B)).epsilon(1e-9));
        CHECK(plan.marginal_error < 1e-9);
        // the reported value is the plan paired with the cost matrix
        double recomputed = 0.0;
        for (const auto& e : plan.entries)
            recomputed += e.mass * (A.points.row(e.i) - B.points.row(e.j)).squaredNorm();
        CHECK(std::abs(recomputed - plan.cost_value) < 1e-9);
    }
}

TEST_CASE("sorted 1-d fast path agrees with the solver") {
    EmpiricalMeasure A = random_cloud(200, 1, 9);
    EmpiricalMeasure B = random_cloud(200, 1, 10);
    double fast = w2_sorted_1d(A, B);
    double lp = std::sqrt(solve_ot(A, B, TransportCost::w2()).cost_value);
    CHECK(fast == doctest::Approx(lp).epsilon(1e-9));
}

TEST_CASE("cost monotonicity and symmetry") {
    EmpiricalMeasure A = random_cloud(24, 2, 3);
    EmpiricalMeasure B = random_cloud(20, 2, 4, 1.7);
    double w2 = solve_ot(A, B, TransportCost::w2()).cost_value;
    double last = 0.0;
    for (double R : {0.5, 1.0, 2.0, 4.0, 16.0}) {
        double v = solve_ot(A, B, TransportCost::w2_truncated(R)).cost_value;
        CHECK(v >= last - 1e-12);
        CHECK(v <= w2 + 1e-12);
        last = v;
    }
    double lastD = std::numeric_limits<double>::infinity();
    for (double delta : {0.1, 0.5, 1.0, 2.0}) {
        double v = solve_ot(A, B, TransportCost::log_cost(delta)).cost_value;
        CHECK(v <= lastD + 1e-12);
        lastD = v;
    }
    for (const auto& c : {TransportCost::w2(), TransportCost::w2_truncated(2.0),
                          TransportCost::log_cost(0.5)}) {
        CHECK(solve_ot(A, B, c).cost_value ==
              doctest::Approx(solve_ot(B, A, c).cost_value).epsilon(1e-9));
    }
}

TEST_CASE("oversized problems are rejected with advice") {
    EmpiricalMeasure A = random_cloud(4000, 1, 1);
    CHECK_THROWS_WITH_AS(solve_ot(A, A, TransportCost::w2()),
                         doctest::Contains("subsample"), std::invalid_argument);
}

TEST_CASE("entropic point estimate approaches the exact value") {
    EmpiricalMeasure A = random_cloud(120, 2, 31);
    EmpiricalMeasure B = random_cloud(100, 2, 32, 1.6, true);
    double exact = std::sqrt(solve_ot(A, B, TransportCost::w2()).cost_value);
    double e_tight = w2_entropic(A, B, 0.002, 4000);
    double e_loose = w2_entropic(A, B, 0.05, 2000);
    CHECK(std::abs(e_tight - exact) < 0.01 * exact + 0.01);
    CHECK(std::abs(e_loose - exact) < 0.10 * exact + 0.05);
    CHECK_THROWS_AS(w2_entropic(A, B, -1.0), std::invalid_argument);
}

TEST_CASE("gaussian W2 oracle") {
    Eigen::VectorXd z1 = Eigen::VectorXd::Zero(1);
    Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
    CHECK(w2_gaussian_oracle(z1, one, z1, one) == doctest::Approx(0.0));
    CHECK(w2_gaussian_oracle(z1, one, z1, 4.0 * one) == doctest::Approx(1.0));
    for (int d : {1, 2, 3}) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
        Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
        for (double s : {0.25, 4.0}) {
            CHECK(w2_gaussian_oracle(z, I, z, s * I) ==
                  doctest::Approx(std::sqrt(double(d)) * std::abs(1.0 - std::sqrt(s)))
                      .epsilon(1e-12));
        }
    }
    // cross-check against the exact solver on samples
    MeasureSpec mu = make_gaussian(Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2));
    MeasureSpec nu = make_gaussian(Eigen::VectorXd::Zero(2),
                                   4.0 * Eigen::MatrixXd::Identity(2, 2));
    EmpiricalMeasure sa = sample(mu, 700, 21);
    EmpiricalMeasure sb = sample(nu, 700, 22);
    double emp = std::sqrt(solve_ot(sa, sb, TransportCost::w2()).cost_value);
    CHECK(std::abs(emp - std::sqrt(2.0)) / std::sqrt(2.0) < 0.1);
}

TEST_CASE("interpolation bound hand values") {
    EmpiricalMeasure A = cloud_1d({0.0});
    EmpiricalMeasure B = cloud_1d({1.0});
    SUBCASE("identical inputs leave the whole right side as slack") {
        SlackReport r = check_interpolation(A, A, 4.0, 1.0, 1.0);
        CHECK(r.lhs == 0.0);
        CHECK(r.slack == r.rhs);
        CHECK(r.slack > 0.0);
    }
    SUBCASE("quadratic variant") {
        SlackReport r = check_interpolation(A, B, 4.0, 1.0, 1.0);
        CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.log_cost == doctest::Approx(std::log(2.0)).epsilon(1e-12));
        // delta^2 e^{D} + R + R D / ln(1 + R^2/delta^2) = 2 + 4 + 4 ln2/ln17
        CHECK(r.rhs == doctest::Approx(6.9786021684729036).epsilon(1e-12));
        CHECK(r.slack > 0.0);
    }
    SUBCASE("first-order variant") {
        SlackReport r = check_interpolation(A, B, 4.0, 1.0, 1.0, true);
        CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-12));
        // delta e^{D} + R + R D / ln(1 + R/delta^2) = 2 + 4 + 4 ln2/ln5
        CHECK(r.rhs == doctest::Approx(7.7227062322935724).epsilon(1e-12));
    }
    CHECK_THROWS_AS(check_interpolation(A, B, -1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("interpolation bound sweep stays nonnegative") {
    int instance = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        int d = 1 + static_cast<int>(seed % 3);
        int n = 10 + static_cast<int>((seed * 7) % 41);
        EmpiricalMeasure A = random_cloud(n, d, seed, 1.0, seed % 2 == 0);
        EmpiricalMeasure B = random_cloud(n + 3, d, seed + 1000, 1.4, seed % 3 == 0);
        for (double R : {1.0, 4.0})
            for (double delta : {0.1, 1.0})
                for (double eps : {0.1, 1.0}) {
                    SlackReport r2 = check_interpolation(A, B, R, delta, eps, false);
                    CHECK(r2.slack >= -1e-9);
                    SlackReport r1 = check_interpolation(A, B, R, delta, eps, true);
                    CHECK(r1.slack >= -1e-9);
                    ++instance;
                }
    }
    CHECK(instance == 80);
}

TEST_CASE("optimized-epsilon corollary") {
    EmpiricalMeasure A = cloud_1d({0.0});
    EmpiricalMeasure B = cloud_1d({1.0});
    SUBCASE("identical inputs") {
        SlackReport r = check_eps_optimized(A, A, 4.0, 1.0);
        CHECK(r.slack == doctest::Approx(2.0 * 4.0 * 1.0));
    }
    SUBCASE("hand value") {
        SlackReport r = check_eps_optimized(A, B, 4.0, 1.0);
        CHECK(r.lhs == doctest::Approx(1.0).epsilon(1e-12));
        // 2R (delta + ln2 / ln 5) = 8 (1 + ln2/ln5)
        CHECK(r.rhs == doctest::Approx(11.445412464587145).epsilon(1e-12));
    }
    SUBCASE("delta must stay below R") {
        CHECK_THROWS_AS(check_eps_optimized(A, B, 1.0, 1.0), std::invalid_argument);
    }
    SUBCASE("sweep") {
        for (std::uint64_t seed = 2; seed <= 8; ++seed) {
            EmpiricalMeasure X = random_cloud(15, 2, seed);
            EmpiricalMeasure Y = random_cloud(12, 2, seed + 50, 2.0);
            for (double R : {1.0, 4.0})
                for (double delta : {0.1, 0.5}) {
                    SlackReport r = check_eps_optimized(X, Y, R, delta);
                    CHECK(r.slack >= -1e-9);
                }
        }
    }
}

TEST_CASE("truncation bridge") {
    MeasureSpec g1 = make_gaussian1d(0.0, 1.0);
    MeasureSpec g4 = make_gaussian1d(0.0, 4.0);
    EmpiricalMeasure A = sample(g1, 500, 3);
    EmpiricalMeasure B = sample(g4, 500, 4);
    double M = std::max(subexp_parameter(A, 8), subexp_parameter(B, 8));
    SUBCASE("identical clouds vanish on both sides") {
        TruncationReport r = check_truncation_lemma(A, A, M, 100.0);
        CHECK(r.w2_sq == 0.0);
        CHECK(r.slack >= 0.0);
    }
    SUBCASE("generous constant leaves the truncation inactive") {
        TruncationReport r = check_truncation_lemma(A, B, M, 100.0);
        CHECK(r.slack >= 0.0);
        CHECK(!r.constant_too_small);
        CHECK(r.implied_C <= 100.0);
    }
    SUBCASE("tiny constant is reported, not failed") {
        TruncationReport r = check_truncation_lemma(A, B, M, 1e-6);
        CHECK(r.constant_too_small == (r.slack < 0.0));
        CHECK(r.implied_C > 1e-6);
    }
}

TEST_CASE("coupled log cost") {
    DiffusionPair p;
    p.dimension = 1;
    p.x.drift = linear_drift(1, -1.0);
    p.x.noise = isotropic_noise(1, std::sqrt(2.0));
    p.y = p.x;
    MeasureSpec g1 = make_gaussian1d(0.0, 1.0);
    SUBCASE("identical pair gives exactly zero") {
        TrajectoryEnsemble e = simulate_coupled(p, InitialCondition::from_measure(g1), 1.0, 1e-2,
                                                400, 7, {1.0});
        auto [v, se] = coupled_log_cost(e, 1.0, 0.5);
        CHECK(v == 0.0);
        CHECK(se == 0.0);
    }
    SUBCASE("coupling upper-bounds the transport cost and shrinks with delta") {
        DiffusionPair q = p;
        q.y.noise = isotropic_noise(1, std::sqrt(2.0 * 0.25));
        TrajectoryEnsemble e = simulate_coupled(q, InitialCondition::from_measure(g1), 1.0, 1e-3,
                                                2000, 11, {1.0});
        auto [v01, se01] = coupled_log_cost(e, 1.0, 0.1);
        auto [v1, se1] = coupled_log_cost(e, 1.0, 1.0);
        CHECK(v1 < v01);
        CHECK(v01 > 0.0);
        EmpiricalMeasure mx = marginal_at(e, 1.0, WhichProcess::x);
        EmpiricalMeasure my = marginal_at(e, 1.0, WhichProcess::y);
        // subsample for the exact solve
        Eigen::MatrixXd px(500, 1), py(500, 1);
        for (int i = 0; i < 500; ++i) {
            px(i, 0) = mx.points(i * 4, 0);
            py(i, 0) = my.points(i * 4, 0);
        }
        double d01 = solve_ot(EmpiricalMeasure::uniform(px), EmpiricalMeasure::uniform(py),
                              TransportCost::log_cost(0.1))
                         .cost_value;
        CHECK(v01 >= d01 - 3.0 * se01 - 0.05);
        (void)se1;
    }
}

TEST_CASE("finite-time log-cost bound") {
    double s = 0.5;
    FiniteTimeScenario sc;
    sc.pair.dimension = 1;
    sc.pair.x.drift = linear_drift(1, -1.0);
    sc.pair.x.noise = isotropic_noise(1, std::sqrt(2.0));
    sc.pair.y.drift = linear_drift(1, -1.0);
    sc.pair.y.noise = isotropic_noise(1, std::sqrt(2.0 * s));
    sc.mu = make_gaussian1d(0.0, 1.0);
    sc.nu = make_gaussian1d(0.0, s);
    sc.p = p_infinity;
    sc.g_norm_2q = 1.0;  // drift is 1-Lipschitz, noise constant, floor active
    sc.n_traj = 4000;
    sc.dt = 1e-3;
    sc.seed = 19;
    double beta = std::sqrt(2.0) * (1.0 - std::sqrt(s));
    SUBCASE("identical processes leave the full right side") {
        FiniteTimeScenario id = sc;
        id.pair.y = id.pair.x;
        id.nu = id.mu;
        FiniteTimeReport r = check_finite_time_bound(id, 1.0, 0.3);
        CHECK(r.lhs == 0.0);
        CHECK(r.slack == r.rhs);
        CHECK(r.rhs > 0.0);
        SUBCASE("right side grows linearly in t") {
            FiniteTimeReport r2 = check_finite_time_bound(id, 2.0, 0.3);
            CHECK(r2.rhs == doctest::Approx(2.0 * r.rhs).epsilon(1e-9));
        }
    }
    SUBCASE("scaled pair at delta = beta") {
        FiniteTimeReport r = check_finite_time_bound(sc, 1.0, beta);
        CHECK(r.slack >= -3.0 * r.lhs_se);
        CHECK(r.density_norm == doctest::Approx(1.0 / std::sqrt(s)).epsilon(1e-6));
    }
    SUBCASE("missing witness norm is refused") {
        FiniteTimeScenario bad = sc;
        bad.g_norm_2q = 0.0;
        CHECK_THROWS_AS(check_finite_time_bound(bad, 1.0, beta), std::invalid_argument);
    }
}
