#include "imstab/bounds.hpp"

#include <cmath>
#include <stdexcept>

#include "imstab/lusin.hpp"
#include "imstab/transport.hpp"

namespace imstab {

DiscrepancyReport discrepancy_beta(const DiffusionPair& pair, const MeasureSpec& nu, long n,
                                   std::uint64_t seed) {
    FieldDiscrepancy fd = field_discrepancy(pair, nu, n, seed);
    DiscrepancyReport rep;
    rep.drift_l1 = fd.drift_l1;
    rep.drift_l1_se = fd.drift_l1_se;
    rep.drift_l2 = fd.drift_l2;
    rep.drift_l2_se = fd.drift_l2_se;
    rep.diff_l2 = fd.diff_l2;
    rep.diff_l2_se = fd.diff_l2_se;
    return rep;
}

double theorem1_rhs(double R, double beta, double g_norm_2q, double density_norm_p, double kappa,
                    double C_H, double m2_mu, double m2_nu) {
    if (!(R > 1.0))
        throw std::invalid_argument("theorem1_rhs: requires R > 1 (got R=" + std::to_string(R) +
                                    ")");
    if (!(beta > 0.0)) throw std::invalid_argument("theorem1_rhs: requires beta > 0");
    double inner = std::log1p(R / beta);
    if (inner < 1.0 - 1e-12)
        throw std::invalid_argument(
            "theorem1_rhs: ln(1+R/beta) must be at least 1 so the iterated log is nonnegative "
            "(R/beta too small)");
    if (!(kappa > 0.0) || !(C_H > 0.0))
        throw std::invalid_argument("theorem1_rhs: kappa and C_H must be positive");
    if (!(m2_mu + m2_nu > 0.0))
        throw std::invalid_argument("theorem1_rhs: second moments must be positive");
    if (!std::isfinite(g_norm_2q) || !std::isfinite(density_norm_p))
        throw std::invalid_argument("theorem1_rhs: witness or density norm not finite");
    double numer = std::log(std::max(inner, 1.0)) + std::log(m2_mu + m2_nu) + kappa * R;
    return 100.0 * C_H * C_H * R * g_norm_2q * g_norm_2q * density_norm_p * numer /
           (kappa * inner);
}

double theorem2_rhs(double L, double kappa, double C_H, double beta) {
    if (!(kappa > 0.0) || !(C_H > 0.0) || L < 0.0 || beta < 0.0)
        throw std::invalid_argument("theorem2_rhs: arguments out of range");
    return 15.0 * std::pow(C_H, (4.0 * L * L + 1.0) / (2.0 * kappa)) * beta * (L / kappa + 1.0);
}

Theorem3Result theorem3_rhs(double alpha, int d, double M, double beta, double density_norm,
                            Theorem3Variant variant, std::optional<double> L, double C) {
    if (!(alpha > 0.0 && alpha <= 1.0))
        throw std::invalid_argument("theorem3_rhs: alpha must lie in (0,1]");
    Theorem3Result res;
    if (variant == Theorem3Variant::lipschitz) {
        if (!L) throw std::invalid_argument("theorem3_rhs: lipschitz variant needs L");
        if (beta < 0.0) throw std::invalid_argument("theorem3_rhs: beta must be nonnegative");
        res.value = 100.0 * std::pow(alpha, -(4.0 * (*L) * (*L) + 1.0)) * (2.0 * (*L) + 1.0) * beta;
        return res;
    }
    if (!(M > 1.0))
        throw std::invalid_argument("theorem3_rhs: requires M > 1 (ln M must be positive)");
    if (!(beta > 0.0)) throw std::invalid_argument("theorem3_rhs: requires beta > 0");
    double inner = std::log1p(M / beta);
    double numer = std::log(std::max(inner, 1.0 + 1e-15)) + M * std::log(M);
    double alpha_pow = variant == Theorem3Variant::general ? std::pow(alpha, -6.0)
                                                           : std::pow(alpha, -20.0);
    double dim_pow = variant == Theorem3Variant::general ? std::pow(double(d), 3.0)
                                                         : std::pow(double(d), 3.5);
    res.value = C * alpha_pow * dim_pow * M * std::log(M) * density_norm * numer / inner;
    res.dimension_condition_unverified = variant == Theorem3Variant::radial;
    return res;
}

namespace {

// Equilibrium samples for one replicate. The same stream feeds both
// samplers (common random numbers): identical scenarios then yield
// identical clouds and an exactly-zero distance estimate.
std::pair<EmpiricalMeasure, EmpiricalMeasure> equilibrium_pair(const ScenarioSpec& sc, int n,
                                                               int replicate) {
    if (sc.analytic_equilibrium) {
        std::uint64_t stream = 100 + std::uint64_t(replicate);
        return {sample(sc.mu, n, sc.seed, stream), sample(sc.nu, n, sc.seed, stream)};
    }
    TrajectoryEnsemble ens = simulate_coupled(
        sc.pair, InitialCondition::at_point(Eigen::VectorXd::Zero(sc.dimension)), sc.burn_in_T,
        sc.dt, n, sc.seed + 7000 + std::uint64_t(replicate), {sc.burn_in_T});
    return {marginal_at(ens, sc.burn_in_T, WhichProcess::x),
            marginal_at(ens, sc.burn_in_T, WhichProcess::y)};
}

}  // namespace

BoundReport verify_scenario(const ScenarioSpec& sc) {
    BoundReport rep;
    rep.theorem = sc.theorem;
    rep.dimension = sc.dimension;
    rep.R = sc.R;
    rep.p = sc.p;
    rep.q = std::isinf(sc.p) ? 1.0 : sc.p / (sc.p - 1.0);
    rep.L = sc.L;
    rep.C = sc.theorem3_C;
    rep.equilibrium_source = sc.analytic_equilibrium ? "analytic" : "burn-in";

    // kappa and C_H
    if (sc.fit_kappa) {
        ConvergenceProfile prof = estimate_convergence(sc.pair.x, sc.mu, sc.fit_x0, sc.fit_times,
                                                       sc.n_traj, sc.dt, sc.seed + 77);
        if (!prof.fit_ok)
            throw std::runtime_error("verify_scenario: convergence fit refused (noise floor)");
        rep.kappa = prof.fitted_kappa;
        rep.C_H = prof.fitted_CH;
        rep.kappa_source = "fitted";
    } else {
        rep.kappa = sc.kappa;
        rep.C_H = sc.C_H;
        rep.kappa_source = "analytic";
    }

    // witness norm for the x-process fields
    if (sc.empirical_g) {
        EmpiricalMeasure pts = sample(sc.mu, static_cast<int>(sc.witness_samples), sc.seed, 901);
        const int d = sc.dimension;
        auto stacked = [&](const Eigen::VectorXd& x) {
            Eigen::VectorXd a(d);
            Eigen::MatrixXd D(d, d);
            sc.pair.x.drift(x, a);
            sc.pair.x.noise(x, D);
            Eigen::MatrixXd out(d, d + 1);
            out.col(0) = a;
            out.rightCols(d) = D;
            return out;
        };
        double p_obj = 2.0 * rep.q;  // the bound consumes ||g||_{L^{2q}}
        LusinWitness w = estimate_lusin_witness(pts.points, stacked, pts.weights, p_obj);
        rep.g_norm = w.norm_p;
        rep.g_source = "lusin-empirical";
    } else {
        rep.g_norm = sc.g_norm;
        rep.g_source = "analytic";
    }

    // discrepancies: theorem 3 weighs the diffusion gap under mu, the others
    // weigh everything under nu
    DiscrepancyReport disc =
        discrepancy_beta(sc.pair, sc.theorem == 3 ? sc.mu : sc.nu, sc.n_traj, sc.seed + 5);
    rep.beta = sc.theorem == 1   ? disc.beta_thm1()
               : sc.theorem == 2 ? disc.beta_thm2()
                                 : disc.diff_l2;

    rep.m2_mu = std::sqrt(second_moment(sc.mu));
    rep.m2_nu = std::sqrt(second_moment(sc.nu));
    rep.M = std::max(rep.m2_mu * rep.m2_mu, rep.m2_nu * rep.m2_nu);
    if (sc.mu.convexity_alpha) rep.alpha = *sc.mu.convexity_alpha;

    if (sc.theorem == 3 && sc.t3_variant == Theorem3Variant::general && !std::isinf(sc.p))
        throw std::invalid_argument(
            "verify_scenario: the general clause uses the sup relative-density norm (set p = "
            "inf)");
    if (sc.theorem == 3 && sc.t3_variant == Theorem3Variant::radial && sc.p != 2.0)
        throw std::invalid_argument(
            "verify_scenario: the radial clause uses the L2 relative-density norm (set p = 2)");
    if (sc.theorem == 1 || (sc.theorem == 3 && sc.t3_variant != Theorem3Variant::lipschitz))
        rep.density_norm = relative_density_norm(sc.nu, sc.mu, sc.p);

    // LHS by replicated sampling + exact OT
    TransportCost metric_cost = sc.theorem == 1 ? TransportCost::w2_truncated(sc.R)
                                                : TransportCost::w2();
    rep.metric = sc.theorem == 1 ? "truncated-W2-squared"
                 : sc.theorem == 2 ? "W2"
                                   : "W2-squared";
    std::vector<double> lhs_reps;
    for (int r = 0; r < sc.n_replicates; ++r) {
        auto [sx, sy] = equilibrium_pair(sc, sc.n_samples, r);
        double cost = solve_ot(sy, sx, metric_cost).cost_value;
        lhs_reps.push_back(sc.theorem == 2 ? std::sqrt(cost) : cost);
    }
    double mean = 0.0;
    for (double v : lhs_reps) mean += v;
    mean /= double(lhs_reps.size());
    double var = 0.0;
    for (double v : lhs_reps) var += (v - mean) * (v - mean);
    var /= std::max<std::size_t>(1, lhs_reps.size() - 1);
    rep.lhs = mean;
    rep.lhs_se = std::sqrt(var / double(lhs_reps.size()));

    if (sc.mu.is_gaussian && sc.nu.is_gaussian) {
        double w2 = w2_gaussian_oracle(sc.mu.gaussian_mean, sc.mu.gaussian_cov,
                                       sc.nu.gaussian_mean, sc.nu.gaussian_cov);
        rep.lhs_oracle = sc.theorem == 2 ? w2 : w2 * w2;  // truncation inactive at these scales
    }

    switch (sc.theorem) {
        case 1:
            rep.rhs = theorem1_rhs(sc.R, rep.beta, rep.g_norm, rep.density_norm, rep.kappa,
                                   rep.C_H, rep.m2_mu, rep.m2_nu);
            break;
        case 2:
            rep.rhs = theorem2_rhs(sc.L, rep.kappa, rep.C_H, rep.beta);
            break;
        case 3: {
            if (!(rep.alpha > 0.0))
                throw std::invalid_argument("verify_scenario: theorem 3 needs convexity alpha");
            Theorem3Result t3 =
                theorem3_rhs(rep.alpha, sc.dimension, rep.M, rep.beta, rep.density_norm,
                             sc.t3_variant,
                             sc.t3_variant == Theorem3Variant::lipschitz
                                 ? std::optional<double>(sc.L)
                                 : std::nullopt,
                             sc.theorem3_C);
            rep.rhs = t3.value;
            rep.t3_dimension_flag = t3.dimension_condition_unverified;
            break;
        }
        default:
            throw std::invalid_argument("verify_scenario: theorem must be 1, 2 or 3");
    }

    rep.slack = rep.rhs - rep.lhs;
    if (rep.slack >= 3.0 * rep.lhs_se)
        rep.verdict = "holds";
    else if (rep.slack <= -3.0 * rep.lhs_se)
        rep.verdict = "violated";
    else
        rep.verdict = "inconclusive";
    return rep;
}

}  // namespace imstab
