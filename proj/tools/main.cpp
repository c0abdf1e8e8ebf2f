// Experiment runner: simulation, exact transport, moment maps, kernel
// checks, witness estimation and bound verification, driven by config files.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "imstab/config.hpp"
#include "imstab/expr.hpp"
#include "imstab/io.hpp"
#include "imstab/lusin.hpp"
#include "imstab/moment_map.hpp"
#include "imstab/parallel.hpp"
#include "imstab/scenario.hpp"
#include "imstab/stein.hpp"
#include "imstab/transport.hpp"

namespace fs = std::filesystem;
using namespace imstab;

namespace {

struct GlobalArgs {
    std::uint64_t seed = 1;
    bool seed_set = false;
    int threads = 1;
    std::string out = "out";
    bool out_set = false;
};

std::optional<std::uint64_t> seed_opt(const GlobalArgs& g) {
    return g.seed_set ? std::optional<std::uint64_t>(g.seed) : std::nullopt;
}

std::optional<std::string> out_opt(const GlobalArgs& g) {
    return g.out_set ? std::optional<std::string>(g.out) : std::nullopt;
}

void apply_threads(const GlobalArgs& g) {
    if (const char* env = std::getenv("IMSTAB_THREADS"))
        set_threads(std::atoi(env));
    else
        set_threads(g.threads);
}

MeasureSpec measure_from_config(const std::string& config_path, const std::string& name) {
    ConfigTable root = ConfigTable::parse_file(config_path);
    const ConfigTable& measures = root.table("measure");
    auto it = measures.tables.find(name);
    if (it == measures.tables.end())
        throw std::invalid_argument("no [measure." + name + "] in " + config_path);
    measures.mark_consumed("[" + name + "]");
    return build_measure(it->second);
}

int cmd_transport(const std::string& a_path, const std::string& b_path, const std::string& cost,
                  double R, double delta, const std::string& out_path) {
    EmpiricalMeasure A = read_point_cloud_csv(a_path);
    EmpiricalMeasure B = read_point_cloud_csv(b_path);
    TransportCost tc;
    if (cost == "w2")
        tc = TransportCost::w2();
    else if (cost == "w2trunc")
        tc = TransportCost::w2_truncated(R);
    else if (cost == "w1trunc")
        tc = TransportCost::w1_truncated(R);
    else if (cost == "logcost")
        tc = TransportCost::log_cost(delta);
    else
        throw std::invalid_argument("unknown cost '" + cost +
                                    "' (w2 | w2trunc | w1trunc | logcost)");
    CouplingPlan plan = solve_ot(A, B, tc);
    ordered_json j;
    j["cost"] = cost;
    if (cost == "w2trunc" || cost == "w1trunc") j["R"] = R;
    if (cost == "logcost") j["delta"] = delta;
    j["cost_value"] = plan.cost_value;
    j["plan_nnz"] = plan.entries.size();
    j["marginal_err"] = plan.marginal_error;
    write_json_atomic(out_path, j);
    std::cout << "cost_value=" << plan.cost_value << " nnz=" << plan.entries.size()
              << " marginal_err=" << plan.marginal_error << "\n";
    return plan.marginal_error <= 1e-9 ? 0 : 1;
}

int cmd_moment_map(const std::string& config, const std::string& measure_name, int nodes,
                   double half_width, const std::string& out_dir) {
    MeasureSpec target = measure_from_config(config, measure_name);
    MomentMapParams params;
    params.nodes = nodes;
    params.half_width_sigmas = half_width;
    MomentMap1D map = solve_moment_map_1d(target, params);

    fs::create_directories(out_dir);
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < map.grid.size(); ++i)
        rows.push_back({map.grid[i], map.phi[i], map.phi_prime[i], map.phi_second[i],
                        map.source_cdf[i]});
    write_csv(out_dir + "/moment_map.csv", {"x", "phi", "phi_prime", "phi_second", "G"}, rows);

    double ma = monge_ampere_residual(map);
    double pf = pushforward_residual(map);
    bool residuals_ok = ma < 1e-6 && pf < 1e-6;
    ordered_json j;
    j["measure"] = measure_name;
    j["nodes"] = nodes;
    j["half_width_sigmas"] = half_width;
    j["monge_ampere_residual"] = ma;
    j["pushforward_residual"] = pf;
    j["phi_at_zero"] = map.phi_at_zero;
    j["centering_residual"] = map.centering_residual;
    if (target.convexity_alpha) {
        HessianBoundsReport hb = hessian_bounds_check(map, *target.convexity_alpha);
        j["hessian_bounds"] = ordered_json{{"alpha", hb.alpha},
                                           {"min_phi_second", hb.min_second},
                                           {"max_phi_second", hb.max_second},
                                           {"pass", hb.pass}};
        residuals_ok = residuals_ok && hb.pass;
    }
    write_json_atomic(out_dir + "/moment_map.json", j);
    std::cout << "MA residual " << ma << ", pushforward residual " << pf << "\n";
    return residuals_ok ? 0 : 1;
}

int cmd_stein_check(const std::string& config, const std::string& measure_name,
                    const std::string& kernel_kind, long n, std::uint64_t seed,
                    const std::string& out_path) {
    MeasureSpec target = measure_from_config(config, measure_name);
    SteinKernelField kernel = [&] {
        if (kernel_kind == "moment_map")
            return kernel_from_moment_map(solve_moment_map_1d(target));
        if (kernel_kind == "closed_form") return kernel_closed_form_1d(target);
        if (kernel_kind == "identity")
            return SteinKernelField::constant(
                Eigen::MatrixXd::Identity(target.dimension, target.dimension));
        throw std::invalid_argument("unknown kernel '" + kernel_kind +
                                    "' (moment_map | closed_form | identity)");
    }();
    ordered_json results = ordered_json::array();
    bool ok = true;
    for (const SmoothFunction& f : test_function_battery(target.dimension)) {
        ResidualEstimate r = stein_identity_residual(target, kernel, f, n, seed);
        ordered_json e;
        e["f"] = f.name;
        e["residual"] = r.value;
        e["se"] = r.se;
        e["clip_fraction"] = r.clip_fraction;
        e["flagged"] = r.flagged;
        ok = ok && !r.flagged;
        if (target.dimension == 1) {
            double q = stein_identity_residual_quadrature(target, kernel, f);
            e["quadrature_residual"] = q;
            ok = ok && std::abs(q) < 1e-6;
        }
        results.push_back(e);
        std::cout << f.name << ": " << r.value << " +- " << r.se << "\n";
    }
    ordered_json j;
    j["measure"] = measure_name;
    j["kernel"] = kernel_kind;
    j["n"] = n;
    j["results"] = results;
    write_json_atomic(out_path, j);
    return ok ? 0 : 1;
}

int cmd_lusin(const std::string& points_path, const std::string& field_expr, double p,
              const std::string& out_path) {
    EmpiricalMeasure pts = read_point_cloud_csv(points_path);
    if (pts.dim() != 1)
        throw std::invalid_argument("lusin: expression fields are 1-d; give a 1-d cloud");
    Expr f = Expr::parse(field_expr);
    auto field = [&f](const Eigen::VectorXd& x) {
        Eigen::MatrixXd out(1, 1);
        out(0, 0) = f.value(x[0]);
        return out;
    };
    LusinWitness w = estimate_lusin_witness(pts.points, field, pts.weights, p);
    ordered_json j;
    j["field"] = field_expr;
    j["p"] = p;
    j["norm_p"] = w.norm_p;
    j["objective"] = w.objective;
    j["kkt_residual"] = w.kkt_residual;
    j["active_pairs"] = w.active_pairs;
    j["converged"] = w.converged;
    write_json_atomic(out_path, j);
    std::cout << "norm_p=" << w.norm_p << " kkt=" << w.kkt_residual
              << " active_pairs=" << w.active_pairs << "\n";
    return w.converged && w.kkt_residual < 1e-6 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stability diagnostics for invariant measures of diffusions"};
    app.require_subcommand(1);
    app.fallthrough();
    GlobalArgs g;
    CLI::Option* seed_opt_ptr = app.add_option("--seed", g.seed, "seed for all randomized work");
    CLI::Option* threads_opt_ptr =
        app.add_option("--threads", g.threads, "worker threads (env IMSTAB_THREADS overrides)");
    CLI::Option* out_opt_ptr = app.add_option("--out", g.out, "output directory or file");

    // config-driven runners
    std::string config_path;
    auto* sim = app.add_subcommand("simulate", "coupled ensemble from a config");
    sim->add_option("--config", config_path, "experiment config")->required();
    bool dump_paths = false;
    sim->add_flag("--dump-paths", dump_paths, "write the full path ensemble CSV");

    auto* verify = app.add_subcommand("verify-bounds", "evaluate one bound scenario");
    std::string scenario_path;
    int theorem = 0;
    verify->add_option("--scenario", scenario_path, "scenario config file")->required();
    verify->add_option("--theorem", theorem, "1, 2 or 3 (overrides the config)");

    auto* sweep = app.add_subcommand("sweep", "run a scenario family over parameter values");
    sweep->add_option("--config", config_path, "sweep config")->required();

    auto* ft = app.add_subcommand("finite-time", "coupled log-cost bound at finite times");
    ft->add_option("--config", config_path, "finite-time config")->required();

    // direct tools
    auto* tr = app.add_subcommand("transport", "exact OT between two point clouds");
    std::string a_path, b_path, cost = "w2";
    double R = 4.0, delta = 1.0;
    tr->add_option("--a", a_path, "first cloud CSV")->required();
    tr->add_option("--b", b_path, "second cloud CSV")->required();
    tr->add_option("--cost", cost, "w2 | w2trunc | w1trunc | logcost");
    tr->add_option("--R", R, "truncation level");
    tr->add_option("--delta", delta, "logarithmic cost scale");

    auto* mm = app.add_subcommand("moment-map", "solve the 1-d convex potential of a target");
    std::string measure_name = "mu";
    int nodes = 4097;
    double half_width = 8.0;
    mm->add_option("--config", config_path, "config with [measure.*] blocks")->required();
    mm->add_option("--measure", measure_name, "target measure name");
    mm->add_option("--nodes", nodes, "grid nodes (odd)");
    mm->add_option("--half-width", half_width, "grid half width in target sigmas");

    auto* sk = app.add_subcommand("stein-check", "kernel identity residuals over the battery");
    std::string kernel_kind = "moment_map";
    long n_samples = 100000;
    sk->add_option("--config", config_path, "config with [measure.*] blocks")->required();
    sk->add_option("--measure", measure_name, "target measure name");
    sk->add_option("--kernel", kernel_kind, "moment_map | closed_form | identity");
    sk->add_option("--n", n_samples, "Monte Carlo sample size");

    auto* lu = app.add_subcommand("lusin", "empirical witness for a 1-d field");
    std::string field_expr = "x";
    double p_exp = 2.0;
    lu->add_option("--points", a_path, "point cloud CSV")->required();
    lu->add_option("--field", field_expr, "field expression in x")->required();
    lu->add_option("--p", p_exp, "witness norm exponent (>= 2)");

    CLI11_PARSE(app, argc, argv);
    g.seed_set = seed_opt_ptr->count() > 0;
    g.out_set = out_opt_ptr->count() > 0;
    apply_threads(g);

    try {
        RunOverrides ov;
        ov.seed = seed_opt(g);
        ov.out_dir = out_opt(g);
        if (threads_opt_ptr->count() > 0) ov.threads = g.threads;
        ov.dump_paths = dump_paths;
        if (sim->parsed()) return run_experiment(config_path, ov);
        if (verify->parsed()) {
            if (theorem != 0) ov.theorem = theorem;
            return run_experiment(scenario_path, ov);
        }
        if (sweep->parsed() || ft->parsed()) return run_experiment(config_path, ov);
        if (tr->parsed())
            return cmd_transport(a_path, b_path, cost, R, delta,
                                 g.out_set ? g.out : "transport.json");
        if (mm->parsed())
            return cmd_moment_map(config_path, measure_name, nodes, half_width,
                                  g.out_set ? g.out : "out");
        if (sk->parsed())
            return cmd_stein_check(config_path, measure_name, kernel_kind, n_samples, g.seed,
                                   g.out_set ? g.out : "stein_check.json");
        if (lu->parsed())
            return cmd_lusin(a_path, field_expr, p_exp, g.out_set ? g.out : "lusin.json");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
