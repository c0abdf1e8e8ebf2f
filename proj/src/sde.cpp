#include "imstab/sde.hpp"

#include <Eigen/Eigenvalues>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <stdexcept>

#include "imstab/parallel.hpp"
#include "imstab/rng.hpp"

namespace imstab {

namespace {
constexpr double blow_up_norm = 1e8;
}

VecField linear_drift(int d, double coeff) {
    (void)d;
    return [coeff](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = coeff * x; };
}

VecField drift_from_scalar(std::function<double(double)> a) {
    return [a = std::move(a)](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out.resize(1);
        out[0] = a(x[0]);
    };
}

MatField isotropic_noise(int d, double value) {
    Eigen::MatrixXd m = value * Eigen::MatrixXd::Identity(d, d);
    return [m](const Eigen::VectorXd&, Eigen::MatrixXd& out) { out = m; };
}

MatField noise_from_scalar(std::function<double(double)> s) {
    return [s = std::move(s)](const Eigen::VectorXd& x, Eigen::MatrixXd& out) {
        out.resize(1, 1);
        out(0, 0) = s(x[0]);
    };
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& S) {
    if (S.rows() != S.cols()) throw std::invalid_argument("spd_sqrt: matrix not square");
    double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-8)
        throw std::invalid_argument("spd_sqrt: matrix asymmetric beyond 1e-8 (" +
                                    std::to_string(asym) + ")");
    Eigen::MatrixXd Ssym = 0.5 * (S + S.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ssym);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-10)
            throw std::invalid_argument("spd_sqrt: negative eigenvalue " + std::to_string(ev[i]));
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::size_t TrajectoryEnsemble::time_index(double t, bool* exact) const {
    std::size_t best = 0;
    double best_d = std::abs(times[0] - t);
    for (std::size_t i = 1; i < times.size(); ++i) {
        double d = std::abs(times[i] - t);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    if (exact) *exact = best_d <= 0.5 * dt + 1e-12;
    return best;
}

InitialCondition InitialCondition::at_point(Eigen::VectorXd x0) {
    InitialCondition ic;
    ic.point = std::move(x0);
    return ic;
}

InitialCondition InitialCondition::from_measure(const MeasureSpec& m) {
    InitialCondition ic;
    ic.measure_sampler = m.sampler;
    return ic;
}

TrajectoryEnsemble simulate_coupled(const DiffusionPair& pair, const InitialCondition& init,
                                    double T, double dt, long n_traj, std::uint64_t seed,
                                    const std::vector<double>& record_times, bool shared_noise) {
    if (!(dt > 0.0)) throw std::invalid_argument("simulate_coupled: dt must be positive");
    if (!(T >= dt)) throw std::invalid_argument("simulate_coupled: T must be at least dt");
    if (n_traj < 1) throw std::invalid_argument("simulate_coupled: need at least one trajectory");
    const int d = pair.dimension;

    long n_steps = std::lround(T / dt);
    TrajectoryEnsemble ens;
    ens.dt = dt;
    ens.seed = seed;
    ens.dimension = d;
    ens.n_traj = n_traj;
    std::vector<long> record_steps;
    for (double t : record_times) {
        long s = std::lround(t / dt);
        s = std::max(0L, std::min(s, n_steps));
        record_steps.push_back(s);
        ens.times.push_back(double(s) * dt);
    }
    const std::size_t n_rec = record_steps.size();
    ens.paths_x.assign(std::size_t(n_traj) * n_rec * d, 0.0);
    ens.paths_y.assign(std::size_t(n_traj) * n_rec * d, 0.0);

    Eigen::MatrixXd init_pts;
    if (init.measure_sampler) {
        init_pts = init.measure_sampler(static_cast<int>(n_traj), seed, 0xD1Cull).points;
        if (init_pts.cols() != d)
            throw std::invalid_argument("simulate_coupled: initial measure has wrong dimension");
    }

    std::atomic<long> blow_count(0);
    std::mutex blow_mutex;
    double first_blow_time = -1.0;

    parallel_for(n_traj, [&](long k) {
        CounterRng rng(seed, rng_stream::tag(rng_stream::trajectory, std::uint64_t(k)));
        CounterRng rng_alt(seed, rng_stream::tag(rng_stream::trajectory_alt, std::uint64_t(k)));
        Eigen::VectorXd x(d), y(d), ax(d), ay(d), xi(d), eta(d);
        Eigen::MatrixXd Dx(d, d), Dy(d, d);
        if (init.measure_sampler)
            x = init_pts.row(k).transpose();
        else
            x = init.point;
        y = x;
        double sdt = std::sqrt(dt);
        std::size_t rec = 0;
        bool frozen = false;
        double blow_time = -1.0;
        auto record_if_due = [&](long step) {
            while (rec < n_rec && record_steps[rec] == step) {
                std::size_t base = (std::size_t(k) * n_rec + rec) * d;
                for (int c = 0; c < d; ++c) {
                    ens.paths_x[base + c] = x[c];
                    ens.paths_y[base + c] = y[c];
                }
                ++rec;
            }
        };
        for (long s = 0; s < n_steps; ++s) {
            record_if_due(s);
            if (!frozen) {
                pair.x.drift(x, ax);
                pair.y.drift(y, ay);
                pair.x.noise(x, Dx);
                pair.y.noise(y, Dy);
                rng.normal_fill(std::uint64_t(s) * d, xi, d);
                if (shared_noise)
                    eta = xi;
                else
                    rng_alt.normal_fill(std::uint64_t(s) * d, eta, d);
                x += ax * dt + sdt * (Dx * xi);
                y += ay * dt + sdt * (Dy * eta);
                if (!x.allFinite() || !y.allFinite() || x.norm() > blow_up_norm ||
                    y.norm() > blow_up_norm) {
                    frozen = true;
                    blow_time = double(s + 1) * dt;
                    // freeze at the last finite state
                    for (int c = 0; c < d; ++c) {
                        if (!std::isfinite(x[c])) x[c] = blow_up_norm;
                        if (!std::isfinite(y[c])) y[c] = blow_up_norm;
                    }
                }
            }
        }
        record_if_due(n_steps);
        if (frozen) {
            blow_count.fetch_add(1);
            std::lock_guard<std::mutex> g(blow_mutex);
            if (first_blow_time < 0.0 || blow_time < first_blow_time)
                first_blow_time = blow_time;
        }
    });

    ens.blow_up.trajectories_affected = blow_count.load();
    ens.blow_up.first_time = first_blow_time;
    return ens;
}

EmpiricalMeasure marginal_at(const TrajectoryEnsemble& e, double t, WhichProcess which,
                             bool allow_blowup) {
    if (e.blow_up.any() && !allow_blowup)
        throw std::runtime_error("marginal_at: ensemble contains " +
                                 std::to_string(e.blow_up.trajectories_affected) +
                                 " blown-up trajectories (first at t=" +
                                 std::to_string(e.blow_up.first_time) + ")");
    bool exact = false;
    std::size_t idx = e.time_index(t, &exact);
    if (!exact)
        std::cerr << "[imstab] warning: t=" << t << " not recorded, using nearest t="
                  << e.times[idx] << "\n";
    Eigen::MatrixXd pts(e.n_traj, e.dimension);
    for (long k = 0; k < e.n_traj; ++k)
        for (int c = 0; c < e.dimension; ++c)
            pts(k, c) = which == WhichProcess::x ? e.x_at(k, idx, c) : e.y_at(k, idx, c);
    return EmpiricalMeasure::uniform(std::move(pts));
}

std::pair<double, double> generator_residual(const VecField& drift, const MatField& tau,
                                             const MeasureSpec& m, const SmoothFunction& f,
                                             long n, std::uint64_t seed) {
    EmpiricalMeasure s = m.sampler(static_cast<int>(n), seed, 0x6e7ull);
    const int d = m.dimension;
    std::vector<double> vals(n);
    parallel_for(n, [&](long i) {
        Eigen::VectorXd x = s.points.row(i).transpose();
        Eigen::VectorXd a(d);
        Eigen::MatrixXd t(d, d);
        drift(x, a);
        tau(x, t);
        double lf = a.dot(f.gradient(x)) + t.cwiseProduct(f.hessian(x)).sum();
        vals[i] = lf;
    });
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= double(n - 1);
    return {mean, std::sqrt(var / double(n))};
}

FieldDiscrepancy field_discrepancy(const DiffusionPair& pair, const MeasureSpec& nu, long n,
                                   std::uint64_t seed) {
    EmpiricalMeasure s = nu.sampler(static_cast<int>(n), seed, 0xD15Cull);
    const int d = pair.dimension;
    std::vector<double> v1(n), v2(n), vd(n);
    parallel_for(n, [&](long i) {
        Eigen::VectorXd x = s.points.row(i).transpose();
        Eigen::VectorXd ax(d), bx(d);
        Eigen::MatrixXd Dx(d, d), Dy(d, d);
        pair.x.drift(x, ax);
        pair.y.drift(x, bx);
        pair.x.noise(x, Dx);
        pair.y.noise(x, Dy);
        double nd = (ax - bx).norm();
        v1[i] = nd;
        v2[i] = nd * nd;
        vd[i] = (Dx - Dy).squaredNorm();
    });
    auto mean_se = [n](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= double(n);
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= std::max<long>(1, n - 1);
        return std::pair<double, double>(mean, std::sqrt(var / double(n)));
    };
    auto [m1, se1] = mean_se(v1);
    auto [m2, se2] = mean_se(v2);
    auto [md, sed] = mean_se(vd);
    FieldDiscrepancy out;
    out.drift_l1 = m1;
    out.drift_l1_se = se1;
    out.drift_l2 = std::sqrt(m2);
    out.drift_l2_se = m2 > 0.0 ? 0.5 * se2 / std::sqrt(m2) : 0.0;
    out.diff_l2 = std::sqrt(md);
    out.diff_l2_se = md > 0.0 ? 0.5 * sed / std::sqrt(md) : 0.0;
    return out;
}

}  // namespace imstab
