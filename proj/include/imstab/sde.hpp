#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "imstab/measures.hpp"
#include "imstab/test_functions.hpp"

namespace imstab {

// In-place field evaluation keeps the Euler loop allocation-free.
using VecField = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;
using MatField = std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)>;

// One diffusion: dX = drift(X) dt + noise(X) dB. `noise` is the literal
// Brownian coefficient matrix (for the standard 1-d OU process with unit
// stationary variance it is the constant sqrt(2)).
struct DiffusionHalf {
    VecField drift;
    MatField noise;
};

struct DiffusionPair {
    DiffusionHalf x, y;
    int dimension = 0;
};

VecField linear_drift(int d, double coeff);           // a(x) = coeff * x
VecField drift_from_scalar(std::function<double(double)> a);  // 1-d
MatField isotropic_noise(int d, double value);        // value * I
MatField noise_from_scalar(std::function<double(double)> s);  // 1-d

// Symmetric PSD square root via eigendecomposition; eigenvalues in
// [-1e-10, 0) are clamped to zero, asymmetry beyond 1e-8 is rejected.
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& S);

struct BlowUpDiagnostic {
    long trajectories_affected = 0;
    double first_time = -1.0;
    bool any() const { return trajectories_affected > 0; }
};

// Coupled ensemble storage: paths_x/paths_y are (n_traj * n_times * d),
// trajectory-major.
struct TrajectoryEnsemble {
    std::vector<double> times;
    long n_traj = 0;
    int dimension = 0;
    std::vector<double> paths_x, paths_y;
    std::uint64_t seed = 0;
    double dt = 0.0;
    BlowUpDiagnostic blow_up;

    double x_at(long traj, std::size_t t_idx, int c) const {
        return paths_x[(traj * times.size() + t_idx) * dimension + c];
    }
    double y_at(long traj, std::size_t t_idx, int c) const {
        return paths_y[(traj * times.size() + t_idx) * dimension + c];
    }
    std::size_t time_index(double t, bool* exact = nullptr) const;
};

struct InitialCondition {
    // point mass when measure-less; otherwise i.i.d. draws from the measure
    Eigen::VectorXd point;
    std::function<EmpiricalMeasure(int, std::uint64_t, std::uint64_t)> measure_sampler;

    static InitialCondition at_point(Eigen::VectorXd x0);
    static InitialCondition from_measure(const MeasureSpec& m);
};

// Euler-Maruyama with synchronous coupling: one Gaussian increment vector
// per step drives both processes (independent noise available behind the
// flag for contrast experiments). Fixed dt; states with norm above 1e8 are
// frozen and reported in the blow-up diagnostic.
TrajectoryEnsemble simulate_coupled(const DiffusionPair& pair, const InitialCondition& init,
                                    double T, double dt, long n_traj, std::uint64_t seed,
                                    const std::vector<double>& record_times,
                                    bool shared_noise = true);

enum class WhichProcess { x, y };

EmpiricalMeasure marginal_at(const TrajectoryEnsemble& e, double t, WhichProcess which,
                             bool allow_blowup = false);

struct ConvergenceProfile {
    std::vector<double> times;
    std::vector<double> w2_estimates;
    std::vector<bool> in_fit_window;
    double fitted_kappa = 0.0;
    double fitted_CH = 0.0;
    double fit_residual = 0.0;
    double noise_floor = 0.0;
    double w2_initial = 0.0;  // distance from the initial point mass to the target
    bool fit_ok = false;
};

// Fits W2(t) ~ C_H exp(-kappa t) W2(mu0, mu) on the window where the
// estimates sit above 3x the sampling noise floor (floor measured between
// two independent target samples).
ConvergenceProfile estimate_convergence(const DiffusionHalf& half, const MeasureSpec& target,
                                        const Eigen::VectorXd& x0,
                                        const std::vector<double>& times, long n_traj, double dt,
                                        std::uint64_t seed);

// Monte Carlo estimate of E_mu[Lf] with L f = <a, grad f> + <tau, Hess f>_HS.
std::pair<double, double> generator_residual(const VecField& drift, const MatField& tau,
                                             const MeasureSpec& m, const SmoothFunction& f,
                                             long n, std::uint64_t seed);

// Norms of the coefficient differences of a pair under a reference measure:
// E|a-b|, E|a-b|^2 and the Hilbert-Schmidt L2 norm of the noise difference.
struct FieldDiscrepancy {
    double drift_l1 = 0.0, drift_l1_se = 0.0;
    double drift_l2 = 0.0, drift_l2_se = 0.0;
    double diff_l2 = 0.0, diff_l2_se = 0.0;
};

FieldDiscrepancy field_discrepancy(const DiffusionPair& pair, const MeasureSpec& nu, long n,
                                   std::uint64_t seed);

}  // namespace imstab
