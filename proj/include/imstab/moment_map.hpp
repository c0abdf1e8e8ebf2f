#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "imstab/measures.hpp"

namespace imstab {

// Solved convex potential of a 1-d target: e^{-phi} is a centered density
// whose gradient pushforward is the target. Grid-sampled phi, phi', phi''
// together with the source CDF G; upper_tail keeps 1-G at full relative
// precision for the right half.
struct MomentMap1D {
    Eigen::VectorXd grid;
    Eigen::VectorXd phi;
    Eigen::VectorXd phi_prime;
    Eigen::VectorXd phi_second;
    Eigen::VectorXd source_cdf;   // G
    Eigen::VectorXd upper_tail;   // 1 - G, accumulated on its own
    MeasureSpec target;
    std::shared_ptr<const DensityTable1d> target_table;
    double phi_at_zero = 0.0;
    double centering_residual = 0.0;

    double source_density(double phi_value) const { return std::exp(-phi_value); }
};

struct MomentMapParams {
    double half_width_sigmas = 8.0;  // grid is [-w*sigma_target, w*sigma_target]
    int nodes = 4097;                // odd so that 0 is a node
    double ode_tol = 1e-13;          // adaptive RK tolerance for the shooting passes
};

// Shooting solver for the coupled source-CDF system
//   phi'(x) = F_target^{-1}(G(x)),   G'(x) = e^{-phi(x)}.
// Symmetric targets: G(0) = 1/2 and phi(0) is found by bisection on the
// terminal behavior of the tail mass. Asymmetric targets: nested bisection
// over (phi(0), G(0)). The tail mass is integrated in the variable
// S = -ln(1-G); past S ~ 14 the pass switches to the conditioned quadrature
// form of the same system, which keeps phi'' accurate to ~1e-9 across the
// entire grid (forward integration alone amplifies boundary error by e^S).
MomentMap1D solve_moment_map_1d(const MeasureSpec& target,
                                const MomentMapParams& params = {}, double tol = 1e-13);

// sup over the grid of |e^{-phi} - rho(phi') phi''| / max(e^{-phi}, 1e-300)
double monge_ampere_residual(const MomentMap1D& map);

// sup over the grid of |F_target(phi'(x)) - G(x)|
double pushforward_residual(const MomentMap1D& map);

struct HessianBoundsReport {
    double min_second = 0.0;
    double max_second = 0.0;
    double alpha = 0.0;
    bool pass = false;
};

// checks alpha <= phi'' <= 1/alpha on the grid at tolerance 1e-6
HessianBoundsReport hessian_bounds_check(const MomentMap1D& map, double alpha);

struct MomentMapProduct {
    std::vector<MomentMap1D> factors;
    int dimension() const { return static_cast<int>(factors.size()); }
};

MomentMapProduct tensorize(std::vector<MomentMap1D> factors);
double pushforward_residual(const MomentMapProduct& map);

}  // namespace imstab
