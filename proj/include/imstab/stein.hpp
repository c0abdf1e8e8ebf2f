#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "imstab/measures.hpp"
#include "imstab/moment_map.hpp"
#include "imstab/sde.hpp"
#include "imstab/test_functions.hpp"

namespace imstab {

// Matrix field tau making E<grad f(X), X> = E<Hess f(X), tau(X)>_HS hold for
// the domain measure. Either constant or diagonal with tabulated 1-d
// components; evaluation outside the tabulated range is refused.
class SteinKernelField {
public:
    enum class Provenance { moment_map, closed_form_1d, constant };

    static SteinKernelField constant(Eigen::MatrixXd tau);
    static SteinKernelField diagonal(std::vector<std::function<double(double)>> components,
                                     std::vector<std::pair<double, double>> ranges,
                                     std::vector<double> lower_bounds, Provenance prov);

    int dimension() const { return dim_; }
    Provenance provenance() const { return prov_; }
    bool is_constant() const { return prov_ == Provenance::constant; }

    Eigen::MatrixXd evaluate(const Eigen::VectorXd& y) const;
    Eigen::MatrixXd sqrt_evaluate(const Eigen::VectorXd& y) const;
    double component(int i, double y) const;  // tau_ii along coordinate i
    std::pair<double, double> range(int i) const;
    bool in_range(const Eigen::VectorXd& y) const;
    double lower_bound() const;  // min eigenvalue over the tabulated range

private:
    int dim_ = 0;
    Provenance prov_ = Provenance::constant;
    Eigen::MatrixXd const_tau_, const_sqrt_;
    std::vector<std::function<double(double)>> comps_;
    std::vector<std::pair<double, double>> ranges_;
    std::vector<double> lower_bounds_;
};

// tau(y) = phi''((phi')^{-1}(y)) via monotone interpolation in y = phi'(x).
SteinKernelField kernel_from_moment_map(const MomentMap1D& map);
SteinKernelField kernel_from_moment_map(const MomentMapProduct& map);

// Independent 1-d construction: tau(y) = (1/rho(y)) int_y^inf t rho(t) dt,
// evaluated by one-sided tail quadrature. Requires a centered measure.
SteinKernelField kernel_closed_form_1d(const MeasureSpec& m);

struct ResidualEstimate {
    double value = 0.0;
    double se = 0.0;
    double clip_fraction = 0.0;
    bool flagged = false;  // clipping above 0.1% of samples
};

// Monte Carlo residual of the integration-by-parts identity for f.
ResidualEstimate stein_identity_residual(const MeasureSpec& m, const SteinKernelField& k,
                                         const SmoothFunction& f, long n, std::uint64_t seed);

// Quadrature version (1-d): int rho(x) (x f'(x) - tau(x) f''(x)) dx.
double stein_identity_residual_quadrature(const MeasureSpec& m, const SteinKernelField& k,
                                          const SmoothFunction& f);

// The diffusion with drift -x and noise sqrt(2 tau(x)); the kernel's measure
// is its invariant law. Kernels with vanishing lower bound are refused. The
// noise field clamps its argument to the tabulated range (equilibrium paths
// reach the range ends with probability ~exp(-40)).
DiffusionHalf stein_sde(const SteinKernelField& k);

// tau as a generator coefficient field (for invariance residual checks).
MatField kernel_tau_field(const SteinKernelField& k);

}  // namespace imstab
