#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>

#include "imstab/density_table.hpp"

namespace imstab {

// Weighted point cloud.
struct EmpiricalMeasure {
    Eigen::MatrixXd points;   // n x d
    Eigen::VectorXd weights;  // n, nonnegative, sums to 1

    static EmpiricalMeasure uniform(Eigen::MatrixXd pts);

    Eigen::Index size() const { return points.rows(); }
    int dim() const { return static_cast<int>(points.cols()); }
    void validate(double tol = 1e-12) const;

    Eigen::VectorXd mean() const;
    double second_moment() const;  // E|X|^2
};

struct Support {
    enum class Kind { full_space, box };
    Kind kind = Kind::full_space;
    Eigen::VectorXd lo, hi;  // used when kind == box
};

// Analytic probability measure: unnormalized log-density plus sampler and
// normalization. Immutable after construction; operations are pure given
// (inputs, seed).
class MeasureSpec {
public:
    int dimension = 0;
    std::function<double(const Eigen::VectorXd&)> log_density;  // unnormalized
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> log_density_gradient;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> log_density_hessian;  // may be empty
    std::function<EmpiricalMeasure(int, std::uint64_t, std::uint64_t)> sampler;  // (n, seed, stream)
    double log_normalization = 0.0;
    Support support;
    std::optional<double> convexity_alpha;  // alpha I <= hess(-log rho) <= alpha^-1 I
    std::string label;

    double log_density_1d(double x) const {
        Eigen::VectorXd v(1);
        v[0] = x;
        return log_density(v);
    }
    double density_1d(double x) const;  // normalized

    // Lazily built CDF/quantile table (1-D only).
    const DensityTable1d& table1d() const;
    std::shared_ptr<const DensityTable1d> table1d_ptr() const;

    // set by make_gaussian, used by closed-form oracles
    bool is_gaussian = false;
    Eigen::VectorXd gaussian_mean;
    Eigen::MatrixXd gaussian_cov;

private:
    mutable std::shared_ptr<DensityTable1d> table_;
};

MeasureSpec make_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance);
MeasureSpec make_gaussian1d(double mean, double variance);

// Centered Gibbs measure e^{-V} on the line; the coordinate is shifted so the
// mean is exactly zero.
MeasureSpec make_gibbs_1d(std::function<double(double)> V,
                          std::function<double(double)> Vp,
                          std::function<double(double)> Vpp);

// E|X|^2 by quadrature in d <= 2, Monte Carlo with standard error otherwise.
double second_moment(const MeasureSpec& m, double* standard_error = nullptr);

// (integral (dnu/dmu)^p dmu)^(1/p); p = infinity gives the sup of the ratio
// over a grid. Returns +infinity when the ratio diverges in the tails.
double relative_density_norm(const MeasureSpec& nu, const MeasureSpec& mu, double p);

constexpr double p_infinity = std::numeric_limits<double>::infinity();

// Sub-exponential parameter: max over k in {2..k_max} of E[|X|^k]^(1/k) / k.
double subexp_parameter(const MeasureSpec& m, int k_max, double* standard_error = nullptr);
double subexp_parameter(const EmpiricalMeasure& m, int k_max);

EmpiricalMeasure sample(const MeasureSpec& m, int n, std::uint64_t seed,
                        std::uint64_t stream = 0);

}  // namespace imstab
