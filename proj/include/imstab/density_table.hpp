#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "imstab/interp.hpp"

namespace imstab {

// Tabulated 1-D density built from an unnormalized log-density.
//
// Lower and upper tail masses are accumulated separately (each as a sum of
// positive cell integrals), so cdf() is accurate near 0 and ccdf() near 0,
// and the log-tail quantile inversions keep full relative precision deep in
// the tails. That precision is what the moment-map shooting and the kernel
// tail integrals rely on.
class DensityTable1d {
public:
    DensityTable1d(std::function<double(double)> log_density,
                   double x_lo, double x_hi, int n_cells = 4096);

    // Chooses the range automatically from the log-density decay.
    static DensityTable1d auto_range(std::function<double(double)> log_density,
                                     double drop = 70.0, int n_cells = 4096);

    double x_lo() const { return x_[0]; }
    double x_hi() const { return x_.back(); }
    double log_normalization() const { return log_norm_; }

    double density(double x) const;      // normalized
    double log_density_n(double x) const { return log_density_(x) - log_norm_; }

    double cdf(double x) const;          // lower tail mass
    double ccdf(double x) const;         // upper tail mass
    double log_cdf(double x) const;
    double log_ccdf(double x) const;

    // Inverse CDF. u in [cdf(x_lo), 1 - ccdf(x_hi)] up to clamping.
    double quantile(double u) const;
    // x such that ln cdf(x) = l, resp. ln ccdf(x) = l. Stable in the tails.
    double quantile_log_lower(double l) const;
    double quantile_log_upper(double l) const;

    double mean() const { return mean_; }
    double abs_moment(double k) const;   // E|X|^k
    double second_moment() const { return abs_moment(2.0); }

    // Upper partial first moment  t(y) = int_y^inf x rho(x) dx, computed by
    // one-sided accumulation on both half-lines (no cancellation).
    double upper_partial_first_moment(double y) const;

    // Fast inverse-CDF sampler support: monotone cubic x(u) over the table.
    const MonotoneCubic& inverse_cdf_interpolant() const;

private:
    int locate(double x) const;
    double cell_integral(double a, double b,
                         const std::function<double(double)>& weight) const;

    std::function<double(double)> log_density_;
    std::vector<double> x_;        // n_cells + 1 nodes
    std::vector<double> lower_;    // unnormalized mass below node i
    std::vector<double> upper_;    // unnormalized mass above node i
    double norm_ = 0.0;            // total unnormalized mass
    double log_norm_ = 0.0;        // log of normalization incl. log_ref_
    double log_ref_ = 0.0;         // stabilizer: integrate exp(logrho - log_ref_)
    double mean_ = 0.0;
    mutable std::unique_ptr<MonotoneCubic> inv_cdf_;
};

}  // namespace imstab
