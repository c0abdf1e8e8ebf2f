#pragma once

#include <functional>

namespace imstab {

struct QuadResult {
    double value = 0.0;
    double abs_error = 0.0;
    int subdivisions = 0;
    bool converged = false;
};

// Adaptive Gauss-Kronrod 15(7) on a finite interval.
QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol = 1e-12, double rel_tol = 1e-12,
                     int max_subdivisions = 4000);

// Like integrate() but throws std::runtime_error when the tolerance is not met.
double integrate_or_throw(const std::function<double(double)>& f, double a, double b,
                          double abs_tol = 1e-12, double rel_tol = 1e-12);

// Smallest L such that the unnormalized log-density has dropped by at least
// `drop` e-folds below its value at x0 on both sides and keeps decreasing.
// Used to pick quadrature cutoffs for log-concave densities.
double tail_cutoff(const std::function<double(double)>& log_density, double x0 = 0.0,
                   double drop = 70.0, double max_half_width = 1e6);

// Iterated 2-D integral of f over [ax,bx] x [ay,by].
QuadResult integrate2d(const std::function<double(double, double)>& f,
                       double ax, double bx, double ay, double by,
                       double abs_tol = 1e-10, double rel_tol = 1e-10);

}  // namespace imstab
