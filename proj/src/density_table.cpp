#include "imstab/density_table.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "imstab/quadrature.hpp"

namespace imstab {
namespace {

// 15-point Gauss-Legendre on [-1,1]; used for the per-cell integrals where
// the integrand is smooth by construction.
constexpr double glx[15] = {
    -0.987992518020485428489565718587, -0.937273392400705904307758947710,
    -0.848206583410427216200648320774, -0.724417731360170047416186054614,
    -0.570972172608538847537226737254, -0.394151347077563369897207370981,
    -0.201194093997434522300628303395, 0.0,
    0.201194093997434522300628303395,  0.394151347077563369897207370981,
    0.570972172608538847537226737254,  0.724417731360170047416186054614,
    0.848206583410427216200648320774,  0.937273392400705904307758947710,
    0.987992518020485428489565718587};
constexpr double glw[15] = {
    0.030753241996117268354628393577, 0.070366047488108124709267416451,
    0.107159220467171935011869546686, 0.139570677926154314447804794511,
    0.166269205816993933553200860481, 0.186161000015562211026800561866,
    0.198431485327111576456118326444, 0.202578241925561272880620199968,
    0.198431485327111576456118326444, 0.186161000015562211026800561866,
    0.166269205816993933553200860481, 0.139570677926154314447804794511,
    0.107159220467171935011869546686, 0.070366047488108124709267416451,
    0.030753241996117268354628393577};

}  // namespace

DensityTable1d::DensityTable1d(std::function<double(double)> log_density,
                               double x_lo, double x_hi, int n_cells)
    : log_density_(std::move(log_density)) {
    if (!(x_hi > x_lo)) throw std::invalid_argument("density table needs x_hi > x_lo");
    if (n_cells < 8) throw std::invalid_argument("density table needs at least 8 cells");
    int n = n_cells + 1;
    x_.resize(n);
    double h = (x_hi - x_lo) / n_cells;
    for (int i = 0; i < n; ++i) x_[i] = x_lo + h * i;
    x_.back() = x_hi;

    log_ref_ = log_density_(0.5 * (x_lo + x_hi));
    for (int i = 0; i < n; i += n / 8) log_ref_ = std::max(log_ref_, log_density_(x_[i]));

    std::vector<double> cell(n_cells);
    std::vector<double> cell_x(n_cells);  // first moment per cell
    for (int c = 0; c < n_cells; ++c) {
        double a = x_[c], b = x_[c + 1];
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        double mass = 0.0, mom = 0.0;
        for (int j = 0; j < 15; ++j) {
            double xx = mid + half * glx[j];
            double w = glw[j] * half * std::exp(log_density_(xx) - log_ref_);
            mass += w;
            mom += w * xx;
        }
        if (!std::isfinite(mass)) throw std::runtime_error("density not finite inside table range");
        cell[c] = mass;
        cell_x[c] = mom;
    }
    lower_.assign(n, 0.0);
    upper_.assign(n, 0.0);
    for (int i = 1; i < n; ++i) lower_[i] = lower_[i - 1] + cell[i - 1];
    for (int i = n - 2; i >= 0; --i) upper_[i] = upper_[i + 1] + cell[i];
    norm_ = lower_[n - 1];
    if (!(norm_ > 0.0)) throw std::runtime_error("density integrates to zero on table range");
    log_norm_ = std::log(norm_) + log_ref_;
    double mom_total = 0.0;
    for (int c = 0; c < n_cells; ++c) mom_total += cell_x[c];
    mean_ = mom_total / norm_;
}

DensityTable1d DensityTable1d::auto_range(std::function<double(double)> log_density,
                                          double drop, int n_cells) {
    double L = tail_cutoff(log_density, 0.0, drop);
    return DensityTable1d(std::move(log_density), -L, L, n_cells);
}

int DensityTable1d::locate(double x) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), x);
    int i = static_cast<int>(it - x_.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(x_.size()) - 2);
}

double DensityTable1d::cell_integral(double a, double b,
                                     const std::function<double(double)>& weight) const {
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0.0;
    for (int j = 0; j < 15; ++j) {
        double xx = mid + half * glx[j];
        double w = glw[j] * half * std::exp(log_density_(xx) - log_ref_);
        s += weight ? w * weight(xx) : w;
    }
    return s;
}

double DensityTable1d::density(double x) const { return std::exp(log_density_(x) - log_norm_); }

double DensityTable1d::cdf(double x) const {
    if (x <= x_[0]) return 0.0;
    if (x >= x_.back()) return 1.0;
    int c = locate(x);
    return (lower_[c] + cell_integral(x_[c], x, nullptr)) / norm_;
}

double DensityTable1d::ccdf(double x) const {
    if (x <= x_[0]) return 1.0;
    if (x >= x_.back()) return 0.0;
    int c = locate(x);
    return (upper_[c + 1] + cell_integral(x, x_[c + 1], nullptr)) / norm_;
}

double DensityTable1d::log_cdf(double x) const { return std::log(cdf(x)); }
double DensityTable1d::log_ccdf(double x) const { return std::log(ccdf(x)); }

double DensityTable1d::quantile(double u) const {
    if (u <= 0.5) return quantile_log_lower(std::log(std::max(u, 1e-300)));
    return quantile_log_upper(std::log(std::max(1.0 - u, 1e-300)));
}

double DensityTable1d::quantile_log_lower(double l) const {
    int n = static_cast<int>(x_.size());
    double target = std::exp(l) * norm_;  // unnormalized lower mass
    int lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (lower_[mid] < target)
            lo = mid;
        else
            hi = mid;
    }
    const double cell_lo = x_[lo];
    double a = cell_lo, b = x_[lo + 1];
    double x = 0.5 * (a + b);
    for (int it = 0; it < 60; ++it) {
        double mass = lower_[lo] + cell_integral(cell_lo, x, nullptr);
        double lf = std::log(std::max(mass, 1e-300) / norm_);
        double rho = std::exp(log_density_(x) - log_ref_) / std::max(mass, 1e-300);
        double step = (lf - l) / std::max(rho, 1e-300);
        double xn = x - step;
        if (lf > l)
            b = x;
        else
            a = x;
        if (xn <= a || xn >= b) xn = 0.5 * (a + b);
        if (std::abs(xn - x) < 1e-15 * (1.0 + std::abs(x))) return xn;
        x = xn;
    }
    return x;
}

double DensityTable1d::quantile_log_upper(double l) const {
    int n = static_cast<int>(x_.size());
    double target = std::exp(l) * norm_;  // unnormalized upper mass
    int lo = 0, hi = n - 1;
    while (hi - lo > 1) {
        int mid = (lo + hi) / 2;
        if (upper_[mid] > target)
            lo = mid;
        else
            hi = mid;
    }
    const double cell_hi = x_[lo + 1];
    double a = x_[lo], b = cell_hi;
    double x = 0.5 * (a + b);
    for (int it = 0; it < 60; ++it) {
        double mass = upper_[lo + 1] + cell_integral(x, cell_hi, nullptr);
        double lf = std::log(std::max(mass, 1e-300) / norm_);
        double rho = std::exp(log_density_(x) - log_ref_) / std::max(mass, 1e-300);
        double step = (lf - l) / std::max(rho, 1e-300);  // d lf/dx = -rho/mass
        double xn = x + step;
        if (lf > l)
            a = x;
        else
            b = x;
        if (xn <= a || xn >= b) xn = 0.5 * (a + b);
        if (std::abs(xn - x) < 1e-15 * (1.0 + std::abs(x))) return xn;
        x = xn;
    }
    return x;
}

double DensityTable1d::abs_moment(double k) const {
    auto f = [&](double x) { return std::pow(std::abs(x), k) * density(x); };
    double left = integrate_or_throw(f, x_[0], 0.0, 1e-13, 1e-11);
    double right = integrate_or_throw(f, 0.0, x_.back(), 1e-13, 1e-11);
    return left + right;
}

double DensityTable1d::upper_partial_first_moment(double y) const {
    int n = static_cast<int>(x_.size());
    auto pos = [](double x) { return x; };
    auto neg = [](double x) { return -x; };
    if (y >= 0.0) {
        // accumulate x*rho from the right end down to y: all terms positive
        if (y >= x_.back()) return 0.0;
        int c = locate(y);
        double s = cell_integral(y, x_[c + 1], pos);
        for (int i = c + 1; i < n - 1; ++i) s += cell_integral(x_[i], x_[i + 1], pos);
        return s / norm_;
    }
    // int_y^inf x rho = int_{-inf}^y (-x) rho for a centered measure;
    // accumulate from the left end up to y: all terms positive
    int c = locate(y);
    double s = cell_integral(x_[c], y, neg);
    for (int i = 0; i < c; ++i) s += cell_integral(x_[i], x_[i + 1], neg);
    return s / norm_;
}

const MonotoneCubic& DensityTable1d::inverse_cdf_interpolant() const {
    if (!inv_cdf_) {
        // 4096-node inverse-CDF grid with exact slopes dx/du = 1/rho
        int n_nodes = 4096;
        int n = static_cast<int>(x_.size());
        std::vector<double> u, xx, dd;
        u.reserve(n_nodes);
        xx.reserve(n_nodes);
        dd.reserve(n_nodes);
        double step = double(n - 1) / (n_nodes - 1);
        double last_u = -1.0;
        for (int j = 0; j < n_nodes; ++j) {
            int i = std::min(n - 1, static_cast<int>(std::lround(j * step)));
            double ui = lower_[i] / norm_;
            if (ui <= last_u) continue;  // drop flat tail nodes
            last_u = ui;
            u.push_back(ui);
            xx.push_back(x_[i]);
            double rho = std::exp(log_density_(x_[i]) - log_norm_);
            dd.push_back(1.0 / std::max(rho, 1e-300));
        }
        inv_cdf_ = std::make_unique<MonotoneCubic>(
            MonotoneCubic::with_derivatives(std::move(u), std::move(xx), std::move(dd)));
    }
    return *inv_cdf_;
}

}  // namespace imstab
