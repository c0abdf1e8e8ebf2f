#include "imstab/stein.hpp"

#include <cmath>
#include <stdexcept>

#include "imstab/interp.hpp"
#include "imstab/parallel.hpp"
#include "imstab/quadrature.hpp"

namespace imstab {

SteinKernelField SteinKernelField::constant(Eigen::MatrixXd tau) {
    SteinKernelField k;
    k.dim_ = static_cast<int>(tau.rows());
    k.prov_ = Provenance::constant;
    k.const_sqrt_ = spd_sqrt(tau);
    k.const_tau_ = std::move(tau);
    return k;
}

SteinKernelField SteinKernelField::diagonal(
    std::vector<std::function<double(double)>> components,
    std::vector<std::pair<double, double>> ranges, std::vector<double> lower_bounds,
    Provenance prov) {
    SteinKernelField k;
    k.dim_ = static_cast<int>(components.size());
    k.prov_ = prov;
    k.comps_ = std::move(components);
    k.ranges_ = std::move(ranges);
    k.lower_bounds_ = std::move(lower_bounds);
    return k;
}

double SteinKernelField::component(int i, double y) const {
    if (is_constant()) return const_tau_(i, i);
    const auto& [lo, hi] = ranges_[i];
    if (y < lo || y > hi)
        throw std::domain_error("stein kernel: argument " + std::to_string(y) +
                                " outside the attainable range [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
    return comps_[i](y);
}

Eigen::MatrixXd SteinKernelField::evaluate(const Eigen::VectorXd& y) const {
    if (is_constant()) return const_tau_;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int i = 0; i < dim_; ++i) out(i, i) = component(i, y[i]);
    return out;
}

Eigen::MatrixXd SteinKernelField::sqrt_evaluate(const Eigen::VectorXd& y) const {
    if (is_constant()) return const_sqrt_;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int i = 0; i < dim_; ++i) out(i, i) = std::sqrt(component(i, y[i]));
    return out;
}

std::pair<double, double> SteinKernelField::range(int i) const {
    if (is_constant())
        return {-std::numeric_limits<double>::infinity(),
                std::numeric_limits<double>::infinity()};
    return ranges_[i];
}

bool SteinKernelField::in_range(const Eigen::VectorXd& y) const {
    if (is_constant()) return true;
    for (int i = 0; i < dim_; ++i)
        if (y[i] < ranges_[i].first || y[i] > ranges_[i].second) return false;
    return true;
}

double SteinKernelField::lower_bound() const {
    if (is_constant()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(const_tau_);
        return es.eigenvalues().minCoeff();
    }
    double lb = std::numeric_limits<double>::infinity();
    for (double v : lower_bounds_) lb = std::min(lb, v);
    return lb;
}

namespace {

std::function<double(double)> interpolated_component(const MomentMap1D& map, double* min_out,
                                                     std::pair<double, double>* range_out) {
    const int n = static_cast<int>(map.grid.size());
    std::vector<double> y(n), tau(n);
    for (int i = 0; i < n; ++i) {
        y[i] = map.phi_prime[i];
        tau[i] = map.phi_second[i];
    }
    for (int i = 1; i < n; ++i)
        if (!(y[i] > y[i - 1]))
            throw std::runtime_error("stein kernel: map gradient is not strictly increasing");
    *min_out = *std::min_element(tau.begin(), tau.end());
    *range_out = {y.front(), y.back()};
    auto interp = std::make_shared<MonotoneCubic>(std::move(y), std::move(tau));
    return [interp](double q) { return interp->eval(q); };
}

}  // namespace

SteinKernelField kernel_from_moment_map(const MomentMap1D& map) {
    double mn;
    std::pair<double, double> rg;
    auto comp = interpolated_component(map, &mn, &rg);
    return SteinKernelField::diagonal({comp}, {rg}, {mn},
                                      SteinKernelField::Provenance::moment_map);
}

SteinKernelField kernel_from_moment_map(const MomentMapProduct& map) {
    std::vector<std::function<double(double)>> comps;
    std::vector<std::pair<double, double>> ranges;
    std::vector<double> mins;
    for (const auto& f : map.factors) {
        double mn;
        std::pair<double, double> rg;
        comps.push_back(interpolated_component(f, &mn, &rg));
        ranges.push_back(rg);
        mins.push_back(mn);
    }
    return SteinKernelField::diagonal(std::move(comps), std::move(ranges), std::move(mins),
                                      SteinKernelField::Provenance::moment_map);
}

SteinKernelField kernel_closed_form_1d(const MeasureSpec& m) {
    if (m.dimension != 1)
        throw std::invalid_argument("kernel_closed_form_1d: measure must be one-dimensional");
    const DensityTable1d& table = m.table1d();
    double sigma = std::sqrt(table.second_moment());
    if (std::abs(table.mean()) > 1e-8 * std::max(1.0, sigma))
        throw std::invalid_argument("kernel_closed_form_1d: measure must be centered");
    std::shared_ptr<const DensityTable1d> tptr = m.table1d_ptr();
    auto comp = [tptr](double y) {
        return tptr->upper_partial_first_moment(y) / std::max(tptr->density(y), 1e-300);
    };
    // the table truncates the real line; keep the range where the missing
    // beyond-table mass is negligible relative to the tail integral
    double lo = table.quantile_log_lower(-45.0);
    double hi = table.quantile_log_upper(-45.0);
    double lb = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 4096; ++i) lb = std::min(lb, comp(lo + (hi - lo) * i / 4096.0));
    return SteinKernelField::diagonal({comp}, {{lo, hi}}, {lb},
                                      SteinKernelField::Provenance::closed_form_1d);
}

ResidualEstimate stein_identity_residual(const MeasureSpec& m, const SteinKernelField& k,
                                         const SmoothFunction& f, long n, std::uint64_t seed) {
    EmpiricalMeasure s = m.sampler(static_cast<int>(n), seed, 0x57E1ull);
    const int d = m.dimension;
    std::vector<double> vals(n);
    std::vector<char> clipped(n, 0);
    parallel_for(n, [&](long i) {
        Eigen::VectorXd x = s.points.row(i).transpose();
        Eigen::VectorXd xc = x;
        if (!k.is_constant()) {
            for (int c = 0; c < d; ++c) {
                auto [lo, hi] = k.range(c);
                if (xc[c] < lo || xc[c] > hi) {
                    xc[c] = std::clamp(xc[c], lo, hi);
                    clipped[i] = 1;
                }
            }
        }
        double a = f.gradient(x).dot(x);
        double b = k.evaluate(xc).cwiseProduct(f.hessian(x)).sum();
        vals[i] = a - b;
    });
    ResidualEstimate out;
    long nclip = 0;
    for (char c : clipped) nclip += c;
    out.clip_fraction = double(nclip) / double(n);
    out.flagged = out.clip_fraction > 1e-3;
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= double(n);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= std::max<long>(1, n - 1);
    out.value = mean;
    out.se = std::sqrt(var / double(n));
    return out;
}

double stein_identity_residual_quadrature(const MeasureSpec& m, const SteinKernelField& k,
                                          const SmoothFunction& f) {
    if (m.dimension != 1)
        throw std::invalid_argument("stein_identity_residual_quadrature: 1-d only");
    const DensityTable1d& table = m.table1d();
    double lo = table.x_lo(), hi = table.x_hi();
    if (!k.is_constant()) {
        lo = std::max(lo, k.range(0).first);
        hi = std::min(hi, k.range(0).second);
    }
    auto integrand = [&](double x) {
        Eigen::VectorXd v(1);
        v[0] = x;
        double tau = k.component(0, x);
        return table.density(x) * (x * f.gradient(v)[0] - tau * f.hessian(v)(0, 0));
    };
    double left = integrate_or_throw(integrand, lo, 0.0, 1e-12, 1e-10);
    double right = integrate_or_throw(integrand, 0.0, hi, 1e-12, 1e-10);
    return left + right;
}

DiffusionHalf stein_sde(const SteinKernelField& k) {
    if (!(k.lower_bound() > 0.0))
        throw std::invalid_argument(
            "stein_sde: kernel lower bound is not positive; the diffusion is degenerate");
    const int d = k.dimension();
    DiffusionHalf half;
    half.drift = linear_drift(d, -1.0);
    SteinKernelField kc = k;
    half.noise = [kc, d](const Eigen::VectorXd& y, Eigen::MatrixXd& out) {
        out.resize(d, d);
        if (kc.is_constant()) {
            out = std::sqrt(2.0) * kc.sqrt_evaluate(y);
            return;
        }
        out.setZero();
        for (int i = 0; i < d; ++i) {
            auto [lo, hi] = kc.range(i);
            double yi = std::clamp(y[i], lo, hi);
            out(i, i) = std::sqrt(2.0 * kc.component(i, yi));
        }
    };
    return half;
}

MatField kernel_tau_field(const SteinKernelField& k) {
    SteinKernelField kc = k;
    const int d = k.dimension();
    return [kc, d](const Eigen::VectorXd& y, Eigen::MatrixXd& out) {
        out.resize(d, d);
        if (kc.is_constant()) {
            out = kc.evaluate(y);
            return;
        }
        out.setZero();
        for (int i = 0; i < d; ++i) {
            auto [lo, hi] = kc.range(i);
            out(i, i) = kc.component(i, std::clamp(y[i], lo, hi));
        }
    };
}

}  // namespace imstab
