#include "imstab/measures.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

#include "imstab/quadrature.hpp"
#include "imstab/rng.hpp"

namespace imstab {

namespace {
constexpr double log_two_pi = 1.8378770664093454835606594728112;
}

EmpiricalMeasure EmpiricalMeasure::uniform(Eigen::MatrixXd pts) {
    EmpiricalMeasure m;
    m.weights = Eigen::VectorXd::Constant(pts.rows(), 1.0 / double(pts.rows()));
    m.points = std::move(pts);
    return m;
}

void EmpiricalMeasure::validate(double tol) const {
    if (points.rows() != weights.size())
        throw std::invalid_argument("empirical measure: points/weights size mismatch");
    if (points.rows() == 0) throw std::invalid_argument("empirical measure: empty");
    if (!points.allFinite()) throw std::invalid_argument("empirical measure: non-finite coordinate");
    if ((weights.array() < 0.0).any())
        throw std::invalid_argument("empirical measure: negative weight");
    if (std::abs(weights.sum() - 1.0) > tol)
        throw std::invalid_argument("empirical measure: weights do not sum to 1");
}

Eigen::VectorXd EmpiricalMeasure::mean() const { return points.transpose() * weights; }

double EmpiricalMeasure::second_moment() const {
    return (points.rowwise().squaredNorm().array() * weights.array()).sum();
}

double MeasureSpec::density_1d(double x) const {
    return std::exp(log_density_1d(x) - log_normalization);
}

const DensityTable1d& MeasureSpec::table1d() const {
    if (dimension != 1) throw std::logic_error("table1d: measure is not one-dimensional");
    if (!table_) {
        auto ld = log_density;
        table_ = std::make_shared<DensityTable1d>(
            DensityTable1d::auto_range([ld](double x) {
                Eigen::VectorXd v(1);
                v[0] = x;
                return ld(v);
            }));
    }
    return *table_;
}

std::shared_ptr<const DensityTable1d> MeasureSpec::table1d_ptr() const {
    table1d();
    return table_;
}

MeasureSpec make_gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& covariance) {
    const int d = static_cast<int>(mean.size());
    if (covariance.rows() != d || covariance.cols() != d)
        throw std::invalid_argument("gaussian: covariance shape does not match mean");
    if (!covariance.isApprox(covariance.transpose(), 1e-12))
        throw std::invalid_argument("gaussian: covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    if (es.eigenvalues().minCoeff() <= 0.0)
        throw std::invalid_argument("gaussian: covariance not positive definite (eigenvalue " +
                                    std::to_string(es.eigenvalues().minCoeff()) + ")");
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd precision = llt.solve(Eigen::MatrixXd::Identity(d, d));
    double log_det = 0.0;
    for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(L(i, i));

    MeasureSpec spec;
    spec.dimension = d;
    spec.label = "gaussian";
    spec.log_density = [mean, precision](const Eigen::VectorXd& x) {
        Eigen::VectorXd z = x - mean;
        return -0.5 * z.dot(precision * z);
    };
    spec.log_density_gradient = [mean, precision](const Eigen::VectorXd& x) {
        return Eigen::VectorXd(-(precision * (x - mean)));
    };
    spec.log_density_hessian = [precision](const Eigen::VectorXd&) {
        return Eigen::MatrixXd(-precision);
    };
    spec.log_normalization = 0.5 * (d * log_two_pi + log_det);
    spec.sampler = [mean, L, d](int n, std::uint64_t seed, std::uint64_t stream) {
        CounterRng rng(seed, rng_stream::tag(rng_stream::measure_sampling, stream));
        Eigen::MatrixXd pts(n, d);
        Eigen::VectorXd z(d);
        for (int k = 0; k < n; ++k) {
            rng.normal_fill(std::uint64_t(k) * d, z, d);
            pts.row(k) = (mean + L * z).transpose();
        }
        return EmpiricalMeasure::uniform(std::move(pts));
    };
    // isotropic case: alpha I <= precision <= alpha^-1 I holds with
    // alpha = min(s, 1/s) for covariance s*I
    bool isotropic = covariance.isApprox(covariance(0, 0) * Eigen::MatrixXd::Identity(d, d), 1e-12);
    if (isotropic) {
        double s = covariance(0, 0);
        spec.convexity_alpha = std::min(s, 1.0 / s);
    }
    spec.is_gaussian = true;
    spec.gaussian_mean = mean;
    spec.gaussian_cov = covariance;
    return spec;
}

MeasureSpec make_gaussian1d(double mean, double variance) {
    Eigen::VectorXd m(1);
    m[0] = mean;
    Eigen::MatrixXd c(1, 1);
    c(0, 0) = variance;
    return make_gaussian(m, c);
}

MeasureSpec make_gibbs_1d(std::function<double(double)> V,
                          std::function<double(double)> Vp,
                          std::function<double(double)> Vpp) {
    // integrability check + provisional table on the raw potential
    auto raw_log = [V](double x) { return -V(x); };
    DensityTable1d raw = DensityTable1d::auto_range(raw_log);
    double shift = raw.mean();

    auto Vs = [V, shift](double x) { return V(x + shift); };
    auto Vps = [Vp, shift](double x) { return Vp(x + shift); };
    auto Vpps = [Vpp, shift](double x) { return Vpp(x + shift); };
    auto table = std::make_shared<DensityTable1d>(
        DensityTable1d::auto_range([Vs](double x) { return -Vs(x); }));

    // convexity range over the table grid
    double vpp_min = std::numeric_limits<double>::infinity();
    double vpp_max = 0.0;
    int probes = 2048;
    for (int i = 0; i <= probes; ++i) {
        double x = table->x_lo() + (table->x_hi() - table->x_lo()) * i / probes;
        double v = Vpps(x);
        vpp_min = std::min(vpp_min, v);
        vpp_max = std::max(vpp_max, v);
    }
    if (!(vpp_min > 0.0))
        throw std::invalid_argument("gibbs measure: potential is not strictly convex on the grid");

    MeasureSpec spec;
    spec.dimension = 1;
    spec.label = "gibbs1d";
    spec.log_density = [Vs](const Eigen::VectorXd& x) { return -Vs(x[0]); };
    spec.log_density_gradient = [Vps](const Eigen::VectorXd& x) {
        Eigen::VectorXd g(1);
        g[0] = -Vps(x[0]);
        return g;
    };
    spec.log_density_hessian = [Vpps](const Eigen::VectorXd& x) {
        Eigen::MatrixXd h(1, 1);
        h(0, 0) = -Vpps(x[0]);
        return h;
    };
    spec.log_normalization = table->log_normalization();
    spec.convexity_alpha = std::min(vpp_min, 1.0 / vpp_max);
    spec.sampler = [table](int n, std::uint64_t seed, std::uint64_t stream) {
        CounterRng rng(seed, rng_stream::tag(rng_stream::measure_sampling, stream));
        const MonotoneCubic& inv = table->inverse_cdf_interpolant();
        Eigen::MatrixXd pts(n, 1);
        for (int k = 0; k < n; ++k) {
            double u = std::clamp(rng.uniform(std::uint64_t(k)), inv.x_front(), inv.x_back());
            pts(k, 0) = inv.eval(u);
        }
        return EmpiricalMeasure::uniform(std::move(pts));
    };
    return spec;
}

double second_moment(const MeasureSpec& m, double* standard_error) {
    if (standard_error) *standard_error = 0.0;
    if (m.dimension == 1) {
        const DensityTable1d& t = m.table1d();
        return t.second_moment();
    }
    if (m.dimension == 2) {
        double L = tail_cutoff([&](double r) {
            Eigen::VectorXd v(2);
            v << r, 0.0;
            double a = m.log_density(v);
            v << 0.0, r;
            return std::max(a, m.log_density(v));
        });
        double z = m.log_normalization;
        auto f = [&](double x, double y) {
            Eigen::VectorXd v(2);
            v << x, y;
            return (x * x + y * y) * std::exp(m.log_density(v) - z);
        };
        QuadResult r = integrate2d(f, -L, L, -L, L, 1e-9, 1e-8);
        if (!r.converged) throw std::runtime_error("second moment: quadrature did not converge");
        return r.value;
    }
    // Monte Carlo
    const int n = 200000;
    EmpiricalMeasure s = m.sampler(n, 0x2ECD0ull, 17);
    Eigen::ArrayXd sq = s.points.rowwise().squaredNorm().array();
    double mean = sq.mean();
    double var = (sq - mean).square().sum() / (n - 1);
    if (standard_error) *standard_error = std::sqrt(var / n);
    return mean;
}

namespace {

double sup_ratio_grid(const MeasureSpec& nu, const MeasureSpec& mu) {
    auto log_ratio = [&](const Eigen::VectorXd& x) {
        return (nu.log_density(x) - nu.log_normalization) -
               (mu.log_density(x) - mu.log_normalization);
    };
    int d = mu.dimension;
    double L = 0.0;
    for (int axis = 0; axis < d; ++axis) {
        auto f = [&](double r) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
            v[axis] = r;
            return std::max(mu.log_density(v), nu.log_density(v));
        };
        L = std::max(L, tail_cutoff(f));
    }
    double best_inner = -std::numeric_limits<double>::infinity();
    double best_edge = -std::numeric_limits<double>::infinity();
    if (d == 1) {
        int n = 8193;
        int best_i = -1;
        Eigen::VectorXd v(1);
        for (int i = 0; i <= n; ++i) {
            v[0] = -L + 2.0 * L * i / n;
            double lr = log_ratio(v);
            if (i <= 4 || i >= n - 4) {
                best_edge = std::max(best_edge, lr);
            } else if (lr > best_inner) {
                best_inner = lr;
                best_i = i;
            }
        }
        if (best_i > 4 && best_i < n - 4) {
            // parabolic refinement around the best interior node
            double h = 2.0 * L / n;
            double x0 = -L + h * best_i;
            auto f = [&](double x) {
                Eigen::VectorXd w(1);
                w[0] = x;
                return log_ratio(w);
            };
            double fm = f(x0 - h), f0 = best_inner, fp = f(x0 + h);
            double denom = fm - 2.0 * f0 + fp;
            if (denom < -1e-300) {
                double shift = 0.5 * h * (fm - fp) / denom;
                shift = std::clamp(shift, -h, h);
                best_inner = std::max(best_inner, f(x0 + shift));
            }
        }
    } else if (d == 2) {
        int n = 257;
        Eigen::VectorXd v(2);
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j) {
                v << -L + 2.0 * L * i / n, -L + 2.0 * L * j / n;
                double lr = log_ratio(v);
                if (i <= 1 || i >= n - 1 || j <= 1 || j >= n - 1)
                    best_edge = std::max(best_edge, lr);
                else
                    best_inner = std::max(best_inner, lr);
            }
    } else {
        throw std::invalid_argument("relative_density_norm: sup-ratio grid supports d <= 2");
    }
    // the ratio diverges when the boundary band strictly dominates the interior
    if (best_edge > best_inner + 1e-9 * (1.0 + std::abs(best_inner)))
        return std::numeric_limits<double>::infinity();
    return std::exp(std::max(best_inner, best_edge));
}

}  // namespace

double relative_density_norm(const MeasureSpec& nu, const MeasureSpec& mu, double p) {
    if (nu.dimension != mu.dimension)
        throw std::invalid_argument("relative_density_norm: dimension mismatch");
    if (!(p >= 1.0)) throw std::invalid_argument("relative_density_norm: p must be >= 1");
    if (std::isinf(p)) return sup_ratio_grid(nu, mu);
    if (mu.dimension > 2)
        throw std::invalid_argument("relative_density_norm: quadrature path supports d <= 2");

    auto log_integrand = [&](const Eigen::VectorXd& x) {
        double ln = nu.log_density(x) - nu.log_normalization;
        double lm = mu.log_density(x) - mu.log_normalization;
        return p * ln + (1.0 - p) * lm;
    };
    if (mu.dimension == 1) {
        auto f1 = [&](double x) {
            Eigen::VectorXd v(1);
            v[0] = x;
            return log_integrand(v);
        };
        double L;
        try {
            L = tail_cutoff(f1);
        } catch (const std::runtime_error&) {
            return std::numeric_limits<double>::infinity();  // integrand does not decay
        }
        double val = integrate_or_throw([&](double x) { return std::exp(f1(x)); }, -L, L,
                                        1e-12, 1e-10);
        return std::pow(val, 1.0 / p);
    }
    auto f2 = [&](double x, double y) {
        Eigen::VectorXd v(2);
        v << x, y;
        return std::exp(log_integrand(v));
    };
    auto axis = [&](double r) {
        Eigen::VectorXd v(2);
        v << r, 0.0;
        double a = log_integrand(v);
        v << 0.0, r;
        return std::max(a, log_integrand(v));
    };
    double L;
    try {
        L = tail_cutoff(axis);
    } catch (const std::runtime_error&) {
        return std::numeric_limits<double>::infinity();
    }
    QuadResult r = integrate2d(f2, -L, L, -L, L, 1e-10, 1e-8);
    if (!r.converged) throw std::runtime_error("relative_density_norm: quadrature did not converge");
    return std::pow(r.value, 1.0 / p);
}

double subexp_parameter(const MeasureSpec& m, int k_max, double* standard_error) {
    if (k_max < 2) throw std::invalid_argument("subexp_parameter: k_max must be >= 2");
    if (standard_error) *standard_error = 0.0;
    if (m.dimension == 1) {
        const DensityTable1d& t = m.table1d();
        double best = 0.0;
        for (int k = 2; k <= k_max; ++k) {
            double mk = t.abs_moment(double(k));
            if (!std::isfinite(mk)) throw std::runtime_error("subexp_parameter: divergent moment");
            best = std::max(best, std::pow(mk, 1.0 / k) / k);
        }
        return best;
    }
    const int n = 200000;
    EmpiricalMeasure s = m.sampler(n, 0x5BEcull, 23);
    double best = 0.0, best_se = 0.0;
    Eigen::ArrayXd norms = s.points.rowwise().norm().array();
    for (int k = 2; k <= k_max; ++k) {
        Eigen::ArrayXd powk = norms.pow(double(k));
        double mk = powk.mean();
        double se = std::sqrt((powk - mk).square().sum() / (n - 1) / n);
        double val = std::pow(mk, 1.0 / k) / k;
        if (val > best) {
            best = val;
            // delta method for the k-th root
            best_se = se * std::pow(mk, 1.0 / k - 1.0) / k / k;
        }
    }
    if (standard_error) *standard_error = best_se;
    return best;
}

double subexp_parameter(const EmpiricalMeasure& m, int k_max) {
    if (k_max < 2) throw std::invalid_argument("subexp_parameter: k_max must be >= 2");
    Eigen::ArrayXd norms = m.points.rowwise().norm().array();
    double best = 0.0;
    for (int k = 2; k <= k_max; ++k) {
        double mk = (norms.pow(double(k)) * m.weights.array()).sum();
        best = std::max(best, std::pow(mk, 1.0 / k) / k);
    }
    return best;
}

EmpiricalMeasure sample(const MeasureSpec& m, int n, std::uint64_t seed, std::uint64_t stream) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    EmpiricalMeasure out = m.sampler(n, seed, stream);
    out.validate();
    return out;
}

}  // namespace imstab
