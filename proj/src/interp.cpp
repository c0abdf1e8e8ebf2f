#include "imstab/interp.hpp"

#include <algorithm>
#include <cmath>

namespace imstab {

MonotoneCubic::MonotoneCubic(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    if (x_.size() != y_.size() || x_.size() < 2)
        throw std::invalid_argument("interpolant needs at least two matching nodes");
    for (std::size_t i = 1; i < x_.size(); ++i)
        if (!(x_[i] > x_[i - 1]))
            throw std::invalid_argument("interpolation abscissae must be strictly increasing");
    std::size_t n = x_.size();
    m_.resize(n);
    // Fritsch-Carlson: start from three-point slopes, then limit.
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
    m_[0] = d[0];
    m_[n - 1] = d[n - 2];
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (d[i - 1] * d[i] <= 0.0)
            m_[i] = 0.0;
        else {
            double w1 = 2.0 * (x_[i + 1] - x_[i]) + (x_[i] - x_[i - 1]);
            double w2 = (x_[i + 1] - x_[i]) + 2.0 * (x_[i] - x_[i - 1]);
            m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
        }
    }
    limit_slopes();
}

MonotoneCubic MonotoneCubic::with_derivatives(std::vector<double> x, std::vector<double> y,
                                              std::vector<double> dydx) {
    MonotoneCubic c;
    c.x_ = std::move(x);
    c.y_ = std::move(y);
    c.m_ = std::move(dydx);
    if (c.x_.size() != c.y_.size() || c.x_.size() != c.m_.size() || c.x_.size() < 2)
        throw std::invalid_argument("interpolant needs matching node/value/derivative arrays");
    for (std::size_t i = 1; i < c.x_.size(); ++i)
        if (!(c.x_[i] > c.x_[i - 1]))
            throw std::invalid_argument("interpolation abscissae must be strictly increasing");
    c.limit_slopes();
    return c;
}

void MonotoneCubic::limit_slopes() {
    std::size_t n = x_.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double d = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        if (d == 0.0) {
            m_[i] = 0.0;
            m_[i + 1] = 0.0;
            continue;
        }
        double a = m_[i] / d;
        double b = m_[i + 1] / d;
        if (a < 0.0) m_[i] = 0.0;
        if (b < 0.0) m_[i + 1] = 0.0;
        double s = a * a + b * b;
        if (s > 9.0) {
            double t = 3.0 / std::sqrt(s);
            m_[i] = t * a * d;
            m_[i + 1] = t * b * d;
        }
    }
}

std::size_t MonotoneCubic::locate(double q) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), q);
    std::size_t i = static_cast<std::size_t>(it - x_.begin());
    if (i == 0) return 0;
    if (i >= x_.size()) return x_.size() - 2;
    return i - 1;
}

double MonotoneCubic::eval(double q) const {
    std::size_t i = locate(q);
    double h = x_[i + 1] - x_[i];
    double t = (q - x_[i]) / h;
    double t2 = t * t, t3 = t2 * t;
    double h00 = 2 * t3 - 3 * t2 + 1;
    double h10 = t3 - 2 * t2 + t;
    double h01 = -2 * t3 + 3 * t2;
    double h11 = t3 - t2;
    return h00 * y_[i] + h10 * h * m_[i] + h01 * y_[i + 1] + h11 * h * m_[i + 1];
}

double MonotoneCubic::derivative(double q) const {
    std::size_t i = locate(q);
    double h = x_[i + 1] - x_[i];
    double t = (q - x_[i]) / h;
    double t2 = t * t;
    double d00 = (6 * t2 - 6 * t) / h;
    double d10 = 3 * t2 - 4 * t + 1;
    double d01 = (-6 * t2 + 6 * t) / h;
    double d11 = 3 * t2 - 2 * t;
    return d00 * y_[i] + d10 * m_[i] + d01 * y_[i + 1] + d11 * m_[i + 1];
}

}  // namespace imstab
