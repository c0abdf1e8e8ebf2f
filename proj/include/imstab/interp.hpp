#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace imstab {

// Monotone cubic Hermite interpolant (Fritsch-Carlson limited slopes).
// Strictly increasing abscissae required; values may be any shape, but
// monotone data yields a monotone interpolant.
class MonotoneCubic {
public:
    MonotoneCubic() = default;
    MonotoneCubic(std::vector<double> x, std::vector<double> y);

    // Same, but with caller-supplied exact derivatives (still limited so a
    // monotone table stays monotone).
    static MonotoneCubic with_derivatives(std::vector<double> x, std::vector<double> y,
                                          std::vector<double> dydx);

    double operator()(double q) const { return eval(q); }
    double eval(double q) const;
    double derivative(double q) const;

    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }
    bool in_range(double q) const { return q >= x_.front() && q <= x_.back(); }
    std::size_t size() const { return x_.size(); }

private:
    std::size_t locate(double q) const;
    void limit_slopes();

    std::vector<double> x_, y_, m_;
};

}  // namespace imstab
