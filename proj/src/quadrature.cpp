#include "imstab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <vector>

namespace imstab {
namespace {

// 15-point Kronrod nodes on [0,1] side of [-1,1] plus center, with the
// embedded 7-point Gauss rule for the error estimate.
constexpr double kx[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0};
constexpr double kw[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
constexpr double gw[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

struct Interval {
    double a, b, value, error;
    bool operator<(const Interval& o) const { return error < o.error; }
};

Interval gk15(const std::function<double(double)>& f, double a, double b) {
    double c = 0.5 * (a + b);
    double h = 0.5 * (b - a);
    double fc = f(c);
    double resk = kw[7] * fc;
    double resg = gw[3] * fc;
    for (int j = 0; j < 7; ++j) {
        double fl = f(c - h * kx[j]);
        double fr = f(c + h * kx[j]);
        resk += kw[j] * (fl + fr);
        if (j % 2 == 1) resg += gw[j / 2] * (fl + fr);
    }
    Interval out;
    out.a = a;
    out.b = b;
    out.value = resk * h;
    out.error = std::abs((resk - resg) * h);
    return out;
}

}  // namespace

QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                     double abs_tol, double rel_tol, int max_subdivisions) {
    QuadResult res;
    if (a == b) {
        res.converged = true;
        return res;
    }
    std::priority_queue<Interval> heap;
    Interval whole = gk15(f, a, b);
    double total = whole.value;
    double err = whole.error;
    heap.push(whole);
    int splits = 0;
    while (err > std::max(abs_tol, rel_tol * std::abs(total)) && splits < max_subdivisions) {
        Interval worst = heap.top();
        heap.pop();
        double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) {  // interval at floating-point resolution
            heap.push(Interval{worst.a, worst.b, worst.value, 0.0});
            continue;
        }
        Interval left = gk15(f, worst.a, mid);
        Interval right = gk15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++splits;
    }
    res.value = total;
    res.abs_error = err;
    res.subdivisions = splits;
    res.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
    return res;
}

double integrate_or_throw(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, double rel_tol) {
    QuadResult r = integrate(f, a, b, abs_tol, rel_tol);
    if (!r.converged || !std::isfinite(r.value))
        throw std::runtime_error("quadrature did not converge (divergent or too irregular integrand)");
    return r.value;
}

double tail_cutoff(const std::function<double(double)>& log_density, double x0,
                   double drop, double max_half_width) {
    double ref = log_density(x0);
    if (!std::isfinite(ref)) throw std::runtime_error("log-density not finite at reference point");
    double L = 1.0;
    while (L < max_half_width) {
        double lo = log_density(x0 - L);
        double hi = log_density(x0 + L);
        bool deep = (lo < ref - drop) && (hi < ref - drop);
        // decreasing outward: compare with a slightly smaller radius
        double lo_in = log_density(x0 - 0.9 * L);
        double hi_in = log_density(x0 + 0.9 * L);
        if (deep && lo <= lo_in && hi <= hi_in) return L;
        L *= 1.5;
    }
    throw std::runtime_error("tail cutoff not found: density does not decay (non-integrable?)");
}

QuadResult integrate2d(const std::function<double(double, double)>& f,
                       double ax, double bx, double ay, double by,
                       double abs_tol, double rel_tol) {
    auto outer = [&](double x) {
        return integrate([&](double y) { return f(x, y); }, ay, by,
                         abs_tol * 0.1 / std::max(1.0, bx - ax), rel_tol * 0.1)
            .value;
    };
    return integrate(outer, ax, bx, abs_tol, rel_tol);
}

}  // namespace imstab
