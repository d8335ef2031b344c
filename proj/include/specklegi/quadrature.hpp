#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace specklegi {

/// Integrates f over (0, inf) with the exp-sinh substitution
/// x = exp((pi/2) sinh t), trapezoid rule with step halving on t in [-4, 4].
/// Handles integrable endpoint singularities (powers, logarithms) at x = 0
/// and (sub)exponential decay at infinity; converges double-exponentially
/// for the intensity densities used here.
template <class F>
double integrate_zero_to_inf(F&& f, double rel_tol = 1e-12, int max_level = 11) {
    constexpr double c = std::numbers::pi / 2.0;
    constexpr double t_max = 4.0;
    auto g = [&](double t) {
        const double sh = std::sinh(t);
        const double x = std::exp(c * sh);
        const double jac = c * std::cosh(t) * x;
        const double v = f(x);
        return std::isfinite(v) ? v * jac : 0.0;  // endpoint under/overflow: no mass
    };
    double h = t_max;
    double integral = h * (0.5 * g(-t_max) + g(0.0) + 0.5 * g(t_max));
    for (int level = 1; level <= max_level; ++level) {
        h *= 0.5;
        double add = 0.0;
        const long n_new = 1L << level;  // midpoints at odd multiples of h
        for (long i = 0; i < n_new; ++i) {
            const double t = -t_max + (2 * i + 1) * h;
            add += g(t);
        }
        const double next = 0.5 * integral + h * add;
        if (level >= 4 && std::abs(next - integral) <= rel_tol * std::abs(next)) {
            return next;
        }
        integral = next;
    }
    return integral;
}

namespace detail {
template <class F>
double adaptive_simpson_rec(F& f, double a, double b, double fa, double fm, double fb,
                            double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
        return left + right + delta / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature on [a, b].
template <class F>
double integrate_finite(F&& f, double a, double b, double abs_tol = 1e-12, int max_depth = 48) {
    if (!(b > a)) throw std::invalid_argument("integrate_finite: need b > a");
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, abs_tol, max_depth);
}

}  // namespace specklegi
