#pragma once

#include <cmath>

namespace convlat {

namespace detail {

template<class F>
double simpson_step(const F &f, double a, double b, double fa, double fm, double fb, double whole, double tol,
                    int depth)
{
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double left = (m - a) / 6. * (fa + 4. * flm + fm);
    const double right = (b - m) / 6. * (fm + 4. * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15. * tol) return left + right + delta / 15.;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

} // namespace detail

// Adaptive Simpson quadrature with Richardson correction; `tol` is absolute.
template<class F> double adaptive_simpson(const F &f, double a, double b, double tol, int max_depth = 48)
{
    if (a == b) return 0.;
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6. * (fa + 4. * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

// Bisection for a root of a function with f(lo) and f(hi) of opposite sign.
template<class F> double bisect(const F &f, double lo, double hi, int iterations = 200)
{
    double flo = f(lo);
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if ((fm > 0) == (flo > 0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace convlat
