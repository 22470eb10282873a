#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "shapesr/autodiff.hpp"

namespace shapesr {

// Adaptive 15-point Gauss-Kronrod quadrature, generic over the scalar type so
// the same routine integrates plain values and their parameter derivatives.
// The integration bounds are plain constants and are never differentiated.

namespace detail {

// Kronrod abscissae for the interval [-1, 1]; odd indices are the embedded
// 7-point Gauss abscissae, index 7 is the centre.
inline constexpr double kGk15X[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr double kGk15WK[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

inline constexpr double kGk15WG[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

}  // namespace detail

template <class S>
struct QuadResult {
    S integral{};
    double error = 0.0;    // accumulated Kronrod-Gauss discrepancy
    bool converged = true; // false when the interval budget ran out
    bool finite = true;    // false when the integrand went non-finite
};

// One GK15 panel over [a, b]; err gets |K15 - G7| of the value component.
template <class S, class F>
S gk15_panel(F&& f, double a, double b, double& err, bool& finite) {
    const double centr = 0.5 * (a + b);
    const double hlgth = 0.5 * (b - a);
    S fc = f(centr);
    S resg = fc * detail::kGk15WG[3];
    S resk = fc * detail::kGk15WK[7];
    for (int j = 0; j < 3; ++j) {
        const int jtw = 2 * j + 1;
        const double absc = hlgth * detail::kGk15X[jtw];
        S fsum = f(centr - absc) + f(centr + absc);
        resg = resg + fsum * detail::kGk15WG[j];
        resk = resk + fsum * detail::kGk15WK[jtw];
    }
    for (int j = 0; j < 4; ++j) {
        const int jtw = 2 * j;
        const double absc = hlgth * detail::kGk15X[jtw];
        S fsum = f(centr - absc) + f(centr + absc);
        resk = resk + fsum * detail::kGk15WK[jtw];
    }
    if (!all_finite(resk)) {
        finite = false;
        err = quiet_nan();
        return resk * hlgth;
    }
    err = std::abs((value_of(resk) - value_of(resg)) * hlgth);
    return resk * hlgth;
}

// Splits intervals until each panel's error estimate fits its proportional
// share of abs_tol, or the panel budget runs out.
template <class S, class F>
QuadResult<S> integrate_gk15(F&& f, double a, double b, double abs_tol, int max_panels = 256) {
    QuadResult<S> out;
    if (a == b) return out;
    const double total_len = std::abs(b - a);
    std::vector<std::pair<double, double>> todo;
    todo.emplace_back(a, b);
    int used = 0;
    S sum{};
    double err_sum = 0.0;
    while (!todo.empty()) {
        auto [ai, bi] = todo.back();
        todo.pop_back();
        ++used;
        double err = 0.0;
        S s = gk15_panel<S>(f, ai, bi, err, out.finite);
        if (!out.finite) {
            out.integral = s;
            out.error = quiet_nan();
            out.converged = false;
            return out;
        }
        const double share = abs_tol * (std::abs(bi - ai) / total_len);
        if (err <= share || used >= max_panels) {
            sum = sum + s;
            err_sum += err;
            if (err > share) out.converged = false;
            continue;
        }
        const double mid = 0.5 * (ai + bi);
        todo.emplace_back(ai, mid);
        todo.emplace_back(mid, bi);
    }
    out.integral = sum;
    out.error = err_sum;
    return out;
}

}  // namespace shapesr
