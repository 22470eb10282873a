#pragma once

#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "shapesr/exprtree.hpp"

namespace shapesr {

inline constexpr int kMaxParams = 16;

inline double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

namespace detail {

inline bool is_integer_value(double v) {
    return std::isfinite(v) && v == std::floor(v) && std::abs(v) < 1e15;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// DualX: first order in a single direction (used for d/dx_j, and as the
// component scalar of the nested types for mixed x/p derivatives).
// ---------------------------------------------------------------------------
struct DualX {
    double v = 0.0;
    double dx = 0.0;

    DualX() = default;
    DualX(double value) : v(value) {}  // NOLINT: implicit constant lift on purpose
    DualX(double value, double d) : v(value), dx(d) {}

    friend DualX operator-(const DualX& a) { return {-a.v, -a.dx}; }
    friend DualX operator+(const DualX& a, const DualX& b) { return {a.v + b.v, a.dx + b.dx}; }
    friend DualX operator-(const DualX& a, const DualX& b) { return {a.v - b.v, a.dx - b.dx}; }
    friend DualX operator*(const DualX& a, const DualX& b) {
        return {a.v * b.v, a.v * b.dx + b.v * a.dx};
    }
    friend DualX operator/(const DualX& a, const DualX& b) {
        double val = a.v / b.v;
        return {val, (a.dx - val * b.dx) / b.v};
    }

    friend DualX exp(const DualX& a) {
        double e = std::exp(a.v);
        return {e, e * a.dx};
    }
    friend DualX log(const DualX& a) { return {std::log(a.v), a.dx / a.v}; }
    friend DualX sqrt(const DualX& a) {
        double s = std::sqrt(a.v);
        return {s, 0.5 / s * a.dx};
    }
    friend DualX abs(const DualX& a) {
        double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
        return {std::abs(a.v), s * a.dx};
    }
    friend DualX pow(const DualX& a, const DualX& b) {
        // Value always via std::pow so dual evaluation reproduces plain
        // evaluation bit for bit.
        double val = std::pow(a.v, b.v);
        bool exp_const = (b.dx == 0.0);
        if (a.v > 0.0) {
            double pa = b.v * std::pow(a.v, b.v - 1.0);
            double d = pa * a.dx;
            if (!exp_const) d += val * std::log(a.v) * b.dx;
            return {val, d};
        }
        if (exp_const && detail::is_integer_value(b.v)) {
            double pa = b.v * std::pow(a.v, b.v - 1.0);
            return {val, pa * a.dx};
        }
        return {val, quiet_nan()};
    }
};

inline double value_of(double x) { return x; }
inline double value_of(const DualX& x) { return x.v; }

inline bool all_finite(double x) { return std::isfinite(x); }
inline bool all_finite(const DualX& x) { return std::isfinite(x.v); }

// ---------------------------------------------------------------------------
// DualVec: first order in up to N directions over component scalar S
// (S = double for plain gradients, S = DualX for mixed d/dx d/dp).
// Tangent slots at index >= n are implicitly zero and never stored; the
// accessor g() caps every read accordingly, so mixing operand widths is safe.
// Binary operators are hidden friends so plain doubles lift implicitly.
// ---------------------------------------------------------------------------
template <class S, int N>
struct DualVec {
    S v{};
    int n = 0;
    std::array<S, N> d;

    DualVec() = default;
    DualVec(const S& value) : v(value) {}  // NOLINT: implicit constant lift
    template <class T>
        requires(!std::same_as<T, S> && std::constructible_from<S, T>)
    DualVec(const T& value) : v(value) {}  // NOLINT: lift through nested scalar

    S g(int i) const { return i < n ? d[i] : S{}; }

    friend DualVec operator-(const DualVec& a) {
        DualVec r;
        r.v = -a.v;
        r.n = a.n;
        for (int i = 0; i < r.n; ++i) r.d[i] = -a.d[i];
        return r;
    }
    friend DualVec operator+(const DualVec& a, const DualVec& b) {
        DualVec r;
        r.v = a.v + b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = a.g(i) + b.g(i);
        return r;
    }
    friend DualVec operator-(const DualVec& a, const DualVec& b) {
        DualVec r;
        r.v = a.v - b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = a.g(i) - b.g(i);
        return r;
    }
    friend DualVec operator*(const DualVec& a, const DualVec& b) {
        DualVec r;
        r.v = a.v * b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = a.v * b.g(i) + b.v * a.g(i);
        return r;
    }
    friend DualVec operator/(const DualVec& a, const DualVec& b) {
        DualVec r;
        r.v = a.v / b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = (a.g(i) - r.v * b.g(i)) / b.v;
        return r;
    }
    friend DualVec pow(const DualVec& a, const DualVec& b) {
        using std::log;
        using std::pow;
        DualVec r;
        r.v = pow(a.v, b.v);
        r.n = std::max(a.n, b.n);
        bool exp_const = tangents_zero(b);
        double av = value_of(a.v);
        if (av > 0.0) {
            S pa = b.v * pow(a.v, b.v - S{1.0});
            if (exp_const) {
                for (int i = 0; i < r.n; ++i) r.d[i] = pa * a.g(i);
            } else {
                S pb = r.v * log(a.v);
                for (int i = 0; i < r.n; ++i) r.d[i] = pa * a.g(i) + pb * b.g(i);
            }
            return r;
        }
        if (exp_const && detail::is_integer_value(value_of(b.v))) {
            S pa = b.v * pow(a.v, b.v - S{1.0});
            for (int i = 0; i < r.n; ++i) r.d[i] = pa * a.g(i);
            return r;
        }
        for (int i = 0; i < r.n; ++i) r.d[i] = S{quiet_nan()};
        return r;
    }
};

template <class S, int N>
double value_of(const DualVec<S, N>& a) {
    return value_of(a.v);
}

template <class S, int N>
bool all_finite(const DualVec<S, N>& a) {
    if (!all_finite(a.v)) return false;
    for (int i = 0; i < a.n; ++i)
        if (!all_finite(a.d[i])) return false;
    return true;
}

template <class S, int N>
bool tangents_zero(const DualVec<S, N>& a) {
    for (int i = 0; i < a.n; ++i)
        if (!(value_of(a.d[i]) == 0.0)) return false;
    return true;
}

template <class S, int N>
DualVec<S, N> exp(const DualVec<S, N>& a) {
    using std::exp;
    DualVec<S, N> r;
    r.v = exp(a.v);
    r.n = a.n;
    for (int i = 0; i < r.n; ++i) r.d[i] = r.v * a.d[i];
    return r;
}

template <class S, int N>
DualVec<S, N> sqrt(const DualVec<S, N>& a) {
    using std::sqrt;
    DualVec<S, N> r;
    r.v = sqrt(a.v);
    r.n = a.n;
    S half_inv = S{0.5} / r.v;
    for (int i = 0; i < r.n; ++i) r.d[i] = half_inv * a.d[i];
    return r;
}

// Subgradient convention at 0: abs picks the identity branch there.
template <class S, int N>
DualVec<S, N> abs(const DualVec<S, N>& a) {
    return value_of(a) < 0.0 ? -a : a;
}

// ---------------------------------------------------------------------------
// Hyper: second order over component scalar S. Hessian stored as a packed
// upper triangle, index (i <= j) -> j*(j+1)/2 + i; symmetric by construction.
// Same capped-read convention as DualVec via g() / hh().
// ---------------------------------------------------------------------------
template <class S, int N>
struct Hyper {
    static constexpr int kTri = N * (N + 1) / 2;
    S v{};
    int n = 0;
    std::array<S, N> d;
    std::array<S, kTri> h;

    Hyper() = default;
    Hyper(const S& value) : v(value) {}  // NOLINT: implicit constant lift
    template <class T>
        requires(!std::same_as<T, S> && std::constructible_from<S, T>)
    Hyper(const T& value) : v(value) {}  // NOLINT: lift through nested scalar

    static int tri(int i, int j) { return j * (j + 1) / 2 + i; }  // requires i <= j
    S g(int i) const { return i < n ? d[i] : S{}; }
    S hh(int i, int j) const { return j < n ? h[tri(i, j)] : S{}; }

    friend Hyper operator-(const Hyper& a) {
        Hyper r;
        r.v = -a.v;
        r.n = a.n;
        for (int i = 0; i < r.n; ++i) r.d[i] = -a.d[i];
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i) r.h[tri(i, j)] = -a.h[tri(i, j)];
        return r;
    }
    friend Hyper operator+(const Hyper& a, const Hyper& b) {
        Hyper r;
        r.v = a.v + b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = a.g(i) + b.g(i);
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i) r.h[tri(i, j)] = a.hh(i, j) + b.hh(i, j);
        return r;
    }
    friend Hyper operator-(const Hyper& a, const Hyper& b) {
        Hyper r;
        r.v = a.v - b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = a.g(i) - b.g(i);
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i) r.h[tri(i, j)] = a.hh(i, j) - b.hh(i, j);
        return r;
    }
    friend Hyper operator*(const Hyper& a, const Hyper& b) {
        Hyper r;
        r.v = a.v * b.v;
        r.n = std::max(a.n, b.n);
        for (int i = 0; i < r.n; ++i) r.d[i] = a.v * b.g(i) + b.v * a.g(i);
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i)
                r.h[tri(i, j)] =
                    a.v * b.hh(i, j) + b.v * a.hh(i, j) + a.g(i) * b.g(j) + a.g(j) * b.g(i);
        return r;
    }
    friend Hyper operator/(const Hyper& a, const Hyper& b) {
        Hyper r;
        r.n = std::max(a.n, b.n);
        r.v = a.v / b.v;
        for (int i = 0; i < r.n; ++i) r.d[i] = (a.g(i) - r.v * b.g(i)) / b.v;
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i)
                r.h[tri(i, j)] =
                    (a.hh(i, j) - r.v * b.hh(i, j) - r.d[i] * b.g(j) - r.d[j] * b.g(i)) / b.v;
        return r;
    }
    friend Hyper pow(const Hyper& a, const Hyper& b) {
        using std::log;
        using std::pow;
        Hyper r;
        r.n = std::max(a.n, b.n);
        r.v = pow(a.v, b.v);
        bool exp_const = tangents_zero(b);
        double av = value_of(a.v);
        bool smooth = av > 0.0 || (exp_const && detail::is_integer_value(value_of(b.v)));
        if (!smooth) {
            for (int i = 0; i < r.n; ++i) r.d[i] = S{quiet_nan()};
            for (int j = 0; j < r.n; ++j)
                for (int i = 0; i <= j; ++i) r.h[tri(i, j)] = S{quiet_nan()};
            return r;
        }
        S pa = b.v * pow(a.v, b.v - S{1.0});
        S paa = b.v * (b.v - S{1.0}) * pow(a.v, b.v - S{2.0});
        if (exp_const) {
            for (int i = 0; i < r.n; ++i) r.d[i] = pa * a.g(i);
            for (int j = 0; j < r.n; ++j)
                for (int i = 0; i <= j; ++i)
                    r.h[tri(i, j)] = pa * a.hh(i, j) + paa * a.g(i) * a.g(j);
            return r;
        }
        S lg = log(a.v);
        S pb = r.v * lg;
        S pab = pow(a.v, b.v - S{1.0}) * (b.v * lg + S{1.0});
        S pbb = r.v * lg * lg;
        for (int i = 0; i < r.n; ++i) r.d[i] = pa * a.g(i) + pb * b.g(i);
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i)
                r.h[tri(i, j)] = pa * a.hh(i, j) + pb * b.hh(i, j) + paa * a.g(i) * a.g(j) +
                                 pab * (a.g(i) * b.g(j) + a.g(j) * b.g(i)) +
                                 pbb * b.g(i) * b.g(j);
        return r;
    }
};

template <class S, int N>
double value_of(const Hyper<S, N>& a) {
    return value_of(a.v);
}

template <class S, int N>
bool all_finite(const Hyper<S, N>& a) {
    if (!all_finite(a.v)) return false;
    for (int i = 0; i < a.n; ++i)
        if (!all_finite(a.d[i])) return false;
    for (int j = 0; j < a.n; ++j)
        for (int i = 0; i <= j; ++i)
            if (!all_finite(a.h[Hyper<S, N>::tri(i, j)])) return false;
    return true;
}

template <class S, int N>
bool tangents_zero(const Hyper<S, N>& a) {
    for (int i = 0; i < a.n; ++i)
        if (!(value_of(a.d[i]) == 0.0)) return false;
    for (int j = 0; j < a.n; ++j)
        for (int i = 0; i <= j; ++i)
            if (!(value_of(a.h[Hyper<S, N>::tri(i, j)]) == 0.0)) return false;
    return true;
}

// Unary chain rule: f(a) given value and first/second derivative factors.
template <class S, int N>
Hyper<S, N> hyper_chain(const Hyper<S, N>& a, const S& value, const S& d1, const S& d2) {
    Hyper<S, N> r;
    r.v = value;
    r.n = a.n;
    for (int i = 0; i < r.n; ++i) r.d[i] = d1 * a.d[i];
    for (int j = 0; j < r.n; ++j)
        for (int i = 0; i <= j; ++i)
            r.h[r.tri(i, j)] = d1 * a.h[r.tri(i, j)] + d2 * a.d[i] * a.d[j];
    return r;
}

template <class S, int N>
Hyper<S, N> exp(const Hyper<S, N>& a) {
    using std::exp;
    S e = exp(a.v);
    return hyper_chain(a, e, e, e);
}

template <class S, int N>
Hyper<S, N> sqrt(const Hyper<S, N>& a) {
    using std::sqrt;
    S s = sqrt(a.v);
    S d1 = S{0.5} / s;
    S d2 = S{-0.25} / (s * a.v);
    return hyper_chain(a, s, d1, d2);
}

// Subgradient convention at 0: abs picks the identity branch there.
template <class S, int N>
Hyper<S, N> abs(const Hyper<S, N>& a) {
    return value_of(a) < 0.0 ? -a : a;
}

// ---------------------------------------------------------------------------
// Model-level derivative entry points over a CompiledExpr. All outputs follow
// the evaluation contract: any non-finite component becomes quiet NaN.
// ---------------------------------------------------------------------------

using GradDual = DualVec<double, kMaxParams>;
using MixedDual = DualVec<DualX, kMaxParams>;
using HessDual = Hyper<double, kMaxParams>;
using HessMixed = Hyper<DualX, kMaxParams>;

namespace detail {

inline double finalize(double x) { return std::isfinite(x) ? x : quiet_nan(); }

inline void check_nparams(const CompiledExpr& ce) {
    if (ce.nparams > kMaxParams)
        throw std::invalid_argument("autodiff: expression exceeds kMaxParams parameters");
}

}  // namespace detail

inline GradDual eval_grad_dual(const CompiledExpr& ce, std::span<const double> x_row,
                               std::span<const double> p) {
    detail::check_nparams(ce);
    const int np = ce.nparams;
    return eval_program<GradDual>(
        ce, [&](int i) { return GradDual{x_row[static_cast<size_t>(i)]}; },
        [&](int i) {
            GradDual s{p[static_cast<size_t>(i)]};
            s.n = np;
            for (int k = 0; k < np; ++k) s.d[k] = (k == i) ? 1.0 : 0.0;
            return s;
        },
        [](double c) { return GradDual{c}; });
}

// Value and gradient with respect to the parameter vector.
struct ValueGrad {
    double value = 0.0;
    std::vector<double> grad;
};

inline ValueGrad grad_p(const CompiledExpr& ce, std::span<const double> x_row,
                        std::span<const double> p) {
    GradDual r = eval_grad_dual(ce, x_row, p);
    ValueGrad out;
    out.value = detail::finalize(r.v);
    out.grad.resize(static_cast<size_t>(ce.nparams));
    for (int k = 0; k < ce.nparams; ++k)
        out.grad[static_cast<size_t>(k)] = detail::finalize(r.g(k));
    return out;
}

inline ValueGrad grad_p(const Expression& e, std::span<const double> x_row,
                        std::span<const double> p) {
    return grad_p(compile(e), x_row, p);
}

// d m / d x_var at (x_row, p).
inline double partial_x(const CompiledExpr& ce, std::span<const double> x_row,
                        std::span<const double> p, int var_index) {
    DualX r = eval_program<DualX>(
        ce,
        [&](int i) { return DualX{x_row[static_cast<size_t>(i)], i == var_index ? 1.0 : 0.0}; },
        [&](int i) { return DualX{p[static_cast<size_t>(i)]}; },
        [](double c) { return DualX{c}; });
    return detail::finalize(r.dx);
}

inline double partial_x(const Expression& e, std::span<const double> x_row,
                        std::span<const double> p, int var_index) {
    return partial_x(compile(e), x_row, p, var_index);
}

// grad_p of (d m / d x_var): the mixed second derivative used by constrained
// fitting when a constraint targets a partial derivative.
struct PartialGrad {
    double value = 0.0;        // d m / d x_var
    std::vector<double> grad;  // d/dp of the above
};

inline MixedDual eval_partial_grad_dual(const CompiledExpr& ce, std::span<const double> x_row,
                                        std::span<const double> p, int var_index) {
    detail::check_nparams(ce);
    const int np = ce.nparams;
    return eval_program<MixedDual>(
        ce,
        [&](int i) {
            return MixedDual{DualX{x_row[static_cast<size_t>(i)], i == var_index ? 1.0 : 0.0}};
        },
        [&](int i) {
            MixedDual s{DualX{p[static_cast<size_t>(i)]}};
            s.n = np;
            for (int k = 0; k < np; ++k) s.d[k] = DualX{(k == i) ? 1.0 : 0.0};
            return s;
        },
        [](double c) { return MixedDual{DualX{c}}; });
}

inline PartialGrad partial_x_grad_p(const CompiledExpr& ce, std::span<const double> x_row,
                                    std::span<const double> p, int var_index) {
    MixedDual r = eval_partial_grad_dual(ce, x_row, p, var_index);
    PartialGrad out;
    out.value = detail::finalize(r.v.dx);
    out.grad.resize(static_cast<size_t>(ce.nparams));
    for (int k = 0; k < ce.nparams; ++k)
        out.grad[static_cast<size_t>(k)] = detail::finalize(r.g(k).dx);
    return out;
}

inline PartialGrad partial_x_grad_p(const Expression& e, std::span<const double> x_row,
                                    std::span<const double> p, int var_index) {
    return partial_x_grad_p(compile(e), x_row, p, var_index);
}

inline HessDual eval_hess_dual(const CompiledExpr& ce, std::span<const double> x_row,
                               std::span<const double> p) {
    detail::check_nparams(ce);
    const int np = ce.nparams;
    return eval_program<HessDual>(
        ce, [&](int i) { return HessDual{x_row[static_cast<size_t>(i)]}; },
        [&](int i) {
            HessDual s{p[static_cast<size_t>(i)]};
            s.n = np;
            for (int k = 0; k < np; ++k) s.d[k] = (k == i) ? 1.0 : 0.0;
            for (int k = 0; k < np * (np + 1) / 2; ++k) s.h[k] = 0.0;
            return s;
        },
        [](double c) { return HessDual{c}; });
}

// Mixed second-order evaluation: value/grad/Hessian in p of (d m / d x_var).
inline HessMixed eval_hess_mixed(const CompiledExpr& ce, std::span<const double> x_row,
                                 std::span<const double> p, int var_index) {
    detail::check_nparams(ce);
    const int np = ce.nparams;
    return eval_program<HessMixed>(
        ce,
        [&](int i) {
            return HessMixed{DualX{x_row[static_cast<size_t>(i)], i == var_index ? 1.0 : 0.0}};
        },
        [&](int i) {
            HessMixed s{DualX{p[static_cast<size_t>(i)]}};
            s.n = np;
            for (int k = 0; k < np; ++k) s.d[k] = DualX{(k == i) ? 1.0 : 0.0};
            for (int k = 0; k < np * (np + 1) / 2; ++k) s.h[k] = DualX{0.0};
            return s;
        },
        [](double c) { return HessMixed{DualX{c}}; });
}

// Value, gradient and exactly-symmetric Hessian of the model at one row.
struct ValueGradHess {
    double value = 0.0;
    std::vector<double> grad;
    std::vector<double> hess;  // row-major n x n, symmetric
};

inline ValueGradHess hess_p(const CompiledExpr& ce, std::span<const double> x_row,
                            std::span<const double> p) {
    HessDual r = eval_hess_dual(ce, x_row, p);
    const int n = ce.nparams;
    ValueGradHess out;
    out.value = detail::finalize(r.v);
    out.grad.resize(static_cast<size_t>(n));
    out.hess.assign(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    for (int k = 0; k < n; ++k) out.grad[static_cast<size_t>(k)] = detail::finalize(r.g(k));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= j; ++i) {
            double v = detail::finalize(r.hh(i, j));
            out.hess[static_cast<size_t>(i) * static_cast<size_t>(n) + static_cast<size_t>(j)] = v;
            out.hess[static_cast<size_t>(j) * static_cast<size_t>(n) + static_cast<size_t>(i)] = v;
        }
    return out;
}

inline ValueGradHess hess_p(const Expression& e, std::span<const double> x_row,
                            std::span<const double> p) {
    return hess_p(compile(e), x_row, p);
}

}  // namespace shapesr
