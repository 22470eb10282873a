#include "shapesr/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "shapesr/autodiff.hpp"

namespace shapesr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double abs_sum(std::span<const double> p) {
    double s = 0.0;
    for (double v : p) s += std::abs(v);
    return s;
}

void check_problem(const FitProblem& fp) {
    if (!fp.expr || !fp.data) throw std::invalid_argument("fit problem needs expr and data");
    if (fp.constraints && !fp.constraints->specs.empty() && !fp.points)
        throw std::invalid_argument("fit problem with point constraints needs eval points");
}

bool constraints_present(const FitProblem& fp) {
    return fp.constraints && (!fp.constraints->specs.empty() || fp.constraints->has_maxwell);
}

double eval_total_violation(const FitProblem& fp, std::span<const double> p) {
    if (!constraints_present(fp)) return 0.0;
    static const EvalPoints kNoPoints{};
    const EvalPoints& pts = fp.points ? *fp.points : kNoPoints;
    return total_violation(*fp.expr, p, *fp.constraints, pts);
}

// Least-squares objective: sum of squared weighted residuals plus the
// regularizer scaled to row count, so it equals N * (loss + lambda*(sum|p|)^2).
double lm_objective(const FitProblem& fp, std::span<const double> p) {
    const Dataset& d = *fp.data;
    double s = 0.0;
    for (int i = 0; i < d.rows(); ++i) {
        double m = evaluate(*fp.expr, d.row(i), p);
        double r = (d.y[static_cast<size_t>(i)] - m) * d.w[static_cast<size_t>(i)];
        if (!std::isfinite(r)) return kInf;
        s += r * r;
    }
    double l1 = abs_sum(p);
    s += static_cast<double>(d.rows()) * fp.lambda * l1 * l1;
    return s;
}

void fill_losses(const FitProblem& fp, FitResult& r) {
    r.mse_rel = loss(*fp.expr, r.p, *fp.data, LossKind::SquaredRel);
    r.mare = loss(*fp.expr, r.p, *fp.data, LossKind::AbsRel);
}

FitResult no_parameter_result(const FitProblem& fp) {
    FitResult r;
    r.converged = true;
    fill_losses(fp, r);
    return r;
}

}  // namespace

FitVariant fit_variant_from_name(const std::string& name) {
    if (name == "base") return FitVariant::Base;
    if (name == "obj") return FitVariant::Obj;
    if (name == "minimobj") return FitVariant::MinimObj;
    throw std::invalid_argument("unknown fit variant '" + name + "'");
}

const char* fit_variant_name(FitVariant v) {
    switch (v) {
        case FitVariant::Base:
            return "base";
        case FitVariant::Obj:
            return "obj";
        case FitVariant::MinimObj:
            return "minimobj";
    }
    return "";
}

double loss(const CompiledExpr& ce, std::span<const double> p, const Dataset& data,
            LossKind kind) {
    double acc = 0.0;
    for (int i = 0; i < data.rows(); ++i) {
        double m = evaluate(ce, data.row(i), p);
        double r = (data.y[static_cast<size_t>(i)] - m) * data.w[static_cast<size_t>(i)];
        if (!std::isfinite(r)) return kInf;
        acc += kind == LossKind::SquaredRel ? r * r : std::abs(r);
    }
    return acc / static_cast<double>(data.rows());
}

double loss(const Expression& e, std::span<const double> p, const Dataset& data, LossKind kind) {
    return loss(compile(e), p, data, kind);
}

PenaltyObjective penalty_objective(const FitProblem& fp, std::span<const double> p) {
    check_problem(fp);
    const CompiledExpr& ce = *fp.expr;
    const Dataset& d = *fp.data;
    const int np = ce.nparams;
    const size_t npz = static_cast<size_t>(np);

    PenaltyObjective out;
    out.grad.assign(npz, 0.0);
    out.hess.assign(npz * npz, 0.0);
    auto fail = [&] {
        std::fill(out.grad.begin(), out.grad.end(), 0.0);
        std::fill(out.hess.begin(), out.hess.end(), 0.0);
        out.value = kInf;
        return out;
    };

    // Loss part: (1/N) sum r_i^2 with r_i = (y_i - m_i) w_i. The Hessian keeps
    // the exact second-order term r_i * (d2 r_i) rather than the Gauss-Newton
    // approximation.
    const double inv_n = 1.0 / static_cast<double>(d.rows());
    double value = 0.0;
    for (int i = 0; i < d.rows(); ++i) {
        ValueGradHess m = hess_p(ce, d.row(i), p);
        const double w = d.w[static_cast<size_t>(i)];
        const double r = (d.y[static_cast<size_t>(i)] - m.value) * w;
        if (!std::isfinite(r)) return fail();
        value += inv_n * r * r;
        for (int a = 0; a < np; ++a) {
            const double dra = -w * m.grad[static_cast<size_t>(a)];
            if (!std::isfinite(dra)) return fail();
            out.grad[static_cast<size_t>(a)] += inv_n * 2.0 * r * dra;
            for (int b = 0; b < np; ++b) {
                const double drb = -w * m.grad[static_cast<size_t>(b)];
                const double d2r = -w * m.hess[static_cast<size_t>(a * np + b)];
                out.hess[static_cast<size_t>(a * np + b)] +=
                    inv_n * 2.0 * (dra * drb + r * d2r);
            }
        }
    }

    // Constraint part.
    if (constraints_present(fp)) {
        static const EvalPoints kNoPoints{};
        const EvalPoints& pts = fp.points ? *fp.points : kNoPoints;
        ViolationResult v = total_violation_hess(ce, p, *fp.constraints, pts);
        if (!std::isfinite(v.value)) return fail();
        value += fp.rho * v.value;
        for (int a = 0; a < np; ++a) {
            if (!std::isfinite(v.grad[static_cast<size_t>(a)])) return fail();
            out.grad[static_cast<size_t>(a)] += fp.rho * v.grad[static_cast<size_t>(a)];
            for (int b = 0; b < np; ++b)
                out.hess[static_cast<size_t>(a * np + b)] +=
                    fp.rho * v.hess[static_cast<size_t>(a * np + b)];
        }
    }

    // Regularizer lambda * (sum |p_j|)^2.
    const double l1 = abs_sum(p);
    value += fp.lambda * l1 * l1;
    for (int a = 0; a < np; ++a) {
        const double sa = sign_of(p[static_cast<size_t>(a)]);
        out.grad[static_cast<size_t>(a)] += 2.0 * fp.lambda * l1 * sa;
        for (int b = 0; b < np; ++b)
            out.hess[static_cast<size_t>(a * np + b)] +=
                2.0 * fp.lambda * sa * sign_of(p[static_cast<size_t>(b)]);
    }

    out.value = value;
    if (!std::isfinite(value)) return fail();
    return out;
}

FitResult fit_lm(const FitProblem& fp, std::span<const double> p0, int max_iter,
                 const FitOptions& opts) {
    check_problem(fp);
    const CompiledExpr& ce = *fp.expr;
    const Dataset& d = *fp.data;
    const int np = ce.nparams;
    if (np == 0) return no_parameter_result(fp);
    if (static_cast<int>(p0.size()) != np)
        throw std::invalid_argument("fit_lm: p0 size does not match parameter count");

    FitResult res;
    res.p.assign(p0.begin(), p0.end());
    double s_cur = lm_objective(fp, res.p);
    if (!std::isfinite(s_cur)) {
        res.failed = true;
        fill_losses(fp, res);
        return res;
    }

    const int nrows = d.rows();
    const double reg_scale = std::sqrt(static_cast<double>(nrows) * fp.lambda);
    Eigen::MatrixXd jac(nrows + 1, np);
    Eigen::VectorXd resid(nrows + 1);
    Eigen::VectorXd pvec = Eigen::Map<const Eigen::VectorXd>(res.p.data(), np);
    double damping = opts.lm_damping_init;
    bool have_jac = false;

    for (; res.iterations < max_iter;) {
        if (!have_jac) {
            bool ok = true;
            for (int i = 0; i < nrows && ok; ++i) {
                GradDual g = eval_grad_dual(ce, d.row(i), std::span<const double>(res.p));
                const double w = d.w[static_cast<size_t>(i)];
                const double r = (d.y[static_cast<size_t>(i)] - value_of(g)) * w;
                if (!std::isfinite(r)) ok = false;
                resid(i) = r;
                for (int a = 0; a < np; ++a) {
                    double ja = -w * g.g(a);
                    if (!std::isfinite(ja)) ok = false;
                    jac(i, a) = ja;
                }
            }
            if (!ok) break;  // keep the best accepted point
            resid(nrows) = reg_scale * abs_sum(res.p);
            for (int a = 0; a < np; ++a) jac(nrows, a) = reg_scale * sign_of(pvec(a));
            have_jac = true;
            if ((jac.transpose() * resid).norm() < opts.grad_tol) {
                res.converged = true;
                break;
            }
        }

        Eigen::MatrixXd normal = jac.transpose() * jac;
        normal.diagonal().array() += damping;
        Eigen::VectorXd step = normal.ldlt().solve(-(jac.transpose() * resid));
        ++res.iterations;
        if (!step.allFinite()) {
            damping *= 2.0;
            if (damping > 1e12) break;
            continue;
        }
        Eigen::VectorXd trial = pvec + step;
        std::vector<double> ptrial(trial.data(), trial.data() + np);
        double s_trial = lm_objective(fp, ptrial);
        if (std::isfinite(s_trial) && s_trial < s_cur) {
            pvec = trial;
            res.p = ptrial;
            s_cur = s_trial;
            damping = std::max(damping * 0.5, 1e-15);
            have_jac = false;
            if (step.norm() < opts.step_tol) {
                res.converged = true;
                break;
            }
        } else {
            damping *= 2.0;
            if (damping > 1e12) break;
        }
    }

    fill_losses(fp, res);
    return res;
}

FitResult fit_penalty_newton(const FitProblem& fp, std::span<const double> p0, int max_iter,
                             const FitOptions& opts) {
    check_problem(fp);
    const CompiledExpr& ce = *fp.expr;
    const int np = ce.nparams;
    if (np == 0) {
        FitResult r = no_parameter_result(fp);
        r.constr_vios = eval_total_violation(fp, {});
        return r;
    }
    if (static_cast<int>(p0.size()) != np)
        throw std::invalid_argument("fit_penalty_newton: p0 size does not match parameter count");

    FitResult res;
    res.p.assign(p0.begin(), p0.end());

    auto phi_value = [&](std::span<const double> p) {
        double v = loss(ce, p, *fp.data, LossKind::SquaredRel) +
                   fp.rho * eval_total_violation(fp, p);
        double l1 = abs_sum(p);
        return v + fp.lambda * l1 * l1;
    };

    PenaltyObjective cur = penalty_objective(fp, res.p);
    if (!std::isfinite(cur.value)) {
        res.failed = true;
        fill_losses(fp, res);
        res.constr_vios = eval_total_violation(fp, res.p);
        return res;
    }

    Eigen::VectorXd pvec = Eigen::Map<const Eigen::VectorXd>(res.p.data(), np);
    for (; res.iterations < max_iter;) {
        Eigen::Map<const Eigen::VectorXd> grad(cur.grad.data(), np);
        if (grad.norm() < opts.grad_tol) {
            res.converged = true;
            break;
        }

        // Positive-definite modification: shift eigenvalues up when needed.
        Eigen::MatrixXd hess = Eigen::Map<const Eigen::MatrixXd>(cur.hess.data(), np, np);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess);
        double lmin = eig.eigenvalues().minCoeff();
        if (!std::isfinite(lmin)) break;
        if (lmin < 1e-10) hess.diagonal().array() += 1e-10 - lmin;

        Eigen::VectorXd step = hess.ldlt().solve(-grad);
        if (!step.allFinite()) break;
        double slope = grad.dot(step);
        if (slope >= 0.0) {  // fall back to steepest descent
            step = -grad;
            slope = grad.dot(step);
        }

        double t = 1.0;
        bool accepted = false;
        for (int bt = 0; bt <= opts.max_backtracks; ++bt) {
            Eigen::VectorXd trial = pvec + t * step;
            std::vector<double> ptrial(trial.data(), trial.data() + np);
            double v = phi_value(ptrial);
            if (std::isfinite(v) && v <= cur.value + opts.armijo_c * t * slope) {
                pvec = trial;
                res.p = ptrial;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        ++res.iterations;
        if (!accepted) break;
        cur = penalty_objective(fp, res.p);
        if (!std::isfinite(cur.value)) break;
        if ((t * step).norm() < opts.step_tol) {
            res.converged = true;
            break;
        }
    }

    fill_losses(fp, res);
    res.constr_vios = eval_total_violation(fp, res.p);
    return res;
}

FitResult staged_fit(FitVariant variant, const FitProblem& fp, double noise_level,
                     std::span<const double> p0, const FitOptions& opts) {
    check_problem(fp);
    switch (variant) {
        case FitVariant::Base: {
            FitResult r = fit_lm(fp, p0, opts.lm_iters_full, opts);
            r.constr_vios = 0.0;
            return r;
        }
        case FitVariant::Obj: {
            FitResult r = fit_lm(fp, p0, opts.lm_iters_full, opts);
            r.constr_vios = eval_total_violation(fp, r.p);
            return r;
        }
        case FitVariant::MinimObj: {
            FitResult r1 = fit_lm(fp, p0, opts.lm_iters_reduced, opts);
            const double gate = noise_level + opts.mare_gate_offset;
            if (!r1.failed && constraints_present(fp) && r1.mare < gate) {
                FitResult r2 = fit_penalty_newton(fp, r1.p, opts.newton_iters, opts);
                if (!r2.failed) {
                    r2.iterations += r1.iterations;
                    return r2;
                }
            }
            r1.constr_vios = eval_total_violation(fp, r1.p);
            return r1;
        }
    }
    throw std::invalid_argument("unknown fit variant");
}

}  // namespace shapesr
