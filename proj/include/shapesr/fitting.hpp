#pragma once

// Parameter identification for expression candidates: weighted least squares
// via Levenberg-Marquardt on relative residuals r_i = (y_i - m(X_i, p)) / y_i,
// penalty Newton refinement on Phi = loss + rho * violation + lambda * (sum|p|)^2,
// and the staged budget logic that distinguishes the three fitting variants.

#include <span>
#include <string>
#include <vector>

#include "shapesr/constraints.hpp"
#include "shapesr/datasets.hpp"
#include "shapesr/exprtree.hpp"

namespace shapesr {

enum class LossKind { SquaredRel, AbsRel };

// base: unconstrained least squares only, violations reported as zero.
// obj: unconstrained least squares; violation evaluated and reported.
// minimobj: reduced least-squares budget, then constrained Newton refinement
// when the data fit is good enough to be worth the expensive violation work.
enum class FitVariant { Base, Obj, MinimObj };

FitVariant fit_variant_from_name(const std::string& name);
const char* fit_variant_name(FitVariant v);

struct FitProblem {
    const CompiledExpr* expr = nullptr;
    const Dataset* data = nullptr;
    const ConstraintSet* constraints = nullptr;  // null = unconstrained
    const EvalPoints* points = nullptr;          // required when constraints have specs
    double rho = 1.0;       // penalty weight on the constraint violation
    double lambda = 1e-6;   // weight on the squared l1 parameter regularizer
    LossKind loss_kind = LossKind::SquaredRel;
};

struct FitOptions {
    int lm_iters_full = 30;     // base and obj variants
    int lm_iters_reduced = 20;  // minimobj stage one
    int newton_iters = 10;      // minimobj stage two
    double mare_gate_offset = 0.05;  // stage two runs when mare < noise + offset
    double grad_tol = 1e-8;
    double step_tol = 1e-12;
    double lm_damping_init = 1e-3;
    double armijo_c = 1e-4;
    int max_backtracks = 20;
};

struct FitResult {
    std::vector<double> p;
    double mse_rel = 0.0;  // mean squared relative error at p
    double mare = 0.0;     // mean absolute relative error at p
    double constr_vios = 0.0;
    int iterations = 0;
    bool converged = false;
    bool failed = false;
};

// Mean of f((y_i - m(X_i, p)) / y_i) with f = r^2 or |r|; any non-finite
// residual makes the loss +infinity.
double loss(const CompiledExpr& ce, std::span<const double> p, const Dataset& data,
            LossKind kind);
double loss(const Expression& e, std::span<const double> p, const Dataset& data, LossKind kind);

// The constrained objective Phi(p) = loss + rho * violation + lambda * (sum|p|)^2
// with its gradient and row-major Hessian; exposed for white-box testing and
// diagnostics. Non-finite terms yield a +infinity value with zero derivatives.
struct PenaltyObjective {
    double value = 0.0;
    std::vector<double> grad;
    std::vector<double> hess;
};
PenaltyObjective penalty_objective(const FitProblem& fp, std::span<const double> p);

FitResult fit_lm(const FitProblem& fp, std::span<const double> p0, int max_iter,
                 const FitOptions& opts = {});
FitResult fit_penalty_newton(const FitProblem& fp, std::span<const double> p0, int max_iter,
                             const FitOptions& opts = {});

// Stage logic: base/obj run the full least-squares budget; minimobj runs the
// reduced budget and refines with penalty Newton only when the stage-one mare
// beats noise_level + mare_gate_offset. A failed refinement falls back to the
// stage-one result. Reported iterations are the total across stages.
FitResult staged_fit(FitVariant variant, const FitProblem& fp, double noise_level,
                     std::span<const double> p0, const FitOptions& opts = {});

}  // namespace shapesr
