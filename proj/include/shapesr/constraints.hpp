#pragma once

// Shape-constraint declaration, evaluation-point sampling, and the scalar
// constraint-violation penalty. Inequalities are canonicalized to g <= 0 and
// equalities kept as h = 0; the penalty is sum h^2 + sum max(0, g)^2 over all
// frozen evaluation points. A non-finite constrained quantity at any point
// yields an infinite sentinel violation so undefined regions never look
// feasible. The pressure benchmark adds an equal-area (Maxwell) equality
// constraint with a cheap gate and an expensive quadrature part.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shapesr/datasets.hpp"
#include "shapesr/exprtree.hpp"

namespace shapesr {

// ---------------------------------------------------------------------------
// Samplers: how constraint evaluation points are drawn per variable.
// Logarithmic draws uniformly in log|x| and keeps the interval's sign, so the
// endpoints must share a sign and exclude zero.
// ---------------------------------------------------------------------------
enum class SamplerKind { Uniform, Logarithmic, FixedSet };

struct Sampler {
    SamplerKind kind = SamplerKind::Uniform;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<double> values;  // FixedSet only

    static Sampler uniform(double lo, double hi);
    static Sampler logarithmic(double lo, double hi);
    static Sampler fixed(std::vector<double> values);
};

enum class ConstraintTarget { Value, Partial };
enum class ConstraintSense { Geq, Leq, Eq };

struct ConstraintSpec {
    std::string id;  // unique within a set; keys the EvalPoints map
    ConstraintTarget target = ConstraintTarget::Value;
    int var_index = 0;  // Partial only: variable the derivative is taken in
    ConstraintSense sense = ConstraintSense::Geq;
    std::vector<Sampler> samplers;  // one per model variable
    int points_per_var = 5;
    int pairs = 5;  // combinations drawn from the per-variable cross product
};

// Frozen evaluation points: constraint id -> list of d-dimensional points.
// Sampled once per run; identical for every candidate scored in that run.
struct EvalPoints {
    std::map<std::string, std::vector<std::vector<double>>> points;
};

// Equal-area equality constraint on two subcritical isotherms. Part 1 checks
// the model's pressure at the four phase-transition states against the known
// saturation pressures: if the mean absolute relative error is at or above
// `gate`, the expensive quadrature is skipped and the violation is
// (MARE + dummy_penalty)^2, which still provides a descent direction. Part 2
// integrates (model - p_sat) dv between the boiling and dew volumes on each
// isotherm and adds the squared scaled integrals to the squared MARE.
struct MaxwellSpec {
    double T1 = 300.0;
    double T2 = 400.0;
    double p1 = 594598.2419252641;
    double p2 = 2.7042458049626728e6;
    double v1_boiling = 8.609384005897035e-5;
    double v1_dew = 0.003847602071128293;
    double v2_boiling = 1.0159726806190158e-4;
    double v2_dew = 9.466121805725504e-4;
    double gate = 0.01;
    double dummy_penalty = 1000.0;
    double integral_scale = 1000.0;
    double quad_tol_rel = 1e-3;  // abs tol = quad_tol_rel * |p_i| * (v_dew - v_boiling)
    int var_T = 0;
    int var_v = 1;
};

struct ConstraintSet {
    std::vector<ConstraintSpec> specs;
    bool has_maxwell = false;
    MaxwellSpec maxwell;
};

// Draws the evaluation points for every spec: per variable `points_per_var`
// samples, then `pairs` combinations drawn without replacement from the
// cross product. Deterministic per seed. Throws std::invalid_argument on an
// invalid spec (bad logarithmic interval, empty fixed set, duplicate ids,
// pairs exceeding the cross-product size).
EvalPoints sample_points(const std::vector<ConstraintSpec>& specs, uint64_t seed);
EvalPoints sample_points(const ConstraintSet& set, uint64_t seed);

// Scalar violation of the sampled point constraints. Result with derivatives
// carries the gradient (and optionally the row-major Hessian) with respect to
// the parameter vector; infinite sentinel results carry zero derivatives.
struct ViolationResult {
    double value = 0.0;
    std::vector<double> grad;
    std::vector<double> hess;  // row-major nparams x nparams; *_hess only
};

double violation(const CompiledExpr& ce, std::span<const double> p, const EvalPoints& pts,
                 const std::vector<ConstraintSpec>& specs);
double violation(const Expression& e, std::span<const double> p, const EvalPoints& pts,
                 const std::vector<ConstraintSpec>& specs);
ViolationResult violation_grad(const CompiledExpr& ce, std::span<const double> p,
                               const EvalPoints& pts, const std::vector<ConstraintSpec>& specs);
ViolationResult violation_hess(const CompiledExpr& ce, std::span<const double> p,
                               const EvalPoints& pts, const std::vector<ConstraintSpec>& specs);

double maxwell_violation(const CompiledExpr& ce, std::span<const double> p,
                         const MaxwellSpec& ms);
double maxwell_violation(const Expression& e, std::span<const double> p, const MaxwellSpec& ms);
ViolationResult maxwell_violation_grad(const CompiledExpr& ce, std::span<const double> p,
                                       const MaxwellSpec& ms);
ViolationResult maxwell_violation_hess(const CompiledExpr& ce, std::span<const double> p,
                                       const MaxwellSpec& ms);

// Point-constraint violation plus the equal-area violation when present.
double total_violation(const CompiledExpr& ce, std::span<const double> p,
                       const ConstraintSet& set, const EvalPoints& pts);
ViolationResult total_violation_grad(const CompiledExpr& ce, std::span<const double> p,
                                     const ConstraintSet& set, const EvalPoints& pts);
ViolationResult total_violation_hess(const CompiledExpr& ce, std::span<const double> p,
                                     const ConstraintSet& set, const EvalPoints& pts);

// Built-in constraint sets for the three benchmarks. The magnetic-force set
// uses the senses consistent with its ground truth (see docs); the published
// table variant with all senses inverted is available separately.
ConstraintSet default_constraints(ProblemId id);
ConstraintSet magman_constraints_as_printed();

// Lookup by the name recorded in ProblemSpec::constraint_set. Accepts
// "gaussian", "magman", "magman_as_printed", "vanderwaals", and "none".
ConstraintSet constraint_set_by_name(const std::string& name);

// JSON persistence for constraint sets and frozen evaluation points.
void save_constraint_set(const ConstraintSet& set, const std::string& path);
ConstraintSet load_constraint_set(const std::string& path);
void save_eval_points(const EvalPoints& pts, const std::string& path);
EvalPoints load_eval_points(const std::string& path);

}  // namespace shapesr
