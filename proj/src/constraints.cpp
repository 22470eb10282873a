#include "shapesr/constraints.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "shapesr/autodiff.hpp"
#include "shapesr/quadrature.hpp"
#include "shapesr/rng.hpp"

namespace shapesr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_spec(const ConstraintSpec& cs) {
    if (cs.id.empty()) throw std::invalid_argument("constraint spec needs a non-empty id");
    if (cs.samplers.empty())
        throw std::invalid_argument("constraint spec '" + cs.id + "' has no samplers");
    if (cs.points_per_var < 1)
        throw std::invalid_argument("constraint spec '" + cs.id + "': points_per_var must be >= 1");
    if (cs.pairs < 1)
        throw std::invalid_argument("constraint spec '" + cs.id + "': pairs must be >= 1");
    if (cs.target == ConstraintTarget::Partial && cs.var_index < 0)
        throw std::invalid_argument("constraint spec '" + cs.id + "': negative var_index");
    long total = 1;
    for (const Sampler& s : cs.samplers) {
        switch (s.kind) {
            case SamplerKind::Uniform:
                break;
            case SamplerKind::Logarithmic:
                if (s.lo == 0.0 || s.hi == 0.0 || (s.lo < 0.0) != (s.hi < 0.0))
                    throw std::invalid_argument("constraint spec '" + cs.id +
                                                "': logarithmic interval must exclude 0 and share "
                                                "a sign");
                break;
            case SamplerKind::FixedSet:
                if (s.values.empty())
                    throw std::invalid_argument("constraint spec '" + cs.id +
                                                "': fixed sampler needs values");
                break;
        }
        total *= cs.points_per_var;
    }
    if (cs.pairs > total)
        throw std::invalid_argument("constraint spec '" + cs.id +
                                    "': pairs exceeds the cross-product size");
}

double draw_sample(const Sampler& s, Rng& rng) {
    switch (s.kind) {
        case SamplerKind::Uniform: {
            double lo = std::min(s.lo, s.hi), hi = std::max(s.lo, s.hi);
            return std::uniform_real_distribution<double>(lo, hi)(rng);
        }
        case SamplerKind::Logarithmic: {
            double sign = s.lo < 0.0 ? -1.0 : 1.0;
            double la = std::log(std::abs(s.lo)), lb = std::log(std::abs(s.hi));
            double u = std::uniform_real_distribution<double>(std::min(la, lb),
                                                              std::max(la, lb))(rng);
            return sign * std::exp(u);
        }
        case SamplerKind::FixedSet: {
            std::uniform_int_distribution<size_t> pick(0, s.values.size() - 1);
            return s.values[pick(rng)];
        }
    }
    return 0.0;  // unreachable
}

// ---------------------------------------------------------------------------
// Generic violation machinery. The penalty arithmetic runs in scalar type S
// (double, GradDual, or HessDual) so values, gradients, and Hessians with
// respect to the parameters share one implementation. The branch decisions
// (active inequality, NaN sentinel, gate) always look at the value channel.
// ---------------------------------------------------------------------------
template <class S>
struct QuantityEval;

template <>
struct QuantityEval<double> {
    static double value(const CompiledExpr& ce, std::span<const double> x,
                        std::span<const double> p) {
        return evaluate(ce, x, p);
    }
    static double partial(const CompiledExpr& ce, std::span<const double> x,
                          std::span<const double> p, int var) {
        return partial_x(ce, x, p, var);
    }
};

template <>
struct QuantityEval<GradDual> {
    static GradDual value(const CompiledExpr& ce, std::span<const double> x,
                          std::span<const double> p) {
        return eval_grad_dual(ce, x, p);
    }
    static GradDual partial(const CompiledExpr& ce, std::span<const double> x,
                            std::span<const double> p, int var) {
        MixedDual m = eval_partial_grad_dual(ce, x, p, var);
        GradDual r;
        r.v = m.v.dx;
        r.n = m.n;
        for (int i = 0; i < r.n; ++i) r.d[static_cast<size_t>(i)] = m.d[static_cast<size_t>(i)].dx;
        return r;
    }
};

template <>
struct QuantityEval<HessDual> {
    static HessDual value(const CompiledExpr& ce, std::span<const double> x,
                          std::span<const double> p) {
        return eval_hess_dual(ce, x, p);
    }
    static HessDual partial(const CompiledExpr& ce, std::span<const double> x,
                            std::span<const double> p, int var) {
        HessMixed m = eval_hess_mixed(ce, x, p, var);
        HessDual r;
        r.v = m.v.dx;
        r.n = m.n;
        for (int i = 0; i < r.n; ++i) r.d[static_cast<size_t>(i)] = m.d[static_cast<size_t>(i)].dx;
        for (int j = 0; j < r.n; ++j)
            for (int i = 0; i <= j; ++i) {
                int t = HessDual::tri(i, j);
                r.h[static_cast<size_t>(t)] = m.h[static_cast<size_t>(t)].dx;
            }
        return r;
    }
};

template <class S>
S violation_impl(const CompiledExpr& ce, std::span<const double> p,
                 const std::vector<ConstraintSpec>& specs, const EvalPoints& pts,
                 bool& sentinel) {
    S acc{0.0};
    for (const ConstraintSpec& cs : specs) {
        auto it = pts.points.find(cs.id);
        if (it == pts.points.end())
            throw std::invalid_argument("no evaluation points for constraint id '" + cs.id + "'");
        for (const std::vector<double>& x : it->second) {
            S q = cs.target == ConstraintTarget::Value
                      ? QuantityEval<S>::value(ce, x, p)
                      : QuantityEval<S>::partial(ce, x, p, cs.var_index);
            double qv = value_of(q);
            if (!std::isfinite(qv)) {
                sentinel = true;
                return S{0.0};
            }
            switch (cs.sense) {
                case ConstraintSense::Eq:
                    acc = acc + q * q;
                    break;
                case ConstraintSense::Leq:  // violation max(0, g)
                    if (qv > 0.0) acc = acc + q * q;
                    break;
                case ConstraintSense::Geq:  // f >= 0 canonicalized to -f <= 0
                    if (qv < 0.0) acc = acc + q * q;
                    break;
            }
        }
    }
    return acc;
}

template <class S>
S maxwell_impl(const CompiledExpr& ce, std::span<const double> p, const MaxwellSpec& ms,
               bool& sentinel) {
    using std::abs;
    if (ce.nvars > 16) throw std::invalid_argument("equal-area constraint: too many variables");
    std::array<double, 16> x{};

    // Part 1: mean absolute relative error at the four transition states.
    const double state_T[4] = {ms.T1, ms.T1, ms.T2, ms.T2};
    const double state_v[4] = {ms.v1_boiling, ms.v1_dew, ms.v2_boiling, ms.v2_dew};
    const double state_p[4] = {ms.p1, ms.p1, ms.p2, ms.p2};
    S mare{0.0};
    for (int k = 0; k < 4; ++k) {
        x[static_cast<size_t>(ms.var_T)] = state_T[k];
        x[static_cast<size_t>(ms.var_v)] = state_v[k];
        S m = QuantityEval<S>::value(ce, std::span<const double>(x.data(), ce.nvars), p);
        if (!std::isfinite(value_of(m))) {
            sentinel = true;
            return S{0.0};
        }
        mare = mare + abs(m - state_p[k]) / std::abs(state_p[k]);
    }
    mare = mare * 0.25;

    if (value_of(mare) >= ms.gate) {
        S gated = mare + ms.dummy_penalty;
        return gated * gated;
    }

    // Part 2: equal-area integrals, each scaled before squaring.
    S acc = mare * mare;
    const double iso_T[2] = {ms.T1, ms.T2};
    const double iso_p[2] = {ms.p1, ms.p2};
    const double iso_vb[2] = {ms.v1_boiling, ms.v2_boiling};
    const double iso_vd[2] = {ms.v1_dew, ms.v2_dew};
    for (int i = 0; i < 2; ++i) {
        x[static_cast<size_t>(ms.var_T)] = iso_T[i];
        double offset = iso_p[i];
        auto integrand = [&](double v) -> S {
            x[static_cast<size_t>(ms.var_v)] = v;
            return QuantityEval<S>::value(ce, std::span<const double>(x.data(), ce.nvars), p) -
                   offset;
        };
        double span_len = iso_vd[i] - iso_vb[i];
        double tol = ms.quad_tol_rel * std::abs(offset) * span_len;
        QuadResult<S> qr = integrate_gk15<S>(integrand, iso_vb[i], iso_vd[i], tol);
        if (!qr.finite) {
            sentinel = true;
            return S{0.0};
        }
        S scaled = qr.integral / ms.integral_scale;
        acc = acc + scaled * scaled;
    }
    return acc;
}

ViolationResult pack_grad(const GradDual& a, int np, bool sentinel) {
    ViolationResult r;
    r.grad.assign(static_cast<size_t>(np), 0.0);
    if (sentinel) {
        r.value = kInf;
        return r;
    }
    r.value = value_of(a);
    for (int i = 0; i < np; ++i) r.grad[static_cast<size_t>(i)] = a.g(i);
    return r;
}

ViolationResult pack_hess(const HessDual& a, int np, bool sentinel) {
    ViolationResult r;
    r.grad.assign(static_cast<size_t>(np), 0.0);
    r.hess.assign(static_cast<size_t>(np) * static_cast<size_t>(np), 0.0);
    if (sentinel) {
        r.value = kInf;
        return r;
    }
    r.value = value_of(a);
    for (int i = 0; i < np; ++i) r.grad[static_cast<size_t>(i)] = a.g(i);
    for (int j = 0; j < np; ++j)
        for (int i = 0; i <= j; ++i) {
            double hij = a.hh(i, j);
            r.hess[static_cast<size_t>(i * np + j)] = hij;
            r.hess[static_cast<size_t>(j * np + i)] = hij;
        }
    return r;
}

ViolationResult add_results(const ViolationResult& a, const ViolationResult& b) {
    ViolationResult r;
    r.value = a.value + b.value;
    r.grad.resize(a.grad.size());
    for (size_t i = 0; i < r.grad.size(); ++i) r.grad[i] = a.grad[i] + b.grad[i];
    if (!a.hess.empty()) {
        r.hess.resize(a.hess.size());
        for (size_t i = 0; i < r.hess.size(); ++i) r.hess[i] = a.hess[i] + b.hess[i];
    }
    if (std::isinf(r.value)) {
        std::fill(r.grad.begin(), r.grad.end(), 0.0);
        std::fill(r.hess.begin(), r.hess.end(), 0.0);
    }
    return r;
}

}  // namespace

Sampler Sampler::uniform(double lo, double hi) {
    Sampler s;
    s.kind = SamplerKind::Uniform;
    s.lo = lo;
    s.hi = hi;
    return s;
}

Sampler Sampler::logarithmic(double lo, double hi) {
    Sampler s;
    s.kind = SamplerKind::Logarithmic;
    s.lo = lo;
    s.hi = hi;
    return s;
}

Sampler Sampler::fixed(std::vector<double> values) {
    Sampler s;
    s.kind = SamplerKind::FixedSet;
    s.values = std::move(values);
    return s;
}

EvalPoints sample_points(const std::vector<ConstraintSpec>& specs, uint64_t seed) {
    EvalPoints out;
    Rng rng = make_rng({seed});
    for (const ConstraintSpec& cs : specs) {
        validate_spec(cs);
        if (out.points.count(cs.id))
            throw std::invalid_argument("duplicate constraint id '" + cs.id + "'");
        const size_t nvars = cs.samplers.size();
        std::vector<std::vector<double>> per_var(nvars);
        for (size_t d = 0; d < nvars; ++d) {
            per_var[d].resize(static_cast<size_t>(cs.points_per_var));
            for (double& v : per_var[d]) v = draw_sample(cs.samplers[d], rng);
        }
        long total = 1;
        for (size_t d = 0; d < nvars; ++d) total *= cs.points_per_var;
        std::vector<long> combos(static_cast<size_t>(total));
        std::iota(combos.begin(), combos.end(), 0L);
        std::shuffle(combos.begin(), combos.end(), rng);
        std::vector<std::vector<double>> pts;
        pts.reserve(static_cast<size_t>(cs.pairs));
        for (int k = 0; k < cs.pairs; ++k) {
            long c = combos[static_cast<size_t>(k)];
            std::vector<double> x(nvars);
            for (size_t d = 0; d < nvars; ++d) {
                x[d] = per_var[d][static_cast<size_t>(c % cs.points_per_var)];
                c /= cs.points_per_var;
            }
            pts.push_back(std::move(x));
        }
        out.points.emplace(cs.id, std::move(pts));
    }
    return out;
}

EvalPoints sample_points(const ConstraintSet& set, uint64_t seed) {
    return sample_points(set.specs, seed);
}

double violation(const CompiledExpr& ce, std::span<const double> p, const EvalPoints& pts,
                 const std::vector<ConstraintSpec>& specs) {
    bool sentinel = false;
    double v = violation_impl<double>(ce, p, specs, pts, sentinel);
    return sentinel ? kInf : v;
}

double violation(const Expression& e, std::span<const double> p, const EvalPoints& pts,
                 const std::vector<ConstraintSpec>& specs) {
    return violation(compile(e), p, pts, specs);
}

ViolationResult violation_grad(const CompiledExpr& ce, std::span<const double> p,
                               const EvalPoints& pts, const std::vector<ConstraintSpec>& specs) {
    bool sentinel = false;
    GradDual a = violation_impl<GradDual>(ce, p, specs, pts, sentinel);
    return pack_grad(a, ce.nparams, sentinel);
}

ViolationResult violation_hess(const CompiledExpr& ce, std::span<const double> p,
                               const EvalPoints& pts, const std::vector<ConstraintSpec>& specs) {
    bool sentinel = false;
    HessDual a = violation_impl<HessDual>(ce, p, specs, pts, sentinel);
    return pack_hess(a, ce.nparams, sentinel);
}

double maxwell_violation(const CompiledExpr& ce, std::span<const double> p,
                         const MaxwellSpec& ms) {
    bool sentinel = false;
    double v = maxwell_impl<double>(ce, p, ms, sentinel);
    return sentinel ? kInf : v;
}

double maxwell_violation(const Expression& e, std::span<const double> p, const MaxwellSpec& ms) {
    return maxwell_violation(compile(e), p, ms);
}

ViolationResult maxwell_violation_grad(const CompiledExpr& ce, std::span<const double> p,
                                       const MaxwellSpec& ms) {
    bool sentinel = false;
    GradDual a = maxwell_impl<GradDual>(ce, p, ms, sentinel);
    return pack_grad(a, ce.nparams, sentinel);
}

ViolationResult maxwell_violation_hess(const CompiledExpr& ce, std::span<const double> p,
                                       const MaxwellSpec& ms) {
    bool sentinel = false;
    HessDual a = maxwell_impl<HessDual>(ce, p, ms, sentinel);
    return pack_hess(a, ce.nparams, sentinel);
}

double total_violation(const CompiledExpr& ce, std::span<const double> p,
                       const ConstraintSet& set, const EvalPoints& pts) {
    double v = violation(ce, p, pts, set.specs);
    if (set.has_maxwell) v += maxwell_violation(ce, p, set.maxwell);
    return v;
}

ViolationResult total_violation_grad(const CompiledExpr& ce, std::span<const double> p,
                                     const ConstraintSet& set, const EvalPoints& pts) {
    ViolationResult r = violation_grad(ce, p, pts, set.specs);
    if (set.has_maxwell) r = add_results(r, maxwell_violation_grad(ce, p, set.maxwell));
    return r;
}

ViolationResult total_violation_hess(const CompiledExpr& ce, std::span<const double> p,
                                     const ConstraintSet& set, const EvalPoints& pts) {
    ViolationResult r = violation_hess(ce, p, pts, set.specs);
    if (set.has_maxwell) r = add_results(r, maxwell_violation_hess(ce, p, set.maxwell));
    return r;
}

// ---------------------------------------------------------------------------
// Built-in constraint sets
// ---------------------------------------------------------------------------
namespace {

ConstraintSpec make_spec(std::string id, ConstraintTarget target, int var,
                         ConstraintSense sense, Sampler s0, Sampler s1) {
    ConstraintSpec cs;
    cs.id = std::move(id);
    cs.target = target;
    cs.var_index = var;
    cs.sense = sense;
    cs.samplers = {std::move(s0), std::move(s1)};
    return cs;
}

ConstraintSet gaussian_constraints() {
    ConstraintSet set;
    Sampler sigma = Sampler::uniform(0.5, 6.0);
    set.specs = {
        make_spec("f_nonneg_theta_neg", ConstraintTarget::Value, 0, ConstraintSense::Geq,
                  Sampler::logarithmic(-100.0, -0.01), sigma),
        make_spec("f_nonneg_theta_pos", ConstraintTarget::Value, 0, ConstraintSense::Geq,
                  Sampler::logarithmic(0.01, 100.0), sigma),
        make_spec("df_dtheta_rising_left", ConstraintTarget::Partial, 0, ConstraintSense::Geq,
                  Sampler::logarithmic(-0.01, -100.0), sigma),
        make_spec("df_dtheta_falling_right", ConstraintTarget::Partial, 0, ConstraintSense::Leq,
                  Sampler::logarithmic(0.01, 100.0), sigma),
        make_spec("df_dsigma_at_mode", ConstraintTarget::Partial, 1, ConstraintSense::Leq,
                  Sampler::fixed({0.0}), sigma),
    };
    return set;
}

// Senses that the magnetic-force ground truth actually satisfies: the force
// has the sign of x, rises with |x| < sqrt(beta/5), falls outside, and its
// current sensitivity has the sign of x.
ConstraintSet magman_constraints(bool as_printed) {
    const double r = std::sqrt(0.35);  // roots of d f / d x for beta = 1.75
    Sampler current = Sampler::uniform(0.1, 0.8);
    auto sense = [&](ConstraintSense corrected) {
        if (!as_printed) return corrected;
        return corrected == ConstraintSense::Geq ? ConstraintSense::Leq : ConstraintSense::Geq;
    };
    ConstraintSet set;
    set.specs = {
        make_spec("f_sign_x_neg", ConstraintTarget::Value, 0, sense(ConstraintSense::Leq),
                  Sampler::logarithmic(-1000.0, -0.1), current),
        make_spec("f_sign_x_pos", ConstraintTarget::Value, 0, sense(ConstraintSense::Geq),
                  Sampler::logarithmic(0.1, 1000.0), current),
        make_spec("df_dx_left", ConstraintTarget::Partial, 0, sense(ConstraintSense::Leq),
                  Sampler::logarithmic(-10.0, -r), current),
        make_spec("df_dx_mid", ConstraintTarget::Partial, 0, sense(ConstraintSense::Geq),
                  Sampler::uniform(-r, r), current),
        make_spec("df_dx_right", ConstraintTarget::Partial, 0, sense(ConstraintSense::Leq),
                  Sampler::logarithmic(r, 10.0), current),
        make_spec("df_dI_x_neg", ConstraintTarget::Partial, 1, sense(ConstraintSense::Leq),
                  Sampler::logarithmic(-50.0, -0.1), current),
        make_spec("df_dI_x_pos", ConstraintTarget::Partial, 1, sense(ConstraintSense::Geq),
                  Sampler::logarithmic(0.1, 50.0), current),
    };
    return set;
}

ConstraintSet vanderwaals_constraints() {
    ConstraintSet set;
    set.has_maxwell = true;
    set.maxwell = MaxwellSpec{};
    return set;
}

}  // namespace

ConstraintSet default_constraints(ProblemId id) {
    switch (id) {
        case ProblemId::Gaussian:
            return gaussian_constraints();
        case ProblemId::MagMan:
            return magman_constraints(false);
        case ProblemId::VanDerWaals:
            return vanderwaals_constraints();
    }
    throw std::invalid_argument("unknown problem id");
}

ConstraintSet magman_constraints_as_printed() { return magman_constraints(true); }

ConstraintSet constraint_set_by_name(const std::string& name) {
    if (name == "gaussian") return default_constraints(ProblemId::Gaussian);
    if (name == "magman") return default_constraints(ProblemId::MagMan);
    if (name == "magman_as_printed") return magman_constraints_as_printed();
    if (name == "vanderwaals") return default_constraints(ProblemId::VanDerWaals);
    if (name == "none") return ConstraintSet{};
    throw std::invalid_argument("unknown constraint set '" + name + "'");
}

// ---------------------------------------------------------------------------
// JSON persistence
// ---------------------------------------------------------------------------
namespace {

using nlohmann::json;

const char* sense_name(ConstraintSense s) {
    switch (s) {
        case ConstraintSense::Geq:
            return ">=0";
        case ConstraintSense::Leq:
            return "<=0";
        case ConstraintSense::Eq:
            return "=0";
    }
    return "";
}

ConstraintSense sense_from_name(const std::string& s) {
    if (s == ">=0") return ConstraintSense::Geq;
    if (s == "<=0") return ConstraintSense::Leq;
    if (s == "=0") return ConstraintSense::Eq;
    throw std::invalid_argument("unknown constraint sense '" + s + "'");
}

json sampler_to_json(const Sampler& s) {
    json j;
    switch (s.kind) {
        case SamplerKind::Uniform:
            j["kind"] = "uniform";
            j["lo"] = s.lo;
            j["hi"] = s.hi;
            break;
        case SamplerKind::Logarithmic:
            j["kind"] = "log";
            j["lo"] = s.lo;
            j["hi"] = s.hi;
            break;
        case SamplerKind::FixedSet:
            j["kind"] = "fixed";
            j["values"] = s.values;
            break;
    }
    return j;
}

Sampler sampler_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "uniform") return Sampler::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (kind == "log")
        return Sampler::logarithmic(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (kind == "fixed") return Sampler::fixed(j.at("values").get<std::vector<double>>());
    throw std::invalid_argument("unknown sampler kind '" + kind + "'");
}

json set_to_json(const ConstraintSet& set) {
    json j;
    j["constraints"] = json::array();
    for (const ConstraintSpec& cs : set.specs) {
        json c;
        c["id"] = cs.id;
        c["target"] = cs.target == ConstraintTarget::Value ? "value" : "partial";
        c["var"] = cs.var_index;
        c["sense"] = sense_name(cs.sense);
        c["samplers"] = json::array();
        for (const Sampler& s : cs.samplers) c["samplers"].push_back(sampler_to_json(s));
        c["points_per_var"] = cs.points_per_var;
        c["pairs"] = cs.pairs;
        j["constraints"].push_back(std::move(c));
    }
    if (set.has_maxwell) {
        const MaxwellSpec& m = set.maxwell;
        j["maxwell"] = {{"T1", m.T1},
                        {"T2", m.T2},
                        {"p1", m.p1},
                        {"p2", m.p2},
                        {"v1_boiling", m.v1_boiling},
                        {"v1_dew", m.v1_dew},
                        {"v2_boiling", m.v2_boiling},
                        {"v2_dew", m.v2_dew},
                        {"gate", m.gate},
                        {"dummy_penalty", m.dummy_penalty},
                        {"integral_scale", m.integral_scale},
                        {"quad_tol_rel", m.quad_tol_rel},
                        {"var_T", m.var_T},
                        {"var_v", m.var_v}};
    }
    return j;
}

ConstraintSet set_from_json(const json& j) {
    ConstraintSet set;
    for (const json& c : j.value("constraints", json::array())) {
        ConstraintSpec cs;
        cs.id = c.at("id").get<std::string>();
        cs.target =
            c.at("target").get<std::string>() == "value" ? ConstraintTarget::Value
                                                         : ConstraintTarget::Partial;
        cs.var_index = c.value("var", 0);
        cs.sense = sense_from_name(c.at("sense").get<std::string>());
        for (const json& s : c.at("samplers")) cs.samplers.push_back(sampler_from_json(s));
        cs.points_per_var = c.value("points_per_var", 5);
        cs.pairs = c.value("pairs", 5);
        set.specs.push_back(std::move(cs));
    }
    if (j.contains("maxwell")) {
        set.has_maxwell = true;
        const json& m = j.at("maxwell");
        MaxwellSpec d;
        set.maxwell.T1 = m.value("T1", d.T1);
        set.maxwell.T2 = m.value("T2", d.T2);
        set.maxwell.p1 = m.value("p1", d.p1);
        set.maxwell.p2 = m.value("p2", d.p2);
        set.maxwell.v1_boiling = m.value("v1_boiling", d.v1_boiling);
        set.maxwell.v1_dew = m.value("v1_dew", d.v1_dew);
        set.maxwell.v2_boiling = m.value("v2_boiling", d.v2_boiling);
        set.maxwell.v2_dew = m.value("v2_dew", d.v2_dew);
        set.maxwell.gate = m.value("gate", d.gate);
        set.maxwell.dummy_penalty = m.value("dummy_penalty", d.dummy_penalty);
        set.maxwell.integral_scale = m.value("integral_scale", d.integral_scale);
        set.maxwell.quad_tol_rel = m.value("quad_tol_rel", d.quad_tol_rel);
        set.maxwell.var_T = m.value("var_T", d.var_T);
        set.maxwell.var_v = m.value("var_v", d.var_v);
    }
    return set;
}

}  // namespace

void save_constraint_set(const ConstraintSet& set, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write constraint set to " + path);
    out << set_to_json(set).dump(2) << "\n";
}

ConstraintSet load_constraint_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read constraint set from " + path);
    json j;
    in >> j;
    return set_from_json(j);
}

void save_eval_points(const EvalPoints& pts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write evaluation points to " + path);
    json j;
    j["points"] = json::object();
    for (const auto& [id, list] : pts.points) j["points"][id] = list;
    out << j.dump(2) << "\n";
}

EvalPoints load_eval_points(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read evaluation points from " + path);
    json j;
    in >> j;
    EvalPoints pts;
    for (const auto& [id, list] : j.at("points").items())
        pts.points[id] = list.get<std::vector<std::vector<double>>>();
    return pts;
}

}  // namespace shapesr
