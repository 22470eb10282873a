#include "shapesr/datasets.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "shapesr/rng.hpp"

namespace shapesr {

const char* name(ProblemId id) {
    switch (id) {
        case ProblemId::Gaussian: return "gaussian";
        case ProblemId::MagMan: return "magman";
        case ProblemId::VanDerWaals: return "vanderwaals";
    }
    return "?";
}

ProblemId problem_from_name(std::string_view s) {
    if (s == "gaussian") return ProblemId::Gaussian;
    if (s == "magman") return ProblemId::MagMan;
    if (s == "vanderwaals") return ProblemId::VanDerWaals;
    throw std::invalid_argument("unknown problem name: " + std::string(s));
}

namespace {

Expression gaussian_truth() {
    // exp((x0/x1)^2 / -2) / (sqrt(2 pi) * x1); x0 = theta, x1 = sigma
    auto z = make_binary(BinaryKind::Div, make_variable(0), make_variable(1));
    auto arg = make_binary(BinaryKind::Div, make_unary(UnaryKind::Pow2, std::move(z)),
                           make_constant(-2.0));
    auto den = make_binary(BinaryKind::Mul, make_constant(std::sqrt(2.0 * std::numbers::pi)),
                           make_variable(1));
    return Expression(make_binary(BinaryKind::Div, make_unary(UnaryKind::Exp, std::move(arg)),
                                  std::move(den)));
}

Expression magman_truth() {
    // p0 * (x0 * x1) / (x0^2 + p1)^3; x0 = distance, x1 = current
    auto num = make_binary(BinaryKind::Mul, make_parameter(0, 5.25),
                           make_binary(BinaryKind::Mul, make_variable(0), make_variable(1)));
    auto den = make_unary(
        UnaryKind::Pow3,
        make_binary(BinaryKind::Add, make_unary(UnaryKind::Pow2, make_variable(0)),
                    make_parameter(1, 1.75)));
    return Expression(make_binary(BinaryKind::Div, std::move(num), std::move(den)));
}

Expression vdw_truth() {
    // R*x0/(x1 - p1) - p0/x1^2; x0 = T, x1 = v
    auto first = make_binary(
        BinaryKind::Div,
        make_binary(BinaryKind::Mul, make_constant(kGasConstant), make_variable(0)),
        make_binary(BinaryKind::Sub, make_variable(1), make_parameter(1, kVdwB)));
    auto second = make_binary(BinaryKind::Div, make_parameter(0, kVdwA),
                              make_unary(UnaryKind::Pow2, make_variable(1)));
    return Expression(make_binary(BinaryKind::Sub, std::move(first), std::move(second)));
}

ProblemSpec make_gaussian_spec() {
    ProblemSpec s;
    s.id = ProblemId::Gaussian;
    s.name = "gaussian";
    s.ground_truth = gaussian_truth();
    s.true_params = {};
    s.var_names = {"theta", "sigma"};
    s.fit_ranges = {{-5.0, 5.0}, {0.5, 3.0}};
    s.verify_ranges = {{-10.0, 10.0}, {0.5, 5.0}};
    s.fit_count = 100;
    s.verify_count = 500;
    s.function_set.binary = {BinaryKind::Add, BinaryKind::Sub, BinaryKind::Mul, BinaryKind::Div};
    s.function_set.unary = {UnaryKind::Exp, UnaryKind::Sqrt, UnaryKind::Pow2, UnaryKind::Pow3};
    s.complexity_cap = s.ground_truth.complexity() + 5;
    s.constraint_set = "gaussian";
    return s;
}

ProblemSpec make_magman_spec() {
    ProblemSpec s;
    s.id = ProblemId::MagMan;
    s.name = "magman";
    s.ground_truth = magman_truth();
    s.true_params = {5.25, 1.75};
    s.var_names = {"x", "I"};
    s.fit_ranges = {{-3.0, 3.0}, {0.1, 0.8}};
    s.verify_ranges = {{-6.0, 6.0}, {0.1, 1.6}};
    s.fit_count = 100;
    s.verify_count = 500;
    s.function_set.binary = {BinaryKind::Add, BinaryKind::Sub, BinaryKind::Mul, BinaryKind::Div};
    s.function_set.unary = {UnaryKind::Pow2, UnaryKind::Pow3};
    s.complexity_cap = s.ground_truth.complexity() + 5;
    s.constraint_set = "magman";
    return s;
}

ProblemSpec make_vdw_spec() {
    ProblemSpec s;
    s.id = ProblemId::VanDerWaals;
    s.name = "vanderwaals";
    s.ground_truth = vdw_truth();
    s.true_params = {kVdwA, kVdwB};
    s.var_names = {"T", "v"};
    s.fit_count = 147;
    s.verify_count = 300;
    s.fit_grids = {
        {VdwPhase::Gas, {450.0, 500.0}, {0.05e6, 2e6}, 7, 7, "gas"},
        {VdwPhase::Liquid, {300.0, 400.0}, {6e6, 7e6}, 7, 7, "liquid"},
        {VdwPhase::Supercritical, {550.0, 600.0}, {10e6, 11e6}, 9, 5, "supercritical"},
    };
    s.verify_grids = {
        {VdwPhase::Gas, {440.0, 510.0}, {0.04e6, 2.2e6}, 10, 10, "gas"},
        {VdwPhase::Liquid, {290.0, 410.0}, {5.8e6, 7.2e6}, 10, 10, "liquid"},
        {VdwPhase::Supercritical, {540.0, 610.0}, {9.8e6, 11.2e6}, 10, 10, "supercritical"},
    };
    s.function_set.binary = {BinaryKind::Add, BinaryKind::Sub, BinaryKind::Mul, BinaryKind::Div};
    s.function_set.unary = {UnaryKind::Pow2};
    s.complexity_cap = s.ground_truth.complexity() + 5;
    s.constraint_set = "vanderwaals";
    return s;
}

}  // namespace

const ProblemSpec& problem(ProblemId id) {
    static const ProblemSpec gauss = make_gaussian_spec();
    static const ProblemSpec magman = make_magman_spec();
    static const ProblemSpec vdw = make_vdw_spec();
    switch (id) {
        case ProblemId::Gaussian: return gauss;
        case ProblemId::MagMan: return magman;
        case ProblemId::VanDerWaals: return vdw;
    }
    throw std::invalid_argument("unknown problem id");
}

double vdw_solve_v(double T, double p, VdwPhase phase, double a, double b) {
    // Monic cubic v^3 + c2 v^2 + c1 v + c0 = 0
    const double c2 = -(p * b + kGasConstant * T) / p;
    const double c1 = a / p;
    const double c0 = -a * b / p;

    Eigen::Matrix3d companion;
    companion << 0.0, 0.0, -c0,  //
        1.0, 0.0, -c1,           //
        0.0, 1.0, -c2;
    Eigen::EigenSolver<Eigen::Matrix3d> es(companion, /*computeEigenvectors=*/false);

    std::vector<double> roots;
    for (int i = 0; i < 3; ++i) {
        std::complex<double> r = es.eigenvalues()(i);
        if (std::abs(r.imag()) <= 1e-8 * std::max(1.0, std::abs(r.real()))) {
            double v = r.real();
            // Newton polish on f(v) = p v^3 - (p b + R T) v^2 + a v - a b
            for (int it = 0; it < 3; ++it) {
                double f = ((p * v + -(p * b + kGasConstant * T)) * v + a) * v - a * b;
                double df = (3.0 * p * v - 2.0 * (p * b + kGasConstant * T)) * v + a;
                if (df == 0.0) break;
                v -= f / df;
            }
            if (v > b) roots.push_back(v);
        }
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double x, double y) { return std::abs(x - y) <= 1e-9 * x; }),
                roots.end());

    auto fail = [&](const char* why) -> double {
        char buf[160];
        std::snprintf(buf, sizeof buf, "vdw_solve_v: %s at T=%.6g p=%.6g", why, T, p);
        throw std::runtime_error(buf);
    };

    double v = 0.0;
    if (roots.empty()) return fail("no admissible root");
    switch (phase) {
        case VdwPhase::Gas: v = roots.back(); break;
        case VdwPhase::Liquid: v = roots.front(); break;
        case VdwPhase::Supercritical:
            if (roots.size() != 1) return fail("phase expects a unique root");
            v = roots.front();
            break;
    }
    // Residual check against the pressure form.
    double pr = kGasConstant * T / (v - b) - a / (v * v);
    if (!(std::abs(pr - p) <= 1e-9 * std::max(1.0, std::abs(p))))
        return fail("root fails the residual check");
    return v;
}

namespace {

void push_row(Dataset& d, std::span<const double> x, double target, const std::string& tag) {
    if (target == 0.0)
        throw std::runtime_error("dataset: target of exactly 0 breaks relative weighting");
    d.X.insert(d.X.end(), x.begin(), x.end());
    d.y.push_back(target);
    d.w.push_back(1.0 / target);
    d.row_tags.push_back(tag);
}

Dataset generate_sampled(const ProblemSpec& spec, WhichSet which, uint64_t seed) {
    const auto& ranges = which == WhichSet::Fit ? spec.fit_ranges : spec.verify_ranges;
    const int count = which == WhichSet::Fit ? spec.fit_count : spec.verify_count;
    Dataset d;
    d.nvars = static_cast<int>(spec.var_names.size());
    d.var_names = spec.var_names;
    d.meta.problem = spec.name;
    d.meta.variant = which == WhichSet::Fit ? "fit" : "verify";
    d.meta.seed = seed;
    auto ce = compile(spec.ground_truth);
    Rng rng = make_rng({seed});
    std::vector<double> x(static_cast<size_t>(d.nvars));
    for (int i = 0; i < count; ++i) {
        for (int j = 0; j < d.nvars; ++j) {
            std::uniform_real_distribution<double> dist(ranges[static_cast<size_t>(j)].lo,
                                                        ranges[static_cast<size_t>(j)].hi);
            x[static_cast<size_t>(j)] = dist(rng);
        }
        double t = evaluate(ce, x, spec.true_params);
        if (std::isnan(t) || t == 0.0) {
            --i;  // resample the row; zero or undefined targets break 1/t weighting
            continue;
        }
        push_row(d, x, t, "");
    }
    return d;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(static_cast<size_t>(n));
    if (n == 1) {
        v[0] = 0.5 * (lo + hi);
        return v;
    }
    for (int i = 0; i < n; ++i)
        v[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return v;
}

Dataset generate_grids(const ProblemSpec& spec, WhichSet which, uint64_t seed) {
    const auto& grids = which == WhichSet::Fit ? spec.fit_grids : spec.verify_grids;
    Dataset d;
    d.nvars = static_cast<int>(spec.var_names.size());
    d.var_names = spec.var_names;
    d.meta.problem = spec.name;
    d.meta.variant = which == WhichSet::Fit ? "fit" : "verify";
    d.meta.seed = seed;
    auto ce = compile(spec.ground_truth);
    for (const auto& g : grids) {
        auto Ts = linspace(g.T.lo, g.T.hi, g.nT);
        auto ps = linspace(g.p.lo, g.p.hi, g.np);
        for (double T : Ts)
            for (double p : ps) {
                double v = vdw_solve_v(T, p, g.phase);
                std::array<double, 2> x{T, v};
                push_row(d, x, evaluate(ce, x, spec.true_params), g.tag);
            }
    }
    if (which == WhichSet::Fit) {
        for (const auto& tr : kVdwTransitions)
            for (double v : {tr.v_boiling, tr.v_dew}) {
                std::array<double, 2> x{tr.T, v};
                push_row(d, x, evaluate(ce, x, spec.true_params), "transition");
            }
    }
    return d;
}

}  // namespace

Dataset generate(const ProblemSpec& spec, WhichSet which, uint64_t seed) {
    Dataset d = spec.fit_grids.empty() ? generate_sampled(spec, which, seed)
                                       : generate_grids(spec, which, seed);
    const int expect = which == WhichSet::Fit ? spec.fit_count : spec.verify_count;
    if (d.rows() != expect)
        throw std::runtime_error("dataset generation produced unexpected row count");
    return d;
}

Dataset apply_noise(const Dataset& d, double level, uint64_t seed) {
    if (level < 0.0) throw std::invalid_argument("apply_noise: negative level");
    Dataset out = d;
    out.meta.noise_level = level;
    Rng rng = make_rng({seed});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < out.rows(); ++i) {
        double z = normal(rng);  // drawn for every row to keep alignment stable
        if (level == 0.0) continue;
        if (out.row_tags[static_cast<size_t>(i)] == "transition") continue;
        double t = out.y[static_cast<size_t>(i)] * (1.0 + z * level);
        if (t == 0.0)
            throw std::runtime_error("apply_noise: noisy target hit exactly 0");
        out.y[static_cast<size_t>(i)] = t;
        out.w[static_cast<size_t>(i)] = 1.0 / t;
    }
    return out;
}

Dataset reduce_data(const Dataset& d, int keep) {
    const int n = d.rows();
    if (keep < 1 || keep > n) throw std::invalid_argument("reduce_data: keep out of range");
    if (keep == n) return d;

    const int m = d.nvars;
    std::vector<double> colmax(static_cast<size_t>(m),
                               -std::numeric_limits<double>::infinity());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            colmax[static_cast<size_t>(j)] =
                std::max(colmax[static_cast<size_t>(j)], d.row(i)[static_cast<size_t>(j)]);
    for (int j = 0; j < m; ++j)
        if (colmax[static_cast<size_t>(j)] == 0.0)
            throw std::runtime_error("reduce_data: column maximum is 0");

    std::vector<double> mu(static_cast<size_t>(m), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            mu[static_cast<size_t>(j)] +=
                d.row(i)[static_cast<size_t>(j)] / colmax[static_cast<size_t>(j)];
    for (int j = 0; j < m; ++j) mu[static_cast<size_t>(j)] /= n;

    std::vector<double> d2(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) {
            double t = d.row(i)[static_cast<size_t>(j)] / colmax[static_cast<size_t>(j)] -
                       mu[static_cast<size_t>(j)];
            d2[static_cast<size_t>(i)] += t * t;
        }

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        double da = d2[static_cast<size_t>(a)], db = d2[static_cast<size_t>(b)];
        if (da != db) return da > db;
        return a < b;
    });
    order.resize(static_cast<size_t>(keep));
    std::sort(order.begin(), order.end());

    Dataset out;
    out.nvars = d.nvars;
    out.var_names = d.var_names;
    out.meta = d.meta;
    out.meta.keep = keep;
    for (int i : order) push_row(out, d.row(i), d.y[static_cast<size_t>(i)],
                                 d.row_tags[static_cast<size_t>(i)]);
    return out;
}

Dataset keep_liquid_and_transition(const Dataset& d) {
    Dataset out;
    out.nvars = d.nvars;
    out.var_names = d.var_names;
    out.meta = d.meta;
    for (int i = 0; i < d.rows(); ++i) {
        const std::string& tag = d.row_tags[static_cast<size_t>(i)];
        if (tag == "liquid" || tag == "transition")
            push_row(out, d.row(i), d.y[static_cast<size_t>(i)], tag);
    }
    if (out.rows() == 0) throw std::runtime_error("keep_liquid_and_transition: no tagged rows");
    out.meta.keep = out.rows();
    return out;
}

void save_csv(const Dataset& d, const std::string& csv_path, const std::string& meta_path) {
    std::ofstream f(csv_path);
    if (!f) throw std::runtime_error("save_csv: cannot open " + csv_path);
    for (const auto& vn : d.var_names) f << vn << ',';
    f << "target\n";
    char buf[40];
    for (int i = 0; i < d.rows(); ++i) {
        for (int j = 0; j < d.nvars; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", d.row(i)[static_cast<size_t>(j)]);
            f << buf << ',';
        }
        std::snprintf(buf, sizeof buf, "%.17g", d.y[static_cast<size_t>(i)]);
        f << buf << '\n';
    }

    nlohmann::json meta;
    meta["problem"] = d.meta.problem;
    meta["variant"] = d.meta.variant;
    meta["seed"] = d.meta.seed;
    meta["noise_level"] = d.meta.noise_level;
    meta["keep"] = d.meta.keep;
    meta["row_tags"] = d.row_tags;
    std::ofstream mf(meta_path);
    if (!mf) throw std::runtime_error("save_csv: cannot open " + meta_path);
    mf << meta.dump(2) << '\n';
}

Dataset load_csv(const std::string& csv_path, const std::string& meta_path) {
    std::ifstream f(csv_path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + csv_path);
    Dataset d;
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_csv: empty file");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) d.var_names.push_back(cell);
        if (d.var_names.empty() || d.var_names.back() != "target")
            throw std::runtime_error("load_csv: header must end with 'target'");
        d.var_names.pop_back();
        d.nvars = static_cast<int>(d.var_names.size());
    }
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != d.nvars + 1)
            throw std::runtime_error("load_csv: wrong column count");
        d.X.insert(d.X.end(), vals.begin(), vals.end() - 1);
        d.y.push_back(vals.back());
        d.w.push_back(1.0 / vals.back());
        d.row_tags.emplace_back();
    }

    std::ifstream mf(meta_path);
    if (!mf) throw std::runtime_error("load_csv: cannot open " + meta_path);
    nlohmann::json meta = nlohmann::json::parse(mf);
    d.meta.problem = meta.value("problem", "");
    d.meta.variant = meta.value("variant", "");
    d.meta.seed = meta.value("seed", uint64_t{0});
    d.meta.noise_level = meta.value("noise_level", 0.0);
    d.meta.keep = meta.value("keep", -1);
    if (meta.contains("row_tags")) {
        auto tags = meta["row_tags"].get<std::vector<std::string>>();
        if (static_cast<int>(tags.size()) == d.rows()) d.row_tags = std::move(tags);
    }
    return d;
}

}  // namespace shapesr
