#include "shapesr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>
#include <utility>

#include <nlohmann/json.hpp>

#include "shapesr/constraints.hpp"
#include "shapesr/rng.hpp"

namespace shapesr {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Cache key for already-rejected candidates: the structure plus the fitted
// parameters at 4 significant digits. A later fit that moves a parameter
// meaningfully produces a fresh key and earns a fresh verification.
std::string verify_key(const Individual& ind) {
    std::string key = structure_key(ind.expr);
    char buf[32];
    for (double v : ind.fit.p) {
        std::snprintf(buf, sizeof buf, "|%.4g", v);
        key += buf;
    }
    return key;
}

}  // namespace

const char* name(BudgetMode m) {
    return m == BudgetMode::WallClock ? "wallclock" : "generations";
}

RunResult run_search(const RunConfig& cfg, const RunHooks* hooks) {
    RunResult out;
    const Clock::time_point t0 = Clock::now();
    try {
        if (!cfg.pow_abs_param)
            throw std::invalid_argument(
                "pow_abs_param=false is not supported: exponents are always parameters");
        if (cfg.budget == BudgetMode::WallClock && cfg.time_limit_s <= 0.0)
            throw std::invalid_argument("time limit must be positive");
        if (cfg.budget == BudgetMode::Generations && cfg.generation_budget < 0)
            throw std::invalid_argument("generation budget must be non-negative");
        if (cfg.cadence_s <= 0.0 || cfg.cadence_generations <= 0)
            throw std::invalid_argument("verification cadence must be positive");

        const ProblemSpec& spec = problem(cfg.problem);
        Dataset fit = generate(spec, WhichSet::Fit, mix_seed({cfg.seed, 0xf17da7aULL}));
        if (cfg.noise > 0.0) fit = apply_noise(fit, cfg.noise, mix_seed({cfg.seed, 0x015eULL}));
        if (cfg.keep_liquid) fit = keep_liquid_and_transition(fit);
        if (cfg.keep >= 0) fit = reduce_data(fit, cfg.keep);
        Dataset verify = generate(spec, WhichSet::Verify, mix_seed({cfg.seed, 0x0e1fULL}));

        ConstraintSet constraints = constraint_set_by_name(spec.constraint_set);
        EvalPoints points = sample_points(constraints, mix_seed({cfg.seed, 0x901e75ULL}));

        EvolutionConfig ecfg;
        ecfg.pop_size = cfg.pop_size;
        ecfg.variant = cfg.variant;
        ecfg.noise_level = cfg.noise;
        ecfg.limits = TreeLimits{cfg.complexity_cap > 0 ? cfg.complexity_cap : spec.complexity_cap,
                                 fit.nvars, 16};
        ecfg.fns = spec.function_set;
        ecfg.fitness_fraction = cfg.fitness_fraction;
        ecfg.crossover_prob = cfg.crossover_prob;
        ecfg.rho = cfg.constr_penalty_factor;
        ecfg.lambda = cfg.lambda;
        ecfg.drastic_simplify_threshold = cfg.drastic_simplify_threshold;
        ecfg.fit_options.lm_iters_full = cfg.max_iter;
        const double gate =
            cfg.max_mare_for_constr_fit >= 0.0 ? cfg.max_mare_for_constr_fit : cfg.noise + 0.05;
        ecfg.fit_options.mare_gate_offset = gate - cfg.noise;

        Engine eng(ecfg, &fit, &constraints, &points, mix_seed({cfg.seed, 0xe7017eULL}));
        eng.init();
        for (size_t s = 0; s < cfg.seed_structures.size(); ++s)
            eng.inject(eng.fit_individual(cfg.seed_structures[s], 0x5eedULL + s));
        out.progress.push_back(eng.progress_json());

        std::unordered_set<std::string> rejected;
        auto verification_sweep = [&]() {
            if (hooks && hooks->pre_verification) hooks->pre_verification(fit);
            bool won = false;
            for (const Individual& ind : eng.hof().archive) {
                if (ind.fit.mare > gate) continue;
                if (ind.expr.complexity() > spec.complexity_cap) continue;  // success invariant
                std::string key = verify_key(ind);
                if (rejected.count(key)) continue;
                // held-out refit: plain least squares, no constraints and no
                // regularizer, so the score reflects the structure alone
                CompiledExpr ce = compile(ind.expr);
                FitProblem vp;
                vp.expr = &ce;
                vp.data = &verify;
                vp.lambda = 0.0;
                FitResult refit = fit_lm(vp, ind.fit.p, cfg.max_iter);
                if (!refit.failed && refit.mare < kVerifySuccessMare) {
                    out.success = true;
                    out.winner = to_string(ind.expr, refit.p, spec.var_names);
                    out.winner_params = refit.p;
                    out.winner_verify_mare = refit.mare;
                    out.winner_complexity = ind.expr.complexity();
                    won = true;
                    break;
                }
                rejected.insert(std::move(key));
            }
            if (hooks && hooks->post_verification) hooks->post_verification(fit);
            return won;
        };

        double last_sweep_s = 0.0;
        while (!out.success) {
            if (cfg.budget == BudgetMode::Generations) {
                if (eng.generation() >= cfg.generation_budget) break;
            } else if (seconds_since(t0) >= cfg.time_limit_s) {
                break;
            }
            eng.step();
            out.progress.push_back(eng.progress_json());
            bool due = cfg.budget == BudgetMode::Generations
                           ? eng.generation() % cfg.cadence_generations == 0
                           : seconds_since(t0) - last_sweep_s >= cfg.cadence_s;
            if (due) {
                last_sweep_s = seconds_since(t0);
                verification_sweep();
            }
        }
        if (!out.success) verification_sweep();  // last look at the budget edge

        out.generations = eng.generation();
        out.elapsed_s = seconds_since(t0);
        for (const Individual& ind : eng.hof().archive) {
            HofSnapshotEntry e;
            e.text = to_string(ind.expr, ind.fit.p, spec.var_names);
            e.structure = structure_key(ind.expr);
            e.mse_rel = ind.fit.mse_rel;
            e.mare = ind.fit.mare;
            e.constr_vios = ind.fit.constr_vios;
            e.complexity = ind.expr.complexity();
            out.hof.push_back(std::move(e));
        }
    } catch (const std::exception& ex) {
        out.success = false;
        out.error = ex.what();
        out.elapsed_s = seconds_since(t0);
    }
    return out;
}

std::vector<CellResult> run_grid(const GridSpec& grid, const RunHooks* hooks) {
    std::vector<CellResult> out;
    if (grid.repetitions <= 0) return out;
    for (size_t c = 0; c < grid.cells.size(); ++c) {
        CellResult cr;
        cr.cell = grid.cells[c];
        cr.repetitions = grid.repetitions;
        double success_time_sum = 0.0;
        for (int rep = 0; rep < grid.repetitions; ++rep) {
            RunConfig rc = grid.base;
            rc.problem = grid.problem;
            rc.variant = cr.cell.variant;
            rc.noise = cr.cell.noise;
            rc.keep = cr.cell.keep;
            rc.keep_liquid = cr.cell.keep_liquid;
            rc.seed = mix_seed({grid.master_seed, static_cast<uint64_t>(c),
                                static_cast<uint64_t>(rep)});
            RunResult rr = run_search(rc, hooks);
            if (rr.success) {
                ++cr.successes;
                success_time_sum += rr.elapsed_s;
            }
            cr.runs.push_back(std::move(rr));
        }
        if (cr.successes > 0) cr.mean_time_to_success = success_time_sum / cr.successes;
        out.push_back(std::move(cr));
    }
    return out;
}

namespace {

std::string keep_label(const GridCell& cell) {
    if (cell.keep_liquid) return "liquid";
    if (cell.keep < 0) return "all";
    return std::to_string(cell.keep);
}

}  // namespace

std::string grid_csv(const GridSpec& grid, const std::vector<CellResult>& cells) {
    std::ostringstream os;
    os << "problem,variant,noise,keep,repetitions,successes,mean_time_to_success\n";
    for (const CellResult& cr : cells) {
        os << name(grid.problem) << ',' << fit_variant_name(cr.cell.variant) << ','
           << cr.cell.noise << ',' << keep_label(cr.cell) << ',' << cr.repetitions << ','
           << cr.successes << ',';
        if (cr.successes > 0) os << cr.mean_time_to_success;
        os << '\n';
    }
    return os.str();
}

ZTestResult z_test(int successes1, int n1, int successes2, int n2, double alpha) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("z_test needs n >= 1 on both sides");
    if (successes1 < 0 || successes1 > n1 || successes2 < 0 || successes2 > n2)
        throw std::invalid_argument("success counts must lie in [0, n]");
    ZTestResult r;
    const double p1 = static_cast<double>(successes1) / n1;
    const double p2 = static_cast<double>(successes2) / n2;
    const double pooled = static_cast<double>(successes1 + successes2) / (n1 + n2);
    if (pooled <= 0.0 || pooled >= 1.0) return r;  // no variance, z = 0
    const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2));
    r.z = (p1 - p2) / se;
    r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
    r.significant = r.p_value < alpha;
    return r;
}

// ---------------------------------------------------------------------------
// Config and result serialization
// ---------------------------------------------------------------------------

namespace {

BudgetMode budget_from_name(const std::string& s) {
    if (s == "wallclock") return BudgetMode::WallClock;
    if (s == "generations") return BudgetMode::Generations;
    throw std::invalid_argument("unknown budget mode '" + s + "'");
}

void apply_run_keys(const nlohmann::json& j, RunConfig& rc) {
    if (j.contains("t_lim")) rc.time_limit_s = j.at("t_lim").get<double>();
    if (j.contains("pop_size")) rc.pop_size = j.at("pop_size").get<int>();
    if (j.contains("pow_abs_param")) rc.pow_abs_param = j.at("pow_abs_param").get<bool>();
    if (j.contains("always_drastic_simplify"))
        rc.drastic_simplify_threshold = j.at("always_drastic_simplify").get<double>();
    if (j.contains("max_iter")) rc.max_iter = j.at("max_iter").get<int>();
    if (j.contains("constr_penalty_factor"))
        rc.constr_penalty_factor = j.at("constr_penalty_factor").get<double>();
    if (j.contains("max_mare_for_constr_fit"))
        rc.max_mare_for_constr_fit = j.at("max_mare_for_constr_fit").get<double>();
    if (j.contains("lambda")) rc.lambda = j.at("lambda").get<double>();
    if (j.contains("complexity_cap")) rc.complexity_cap = j.at("complexity_cap").get<int>();
    if (j.contains("budget")) rc.budget = budget_from_name(j.at("budget").get<std::string>());
    if (j.contains("generation_budget"))
        rc.generation_budget = j.at("generation_budget").get<int>();
    if (j.contains("cadence_s")) rc.cadence_s = j.at("cadence_s").get<double>();
    if (j.contains("cadence_generations"))
        rc.cadence_generations = j.at("cadence_generations").get<int>();
    if (j.contains("fitness_fraction"))
        rc.fitness_fraction = j.at("fitness_fraction").get<double>();
    if (j.contains("crossover_prob")) rc.crossover_prob = j.at("crossover_prob").get<double>();
}

}  // namespace

GridSpec load_grid_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid config '" + path + "'");
    nlohmann::json j = nlohmann::json::parse(in);

    GridSpec grid;
    grid.problem = problem_from_name(j.at("problem").get<std::string>());
    grid.repetitions = j.at("repetitions").get<int>();
    if (j.contains("master_seed")) grid.master_seed = j.at("master_seed").get<uint64_t>();
    apply_run_keys(j, grid.base);
    if (j.contains("base")) apply_run_keys(j.at("base"), grid.base);

    std::vector<FitVariant> variants;
    for (const auto& v : j.at("variants"))
        variants.push_back(fit_variant_from_name(v.get<std::string>()));
    std::vector<double> noises = j.contains("noise")
                                     ? j.at("noise").get<std::vector<double>>()
                                     : std::vector<double>{0.0};
    struct KeepChoice {
        int keep = -1;
        bool liquid = false;
    };
    std::vector<KeepChoice> keeps;
    if (j.contains("keep")) {
        for (const auto& k : j.at("keep")) {
            if (k.is_string()) {
                std::string s = k.get<std::string>();
                if (s == "all")
                    keeps.push_back({-1, false});
                else if (s == "liquid")
                    keeps.push_back({-1, true});
                else
                    throw std::invalid_argument("unknown keep entry '" + s + "'");
            } else {
                keeps.push_back({k.get<int>(), false});
            }
        }
    } else {
        keeps.push_back({-1, false});
    }
    for (FitVariant v : variants)
        for (double n : noises)
            for (const KeepChoice& k : keeps)
                grid.cells.push_back(GridCell{v, n, k.keep, k.liquid});
    return grid;
}

std::string run_result_json(const RunConfig& cfg, const RunResult& r) {
    nlohmann::json cj{{"problem", name(cfg.problem)},
                      {"variant", fit_variant_name(cfg.variant)},
                      {"noise", cfg.noise},
                      {"keep", cfg.keep_liquid ? nlohmann::json("liquid")
                               : cfg.keep < 0  ? nlohmann::json("all")
                                               : nlohmann::json(cfg.keep)},
                      {"seed", cfg.seed},
                      {"budget", name(cfg.budget)},
                      {"t_lim", cfg.time_limit_s},
                      {"generation_budget", cfg.generation_budget},
                      {"pop_size", cfg.pop_size},
                      {"max_iter", cfg.max_iter},
                      {"constr_penalty_factor", cfg.constr_penalty_factor},
                      {"always_drastic_simplify", cfg.drastic_simplify_threshold},
                      {"max_mare_for_constr_fit", cfg.max_mare_for_constr_fit}};
    nlohmann::json hof = nlohmann::json::array();
    for (const HofSnapshotEntry& e : r.hof) {
        hof.push_back({{"expr", e.text},
                       {"structure", e.structure},
                       {"mse_rel", e.mse_rel},
                       {"mare", e.mare},
                       {"constr_vios", e.constr_vios},
                       {"complexity", e.complexity}});
    }
    nlohmann::json progress = nlohmann::json::array();
    for (const std::string& line : r.progress) progress.push_back(nlohmann::json::parse(line));
    nlohmann::json rj{{"success", r.success},
                      {"elapsed_s", r.elapsed_s},
                      {"generations", r.generations},
                      {"winner", r.winner},
                      {"winner_params", r.winner_params},
                      {"winner_complexity", r.winner_complexity},
                      {"error", r.error},
                      {"hof", std::move(hof)},
                      {"progress", std::move(progress)}};
    if (std::isfinite(r.winner_verify_mare)) rj["winner_verify_mare"] = r.winner_verify_mare;
    return nlohmann::json{{"config", std::move(cj)}, {"result", std::move(rj)}}.dump(2);
}

}  // namespace shapesr
