#pragma once

// Experiment orchestration: single searches with the held-out verification
// protocol, experiment grids over (variant x noise x data reduction) cells,
// and the two-proportion z-test used to compare success counts.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "shapesr/datasets.hpp"
#include "shapesr/evolution.hpp"
#include "shapesr/fitting.hpp"

namespace shapesr {

// A candidate wins when its refit on the held-out data tracks it this well.
inline constexpr double kVerifySuccessMare = 1e-6;

enum class BudgetMode { WallClock, Generations };

struct RunConfig {
    ProblemId problem = ProblemId::Gaussian;
    FitVariant variant = FitVariant::Base;
    double noise = 0.0;
    int keep = -1;             // reduce the fit set to this many rows; -1 keeps all
    bool keep_liquid = false;  // pressure benchmark: liquid grid + transition rows only
    uint64_t seed = 0;

    BudgetMode budget = BudgetMode::WallClock;
    double time_limit_s = 600.0;  // wall-clock budget
    int generation_budget = 200;  // generation budget
    double cadence_s = 5.0;       // verification cadence (wall-clock mode)
    int cadence_generations = 5;  // verification cadence (generation mode)

    int pop_size = 500;
    int complexity_cap = 0;  // 0 = problem default
    int max_iter = 30;       // least-squares iteration budget
    double constr_penalty_factor = 1.0;
    double lambda = 1e-6;
    // absolute refinement/verification gate on the fit-data mare;
    // negative = noise + 0.05
    double max_mare_for_constr_fit = -1.0;
    double drastic_simplify_threshold = 1e-7;
    double fitness_fraction = 0.2;
    double crossover_prob = 0.5;
    // parameters-only exponents; the engine supports no other mode and a
    // config asking for one is rejected
    bool pow_abs_param = true;
    // expression structures fitted and planted into the starting population
    // (seeding experiments, plant-the-answer tests)
    std::vector<Expression> seed_structures;
};

struct HofSnapshotEntry {
    std::string text;       // rendered expression with parameter values
    std::string structure;  // parameter-free shape key
    double mse_rel = 0.0;
    double mare = 0.0;
    double constr_vios = 0.0;
    int complexity = 0;
};

struct RunResult {
    bool success = false;
    double elapsed_s = 0.0;  // to success, or the exhausted budget
    int generations = 0;
    std::string winner;  // rendered winning expression; empty without success
    std::vector<double> winner_params;
    double winner_verify_mare = std::numeric_limits<double>::infinity();
    int winner_complexity = 0;
    std::vector<HofSnapshotEntry> hof;
    std::vector<std::string> progress;  // one JSON line per generation
    std::string error;                  // nonempty when the run could not execute
};

// Observation points for tests and diagnostics; never influences the search.
struct RunHooks {
    std::function<void(const Dataset& fit_data)> pre_verification;
    std::function<void(const Dataset& fit_data)> post_verification;
};

// Evolves under the configured budget; every cadence interval, hall-of-fame
// members whose fit-data mare passes the gate are re-fitted (pure least
// squares, no constraints, no regularizer) to the held-out verification data,
// and the first to reach kVerifySuccessMare ends the run with success.
// Verification results never flow back into the search. Errors are reported
// in RunResult::error rather than thrown.
RunResult run_search(const RunConfig& cfg, const RunHooks* hooks = nullptr);

struct GridCell {
    FitVariant variant = FitVariant::Base;
    double noise = 0.0;
    int keep = -1;
    bool keep_liquid = false;
};

struct GridSpec {
    ProblemId problem = ProblemId::Gaussian;
    std::vector<GridCell> cells;
    int repetitions = 0;
    uint64_t master_seed = 0;
    RunConfig base;  // shared knobs; per-cell fields overwritten per run
};

struct CellResult {
    GridCell cell;
    int repetitions = 0;
    int successes = 0;
    // mean elapsed over successful runs; NaN when none succeeded
    double mean_time_to_success = std::numeric_limits<double>::quiet_NaN();
    std::vector<RunResult> runs;
};

// Runs every cell x repetition with seeds derived from (master, cell index,
// repetition). Zero repetitions yield an empty table; per-run failures land
// in their RunResult, never abort the grid.
std::vector<CellResult> run_grid(const GridSpec& grid, const RunHooks* hooks = nullptr);

// One CSV row per cell: problem, variant, noise, keep, repetitions,
// successes, mean_time_to_success.
std::string grid_csv(const GridSpec& grid, const std::vector<CellResult>& cells);

struct ZTestResult {
    double z = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

// Pooled two-proportion z-test, two-sided at level alpha. A pooled proportion
// of exactly 0 or 1 carries no variance: z = 0, not significant.
ZTestResult z_test(int successes1, int n1, int successes2, int n2, double alpha = 0.05);

// Grid description file (JSON): problem, variants, noise and keep lists,
// repetitions, master_seed, plus the run knobs under their table names
// (t_lim, pop_size, pow_abs_param, always_drastic_simplify, max_iter,
// constr_penalty_factor, max_mare_for_constr_fit, budget, ...).
GridSpec load_grid_spec(const std::string& path);

// Full per-run record (config, outcome, hall of fame, progress) as a JSON text.
std::string run_result_json(const RunConfig& cfg, const RunResult& r);

const char* name(BudgetMode m);

}  // namespace shapesr
