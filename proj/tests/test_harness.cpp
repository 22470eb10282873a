#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapesr/harness.hpp"
#include "trees.hpp"

using namespace shapesr;

namespace {

RunConfig quick_config(ProblemId id, int pop, int generations) {
    RunConfig rc;
    rc.problem = id;
    rc.pop_size = pop;
    rc.budget = BudgetMode::Generations;
    rc.generation_budget = generations;
    rc.cadence_generations = 1;
    rc.seed = 11;
    return rc;
}

bool same_dataset(const Dataset& a, const Dataset& b) {
    return a.X == b.X && a.y == b.y && a.w == b.w && a.row_tags == b.row_tags &&
           a.nvars == b.nvars;
}

}  // namespace

TEST_CASE("the two-proportion z-test matches the frozen oracle") {
    // z and p frozen from an independent high-precision computation of the
    // pooled-proportion statistic
    ZTestResult close = z_test(14, 31, 17, 31);
    CHECK(std::abs(close.z - -0.762000762001143) < 1e-9);
    CHECK(std::abs(close.p_value - 0.44605954937074395) < 1e-9);
    CHECK(!close.significant);

    ZTestResult far = z_test(10, 10, 0, 10);
    CHECK(std::abs(far.z - 4.4721359549995794) < 1e-9);
    CHECK(std::abs(far.p_value - 7.7442164310440836e-6) < 1e-12);
    CHECK(far.significant);
}

TEST_CASE("degenerate z-test inputs carry no significance") {
    ZTestResult equal = z_test(14, 31, 14, 31);
    CHECK(equal.z == 0.0);
    CHECK(!equal.significant);

    ZTestResult none = z_test(0, 10, 0, 10);
    CHECK(none.z == 0.0);
    CHECK(!none.significant);

    ZTestResult all = z_test(10, 10, 10, 10);
    CHECK(all.z == 0.0);
    CHECK(!all.significant);

    CHECK_THROWS_AS(z_test(5, 0, 1, 10), std::invalid_argument);
    CHECK_THROWS_AS(z_test(11, 10, 1, 10), std::invalid_argument);
}

TEST_CASE("planting the true structure wins within one verification cycle") {
    RunConfig rc = quick_config(ProblemId::MagMan, 10, 0);
    rc.seed_structures.push_back(testtrees::magman_tree());
    RunResult rr = run_search(rc);
    REQUIRE(rr.error.empty());
    CHECK(rr.success);
    CHECK(rr.generations == 0);
    CHECK(rr.winner_verify_mare < kVerifySuccessMare);
    CHECK(rr.winner_complexity <= problem(ProblemId::MagMan).complexity_cap);
    CHECK(!rr.winner.empty());
    REQUIRE(rr.winner_params.size() == 2);
    CHECK(std::abs(rr.winner_params[0] - 5.25) < 1e-3);
    CHECK(std::abs(rr.winner_params[1] - 1.75) < 1e-3);
}

TEST_CASE("a one-second budget on the pressure problem times out cleanly") {
    RunConfig rc;
    rc.problem = ProblemId::VanDerWaals;
    rc.pop_size = 16;
    rc.budget = BudgetMode::WallClock;
    rc.time_limit_s = 1.0;
    rc.cadence_s = 0.25;
    rc.seed = 12;
    RunResult rr = run_search(rc);
    CHECK(rr.error.empty());
    CHECK(!rr.success);
    CHECK(rr.winner.empty());
    CHECK(!rr.hof.empty());
}

TEST_CASE("generation-budget runs are deterministic") {
    auto run = [] {
        RunConfig rc = quick_config(ProblemId::Gaussian, 16, 3);
        rc.seed = 13;
        return run_search(rc);
    };
    RunResult a = run();
    RunResult b = run();
    CHECK(a.error.empty());
    CHECK(a.success == b.success);
    CHECK(a.generations == b.generations);
    CHECK(a.winner == b.winner);
    CHECK(a.progress == b.progress);
    REQUIRE(a.hof.size() == b.hof.size());
    for (size_t i = 0; i < a.hof.size(); ++i) {
        CHECK(a.hof[i].text == b.hof[i].text);
        CHECK(a.hof[i].mare == b.hof[i].mare);
    }
}

TEST_CASE("verification never touches the fit data") {
    Dataset snapshot;
    int sweeps = 0;
    bool clean = true;
    RunHooks hooks;
    hooks.pre_verification = [&](const Dataset& d) { snapshot = d; };
    hooks.post_verification = [&](const Dataset& d) {
        ++sweeps;
        if (!same_dataset(snapshot, d)) clean = false;
    };
    RunConfig rc = quick_config(ProblemId::MagMan, 12, 2);
    rc.noise = 0.1;
    rc.seed = 14;
    RunResult rr = run_search(rc, &hooks);
    CHECK(rr.error.empty());
    CHECK(sweeps >= 2);
    CHECK(clean);
}

TEST_CASE("hall-of-fame snapshots respect the complexity cap") {
    RunConfig rc = quick_config(ProblemId::Gaussian, 14, 2);
    rc.seed = 15;
    RunResult rr = run_search(rc);
    REQUIRE(rr.error.empty());
    CHECK(!rr.hof.empty());
    for (const HofSnapshotEntry& e : rr.hof) {
        CHECK(e.complexity <= problem(ProblemId::Gaussian).complexity_cap);
        CHECK(std::isfinite(e.mare));
        CHECK(e.constr_vios >= 0.0);
    }
    // one progress line per generation plus the initial one
    CHECK(rr.progress.size() == static_cast<size_t>(rr.generations) + 1);
}

TEST_CASE("an impossible configuration reports an error instead of throwing") {
    RunConfig rc = quick_config(ProblemId::Gaussian, 10, 1);
    rc.keep = 100000;  // more rows than the fit set has
    RunResult rr = run_search(rc);
    CHECK(!rr.success);
    CHECK(!rr.error.empty());

    RunConfig bad = quick_config(ProblemId::Gaussian, 10, 1);
    bad.pow_abs_param = false;
    RunResult rb = run_search(bad);
    CHECK(!rb.success);
    CHECK(!rb.error.empty());
}

TEST_CASE("grids run every cell and never abort on failed runs") {
    GridSpec grid;
    grid.problem = ProblemId::Gaussian;
    grid.repetitions = 2;
    grid.master_seed = 77;
    grid.base = quick_config(ProblemId::Gaussian, 10, 1);
    grid.cells = {GridCell{FitVariant::Base, 0.0, -1, false},
                  GridCell{FitVariant::Obj, 0.0, 100000, false}};  // second cell fails
    auto cells = run_grid(grid);
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].repetitions == 2);
    CHECK(cells[0].successes >= 0);
    CHECK(cells[0].successes <= 2);
    CHECK(cells[0].runs.size() == 2);
    CHECK(cells[0].runs[0].error.empty());
    // the failing cell completes with per-run errors recorded
    CHECK(cells[1].successes == 0);
    CHECK(!cells[1].runs[0].error.empty());
    CHECK(!cells[1].runs[1].error.empty());

    std::string csv = grid_csv(grid, cells);
    CHECK(csv.find("problem,variant,noise,keep,repetitions,successes,mean_time_to_success") !=
          std::string::npos);
    CHECK(csv.find("gaussian,base,0,all,2,") != std::string::npos);
    CHECK(csv.find("gaussian,obj,0,100000,2,0,") != std::string::npos);
}

TEST_CASE("zero repetitions yield an empty table") {
    GridSpec grid;
    grid.problem = ProblemId::Gaussian;
    grid.repetitions = 0;
    grid.cells = {GridCell{}};
    CHECK(run_grid(grid).empty());
}

TEST_CASE("grid cells expand as the cross product of the config lists") {
    const char* path = "grid_config_tmp.json";
    {
        std::ofstream out(path);
        out << R"({
            "problem": "gaussian",
            "variants": ["base", "obj", "minimobj"],
            "noise": [0.1, 0.3],
            "keep": ["all", 12, "liquid"],
            "repetitions": 31,
            "master_seed": 9,
            "t_lim": 600,
            "pop_size": 500,
            "pow_abs_param": true,
            "always_drastic_simplify": 1e-7,
            "max_iter": 30,
            "constr_penalty_factor": 1.0,
            "max_mare_for_constr_fit": 0.15,
            "budget": "generations",
            "generation_budget": 200,
            "cadence_generations": 5
        })";
    }
    GridSpec grid = load_grid_spec(path);
    std::remove(path);
    CHECK(grid.problem == ProblemId::Gaussian);
    CHECK(grid.repetitions == 31);
    CHECK(grid.master_seed == 9);
    REQUIRE(grid.cells.size() == 3 * 2 * 3);
    CHECK(grid.cells[0].variant == FitVariant::Base);
    CHECK(grid.cells[0].noise == 0.1);
    CHECK(grid.cells[0].keep == -1);
    CHECK(!grid.cells[0].keep_liquid);
    CHECK(grid.cells[1].keep == 12);
    CHECK(grid.cells[2].keep_liquid);
    CHECK(grid.base.time_limit_s == 600.0);
    CHECK(grid.base.pop_size == 500);
    CHECK(grid.base.max_iter == 30);
    CHECK(grid.base.constr_penalty_factor == 1.0);
    CHECK(grid.base.drastic_simplify_threshold == 1e-7);
    CHECK(grid.base.max_mare_for_constr_fit == 0.15);
    CHECK(grid.base.budget == BudgetMode::Generations);
    CHECK(grid.base.generation_budget == 200);
    CHECK(grid.base.cadence_generations == 5);
}

TEST_CASE("per-run records serialize into parseable JSON") {
    RunConfig rc = quick_config(ProblemId::MagMan, 10, 0);
    rc.seed_structures.push_back(testtrees::magman_tree());
    RunResult rr = run_search(rc);
    REQUIRE(rr.error.empty());
    nlohmann::json j = nlohmann::json::parse(run_result_json(rc, rr));
    CHECK(j["config"]["problem"] == "magman");
    CHECK(j["config"]["variant"] == "base");
    CHECK(j["config"]["keep"] == "all");
    CHECK(j["result"]["success"] == true);
    CHECK(j["result"]["winner"].get<std::string>().size() > 0);
    CHECK(j["result"]["hof"].is_array());
    CHECK(j["result"]["progress"].is_array());
    CHECK(j["result"]["winner_verify_mare"].get<double>() < 1e-6);
}
