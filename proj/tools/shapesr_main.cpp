// Command-line front end: single searches, experiment grids, and the
// two-proportion z-test over success counts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shapesr/harness.hpp"

namespace fs = std::filesystem;
using namespace shapesr;

namespace {

// "all", "liquid", or a row count
void apply_keep(const std::string& keep, RunConfig& rc) {
    if (keep == "all") {
        rc.keep = -1;
        rc.keep_liquid = false;
    } else if (keep == "liquid") {
        rc.keep = -1;
        rc.keep_liquid = true;
    } else {
        try {
            size_t used = 0;
            rc.keep = std::stoi(keep, &used);
            if (used != keep.size()) throw std::invalid_argument(keep);
        } catch (const std::exception&) {
            throw CLI::ValidationError("--keep", "expected 'all', 'liquid', or a row count");
        }
        rc.keep_liquid = false;
    }
}

// "wallclock" or "generations:<n>"
void apply_budget(const std::string& budget, RunConfig& rc) {
    if (budget == "wallclock") {
        rc.budget = BudgetMode::WallClock;
        return;
    }
    const std::string prefix = "generations:";
    if (budget.rfind(prefix, 0) == 0) {
        rc.budget = BudgetMode::Generations;
        rc.generation_budget = std::stoi(budget.substr(prefix.size()));
        return;
    }
    throw CLI::ValidationError("--budget", "expected 'wallclock' or 'generations:<n>'");
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

void print_run_summary(const RunConfig& rc, const RunResult& rr) {
    if (!rr.error.empty()) {
        std::cout << "error: " << rr.error << "\n";
        return;
    }
    std::cout << "problem=" << name(rc.problem) << " variant=" << fit_variant_name(rc.variant)
              << " noise=" << rc.noise << " seed=" << rc.seed << "\n";
    std::cout << "generations=" << rr.generations << " elapsed_s=" << rr.elapsed_s
              << " hof=" << rr.hof.size() << "\n";
    if (rr.success) {
        std::cout << "success: " << rr.winner << "\n";
        std::cout << "verify_mare=" << rr.winner_verify_mare
                  << " complexity=" << rr.winner_complexity << "\n";
    } else {
        std::cout << "no success within budget\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shape-constrained symbolic regression"};
    app.require_subcommand(1);

    // ---- run ----
    auto* run = app.add_subcommand("run", "single search with periodic verification");
    std::string problem = "gaussian", variant = "base", keep = "all", budget = "wallclock";
    std::string out_dir;
    RunConfig rc;
    run->add_option("--problem", problem, "gaussian|magman|vdw")->capture_default_str();
    run->add_option("--variant", variant, "base|obj|minimobj")->capture_default_str();
    run->add_option("--noise", rc.noise, "relative noise level")->capture_default_str();
    run->add_option("--keep", keep, "fit rows kept: all, liquid, or a count")
        ->capture_default_str();
    run->add_option("--seed", rc.seed, "master seed")->capture_default_str();
    run->add_option("--time-limit", rc.time_limit_s, "wall-clock budget in seconds")
        ->capture_default_str();
    run->add_option("--budget", budget, "wallclock or generations:<n>")->capture_default_str();
    run->add_option("--pop-size", rc.pop_size, "population size")->capture_default_str();
    run->add_option("--max-iter", rc.max_iter, "least-squares iteration budget")
        ->capture_default_str();
    run->add_option("--cadence", rc.cadence_s, "verification cadence in seconds")
        ->capture_default_str();
    run->add_option("--cadence-generations", rc.cadence_generations,
                    "verification cadence in generations")
        ->capture_default_str();
    run->add_option("--complexity-cap", rc.complexity_cap, "0 = problem default")
        ->capture_default_str();
    run->add_option("--constr-penalty-factor", rc.constr_penalty_factor,
                    "penalty weight on violations")
        ->capture_default_str();
    run->add_option("--max-mare-for-constr-fit", rc.max_mare_for_constr_fit,
                    "absolute gate; negative derives noise + 0.05")
        ->capture_default_str();
    run->add_option("--out", out_dir, "directory for the run record JSON");

    // ---- grid ----
    auto* grid_cmd = app.add_subcommand("grid", "experiment grid from a config file");
    std::string grid_config, grid_out;
    grid_cmd->add_option("--config", grid_config, "grid config JSON")->required();
    grid_cmd->add_option("--out", grid_out, "directory for grid.csv and per-run records");

    // ---- ztest ----
    auto* ztest_cmd = app.add_subcommand("ztest", "two-proportion z-test on success counts");
    int s1 = 0, n1 = 0, s2 = 0, n2 = 0;
    double alpha = 0.05;
    ztest_cmd->add_option("s1", s1, "successes, first sample")->required();
    ztest_cmd->add_option("n1", n1, "size, first sample")->required();
    ztest_cmd->add_option("s2", s2, "successes, second sample")->required();
    ztest_cmd->add_option("n2", n2, "size, second sample")->required();
    ztest_cmd->add_option("--alpha", alpha, "significance level")->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            rc.problem = problem_from_name(problem == "vdw" ? "vanderwaals" : problem);
            rc.variant = fit_variant_from_name(variant);
            apply_keep(keep, rc);
            apply_budget(budget, rc);
            RunResult rr = run_search(rc);
            print_run_summary(rc, rr);
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                write_file(fs::path(out_dir) / "run.json", run_result_json(rc, rr));
            }
            return rr.error.empty() ? 0 : 1;
        }
        if (grid_cmd->parsed()) {
            GridSpec grid = load_grid_spec(grid_config);
            auto cells = run_grid(grid);
            std::string csv = grid_csv(grid, cells);
            std::cout << csv;
            if (!grid_out.empty()) {
                fs::create_directories(grid_out);
                write_file(fs::path(grid_out) / "grid.csv", csv);
                for (size_t c = 0; c < cells.size(); ++c) {
                    for (size_t r = 0; r < cells[c].runs.size(); ++r) {
                        RunConfig cell_rc = grid.base;
                        cell_rc.problem = grid.problem;
                        cell_rc.variant = cells[c].cell.variant;
                        cell_rc.noise = cells[c].cell.noise;
                        cell_rc.keep = cells[c].cell.keep;
                        cell_rc.keep_liquid = cells[c].cell.keep_liquid;
                        char tag[64];
                        std::snprintf(tag, sizeof tag, "run_c%02zu_r%02zu.json", c, r);
                        write_file(fs::path(grid_out) / tag,
                                   run_result_json(cell_rc, cells[c].runs[r]));
                    }
                }
            }
            return 0;
        }
        if (ztest_cmd->parsed()) {
            ZTestResult z = z_test(s1, n1, s2, n2, alpha);
            std::cout << "z=" << z.z << " p=" << z.p_value << " "
                      << (z.significant ? "significant" : "not significant") << " at alpha="
                      << alpha << "\n";
            return 0;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
