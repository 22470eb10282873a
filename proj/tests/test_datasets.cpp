#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "shapesr/datasets.hpp"

using namespace shapesr;

namespace {

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("problem registry exposes the three benchmarks with paper complexities") {
    const auto& g = problem(ProblemId::Gaussian);
    CHECK(g.ground_truth.complexity() == 11);
    CHECK(g.true_params.empty());
    CHECK(g.complexity_cap == 16);

    const auto& m = problem(ProblemId::MagMan);
    CHECK(m.ground_truth.complexity() == 11);
    CHECK(m.true_params == std::vector<double>{5.25, 1.75});
    CHECK(m.complexity_cap == 16);

    const auto& v = problem(ProblemId::VanDerWaals);
    CHECK(v.ground_truth.complexity() == 12);
    CHECK(v.complexity_cap == 17);
    CHECK(v.true_params == std::vector<double>{0.9649, 6.702e-5});

    CHECK(problem_from_name("magman") == ProblemId::MagMan);
    CHECK_THROWS_AS(problem_from_name("unknown"), std::invalid_argument);
}

TEST_CASE("ground-truth registry trees hit the frozen oracle values") {
    const auto& m = problem(ProblemId::MagMan);
    std::vector<double> x{1.0, 1.0};
    CHECK(close_rel(evaluate(m.ground_truth, x, m.true_params),
                    0.252441773102930127723516153268, 1e-14));

    const auto& g = problem(ProblemId::Gaussian);
    std::vector<double> xg{0.0, 1.0};
    CHECK(close_rel(evaluate(g.ground_truth, xg, g.true_params),
                    0.398942280401432677939946059934, 1e-14));

    const auto& v = problem(ProblemId::VanDerWaals);
    std::vector<double> xv{300.0, 1e-3};
    CHECK(close_rel(evaluate(v.ground_truth, xv, v.true_params),
                    1708617.95901305494222812922035, 1e-12));
}

TEST_CASE("gaussian fit set: 100 rows inside the fit ranges") {
    const auto& spec = problem(ProblemId::Gaussian);
    Dataset d = generate(spec, WhichSet::Fit, 42);
    CHECK(d.rows() == 100);
    CHECK(d.nvars == 2);
    for (int i = 0; i < d.rows(); ++i) {
        auto r = d.row(i);
        CHECK(r[0] >= -5.0);
        CHECK(r[0] <= 5.0);
        CHECK(r[1] >= 0.5);
        CHECK(r[1] <= 3.0);
        CHECK(d.w[static_cast<size_t>(i)] == 1.0 / d.y[static_cast<size_t>(i)]);
    }
    Dataset dv = generate(spec, WhichSet::Verify, 42);
    CHECK(dv.rows() == 500);
}

TEST_CASE("verification ranges strictly contain fit ranges") {
    for (auto id : {ProblemId::Gaussian, ProblemId::MagMan}) {
        const auto& spec = problem(id);
        for (size_t j = 0; j < spec.fit_ranges.size(); ++j) {
            CHECK(spec.verify_ranges[j].lo <= spec.fit_ranges[j].lo);
            CHECK(spec.verify_ranges[j].hi >= spec.fit_ranges[j].hi);
            CHECK((spec.verify_ranges[j].lo < spec.fit_ranges[j].lo ||
                   spec.verify_ranges[j].hi > spec.fit_ranges[j].hi));
        }
    }
    const auto& v = problem(ProblemId::VanDerWaals);
    REQUIRE(v.fit_grids.size() == v.verify_grids.size());
    for (size_t k = 0; k < v.fit_grids.size(); ++k) {
        CHECK(v.verify_grids[k].T.lo < v.fit_grids[k].T.lo);
        CHECK(v.verify_grids[k].T.hi > v.fit_grids[k].T.hi);
        CHECK(v.verify_grids[k].p.lo < v.fit_grids[k].p.lo);
        CHECK(v.verify_grids[k].p.hi > v.fit_grids[k].p.hi);
    }
}

TEST_CASE("same seed reproduces the dataset exactly") {
    const auto& spec = problem(ProblemId::MagMan);
    Dataset a = generate(spec, WhichSet::Fit, 7);
    Dataset b = generate(spec, WhichSet::Fit, 7);
    CHECK(a.X == b.X);
    CHECK(a.y == b.y);
    Dataset c = generate(spec, WhichSet::Fit, 8);
    CHECK(a.X != c.X);
}

TEST_CASE("pressure-benchmark fit set has 147 rows with tagged segments") {
    const auto& spec = problem(ProblemId::VanDerWaals);
    Dataset d = generate(spec, WhichSet::Fit, 1);
    CHECK(d.rows() == 147);
    auto count = [&](const char* tag) {
        return std::count(d.row_tags.begin(), d.row_tags.end(), tag);
    };
    CHECK(count("gas") == 49);
    CHECK(count("liquid") == 49);
    CHECK(count("supercritical") == 45);
    CHECK(count("transition") == 4);

    Dataset dv = generate(spec, WhichSet::Verify, 1);
    CHECK(dv.rows() == 300);
    CHECK(std::count(dv.row_tags.begin(), dv.row_tags.end(), "transition") == 0);

    // Transition targets match the saturation pressures to printed precision.
    const double psat[4] = {594598.2419252641, 594598.2419252641, 2.7042458049626728e6,
                            2.7042458049626728e6};
    int k = 0;
    for (int i = 0; i < d.rows(); ++i)
        if (d.row_tags[static_cast<size_t>(i)] == "transition") {
            CHECK(close_rel(d.y[static_cast<size_t>(i)], psat[k], 1e-9));
            ++k;
        }
    CHECK(k == 4);
}

TEST_CASE("cubic solve round-trips through the pressure equation") {
    // v0 = 1.5e-3 at T = 450 lies in the gas phase: p = 2182153.73982888805
    double p0 = kGasConstant * 450.0 / (1.5e-3 - kVdwB) - kVdwA / (1.5e-3 * 1.5e-3);
    CHECK(close_rel(p0, 2182153.73982888805147315384723, 1e-12));
    double v = vdw_solve_v(450.0, p0, VdwPhase::Gas);
    CHECK(close_rel(v, 1.5e-3, 1e-9));

    // liquid root at (350, 6.5e6)
    double vl = vdw_solve_v(350.0, 6.5e6, VdwPhase::Liquid);
    CHECK(vl > kVdwB);
    double pl = kGasConstant * 350.0 / (vl - kVdwB) - kVdwA / (vl * vl);
    CHECK(close_rel(pl, 6.5e6, 1e-9));

    // supercritical root is unique at (600, 10.5e6)
    double vs = vdw_solve_v(600.0, 10.5e6, VdwPhase::Supercritical);
    double ps = kGasConstant * 600.0 / (vs - kVdwB) - kVdwA / (vs * vs);
    CHECK(close_rel(ps, 10.5e6, 1e-9));
}

TEST_CASE("noise level zero leaves targets untouched") {
    const auto& spec = problem(ProblemId::Gaussian);
    Dataset d = generate(spec, WhichSet::Fit, 5);
    Dataset n = apply_noise(d, 0.0, 99);
    CHECK(n.y == d.y);
}

TEST_CASE("relative noise has the configured statistics across seeds") {
    const auto& spec = problem(ProblemId::Gaussian);
    Dataset d = generate(spec, WhichSet::Fit, 5);
    std::vector<double> ratios;
    for (uint64_t seed = 0; seed < 31; ++seed) {
        Dataset n = apply_noise(d, 0.1, seed);
        for (int i = 0; i < d.rows(); ++i)
            ratios.push_back(n.y[static_cast<size_t>(i)] / d.y[static_cast<size_t>(i)] - 1.0);
    }
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    double var = 0.0;
    for (double r : ratios) var += (r - mean) * (r - mean);
    var /= static_cast<double>(ratios.size() - 1);
    double sd = std::sqrt(var);
    CHECK(std::abs(mean) < 0.03);
    CHECK(sd > 0.07);
    CHECK(sd < 0.13);
}

TEST_CASE("noise never touches the phase-transition rows") {
    const auto& spec = problem(ProblemId::VanDerWaals);
    Dataset d = generate(spec, WhichSet::Fit, 3);
    Dataset n = apply_noise(d, 0.3, 123);
    int transitions = 0, noisy = 0;
    for (int i = 0; i < d.rows(); ++i) {
        if (d.row_tags[static_cast<size_t>(i)] == "transition") {
            CHECK(n.y[static_cast<size_t>(i)] == d.y[static_cast<size_t>(i)]);
            ++transitions;
        } else if (n.y[static_cast<size_t>(i)] != d.y[static_cast<size_t>(i)]) {
            ++noisy;
        }
    }
    CHECK(transitions == 4);
    CHECK(noisy > 130);  // essentially every untagged row moves at level 0.3
    // weights track the noisy targets
    for (int i = 0; i < n.rows(); ++i)
        CHECK(n.w[static_cast<size_t>(i)] == 1.0 / n.y[static_cast<size_t>(i)]);
}

TEST_CASE("reduce_data drops the row nearest the normalized center") {
    Dataset d;
    d.nvars = 1;
    d.var_names = {"x"};
    d.X = {1.0, 2.0, 4.0};
    d.y = {1.0, 1.0, 1.0};
    d.w = {1.0, 1.0, 1.0};
    d.row_tags = {"", "", ""};
    Dataset r = reduce_data(d, 2);
    REQUIRE(r.rows() == 2);
    CHECK(r.X[0] == 1.0);
    CHECK(r.X[1] == 4.0);
    CHECK(r.meta.keep == 2);
}

TEST_CASE("reduce_data identity and idempotence") {
    const auto& spec = problem(ProblemId::Gaussian);
    Dataset d = generate(spec, WhichSet::Fit, 11);
    Dataset same = reduce_data(d, d.rows());
    CHECK(same.X == d.X);
    Dataset once = reduce_data(d, 14);
    Dataset twice = reduce_data(once, 14);
    CHECK(once.X == twice.X);
    CHECK(once.y == twice.y);
}

TEST_CASE("reduce_data carves a hole around the center") {
    const auto& spec = problem(ProblemId::MagMan);
    Dataset d = generate(spec, WhichSet::Fit, 17);
    Dataset r = reduce_data(d, 40);
    CHECK(r.rows() == 40);

    // recompute the normalization of the ORIGINAL data
    double mx0 = -1e300, mx1 = -1e300;
    for (int i = 0; i < d.rows(); ++i) {
        mx0 = std::max(mx0, d.row(i)[0]);
        mx1 = std::max(mx1, d.row(i)[1]);
    }
    double mu0 = 0, mu1 = 0;
    for (int i = 0; i < d.rows(); ++i) {
        mu0 += d.row(i)[0] / mx0;
        mu1 += d.row(i)[1] / mx1;
    }
    mu0 /= d.rows();
    mu1 /= d.rows();
    auto dist2 = [&](std::span<const double> row) {
        double a = row[0] / mx0 - mu0, b = row[1] / mx1 - mu1;
        return a * a + b * b;
    };
    // every kept row is at least as far from the center as every dropped row
    double kept_min = 1e300;
    for (int i = 0; i < r.rows(); ++i) kept_min = std::min(kept_min, dist2(r.row(i)));
    std::set<std::pair<double, double>> kept;
    for (int i = 0; i < r.rows(); ++i) kept.insert({r.row(i)[0], r.row(i)[1]});
    double dropped_max = -1.0;
    for (int i = 0; i < d.rows(); ++i)
        if (!kept.count({d.row(i)[0], d.row(i)[1]}))
            dropped_max = std::max(dropped_max, dist2(d.row(i)));
    CHECK(kept_min >= dropped_max);
}

TEST_CASE("liquid-plus-transition filter keeps exactly those rows") {
    const auto& spec = problem(ProblemId::VanDerWaals);
    Dataset d = generate(spec, WhichSet::Fit, 23);
    Dataset r = keep_liquid_and_transition(d);
    CHECK(r.rows() == 53);
    for (int i = 0; i < r.rows(); ++i) {
        const auto& tag = r.row_tags[static_cast<size_t>(i)];
        CHECK((tag == "liquid" || tag == "transition"));
    }
}

TEST_CASE("CSV round-trip preserves rows, targets and tags") {
    namespace fs = std::filesystem;
    const auto& spec = problem(ProblemId::VanDerWaals);
    Dataset d = generate(spec, WhichSet::Fit, 29);
    fs::path dir = fs::temp_directory_path() / "shapesr_test_io";
    fs::create_directories(dir);
    std::string csv = (dir / "d.csv").string();
    std::string meta = (dir / "d.json").string();
    save_csv(d, csv, meta);
    Dataset back = load_csv(csv, meta);
    REQUIRE(back.rows() == d.rows());
    CHECK(back.var_names == d.var_names);
    CHECK(back.row_tags == d.row_tags);
    CHECK(back.meta.problem == d.meta.problem);
    CHECK(back.meta.seed == d.meta.seed);
    for (int i = 0; i < d.rows(); ++i) {
        CHECK(back.y[static_cast<size_t>(i)] == d.y[static_cast<size_t>(i)]);
        for (int j = 0; j < d.nvars; ++j)
            CHECK(back.row(i)[static_cast<size_t>(j)] == d.row(i)[static_cast<size_t>(j)]);
    }
    fs::remove_all(dir);
}
