#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shapesr/datasets.hpp"
#include "shapesr/evolution.hpp"
#include "shapesr/exprtree.hpp"
#include "shapesr/rng.hpp"
#include "trees.hpp"

using namespace shapesr;

namespace {

using Vec5 = std::array<double, kSelectionObjectives>;

bool dominates5(const Vec5& a, const Vec5& b) {
    bool strict = false;
    for (int i = 0; i < kSelectionObjectives; ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strict = true;
    }
    return strict;
}

// Reference ranking: peel the mutually non-dominated layer repeatedly.
std::vector<std::vector<int>> brute_fronts(const std::vector<Vec5>& objs) {
    std::vector<int> remaining(objs.size());
    for (size_t i = 0; i < objs.size(); ++i) remaining[i] = static_cast<int>(i);
    std::vector<std::vector<int>> fronts;
    while (!remaining.empty()) {
        std::vector<int> front, rest;
        for (int i : remaining) {
            bool dominated = false;
            for (int j : remaining)
                if (j != i && dominates5(objs[static_cast<size_t>(j)],
                                         objs[static_cast<size_t>(i)])) {
                    dominated = true;
                    break;
                }
            (dominated ? rest : front).push_back(i);
        }
        fronts.push_back(std::move(front));
        remaining = std::move(rest);
    }
    return fronts;
}

// A synthetic individual carrying explicit objectives; the expression is a
// constant tag so archive keys stay distinct.
Individual synthetic(double tag, const Vec5& objs) {
    Individual ind;
    ind.expr = Expression{make_constant(tag)};
    ind.fit.mse_rel = objs[0];
    ind.fit.mare = objs[0];
    ind.fit.constr_vios = objs[4];
    ind.objectives = objs;
    return ind;
}

FunctionSet small_fns() {
    return FunctionSet{{BinaryKind::Add, BinaryKind::Sub, BinaryKind::Mul, BinaryKind::Div},
                       {UnaryKind::Exp, UnaryKind::Sqrt, UnaryKind::Pow2, UnaryKind::Pow3}};
}

int brute_rank_of(const std::vector<std::vector<int>>& fronts, int idx) {
    for (size_t r = 0; r < fronts.size(); ++r)
        for (int i : fronts[r])
            if (i == idx) return static_cast<int>(r);
    return -1;
}

}  // namespace

TEST_CASE("rank correlation handles monotone, inverse, tied and flat inputs") {
    std::vector<double> x{1.0, 2.0, 3.0, 4.0};
    std::vector<double> up{10.0, 20.0, 30.0, 40.0};
    std::vector<double> down{4.0, 3.0, 2.0, 1.0};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    // nonlinear but monotone: still a perfect rank relation
    std::vector<double> cube{1.0, 8.0, 27.0, 64.0};
    CHECK(spearman(x, cube) == doctest::Approx(1.0));
    std::vector<double> flat{5.0, 5.0, 5.0, 5.0};
    CHECK(spearman(x, flat) == 0.0);
    // tied pair in one input: ranks (1, 2.5, 2.5, 4) against (1, 2, 3, 4)
    // give 4.5 / sqrt(4.5 * 5) = 3 / sqrt(10)
    std::vector<double> tied{1.0, 2.0, 2.0, 3.0};
    CHECK(spearman(tied, up) == doctest::Approx(3.0 / std::sqrt(10.0)));
}

TEST_CASE("objective computation fills the five selection values") {
    Dataset d;
    d.nvars = 1;
    d.var_names = {"x"};
    d.X = {1.0, 2.0, 3.0};
    d.y = {3.0, 6.0, 9.0};
    d.w = {1 / 3.0, 1 / 6.0, 1 / 9.0};
    d.row_tags = {"", "", ""};

    Individual ind;
    ind.expr = Expression{make_binary(BinaryKind::Mul, make_parameter(0), make_variable(0))};
    ind.fit.p = {3.0};
    ind.fit.mse_rel = 0.0;
    ind.fit.mare = 0.0;
    ind.fit.constr_vios = 0.25;
    ind.age = 2;
    compute_objectives(ind, d);
    CHECK(!ind.invalid);
    CHECK(ind.objectives[0] == 0.0);
    CHECK(ind.objectives[1] == 3.0);  // mul, parameter, variable
    CHECK(ind.objectives[2] == 2.0);
    CHECK(ind.objectives[3] == doctest::Approx(-1.0));  // perfect monotone predictions
    CHECK(ind.objectives[4] == 0.25);

    // constant predictions: degenerate rank correlation scores zero
    Individual flat;
    flat.expr = Expression{make_parameter(0)};
    flat.fit.p = {2.0};
    compute_objectives(flat, d);
    CHECK(!flat.invalid);
    CHECK(flat.objectives[3] == 0.0);

    // a NaN prediction invalidates the individual
    Individual bad;
    bad.expr = Expression{make_unary(
        UnaryKind::Sqrt, make_binary(BinaryKind::Sub, make_variable(0), make_constant(100.0)))};
    compute_objectives(bad, d);
    CHECK(bad.invalid);

    // a failed fit invalidates without touching predictions
    Individual failed;
    failed.expr = Expression{make_parameter(0)};
    failed.fit.failed = true;
    compute_objectives(failed, d);
    CHECK(failed.invalid);
}

TEST_CASE("random trees always satisfy the structural rules") {
    Rng rng = make_rng({71});
    FunctionSet fns = small_fns();
    fns.binary.push_back(BinaryKind::Pow);
    TreeLimits limits{31, 2, 16};
    for (int i = 0; i < 1000; ++i) {
        int depth = 1 + i % 4;
        bool full = i % 2 == 0;
        Expression e = random_tree(rng, fns, limits.nvars, depth, full);
        CAPTURE(i);
        CHECK(tree_ok(e, limits));
        CHECK(e.depth() <= depth + 1);
        CHECK_NOTHROW(validate(e, limits.nvars, limits.max_params, true));
    }
}

TEST_CASE("crossover of two single-leaf trees yields one of the leaves") {
    Expression a{make_variable(0)};
    Expression b{make_parameter(0, 2.5)};
    TreeLimits limits{31, 1, 16};
    Rng rng = make_rng({5});
    Expression child = crossover(a, b, limits, small_fns(), rng);
    std::string key = structure_key(child);
    CHECK((key == structure_key(a) || key == structure_key(b)));
}

TEST_CASE("a thousand mutations never break the invariants") {
    Rng rng = make_rng({72});
    FunctionSet fns = small_fns();
    fns.binary.push_back(BinaryKind::Pow);
    TreeLimits limits{31, 2, 16};
    int changed = 0;
    for (int i = 0; i < 1000; ++i) {
        Expression parent = random_tree(rng, fns, limits.nvars, 1 + i % 4, false);
        Expression child = mutate(parent, limits, fns, rng);
        CAPTURE(i);
        CHECK(tree_ok(child, limits));
        CHECK_NOTHROW(validate(child, limits.nvars, limits.max_params, true));
        if (structure_key(child) != structure_key(parent)) ++changed;
    }
    // mutation is not a no-op machine
    CHECK(changed > 500);
}

TEST_CASE("impossible limits make variation fall back to the parent") {
    // No parameters allowed and complexity capped at one node: any structural
    // change is rejected, so the parent must come back.
    TreeLimits limits{1, 1, 0};
    Expression a{make_variable(0)};
    Expression b{make_parameter(0, 1.0)};
    Rng rng = make_rng({6});
    for (int i = 0; i < 20; ++i) {
        CHECK(structure_key(crossover(a, b, limits, small_fns(), rng)) == structure_key(a));
        CHECK(structure_key(mutate(a, limits, small_fns(), rng)) == structure_key(a));
    }
}

TEST_CASE("fast non-dominated sort agrees with the brute-force ranking") {
    Rng rng = make_rng({73});
    std::uniform_int_distribution<int> small(0, 4);
    std::uniform_int_distribution<int> size(2, 40);
    for (int pool = 0; pool < 200; ++pool) {
        std::vector<Vec5> objs(static_cast<size_t>(size(rng)));
        for (auto& o : objs)
            for (double& v : o) v = small(rng);
        auto fast = fast_non_dominated_sort(objs);
        auto brute = brute_fronts(objs);
        CAPTURE(pool);
        REQUIRE(fast.size() == brute.size());
        for (size_t f = 0; f < fast.size(); ++f) {
            auto a = fast[f], b = brute[f];
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
        }
    }
}

TEST_CASE("selection keeps the dominant point") {
    std::vector<Individual> pool;
    pool.push_back(synthetic(1.0, {1, 1, 1, 1, 1}));
    pool.push_back(synthetic(2.0, {2, 2, 2, 2, 2}));
    auto out = select(std::move(pool), 1, 0.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0].objectives[0] == 1.0);
}

TEST_CASE("a strictly smaller violation wins when all else is equal") {
    std::vector<Individual> pool;
    pool.push_back(synthetic(1.0, {3, 5, 1, -0.5, 2.0}));
    pool.push_back(synthetic(2.0, {3, 5, 1, -0.5, 0.5}));
    auto out = select(std::move(pool), 1, 0.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0].objectives[4] == 0.5);
}

TEST_CASE("selection with identical objectives is a deterministic subset") {
    auto build = [] {
        std::vector<Individual> pool;
        for (int i = 0; i < 10; ++i)
            pool.push_back(synthetic(static_cast<double>(i), {1, 1, 1, 1, 1}));
        return pool;
    };
    auto first = select(build(), 4, 0.2);
    auto second = select(build(), 4, 0.2);
    REQUIRE(first.size() == 4);
    REQUIRE(second.size() == 4);
    for (size_t i = 0; i < first.size(); ++i)
        CHECK(structure_key(first[i].expr) == structure_key(second[i].expr));
}

TEST_CASE("invalid individuals never survive selection") {
    std::vector<Individual> pool;
    Individual broken = synthetic(0.0, {0, 0, 0, 0, 0});  // would dominate everything
    broken.invalid = true;
    pool.push_back(broken);
    pool.push_back(synthetic(1.0, {2, 2, 2, 2, 2}));
    auto out = select(std::move(pool), 1, 0.0);
    REQUIRE(out.size() == 1);
    CHECK(out[0].objectives[0] == 2.0);
}

TEST_CASE("pure pareto selection never skips a better rank") {
    Rng rng = make_rng({74});
    std::uniform_int_distribution<int> small(0, 3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Individual> pool;
        std::vector<Vec5> objs(30);
        for (size_t i = 0; i < objs.size(); ++i) {
            for (double& v : objs[i]) v = small(rng);
            pool.push_back(synthetic(static_cast<double>(i), objs[i]));
        }
        auto fronts = brute_fronts(objs);
        auto out = select(std::move(pool), 12, 0.0);
        REQUIRE(out.size() == 12);
        // tag -> index mapping survives in the expression constant
        std::set<int> kept;
        for (const Individual& ind : out)
            kept.insert(static_cast<int>(ind.expr.root()->value));
        int worst_kept = 0;
        for (int idx : kept) worst_kept = std::max(worst_kept, brute_rank_of(fronts, idx));
        // every complete rank better than the worst kept rank must be present
        for (int r = 0; r < worst_kept; ++r)
            for (int idx : fronts[static_cast<size_t>(r)]) {
                CAPTURE(trial);
                CHECK(kept.count(idx) == 1);
            }
    }
}

TEST_CASE("the fitness share goes to the best rank sums among the rest") {
    // Eight points on a clean diagonal front, plus two heavy outliers that sit
    // in worse ranks; with pop 6 = 5 pareto + 1 fitness the sixth slot must be
    // the best rank-sum candidate among those not already chosen.
    std::vector<Individual> pool;
    for (int i = 0; i < 8; ++i) {
        double a = static_cast<double>(i);
        pool.push_back(synthetic(a, {a, 7.0 - a, 0, 0, 0}));
    }
    // dominated stragglers
    pool.push_back(synthetic(100.0, {10, 10, 10, 10, 10}));
    pool.push_back(synthetic(101.0, {11, 11, 11, 11, 11}));
    auto out = select(std::move(pool), 6, 1.0 / 6.0);
    REQUIRE(out.size() == 6);
    // no straggler can beat a front member on rank sums
    for (const Individual& ind : out) CHECK(ind.expr.root()->value < 100.0);
}

TEST_CASE("survivor ages increment") {
    std::vector<Individual> pool;
    pool.push_back(synthetic(1.0, {1, 1, 1, 1, 1}));
    pool.back().age = 3;
    pool.push_back(synthetic(2.0, {2, 2, 2, 2, 2}));
    pool.back().age = 0;
    auto out = select(std::move(pool), 2, 0.0);
    REQUIRE(out.size() == 2);
    std::vector<int> ages{out[0].age, out[1].age};
    std::sort(ages.begin(), ages.end());
    CHECK(ages[0] == 1);
    CHECK(ages[1] == 4);
}

TEST_CASE("the archive drops members a new entry dominates") {
    HallOfFame hof;
    update_hof(hof, {synthetic(1.0, {2, 2, 2, 2, 2})});
    REQUIRE(hof.archive.size() == 1);
    // dominates on every hall-of-fame objective
    update_hof(hof, {synthetic(2.0, {1, 1, 1, 1, 1})});
    REQUIRE(hof.archive.size() == 1);
    CHECK(hof.archive[0].fit.mse_rel == 1.0);
}

TEST_CASE("an exact duplicate leaves the archive unchanged") {
    HallOfFame hof;
    Individual ind = synthetic(1.0, {2, 2, 2, 2, 2});
    update_hof(hof, {ind});
    update_hof(hof, {ind});
    CHECK(hof.archive.size() == 1);
}

TEST_CASE("the archive stays mutually non-dominated under random pressure") {
    HallOfFame hof;
    Rng rng = make_rng({75});
    std::uniform_real_distribution<double> u(0.0, 4.0);
    for (int i = 0; i < 1000; ++i) {
        double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
        Individual ind = synthetic(static_cast<double>(i), {a, b, 0, 0, d});
        ind.fit.mare = c;
        update_hof(hof, {ind});
    }
    CHECK(!hof.archive.empty());
    std::vector<std::array<double, kHofObjectives>> objs;
    for (const Individual& ind : hof.archive) objs.push_back(hof_objectives(ind));
    for (size_t i = 0; i < objs.size(); ++i) {
        for (size_t j = 0; j < objs.size(); ++j) {
            if (i == j) continue;
            bool strict = false, leq = true;
            for (int m = 0; m < kHofObjectives; ++m) {
                if (objs[i][m] > objs[j][m]) leq = false;
                if (objs[i][m] < objs[j][m]) strict = true;
            }
            CHECK(!(leq && strict));
        }
    }
}

TEST_CASE("the engine builds a full valid starting population") {
    const ProblemSpec& spec = problem(ProblemId::MagMan);
    Dataset d = generate(spec, WhichSet::Fit, 21);
    EvolutionConfig cfg;
    cfg.pop_size = 30;
    cfg.limits = {spec.complexity_cap, d.nvars, 16};
    cfg.fns = spec.function_set;
    Engine eng(cfg, &d, nullptr, nullptr, 404);
    eng.init();
    REQUIRE(eng.population().size() == 30);
    for (const Individual& ind : eng.population()) {
        CHECK(!ind.invalid);
        CHECK(ind.expr.complexity() <= spec.complexity_cap);
        CHECK(ind.age == 0);
        CHECK(ind.fit.constr_vios == 0.0);  // base variant
        CHECK(ind.objectives[3] <= 0.0);
        CHECK(ind.objectives[3] >= -1.0);
    }
    CHECK(!eng.hof().archive.empty());

    // same seed, same multiset of structures
    Engine twin(cfg, &d, nullptr, nullptr, 404);
    twin.init();
    auto keys = [](const Engine& e) {
        std::vector<std::string> k;
        for (const Individual& ind : e.population()) k.push_back(structure_key(ind.expr));
        std::sort(k.begin(), k.end());
        return k;
    };
    CHECK(keys(eng) == keys(twin));
}

TEST_CASE("a generation step breeds, selects and logs") {
    const ProblemSpec& spec = problem(ProblemId::MagMan);
    Dataset d = generate(spec, WhichSet::Fit, 22);
    EvolutionConfig cfg;
    cfg.pop_size = 20;
    cfg.limits = {spec.complexity_cap, d.nvars, 16};
    cfg.fns = spec.function_set;
    Engine eng(cfg, &d, nullptr, nullptr, 405);
    eng.init();
    double best_before = eng.stats().best_mse_rel;
    eng.step();
    CHECK(eng.generation() == 1);
    CHECK(eng.population().size() == 20);
    for (const Individual& ind : eng.population()) {
        CHECK(!ind.invalid);
        CHECK(ind.age >= 1);
        CHECK(ind.expr.complexity() <= spec.complexity_cap);
    }
    // elitism: the pool contains the parents, so the best fit cannot regress
    CHECK(eng.stats().best_mse_rel <= best_before + 1e-15);

    nlohmann::json j = nlohmann::json::parse(eng.progress_json());
    CHECK(j["generation"] == 1);
    CHECK(j.contains("best_mse_rel"));
    CHECK(j.contains("best_mare"));
    CHECK(j.contains("hof_size"));
    CHECK(j.contains("vio_mean"));
}

TEST_CASE("constraint-aware evolution carries violations through scoring") {
    const ProblemSpec& spec = problem(ProblemId::Gaussian);
    Dataset d = generate(spec, WhichSet::Fit, 23);
    ConstraintSet set = default_constraints(ProblemId::Gaussian);
    EvalPoints pts = sample_points(set, 23);
    EvolutionConfig cfg;
    cfg.pop_size = 10;
    cfg.variant = FitVariant::Obj;
    cfg.limits = {spec.complexity_cap, d.nvars, 16};
    cfg.fns = spec.function_set;
    Engine eng(cfg, &d, &set, &pts, 406);
    eng.init();
    eng.step();
    REQUIRE(eng.population().size() == 10);
    bool any_positive = false;
    for (const Individual& ind : eng.population()) {
        CHECK(std::isfinite(ind.fit.constr_vios));
        CHECK(ind.fit.constr_vios >= 0.0);
        if (ind.fit.constr_vios > 0.0) any_positive = true;
    }
    // random candidates on the bell problem essentially always violate
    // something somewhere
    CHECK(any_positive);
}

TEST_CASE("planting a known individual into the population works") {
    const ProblemSpec& spec = problem(ProblemId::MagMan);
    Dataset d = generate(spec, WhichSet::Fit, 24);
    EvolutionConfig cfg;
    cfg.pop_size = 10;
    cfg.limits = {spec.complexity_cap, d.nvars, 16};
    cfg.fns = spec.function_set;
    Engine eng(cfg, &d, nullptr, nullptr, 407);
    eng.init();
    Individual truth = eng.fit_individual(testtrees::magman_tree(), 999);
    CHECK(!truth.invalid);
    CHECK(truth.fit.mare < 1e-3);
    eng.inject(truth);
    CHECK(eng.population().size() == 10);
    bool found = false;
    for (const Individual& ind : eng.population())
        if (structure_key(ind.expr) == structure_key(testtrees::magman_tree())) found = true;
    CHECK(found);
}
