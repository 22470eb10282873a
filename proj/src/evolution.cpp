#include "shapesr/evolution.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

namespace shapesr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> v) {
    const size_t n = v.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        double mean_rank = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) return 0.0;
    std::vector<double> ra = average_ranks(a);
    std::vector<double> rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < ra.size(); ++i) {
        double da = ra[i] - ma, db = rb[i] - mb;
        cov += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va == 0.0 || vb == 0.0) return 0.0;
    return cov / std::sqrt(va * vb);
}

const std::array<const char*, kSelectionObjectives>& selection_objective_names() {
    static const std::array<const char*, kSelectionObjectives> names = {
        "mse_rel", "compl", "age", "minus_abs_spear", "constr_vios"};
    return names;
}

void compute_objectives(Individual& ind, const Dataset& data) {
    if (ind.fit.failed) {
        ind.invalid = true;
        return;
    }
    CompiledExpr ce = compile(ind.expr);
    const size_t n = data.y.size();
    std::vector<double> preds(n);
    bool finite = true;
    for (size_t i = 0; i < n; ++i) {
        preds[i] = evaluate(ce, data.row(i), ind.fit.p);
        if (!std::isfinite(preds[i])) finite = false;
    }
    double spear = finite ? spearman(preds, data.y) : 0.0;
    ind.objectives = {ind.fit.mse_rel, static_cast<double>(ind.expr.complexity()),
                      static_cast<double>(ind.age), -std::abs(spear), ind.fit.constr_vios};
    ind.invalid = !finite;
    for (double o : ind.objectives)
        if (!std::isfinite(o)) ind.invalid = true;
}

std::array<double, kHofObjectives> hof_objectives(const Individual& ind) {
    return {ind.fit.mse_rel, static_cast<double>(ind.expr.complexity()), ind.fit.mare,
            ind.fit.constr_vios};
}

// ---------------------------------------------------------------------------
// Variation
// ---------------------------------------------------------------------------

bool tree_ok(const Expression& e, const TreeLimits& limits) {
    if (e.empty()) return false;
    if (e.complexity() > limits.complexity_cap) return false;
    if (e.max_variable_index() >= limits.nvars) return false;
    if (e.param_count() > limits.max_params) return false;
    return e.pow_exponents_parameter_only();
}

namespace {

NodePtr random_subtree(Rng& rng, const FunctionSet& fns, int nvars, int depth, bool full);

NodePtr random_leaf(Rng& rng, int nvars) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (nvars > 0 && u(rng) < 0.5) {
        std::uniform_int_distribution<int> pick(0, nvars - 1);
        return make_variable(pick(rng));
    }
    return make_parameter(0, 0.0);
}

NodePtr random_operator(Rng& rng, const FunctionSet& fns, int nvars, int depth, bool full) {
    const size_t nb = fns.binary.size(), nu = fns.unary.size();
    std::uniform_int_distribution<size_t> pick(0, nb + nu - 1);
    size_t k = pick(rng);
    if (k < nb) {
        BinaryKind kind = fns.binary[k];
        NodePtr l = random_subtree(rng, fns, nvars, depth - 1, full);
        // exponent slots only ever hold parameter leaves
        NodePtr r = kind == BinaryKind::Pow ? make_parameter(0, 0.0)
                                            : random_subtree(rng, fns, nvars, depth - 1, full);
        return make_binary(kind, std::move(l), std::move(r));
    }
    return make_unary(fns.unary[k - nb], random_subtree(rng, fns, nvars, depth - 1, full));
}

NodePtr random_subtree(Rng& rng, const FunctionSet& fns, int nvars, int depth, bool full) {
    if (depth <= 0 || (fns.binary.empty() && fns.unary.empty()))
        return random_leaf(rng, nvars);
    if (!full) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        if (u(rng) < 0.3) return random_leaf(rng, nvars);
    }
    return random_operator(rng, fns, nvars, depth, full);
}

int count_nodes(const NodePtr& n) {
    if (!n) return 0;
    return 1 + count_nodes(n->left) + count_nodes(n->right);
}

// Preorder position of each node; index 0 is the root.
const NodePtr& nth_subtree(const NodePtr& n, int& idx) {
    if (idx == 0) return n;
    --idx;
    if (n->left) {
        int left_count = count_nodes(n->left);
        if (idx < left_count) return nth_subtree(n->left, idx);
        idx -= left_count;
    }
    return nth_subtree(n->right, idx);
}

NodePtr replace_nth(const NodePtr& n, int idx, const NodePtr& sub) {
    if (idx == 0) return sub;
    --idx;
    if (n->left) {
        int left_count = count_nodes(n->left);
        if (idx < left_count) {
            NodePtr new_left = replace_nth(n->left, idx, sub);
            if (n->tag == Node::Tag::Binary)
                return make_binary(n->bin, std::move(new_left), n->right);
            return make_unary(n->un, std::move(new_left));
        }
        idx -= left_count;
    }
    return make_binary(n->bin, n->left, replace_nth(n->right, idx, sub));
}

int pick_index(Rng& rng, int count) {
    std::uniform_int_distribution<int> d(0, count - 1);
    return d(rng);
}

// Indices (preorder) of nodes matching a predicate.
template <class Pred>
void collect_indices(const NodePtr& n, Pred&& pred, std::vector<int>& out, int& counter) {
    int my_index = counter++;
    if (pred(*n)) out.push_back(my_index);
    if (n->left) collect_indices(n->left, pred, out, counter);
    if (n->right) collect_indices(n->right, pred, out, counter);
}

template <class Pred>
std::vector<int> matching_indices(const NodePtr& root, Pred&& pred) {
    std::vector<int> out;
    int counter = 0;
    collect_indices(root, pred, out, counter);
    return out;
}

}  // namespace

Expression random_tree(Rng& rng, const FunctionSet& fns, int nvars, int depth, bool full) {
    return Expression{random_subtree(rng, fns, nvars, depth, full)};
}

Expression crossover(const Expression& a, const Expression& b, const TreeLimits& limits,
                     const FunctionSet& fns, Rng& rng) {
    (void)fns;
    for (int attempt = 0; attempt < 10; ++attempt) {
        int ia = pick_index(rng, count_nodes(a.root()));
        int ib = pick_index(rng, count_nodes(b.root()));
        int ib_copy = ib;
        Expression child{replace_nth(a.root(), ia, nth_subtree(b.root(), ib_copy))};
        if (tree_ok(child, limits)) return child;
    }
    return a;
}

Expression mutate(const Expression& a, const TreeLimits& limits, const FunctionSet& fns,
                  Rng& rng) {
    std::uniform_int_distribution<int> which(0, 6);
    for (int attempt = 0; attempt < 10; ++attempt) {
        const NodePtr& root = a.root();
        Expression child;
        switch (which(rng)) {
            case 0: {  // operator-kind swap
                std::vector<int> ops = matching_indices(root, [](const Node& n) {
                    return n.tag == Node::Tag::Binary || n.tag == Node::Tag::Unary;
                });
                if (ops.empty()) continue;
                int idx = ops[pick_index(rng, static_cast<int>(ops.size()))];
                int idx_copy = idx;
                const NodePtr& target = nth_subtree(root, idx_copy);
                NodePtr swapped;
                if (target->tag == Node::Tag::Binary) {
                    std::vector<BinaryKind> alt;
                    for (BinaryKind k : fns.binary)
                        if (k != target->bin) alt.push_back(k);
                    if (alt.empty()) continue;
                    BinaryKind k = alt[static_cast<size_t>(
                        pick_index(rng, static_cast<int>(alt.size())))];
                    // entering Pow demands a parameter exponent
                    NodePtr right = k == BinaryKind::Pow &&
                                            target->right->tag != Node::Tag::Parameter &&
                                            target->right->tag != Node::Tag::Constant
                                        ? make_parameter(0, 0.0)
                                        : target->right;
                    swapped = make_binary(k, target->left, std::move(right));
                } else {
                    std::vector<UnaryKind> alt;
                    for (UnaryKind k : fns.unary)
                        if (k != target->un) alt.push_back(k);
                    if (alt.empty()) continue;
                    UnaryKind k =
                        alt[static_cast<size_t>(pick_index(rng, static_cast<int>(alt.size())))];
                    swapped = make_unary(k, target->left);
                }
                child = Expression{replace_nth(root, idx, swapped)};
                break;
            }
            case 1: {  // subtree replacement
                int idx = pick_index(rng, count_nodes(root));
                std::uniform_int_distribution<int> d(1, 2);
                NodePtr fresh = random_subtree(rng, fns, limits.nvars, d(rng), false);
                child = Expression{replace_nth(root, idx, std::move(fresh))};
                break;
            }
            case 2: {  // a non-parameter leaf becomes a parameter
                std::vector<int> leaves = matching_indices(root, [](const Node& n) {
                    return n.tag == Node::Tag::Variable || n.tag == Node::Tag::Constant;
                });
                if (leaves.empty()) continue;
                int idx = leaves[pick_index(rng, static_cast<int>(leaves.size()))];
                child = Expression{replace_nth(root, idx, make_parameter(0, 0.0))};
                break;
            }
            case 3: {  // a parameter bakes into a constant
                std::vector<int> params = matching_indices(
                    root, [](const Node& n) { return n.tag == Node::Tag::Parameter; });
                if (params.empty()) continue;
                int idx = params[pick_index(rng, static_cast<int>(params.size()))];
                int idx_copy = idx;
                double v = nth_subtree(root, idx_copy)->value;
                child = Expression{replace_nth(root, idx, make_constant(v))};
                break;
            }
            case 4: {  // insert a binary node above a subtree
                if (fns.binary.empty()) continue;
                int idx = pick_index(rng, count_nodes(root));
                int idx_copy = idx;
                NodePtr sub = nth_subtree(root, idx_copy);
                BinaryKind k = fns.binary[static_cast<size_t>(
                    pick_index(rng, static_cast<int>(fns.binary.size())))];
                std::uniform_int_distribution<int> coin(0, 1);
                NodePtr leaf = coin(rng) == 0 && limits.nvars > 0
                                   ? make_variable(pick_index(rng, limits.nvars))
                                   : make_parameter(0, 0.0);
                NodePtr wrapped;
                if (k == BinaryKind::Pow)
                    wrapped = make_binary(k, std::move(sub), make_parameter(0, 0.0));
                else if (coin(rng) == 0)
                    wrapped = make_binary(k, std::move(sub), std::move(leaf));
                else
                    wrapped = make_binary(k, std::move(leaf), std::move(sub));
                child = Expression{replace_nth(root, idx, std::move(wrapped))};
                break;
            }
            case 5: {  // insert a unary node above a subtree
                if (fns.unary.empty()) continue;
                int idx = pick_index(rng, count_nodes(root));
                int idx_copy = idx;
                NodePtr sub = nth_subtree(root, idx_copy);
                UnaryKind k = fns.unary[static_cast<size_t>(
                    pick_index(rng, static_cast<int>(fns.unary.size())))];
                child = Expression{replace_nth(root, idx, make_unary(k, std::move(sub)))};
                break;
            }
            default: {  // hoist: an operator node collapses to one of its children
                std::vector<int> ops = matching_indices(root, [](const Node& n) {
                    return n.tag == Node::Tag::Binary || n.tag == Node::Tag::Unary;
                });
                if (ops.empty()) continue;
                int idx = ops[pick_index(rng, static_cast<int>(ops.size()))];
                int idx_copy = idx;
                const NodePtr& target = nth_subtree(root, idx_copy);
                std::uniform_int_distribution<int> coin(0, 1);
                NodePtr kept = target->tag == Node::Tag::Binary && coin(rng) == 1
                                   ? target->right
                                   : target->left;
                child = Expression{replace_nth(root, idx, std::move(kept))};
                break;
            }
        }
        if (!child.empty() && tree_ok(child, limits)) return child;
    }
    return a;
}

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

namespace {

bool dominates(std::span<const double> a, std::span<const double> b) {
    bool strictly = false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strictly = true;
    }
    return strictly;
}

}  // namespace

std::vector<std::vector<int>> fast_non_dominated_sort(
    const std::vector<std::array<double, kSelectionObjectives>>& objs) {
    const int n = static_cast<int>(objs.size());
    std::vector<std::vector<int>> dominated_by(n);
    std::vector<int> domination_count(n, 0);
    std::vector<std::vector<int>> fronts(1);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            if (dominates(objs[i], objs[j]))
                dominated_by[i].push_back(j);
            else if (dominates(objs[j], objs[i]))
                ++domination_count[i];
        }
        if (domination_count[i] == 0) fronts[0].push_back(i);
    }
    size_t f = 0;
    while (!fronts[f].empty()) {
        std::vector<int> next;
        for (int i : fronts[f]) {
            for (int j : dominated_by[i]) {
                if (--domination_count[j] == 0) next.push_back(j);
            }
        }
        ++f;
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<double> crowding_distance(
    const std::vector<std::array<double, kSelectionObjectives>>& objs,
    const std::vector<int>& front) {
    const size_t n = front.size();
    std::vector<double> dist(n, 0.0);
    if (n <= 2) {
        std::fill(dist.begin(), dist.end(), kInf);
        return dist;
    }
    std::vector<size_t> order(n);
    for (int m = 0; m < kSelectionObjectives; ++m) {
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return objs[static_cast<size_t>(front[a])][static_cast<size_t>(m)] <
                   objs[static_cast<size_t>(front[b])][static_cast<size_t>(m)];
        });
        double lo = objs[static_cast<size_t>(front[order.front()])][static_cast<size_t>(m)];
        double hi = objs[static_cast<size_t>(front[order.back()])][static_cast<size_t>(m)];
        dist[order.front()] = kInf;
        dist[order.back()] = kInf;
        if (hi == lo) continue;
        for (size_t k = 1; k + 1 < n; ++k) {
            double below = objs[static_cast<size_t>(front[order[k - 1]])][static_cast<size_t>(m)];
            double above = objs[static_cast<size_t>(front[order[k + 1]])][static_cast<size_t>(m)];
            dist[order[k]] += (above - below) / (hi - lo);
        }
    }
    return dist;
}

std::vector<Individual> select(std::vector<Individual> pool, int pop_size,
                               double fitness_fraction) {
    std::erase_if(pool, [](const Individual& i) { return i.invalid; });
    std::vector<Individual> survivors;
    if (static_cast<int>(pool.size()) <= pop_size) {
        survivors = std::move(pool);
    } else {
        std::vector<std::array<double, kSelectionObjectives>> objs;
        objs.reserve(pool.size());
        for (const Individual& ind : pool) objs.push_back(ind.objectives);

        const int fitness_slots =
            std::clamp(static_cast<int>(std::llround(fitness_fraction * pop_size)), 0, pop_size);
        const int pareto_slots = pop_size - fitness_slots;

        std::vector<char> taken(pool.size(), 0);
        std::vector<int> chosen;
        chosen.reserve(static_cast<size_t>(pop_size));

        auto fronts = fast_non_dominated_sort(objs);
        for (const auto& front : fronts) {
            if (static_cast<int>(chosen.size()) >= pareto_slots) break;
            int room = pareto_slots - static_cast<int>(chosen.size());
            if (static_cast<int>(front.size()) <= room) {
                for (int i : front) chosen.push_back(i);
            } else {
                std::vector<double> crowd = crowding_distance(objs, front);
                std::vector<size_t> order(front.size());
                std::iota(order.begin(), order.end(), size_t{0});
                std::stable_sort(order.begin(), order.end(),
                                 [&](size_t a, size_t b) { return crowd[a] > crowd[b]; });
                for (int k = 0; k < room; ++k)
                    chosen.push_back(front[order[static_cast<size_t>(k)]]);
            }
        }
        for (int i : chosen) taken[static_cast<size_t>(i)] = 1;

        if (fitness_slots > 0) {
            std::vector<int> remaining;
            for (size_t i = 0; i < pool.size(); ++i)
                if (!taken[i]) remaining.push_back(static_cast<int>(i));
            // aggregated fitness: sum of per-objective average ranks, small is good
            std::vector<double> ranksum(remaining.size(), 0.0);
            for (int m = 0; m < kSelectionObjectives; ++m) {
                std::vector<double> col(remaining.size());
                for (size_t k = 0; k < remaining.size(); ++k)
                    col[k] = objs[static_cast<size_t>(remaining[k])][static_cast<size_t>(m)];
                std::vector<double> r = average_ranks(col);
                for (size_t k = 0; k < remaining.size(); ++k) ranksum[k] += r[k];
            }
            std::vector<size_t> order(remaining.size());
            std::iota(order.begin(), order.end(), size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](size_t a, size_t b) { return ranksum[a] < ranksum[b]; });
            int take = std::min<int>(fitness_slots, static_cast<int>(remaining.size()));
            for (int k = 0; k < take; ++k)
                chosen.push_back(remaining[order[static_cast<size_t>(k)]]);
        }

        survivors.reserve(chosen.size());
        for (int i : chosen) survivors.push_back(std::move(pool[static_cast<size_t>(i)]));
    }
    for (Individual& ind : survivors) ++ind.age;
    return survivors;
}

// ---------------------------------------------------------------------------
// Hall of fame
// ---------------------------------------------------------------------------

namespace {

std::string archive_key(const Individual& ind) {
    std::string key = structure_key(ind.expr);
    char buf[32];
    for (double v : ind.fit.p) {
        std::snprintf(buf, sizeof buf, "|%.17g", v);
        key += buf;
    }
    return key;
}

}  // namespace

void update_hof(HallOfFame& hof, const std::vector<Individual>& candidates) {
    std::vector<Individual> merged = hof.archive;
    std::vector<std::string> keys;
    keys.reserve(merged.size());
    for (const Individual& ind : merged) keys.push_back(archive_key(ind));
    for (const Individual& ind : candidates) {
        if (ind.invalid) continue;
        std::string key = archive_key(ind);
        if (std::find(keys.begin(), keys.end(), key) != keys.end()) continue;
        keys.push_back(std::move(key));
        merged.push_back(ind);
    }
    std::vector<std::array<double, kHofObjectives>> objs;
    objs.reserve(merged.size());
    for (const Individual& ind : merged) objs.push_back(hof_objectives(ind));
    std::vector<Individual> kept;
    for (size_t i = 0; i < merged.size(); ++i) {
        bool dominated = false;
        for (size_t j = 0; j < merged.size() && !dominated; ++j)
            if (j != i && dominates(objs[j], objs[i])) dominated = true;
        if (!dominated) kept.push_back(std::move(merged[i]));
    }
    hof.archive = std::move(kept);
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

Engine::Engine(EvolutionConfig cfg, const Dataset* data, const ConstraintSet* constraints,
               const EvalPoints* points, uint64_t seed)
    : cfg_(std::move(cfg)),
      data_(data),
      constraints_(constraints),
      points_(points),
      seed_(seed),
      rng_(make_rng({seed, 0xb4eed})) {
    if (data_ == nullptr) throw std::invalid_argument("engine needs a dataset");
    if (cfg_.limits.nvars == 0) cfg_.limits.nvars = data_->nvars;
}

Individual Engine::fit_individual(const Expression& e, uint64_t stream_index) {
    auto [expr, seeds] = finalize_parameters(e);
    Rng rng = make_rng({seed_, static_cast<uint64_t>(generation_), stream_index, 0x51ee'd5});
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& s : seeds)
        if (s == 0.0) s = normal(rng);

    CompiledExpr ce = compile(expr);
    FitProblem fp;
    fp.expr = &ce;
    fp.data = data_;
    fp.constraints = constraints_;
    fp.points = points_;
    fp.rho = cfg_.rho;
    fp.lambda = cfg_.lambda;

    Individual ind;
    ind.fit = staged_fit(cfg_.variant, fp, cfg_.noise_level, seeds, cfg_.fit_options);
    Expression kept = expr;
    if (cfg_.drastic_simplify_threshold > 0.0 && !ind.fit.failed && !ind.fit.p.empty()) {
        auto [simplified, sp] = drastic_simplify(kept, ind.fit.p,
                                                 cfg_.drastic_simplify_threshold);
        if (structure_key(simplified) != structure_key(kept)) {
            kept = std::move(simplified);
            ind.fit.p = std::move(sp);
            // rounding moved the parameters (by at most the threshold), so the
            // reported errors are refreshed on the tree actually kept
            ind.fit.mse_rel = loss(kept, ind.fit.p, *data_, LossKind::SquaredRel);
            ind.fit.mare = loss(kept, ind.fit.p, *data_, LossKind::AbsRel);
        }
    }
    ind.expr = ind.fit.p.empty() ? kept : stamp_parameters(kept, ind.fit.p);
    ind.age = 0;
    compute_objectives(ind, *data_);
    return ind;
}

void Engine::init() {
    pop_.clear();
    generation_ = 0;
    hof_ = HallOfFame{};
    for (int i = 0; i < cfg_.pop_size; ++i) {
        for (uint64_t attempt = 0;; ++attempt) {
            Rng rng = make_rng({seed_, 0xc0ffee, static_cast<uint64_t>(i), attempt});
            int depth = 1 + i % 4;
            bool full = (i / 4) % 2 == 0;
            Expression tree = random_tree(rng, cfg_.fns, cfg_.limits.nvars, depth, full);
            if (!tree_ok(tree, cfg_.limits)) continue;
            Individual ind = fit_individual(tree, static_cast<uint64_t>(i) << 16 | attempt);
            if (ind.invalid) continue;
            pop_.push_back(std::move(ind));
            break;
        }
    }
    update_hof(hof_, pop_);
}

void Engine::step() {
    if (pop_.empty()) throw std::logic_error("step() before init()");
    ++generation_;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<size_t> pick(0, pop_.size() - 1);

    // Binary tournament on (front rank, crowding distance) over the parents.
    std::vector<std::array<double, kSelectionObjectives>> objs;
    objs.reserve(pop_.size());
    for (const Individual& ind : pop_) objs.push_back(ind.objectives);
    auto fronts = fast_non_dominated_sort(objs);
    std::vector<int> rank(pop_.size(), 0);
    std::vector<double> crowd(pop_.size(), 0.0);
    for (size_t f = 0; f < fronts.size(); ++f) {
        std::vector<double> cd = crowding_distance(objs, fronts[f]);
        for (size_t k = 0; k < fronts[f].size(); ++k) {
            rank[fronts[f][k]] = static_cast<int>(f);
            crowd[fronts[f][k]] = cd[k];
        }
    }
    auto tournament = [&]() -> const Expression& {
        size_t i = pick(rng_), j = pick(rng_);
        if (rank[j] < rank[i] || (rank[j] == rank[i] && crowd[j] > crowd[i])) i = j;
        return pop_[i].expr;
    };

    std::vector<Individual> offspring;
    offspring.reserve(static_cast<size_t>(cfg_.pop_size));
    std::uniform_int_distribution<int> depth(1, 3);
    for (int i = 0; i < cfg_.pop_size; ++i) {
        Expression child;
        double roll = u(rng_);
        if (roll < cfg_.immigrant_prob) {  // fresh blood against basin lock-in
            child = random_tree(rng_, cfg_.fns, cfg_.limits.nvars, depth(rng_), false);
        } else if (roll < cfg_.immigrant_prob + cfg_.crossover_prob) {
            const Expression& a = tournament();
            const Expression& b = tournament();
            child = crossover(a, b, cfg_.limits, cfg_.fns, rng_);
        } else {
            child = mutate(tournament(), cfg_.limits, cfg_.fns, rng_);
            while (u(rng_) < 0.4)  // occasionally stack further edits
                child = mutate(child, cfg_.limits, cfg_.fns, rng_);
        }
        offspring.push_back(fit_individual(child, static_cast<uint64_t>(i)));
    }
    update_hof(hof_, offspring);

    std::vector<Individual> pool = std::move(pop_);
    for (Individual& parent : pool)
        parent.objectives[2] = static_cast<double>(parent.age);  // age moved since scoring
    pool.insert(pool.end(), std::make_move_iterator(offspring.begin()),
                std::make_move_iterator(offspring.end()));
    pop_ = select(std::move(pool), cfg_.pop_size, cfg_.fitness_fraction);
}

GenerationStats Engine::stats() const {
    GenerationStats s;
    s.generation = generation_;
    s.hof_size = hof_.archive.size();
    s.best_mse_rel = kInf;
    s.best_mare = kInf;
    s.vio_min = kInf;
    s.vio_max = -kInf;
    double vio_sum = 0.0;
    size_t counted = 0;
    for (const Individual& ind : pop_) {
        if (ind.invalid) continue;
        s.best_mse_rel = std::min(s.best_mse_rel, ind.fit.mse_rel);
        s.best_mare = std::min(s.best_mare, ind.fit.mare);
        s.vio_min = std::min(s.vio_min, ind.fit.constr_vios);
        s.vio_max = std::max(s.vio_max, ind.fit.constr_vios);
        vio_sum += ind.fit.constr_vios;
        ++counted;
    }
    if (counted == 0) {
        s.best_mse_rel = s.best_mare = s.vio_min = s.vio_max = s.vio_mean = 0.0;
    } else {
        s.vio_mean = vio_sum / static_cast<double>(counted);
    }
    return s;
}

std::string Engine::progress_json() const {
    GenerationStats s = stats();
    nlohmann::json j{{"generation", s.generation},    {"best_mse_rel", s.best_mse_rel},
                     {"best_mare", s.best_mare},      {"hof_size", s.hof_size},
                     {"vio_min", s.vio_min},          {"vio_mean", s.vio_mean},
                     {"vio_max", s.vio_max}};
    return j.dump();
}

void Engine::inject(Individual ind) {
    update_hof(hof_, {ind});
    if (static_cast<int>(pop_.size()) < cfg_.pop_size) {
        pop_.push_back(std::move(ind));
        return;
    }
    std::uniform_int_distribution<size_t> pick(0, pop_.size() - 1);
    pop_[pick(rng_)] = std::move(ind);
}

}  // namespace shapesr
