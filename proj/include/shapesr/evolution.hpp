#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shapesr/constraints.hpp"
#include "shapesr/datasets.hpp"
#include "shapesr/exprtree.hpp"
#include "shapesr/fitting.hpp"
#include "shapesr/rng.hpp"

namespace shapesr {

// ---------------------------------------------------------------------------
// Individuals and their objective vectors
// ---------------------------------------------------------------------------

// Selection minimizes all five; the hall of fame minimizes the four returned
// by hof_objectives.
inline constexpr int kSelectionObjectives = 5;
inline constexpr int kHofObjectives = 4;

struct Individual {
    Expression expr;
    FitResult fit;
    int age = 0;
    // {mse_rel, compl, age, minus_abs_spear, constr_vios}
    std::array<double, kSelectionObjectives> objectives{};
    bool invalid = false;
};

const std::array<const char*, kSelectionObjectives>& selection_objective_names();

// Fills ind.objectives from the fit result, the tree, the age counter, and a
// fresh prediction pass over `data` (for the Spearman term). Marks the
// individual invalid when any prediction or objective is non-finite.
void compute_objectives(Individual& ind, const Dataset& data);

// {mse_rel, compl, mare, constr_vios}
std::array<double, kHofObjectives> hof_objectives(const Individual& ind);

// Spearman rank correlation with average ranks for ties; 0 when either side
// is constant (degenerate ranks score as "no detectable relation").
double spearman(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Variation
// ---------------------------------------------------------------------------

// Structural limits a candidate tree must satisfy to enter the population.
struct TreeLimits {
    int complexity_cap = 0;
    int nvars = 0;
    int max_params = 16;  // derivative channels are capped at 16 parameters
};

bool tree_ok(const Expression& e, const TreeLimits& limits);

// Random tree of exactly (`full`) or at most (`grow`) the given depth, drawn
// from the function set. `pow` exponents are always fresh parameter leaves.
Expression random_tree(Rng& rng, const FunctionSet& fns, int nvars, int depth, bool full);

// Subtree exchange: a random subtree of `a` is replaced by a random subtree
// of `b`. Retries up to 10 times when the child breaks the limits, then
// returns `a` unchanged.
Expression crossover(const Expression& a, const Expression& b, const TreeLimits& limits,
                     const FunctionSet& fns, Rng& rng);

// One of: operator-kind swap, subtree replacement, parameter insert (a leaf
// becomes a parameter) or parameter delete (a parameter becomes its value
// baked in as a constant). Same retry/fallback contract as crossover.
Expression mutate(const Expression& a, const TreeLimits& limits, const FunctionSet& fns,
                  Rng& rng);

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

// Fronts of indices into `objs`, best (non-dominated) first. Minimization on
// every component.
std::vector<std::vector<int>> fast_non_dominated_sort(
    const std::vector<std::array<double, kSelectionObjectives>>& objs);

// Crowding distance per member of one front (boundary members get +inf).
std::vector<double> crowding_distance(
    const std::vector<std::array<double, kSelectionObjectives>>& objs,
    const std::vector<int>& front);

// NSGA-II-style survivor selection over parents + offspring: invalid members
// are dropped, (1 - fitness_fraction) of the slots fill by front rank with a
// crowding tie-break at the cut, the rest go to the best rank-sum aggregated
// fitness among the remaining candidates. Every survivor's age increments.
std::vector<Individual> select(std::vector<Individual> pool, int pop_size,
                               double fitness_fraction);

// ---------------------------------------------------------------------------
// Hall of fame
// ---------------------------------------------------------------------------

struct HallOfFame {
    std::vector<Individual> archive;
};

// Inserts valid candidates, collapses exact duplicates (identical rendered
// expression including parameter values), and removes every member dominated
// under hof_objectives. The archive is unbounded.
void update_hof(HallOfFame& hof, const std::vector<Individual>& candidates);

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

struct EvolutionConfig {
    int pop_size = 500;
    FitVariant variant = FitVariant::Base;
    double noise_level = 0.0;  // feeds the staged-fit gate
    TreeLimits limits;
    FunctionSet fns;
    double fitness_fraction = 0.2;  // share of slots filled by rank-sum fitness
    double crossover_prob = 0.5;    // otherwise the offspring comes from mutation
    double immigrant_prob = 0.05;   // share of offspring drawn as fresh random trees
    double rho = 1.0;
    double lambda = 1e-6;
    FitOptions fit_options;
    // fitted parameters this close to 0 or 1 are rounded away and the tree is
    // simplified accordingly; 0 disables
    double drastic_simplify_threshold = 1e-7;
};

struct GenerationStats {
    int generation = 0;
    double best_mse_rel = 0.0;
    double best_mare = 0.0;
    size_t hof_size = 0;
    double vio_min = 0.0;
    double vio_mean = 0.0;
    double vio_max = 0.0;
};

class Engine {
public:
    // `constraints`/`points` may be null for the base variant or when the
    // problem ships no constraint set; `data` must outlive the engine.
    Engine(EvolutionConfig cfg, const Dataset* data, const ConstraintSet* constraints,
           const EvalPoints* points, uint64_t seed);

    // Builds and fits the initial population (generation 0).
    void init();

    // One generation: breed pop_size offspring, fit and score them, select
    // survivors from parents + offspring, refresh the hall of fame.
    void step();

    const std::vector<Individual>& population() const { return pop_; }
    int generation() const { return generation_; }
    const HallOfFame& hof() const { return hof_; }

    GenerationStats stats() const;
    // One JSON-lines progress record for the current generation.
    std::string progress_json() const;

    // Fits a bare expression the same way offspring are fitted (exposed for
    // seeding experiments and verification refits).
    Individual fit_individual(const Expression& e, uint64_t stream_index);

    // Plants an already-built individual into the population (displacing a
    // random member when full).
    void inject(Individual ind);

private:
    EvolutionConfig cfg_;
    const Dataset* data_;
    const ConstraintSet* constraints_;
    const EvalPoints* points_;
    uint64_t seed_;
    int generation_ = 0;
    std::vector<Individual> pop_;
    HallOfFame hof_;
    Rng rng_;  // breeding stream
};

}  // namespace shapesr
