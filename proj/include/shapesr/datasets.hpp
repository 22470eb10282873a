#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapesr/exprtree.hpp"

namespace shapesr {

enum class ProblemId { Gaussian, MagMan, VanDerWaals };

const char* name(ProblemId id);
ProblemId problem_from_name(std::string_view s);  // throws std::invalid_argument

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct DatasetMeta {
    std::string problem;
    std::string variant;  // "fit" | "verify"
    uint64_t seed = 0;
    double noise_level = 0.0;
    int keep = -1;  // -1: no reduction applied
};

struct Dataset {
    int nvars = 0;
    std::vector<std::string> var_names;
    std::vector<double> X;  // row-major, rows() x nvars
    std::vector<double> y;
    std::vector<double> w;               // fit weights 1/y_i
    std::vector<std::string> row_tags;   // per-row segment tag; "" when untagged
    DatasetMeta meta;

    int rows() const { return static_cast<int>(y.size()); }
    std::span<const double> row(int i) const {
        return {X.data() + static_cast<size_t>(i) * static_cast<size_t>(nvars),
                static_cast<size_t>(nvars)};
    }
};

enum class VdwPhase { Gas, Liquid, Supercritical };

struct VdwGrid {
    VdwPhase phase;
    Range T;
    Range p;
    int nT = 0;
    int np = 0;
    std::string tag;
};

struct ProblemSpec {
    ProblemId id;
    std::string name;
    Expression ground_truth;          // parameters dense 0..k-1
    std::vector<double> true_params;
    std::vector<std::string> var_names;
    std::vector<Range> fit_ranges;    // per variable (random-sampled problems)
    std::vector<Range> verify_ranges;
    int fit_count = 0;
    int verify_count = 0;
    std::vector<VdwGrid> fit_grids;   // grid-sampled problems only
    std::vector<VdwGrid> verify_grids;
    FunctionSet function_set;
    int complexity_cap = 0;           // ground-truth complexity + 5
    std::string constraint_set;       // key into the constraint registry
};

const ProblemSpec& problem(ProblemId id);

// Physical constants of the pressure benchmark (methanol).
inline constexpr double kGasConstant = 8.314462618;
inline constexpr double kVdwA = 0.9649;
inline constexpr double kVdwB = 6.702e-5;

// Phase-transition states: (T, v_boiling, v_dew) per isotherm with the
// saturation pressure offsets used by the equal-area constraint.
struct VdwTransition {
    double T;
    double v_boiling;
    double v_dew;
    double p_sat;
};
inline constexpr VdwTransition kVdwTransitions[2] = {
    {300.0, 8.609384005897035e-5, 0.003847602071128293, 594598.2419252641},
    {400.0, 1.0159726806190158e-4, 9.466121805725504e-4, 2.7042458049626728e6},
};

enum class WhichSet { Fit, Verify };

Dataset generate(const ProblemSpec& spec, WhichSet which, uint64_t seed);

// Solves p*v^3 - (p*b + R*T)*v^2 + a*v - a*b = 0 for the phase's admissible
// molar volume; throws std::runtime_error naming (T, p) when none exists.
double vdw_solve_v(double T, double p, VdwPhase phase, double a = kVdwA, double b = kVdwB);

// t_i -> t_i * (1 + N(0,1)*level); rows tagged "transition" stay exact.
Dataset apply_noise(const Dataset& d, double level, uint64_t seed);

// Keeps the `keep` rows farthest from the normalized data center.
Dataset reduce_data(const Dataset& d, int keep);

// Pressure-benchmark reduction: liquid-phase grid rows plus transition rows.
Dataset keep_liquid_and_transition(const Dataset& d);

void save_csv(const Dataset& d, const std::string& csv_path, const std::string& meta_path);
Dataset load_csv(const std::string& csv_path, const std::string& meta_path);

}  // namespace shapesr
