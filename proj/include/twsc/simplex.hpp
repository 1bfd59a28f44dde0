#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "twsc/rational.hpp"

namespace twsc {

enum class LpRelation { le, eq, ge };
enum class LpStatus { optimal, infeasible, unbounded };
enum class LpMode { rational, floating };

struct LpColumn {
    std::string name;
    bool nonnegative = true;  // false = free variable
};

struct LpRow {
    std::vector<std::pair<int, Rat>> coeffs;  // sparse (column, coefficient)
    LpRelation rel = LpRelation::eq;
    Rat rhs;
};

// Always a minimization problem.
struct LinearProgram {
    std::vector<LpColumn> columns;
    std::vector<LpRow> rows;
    std::vector<std::pair<int, Rat>> objective;
};

struct LpOutcome {
    LpStatus status = LpStatus::optimal;
    LpMode mode = LpMode::rational;
    std::vector<Rat> values;  // per column, rational mode
    Rat objective;
    std::vector<double> fvalues;  // per column, float mode
    double fobjective = 0.0;
};

// Two-phase primal simplex on a dense tableau. Rational mode pivots by
// Bland's rule (guaranteed termination); float mode prices by most-negative
// reduced cost with a 1e-9 pivot tolerance and falls back to Bland's rule
// when the objective stalls. Deterministic for a fixed (lp, mode).
//
// warm_start, when given, must be a feasible point for the LP (checked
// exactly); the returned optimum is verified to be no worse than its
// objective value.
LpOutcome lp_solve(const LinearProgram& lp, LpMode mode,
                   const std::optional<std::vector<Rat>>& warm_start = std::nullopt);

struct ResidualReport {
    Rat max_row_residual;          // rational mode: exact
    Rat max_bound_violation;       // rational mode: exact
    double fmax_row_residual = 0.0;     // float mode
    double fmax_bound_violation = 0.0;  // float mode
    std::optional<double> duality_gap;  // float mode only, via an independently solved dual
};

ResidualReport check_solution(const LinearProgram& lp, const LpOutcome& outcome);

// One row per line: relation, rhs, then sparse "col:coeff" pairs; objective
// and column declarations in a header. For debugging and interop.
std::string dump_lp(const LinearProgram& lp);

}  // namespace twsc
