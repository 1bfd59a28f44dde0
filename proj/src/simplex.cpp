#include "twsc/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <type_traits>

namespace twsc {

namespace {

template <typename Num>
constexpr bool kFloatMode = std::is_floating_point_v<Num>;

template <typename Num>
Num from_rat(const Rat& r) {
    if constexpr (kFloatMode<Num>)
        return to_double(r);
    else
        return r;
}

// The LP in computational form: minimize c·x s.t. Ax = b (b >= 0), x >= 0,
// with an identity of artificial columns appended for the Phase-1 start.
template <typename Num>
struct Standardized {
    int n_real = 0;   // structural + slack columns
    int n_total = 0;  // + one artificial per row
    std::vector<std::vector<Num>> A;  // m rows, n_total + 1 wide (last = rhs)
    std::vector<Num> cost;            // structural objective, size n_real
    // original column -> (positive part, negative part or -1 when nonnegative)
    std::vector<std::pair<int, int>> colmap;
};

template <typename Num>
Standardized<Num> standardize(const LinearProgram& lp) {
    Standardized<Num> s;
    s.colmap.reserve(lp.columns.size());
    for (const auto& col : lp.columns) {
        int pos = s.n_real++;
        int neg = col.nonnegative ? -1 : s.n_real++;
        s.colmap.emplace_back(pos, neg);
    }
    const int first_slack = s.n_real;
    for (const auto& row : lp.rows)
        if (row.rel != LpRelation::eq) ++s.n_real;

    const int m = static_cast<int>(lp.rows.size());
    s.n_total = s.n_real + m;
    s.A.assign(m, std::vector<Num>(s.n_total + 1, Num(0)));
    int slack = first_slack;
    for (int i = 0; i < m; ++i) {
        const auto& row = lp.rows[i];
        auto& out = s.A[i];
        for (const auto& [j, coeff] : row.coeffs) {
            if (j < 0 || j >= static_cast<int>(lp.columns.size()))
                throw ValidationError("lp row references undeclared column " + std::to_string(j));
            Num c = from_rat<Num>(coeff);
            out[s.colmap[j].first] += c;
            if (s.colmap[j].second >= 0) out[s.colmap[j].second] -= c;
        }
        if (row.rel == LpRelation::le) out[slack++] = Num(1);
        if (row.rel == LpRelation::ge) out[slack++] = Num(-1);
        out[s.n_total] = from_rat<Num>(row.rhs);
        if (out[s.n_total] < 0)
            for (auto& v : out) v = -v;
        out[s.n_real + i] = Num(1);  // artificial
    }
    s.cost.assign(s.n_real, Num(0));
    for (const auto& [j, coeff] : lp.objective) {
        if (j < 0 || j >= static_cast<int>(lp.columns.size()))
            throw ValidationError("lp objective references undeclared column " + std::to_string(j));
        Num c = from_rat<Num>(coeff);
        s.cost[s.colmap[j].first] += c;
        if (s.colmap[j].second >= 0) s.cost[s.colmap[j].second] -= c;
    }
    return s;
}

template <typename Num>
struct Tableau {
    std::vector<std::vector<Num>>& A;  // rows in basis-reduced form
    std::vector<int> basis;            // basic column per row
    std::vector<Num> red;              // reduced costs, size n_total
    Num objective = Num(0);            // current objective (to be minimized)
    int n_total;
    int rhs_col;

    void pivot(int leave_row, int enter_col) {
        auto& prow = A[leave_row];
        const Num p = prow[enter_col];
        for (auto& v : prow) v /= p;
        prow[enter_col] = Num(1);  // cancel round-off in float mode
        for (std::size_t i = 0; i < A.size(); ++i) {
            if (static_cast<int>(i) == leave_row) continue;
            Num f = A[i][enter_col];
            if (f == 0) continue;
            auto& row = A[i];
            for (int j = 0; j <= rhs_col; ++j)
                if (prow[j] != 0) row[j] -= f * prow[j];
            row[enter_col] = Num(0);
        }
        Num f = red[enter_col];
        if (f != 0) {
            for (int j = 0; j < n_total; ++j)
                if (prow[j] != 0) red[j] -= f * prow[j];
            red[enter_col] = Num(0);
            objective += f * prow[rhs_col];  // red row carries -z; track separately
        }
        basis[leave_row] = enter_col;
    }
};

// Runs the simplex loop to optimality on the current (feasible) tableau.
// allowed[j] == 0 bars a column from entering. Returns false on unbounded.
template <typename Num>
bool optimize(Tableau<Num>& t, const std::vector<char>& allowed) {
    const double tol = 1e-9;
    const Num zero_cut = kFloatMode<Num> ? Num(-tol) : Num(0);
    long long iterations = 0;
    long long stalled = 0;
    Num last_obj = t.objective;
    // Most-negative pricing by default; Bland's anti-cycling rule takes over
    // permanently once the objective stalls under degeneracy.
    bool bland = false;
    while (true) {
        if (++iterations > 2'000'000) throw IntegrityError("simplex: iteration limit exceeded");
        int enter = -1;
        if (bland) {
            for (int j = 0; j < t.n_total; ++j)
                if (allowed[j] && t.red[j] < zero_cut) {
                    enter = j;
                    break;
                }
        } else {
            const Num* best = &zero_cut;
            for (int j = 0; j < t.n_total; ++j)
                if (allowed[j] && t.red[j] < *best) {
                    best = &t.red[j];
                    enter = j;
                }
        }
        if (enter < 0) return true;  // optimal

        int leave = -1;
        Num best_ratio = Num(0);
        for (std::size_t i = 0; i < t.A.size(); ++i) {
            const Num& a = t.A[i][enter];
            if (!(a > (kFloatMode<Num> ? Num(tol) : Num(0)))) continue;
            Num ratio = t.A[i][t.rhs_col] / a;
            if (leave < 0 || ratio < best_ratio ||
                (ratio == best_ratio && t.basis[i] < t.basis[leave]))
                leave = static_cast<int>(i), best_ratio = ratio;
        }
        if (leave < 0) return false;  // unbounded

        t.pivot(leave, enter);
        if constexpr (kFloatMode<Num>) {
            if (!std::isfinite(t.objective)) throw IntegrityError("simplex: non-finite objective in float mode");
        }
        const bool improved = kFloatMode<Num> ? t.objective < last_obj - Num(tol) : t.objective < last_obj;
        if (improved) {
            stalled = 0;
            last_obj = t.objective;
        } else if (++stalled > 64) {
            bland = true;
        }
    }
}

template <typename Num>
struct CoreResult {
    LpStatus status = LpStatus::optimal;
    std::vector<Num> values;  // per original lp column
    Num objective = Num(0);
};

template <typename Num>
CoreResult<Num> solve_core(const LinearProgram& lp) {
    auto s = standardize<Num>(lp);
    const int m = static_cast<int>(lp.rows.size());
    Tableau<Num> t{s.A, {}, {}, Num(0), s.n_total, s.n_total};
    t.basis.resize(m);
    for (int i = 0; i < m; ++i) t.basis[i] = s.n_real + i;

    // Phase 1: minimize the artificial sum; reduced costs of the identity
    // start are -(column sums over rows).
    t.red.assign(s.n_total, Num(0));
    for (int j = 0; j < s.n_real; ++j)
        for (int i = 0; i < m; ++i) t.red[j] -= s.A[i][j];
    for (int i = 0; i < m; ++i) t.objective += s.A[i][s.n_total];

    // Crash: a row with zero rhs can drop its artificial by one degenerate
    // pivot without disturbing feasibility elsewhere. Highly degenerate
    // equality systems would otherwise grind through thousands of Phase-1
    // pivots. Unit pivots are preferred to limit fill and fraction growth.
    std::vector<char> is_basic(s.n_total, 0);
    for (int i = 0; i < m; ++i) is_basic[t.basis[i]] = 1;
    for (int i = 0; i < m; ++i) {
        if (t.basis[i] < s.n_real) continue;
        if (s.A[i][s.n_total] != 0) continue;
        int pick = -1;
        for (int j = 0; j < s.n_real && pick < 0; ++j)
            if (!is_basic[j] && (s.A[i][j] == Num(1) || s.A[i][j] == Num(-1))) pick = j;
        for (int j = 0; j < s.n_real && pick < 0; ++j)
            if (!is_basic[j] && s.A[i][j] != 0) {
                if constexpr (kFloatMode<Num>) {
                    if (std::abs(s.A[i][j]) < 1e-7) continue;
                }
                pick = j;
            }
        if (pick < 0) continue;  // redundant row; its artificial stays at 0
        is_basic[t.basis[i]] = 0;
        t.pivot(i, pick);
        is_basic[pick] = 1;
    }

    std::vector<char> allowed(s.n_total, 1);
    if (!optimize(t, allowed))
        throw IntegrityError("simplex: phase 1 cannot be unbounded");
    bool feasible;
    if constexpr (kFloatMode<Num>)
        feasible = static_cast<double>(t.objective) < 1e-7;
    else
        feasible = t.objective == 0;
    CoreResult<Num> result;
    if (!feasible) {
        result.status = LpStatus::infeasible;
        return result;
    }

    // Phase 2: artificials barred, real objective.
    for (int i = 0; i < m; ++i) allowed[s.n_real + i] = 0;
    t.red.assign(s.n_total, Num(0));
    t.objective = Num(0);
    for (int j = 0; j < s.n_real; ++j) t.red[j] = s.cost[j];
    for (int i = 0; i < m; ++i) {
        const int bj = t.basis[i];
        const Num cb = bj < s.n_real ? s.cost[bj] : Num(0);
        if (cb == 0) continue;
        for (int j = 0; j < s.n_total; ++j) t.red[j] -= cb * s.A[i][j];
        t.objective += cb * s.A[i][s.n_total];
    }
    for (int i = 0; i < m; ++i) t.red[s.n_real + i] = Num(0);
    if (!optimize(t, allowed)) {
        result.status = LpStatus::unbounded;
        return result;
    }

    std::vector<Num> std_values(s.n_total, Num(0));
    for (int i = 0; i < m; ++i) std_values[t.basis[i]] = s.A[i][s.n_total];
    result.values.reserve(lp.columns.size());
    for (const auto& [pos, neg] : s.colmap)
        result.values.push_back(neg < 0 ? std_values[pos] : std_values[pos] - std_values[neg]);
    result.objective = t.objective;
    return result;
}

Rat row_value(const LpRow& row, const std::vector<Rat>& x) {
    Rat acc;
    for (const auto& [j, coeff] : row.coeffs) acc += coeff * x[j];
    return acc;
}

Rat objective_value(const LinearProgram& lp, const std::vector<Rat>& x) {
    Rat acc;
    for (const auto& [j, coeff] : lp.objective) acc += coeff * x[j];
    return acc;
}

bool point_feasible(const LinearProgram& lp, const std::vector<Rat>& x) {
    if (x.size() != lp.columns.size()) return false;
    for (std::size_t j = 0; j < x.size(); ++j)
        if (lp.columns[j].nonnegative && x[j] < 0) return false;
    for (const auto& row : lp.rows) {
        Rat lhs = row_value(row, x);
        if (row.rel == LpRelation::eq && lhs != row.rhs) return false;
        if (row.rel == LpRelation::le && lhs > row.rhs) return false;
        if (row.rel == LpRelation::ge && lhs < row.rhs) return false;
    }
    return true;
}

// The LP dual, for the independent duality-gap check in float mode.
LinearProgram dual_of(const LinearProgram& lp) {
    LinearProgram dual;
    dual.columns.resize(lp.rows.size());
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        dual.columns[i].name = "y" + std::to_string(i);
        dual.columns[i].nonnegative = lp.rows[i].rel != LpRelation::eq;
    }
    // Sign convention: dual variables of <= rows are negated so every
    // inequality row gets a nonnegative dual column.
    std::vector<Rat> cost(lp.columns.size());
    for (const auto& [j, c] : lp.objective) cost[j] += c;
    std::vector<LpRow> rows(lp.columns.size());
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const Rat sign = lp.rows[i].rel == LpRelation::le ? Rat(-1) : Rat(1);
        for (const auto& [j, c] : lp.rows[i].coeffs)
            if (c != 0) rows[j].coeffs.emplace_back(static_cast<int>(i), sign * c);
        if (lp.rows[i].rhs != 0) dual.objective.emplace_back(static_cast<int>(i), -sign * lp.rows[i].rhs);
    }
    for (std::size_t j = 0; j < lp.columns.size(); ++j) {
        rows[j].rel = lp.columns[j].nonnegative ? LpRelation::le : LpRelation::eq;
        rows[j].rhs = cost[j];
        dual.rows.push_back(std::move(rows[j]));
    }
    return dual;
}

}  // namespace

LpOutcome lp_solve(const LinearProgram& lp, LpMode mode, const std::optional<std::vector<Rat>>& warm_start) {
    if (warm_start) {
        if (!point_feasible(lp, *warm_start))
            throw ValidationError("lp_solve: warm start point is not feasible");
    }
    LpOutcome out;
    out.mode = mode;
    if (mode == LpMode::rational) {
        auto core = solve_core<Rat>(lp);
        out.status = core.status;
        out.values = std::move(core.values);
        out.objective = core.objective;
        if (warm_start && out.status == LpStatus::infeasible)
            throw IntegrityError("lp_solve: reported infeasible despite a feasible warm start");
        if (warm_start && out.status == LpStatus::optimal && out.objective > objective_value(lp, *warm_start))
            throw IntegrityError("lp_solve: optimum worse than the feasible warm start");
    } else {
        auto core = solve_core<double>(lp);
        out.status = core.status;
        out.fvalues = std::move(core.values);
        out.fobjective = core.objective;
        if (warm_start && out.status == LpStatus::optimal) {
            double ws = to_double(objective_value(lp, *warm_start));
            if (out.fobjective > ws + 1e-6 * (1.0 + std::abs(ws)))
                throw IntegrityError("lp_solve: float optimum worse than the feasible warm start");
        }
    }
    return out;
}

ResidualReport check_solution(const LinearProgram& lp, const LpOutcome& outcome) {
    if (outcome.status != LpStatus::optimal)
        throw ValidationError("check_solution: outcome is not optimal");
    ResidualReport rep;
    if (outcome.mode == LpMode::rational) {
        for (const auto& row : lp.rows) {
            Rat lhs = row_value(row, outcome.values);
            Rat res;
            if (row.rel == LpRelation::eq) res = abs(Rat(lhs - row.rhs));
            if (row.rel == LpRelation::le && lhs > row.rhs) res = lhs - row.rhs;
            if (row.rel == LpRelation::ge && lhs < row.rhs) res = row.rhs - lhs;
            rep.max_row_residual = std::max(rep.max_row_residual, res);
        }
        for (std::size_t j = 0; j < lp.columns.size(); ++j)
            if (lp.columns[j].nonnegative && outcome.values[j] < 0)
                rep.max_bound_violation = std::max(rep.max_bound_violation, Rat(-outcome.values[j]));
        rep.fmax_row_residual = to_double(rep.max_row_residual);
        rep.fmax_bound_violation = to_double(rep.max_bound_violation);
        return rep;
    }

    for (const auto& row : lp.rows) {
        double lhs = 0.0;
        for (const auto& [j, coeff] : row.coeffs) lhs += to_double(coeff) * outcome.fvalues[j];
        const double rhs = to_double(row.rhs);
        double res = 0.0;
        if (row.rel == LpRelation::eq) res = std::abs(lhs - rhs);
        if (row.rel == LpRelation::le) res = std::max(0.0, lhs - rhs);
        if (row.rel == LpRelation::ge) res = std::max(0.0, rhs - lhs);
        rep.fmax_row_residual = std::max(rep.fmax_row_residual, res);
    }
    for (std::size_t j = 0; j < lp.columns.size(); ++j)
        if (lp.columns[j].nonnegative)
            rep.fmax_bound_violation = std::max(rep.fmax_bound_violation, -outcome.fvalues[j]);

    auto dual = dual_of(lp);
    auto dual_out = lp_solve(dual, LpMode::floating);
    if (dual_out.status == LpStatus::optimal)
        rep.duality_gap = std::abs(outcome.fobjective + dual_out.fobjective);  // dual was negated
    return rep;
}

std::string dump_lp(const LinearProgram& lp) {
    std::ostringstream os;
    os << "columns " << lp.columns.size() << "\n";
    for (std::size_t j = 0; j < lp.columns.size(); ++j)
        os << "col " << j << " " << (lp.columns[j].nonnegative ? "nonneg" : "free") << " " << lp.columns[j].name
           << "\n";
    os << "minimize";
    for (const auto& [j, c] : lp.objective) os << " " << j << ":" << format_rational(c);
    os << "\n";
    for (const auto& row : lp.rows) {
        os << (row.rel == LpRelation::le ? "<=" : row.rel == LpRelation::ge ? ">=" : "=") << " "
           << format_rational(row.rhs);
        for (const auto& [j, c] : row.coeffs) os << " " << j << ":" << format_rational(c);
        os << "\n";
    }
    return os.str();
}

}  // namespace twsc
