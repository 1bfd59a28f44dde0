#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <json.hpp>

#include "twsc/instances.hpp"
#include "twsc/simplex.hpp"

namespace twsc {

// Index sets of the bag-local relaxation: one ground set per (bag, demand)
// pair, B ∪ {i,j}, unified across duplicates. Registered subsets are the
// variables y_I; the empty set is always column 0.
class SaVariableRegistry {
public:
    static SaVariableRegistry create(const Instance& inst, const TreeDecomposition& td);

    int columns() const { return static_cast<int>(subsets_.size()); }
    int column_of(const VertexSet& I) const;  // -1 when unregistered
    const VertexSet& subset(int col) const { return subsets_[col]; }
    bool covered(const VertexSet& I) const;

    const std::vector<VertexSet>& ground_sets() const { return ground_sets_; }
    // Inclusion-maximal ground sets; every registered subset lies in one.
    const std::vector<VertexSet>& maximal_sets() const { return maximal_sets_; }
    // Index (into maximal_sets) of the canonical owner of a registered subset.
    int owner_of(int col) const { return owner_[col]; }

private:
    std::vector<VertexSet> subsets_;
    std::map<VertexSet, int> index_;
    std::vector<VertexSet> ground_sets_;
    std::vector<VertexSet> maximal_sets_;
    std::vector<int> owner_;
};

// The relaxation in solver form. Internally the LP works over one
// nonnegative mass column per maximal ground set and assignment pair
// {f, complement(f)}; the y_I values are linear functionals of the masses
// (see README). Inclusion-exclusion nonnegativity and assignment-complement
// symmetry hold identically in this parameterization; cross-ground-set
// equality of shared y_I is enforced by explicit rows.
struct RelaxationLp {
    SaVariableRegistry registry;
    LinearProgram lp;
    std::vector<int> mass_base;  // first LP column of each maximal set's block

    // Adds the coefficients of coeff * y_U (expressed through the owner
    // ground set's masses) into a sparse row under construction.
    void add_y_coeffs(const VertexSet& U, const Rat& coeff, std::map<int, Rat>& row) const;
    // y values (per registry column) of an LP point.
    std::vector<Rat> extract_y(const std::vector<Rat>& lp_values) const;
    // The integral feasible point of the cut (side0, rest); side0 must
    // separate at least one positive demand.
    std::vector<Rat> integral_witness(const Instance& inst, const VertexSet& side0) const;
};

RelaxationLp build_relaxation(const Instance& inst, const TreeDecomposition& td);

struct SaSolution {
    SaVariableRegistry registry;
    LpMode mode = LpMode::rational;
    std::vector<Rat> values;  // y_I per registry column; float-mode runs store
                              // the exact dyadic conversion of the solver output
    Rat objective;

    const Rat& y(const VertexSet& I) const;
    const Rat& y_empty() const { return values[0]; }
    Rat y_tilde(const VertexSet& I) const;
};

// Σ_{I'⊆I} (-1)^{|I'|} y_{I'∪J}; requires I, J disjoint and I∪J covered.
Rat y_inclusion_exclusion(const SaSolution& sol, const VertexSet& I, const VertexSet& J);
// Normalized variant ỹ_{I,J} = y_{I,J} / y_∅.
Rat y_tilde_pair(const SaSolution& sol, const VertexSet& zeros, const VertexSet& ones);

struct PartialAssignment {
    VertexSet zeros, ones;  // disjoint

    VertexSet domain() const { return set_union(zeros, ones); }
};

struct LocalDistribution {
    VertexSet domain;
    std::vector<Rat> prob;  // 2^|domain| entries; bit b set = domain[b] -> 1
};

LocalDistribution marginalize(const LocalDistribution& dist, const VertexSet& sub);

// μ_L: Pr[f = f'] = ỹ_{f'}. Float-mode values in [-1e-9, 0) are clamped to 0
// and the distribution renormalized; anything more negative is an integrity
// failure.
LocalDistribution local_distribution(const SaSolution& sol, const VertexSet& L);

// μ_{L',f0}: Pr[f1] = ỹ_{f0∪f1} / ỹ_{f0}, zero on extensions inconsistent
// with f0. Requires domain(f0) ∪ L' covered and ỹ_{f0} > 0.
LocalDistribution conditional_distribution(const SaSolution& sol, const VertexSet& L,
                                           const PartialAssignment& f0);

// ỹ_{i≠j} = ỹ_{{i},{j}} + ỹ_{{j},{i}}.
Rat lp_distance(const SaSolution& sol, Vertex i, Vertex j);

// y_I <- (y_I + y_{I,∅}) / 2: averages a solution with its complement image.
// Solutions produced by solve_relaxation are already symmetric (fixed point).
SaSolution symmetrize(const SaSolution& sol);

// Verifies y_∅ > 0, all local masses (hence all y_{I,J}) nonnegative,
// complement symmetry, and the partition identity per maximal ground set.
// Throws IntegrityError on violation.
void check_sa_integrity(const SaSolution& sol);

// build + solve + extract. use_witness_warm_start feeds the integral witness
// of the cut {first demand endpoint} to the solver as a feasibility
// certificate and optimum bound.
SaSolution solve_relaxation(const Instance& inst, const TreeDecomposition& td, LpMode mode,
                            bool use_witness_warm_start = false);

nlohmann::json sa_solution_to_json(const SaSolution& sol);
SaSolution sa_solution_from_json(const Instance& inst, const TreeDecomposition& td, const nlohmann::json& j);

}  // namespace twsc
