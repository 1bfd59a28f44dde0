#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "twsc/rational.hpp"

namespace twsc {

using Vertex = int;
using VertexSet = std::vector<Vertex>;  // always sorted, unique

// Sorts, dedups; the canonical in-memory form for all vertex sets.
VertexSet canonical_set(VertexSet vertices);
bool set_contains(const VertexSet& set, Vertex v);
VertexSet set_union(const VertexSet& a, const VertexSet& b);
VertexSet set_intersect(const VertexSet& a, const VertexSet& b);
VertexSet set_minus(const VertexSet& a, const VertexSet& b);
bool is_subset(const VertexSet& a, const VertexSet& b);

struct WeightedPair {
    Vertex u = 0;
    Vertex v = 0;  // stored with u < v
    Rat weight;
};

// A Sparsest-Cut input: capacitated graph plus weighted demand pairs.
struct Instance {
    int n = 0;
    std::vector<WeightedPair> edges;
    std::vector<WeightedPair> demands;

    // Throws ValidationError on self-loops, bad ids, negative weights,
    // duplicate pairs, or an all-zero demand set. Zero-weight demands are
    // dropped; duplicate demand pairs are merged at parse time, duplicate
    // edges are an error.
    static Instance create(int n, std::vector<WeightedPair> edges, std::vector<WeightedPair> demands);
};

struct TreeDecomposition {
    std::vector<VertexSet> bags;
    std::vector<std::pair<int, int>> tree_edges;

    int width() const;
};

struct DecompositionViolation {
    std::string what;  // human-readable, includes the witness indices
};

struct DecompositionReport {
    bool valid = false;
    int width = -1;
    std::vector<DecompositionViolation> violations;
};

// Checks tree-ness plus decomposition properties (vertex coverage, edge
// coverage, connected-subtree). Reports violations with witnesses instead
// of throwing.
DecompositionReport validate_decomposition(const Instance& inst, const TreeDecomposition& td);

struct Assignment {
    std::vector<int> labels;  // labels[v] in {0,1}, size n

    VertexSet side0() const;
};

struct CutReport {
    VertexSet side0;
    Rat cut_capacity;
    Rat cut_demand;
    Rat sparsity;  // defined only when feasible
    bool feasible = false;
};

CutReport evaluate_cut(const Instance& inst, const VertexSet& side0);

// Enumeration guard for the oracles, overridable via env var TWSC_GUARD_N.
int oracle_guard(int fallback);

// Exhaustive sparsest cut over all nontrivial bipartitions; ties broken by
// lexicographically smallest side0 containing vertex 0. Guarded by max_n.
CutReport brute_force_sparsest_cut(const Instance& inst, int max_n = 26);

// Simple undirected graph, input to the Max-Cut reduction.
struct SimpleGraph {
    int n = 0;
    std::vector<std::pair<Vertex, Vertex>> edges;
};

// The pathwidth-2 hardness reduction: s,t joined to every original vertex,
// one unit demand per original edge, demand n^3 between s and t. Vertex ids:
// originals keep 0..n-1, s = n, t = n+1.
struct MaxcutReduction {
    Instance instance;
    TreeDecomposition decomposition;  // path of bags {s, t, v_i}, width 2
    Vertex s = 0;
    Vertex t = 0;
};
MaxcutReduction maxcut_reduction(const SimpleGraph& g);

// Seeded random partial k-tree of width r with rational capacities in [1,10]
// and ceil(n/2) unit demands; returns the k-tree decomposition.
struct GeneratedInstance {
    Instance instance;
    TreeDecomposition decomposition;
};
GeneratedInstance gen_partial_ktree(int n, int r, double keep_prob, std::uint64_t seed);

// Exact width-<=r decomposition search via elimination-order DP (n <= 16).
std::optional<TreeDecomposition> find_decomposition_small(const Instance& inst, int r, int max_n = 16);

}  // namespace twsc
