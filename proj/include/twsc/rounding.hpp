#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twsc/salp.hpp"

namespace twsc {

// A connected traversal of the bag tree: every bag after the first is
// adjacent to an earlier one. B⁺ (olds) and B⁻ (news) split each bag into
// already-assigned and fresh vertices given the traversal prefix.
struct TraversalPlan {
    int root = 0;
    std::vector<int> order;
    std::vector<VertexSet> olds;  // B⁺ per position
    std::vector<VertexSet> news;  // B⁻ per position

    static TraversalPlan bfs(const TreeDecomposition& td, int root);
};

// Throws ValidationError unless order is a connected traversal covering V
// with consistent splits.
void validate_plan(const Instance& inst, const TreeDecomposition& td, const TraversalPlan& plan);

struct RoundingOutcome {
    Assignment assignment;
    CutReport cut;
    std::vector<char> edge_cut;    // parallel to instance edges
    std::vector<char> demand_cut;  // parallel to instance demands
    std::uint64_t seed = 0;
    // derandomize: set when the produced cut cannot certify sparsity <= α/c.
    std::optional<std::string> failure;
};

// One randomized rounding run: sample the root bag from μ_B, then each
// fresh set from the conditional given its already-assigned bag part.
RoundingOutcome sc_round(const Instance& inst, const TreeDecomposition& td, const SaSolution& sol,
                         std::uint64_t seed);

// The layered separator view of one demand pair: bags P_1..P_M on the tree
// path between the endpoints' bag subtrees, separators S_0={i},
// S_m = P_m ∩ P_{m+1}, S_M={j}. States are support assignments; layer
// masses are ỹ_f and step joints ỹ_{f1∪f2} (all bag-local).
struct SeparatorChain {
    Vertex i = 0, j = 0;
    std::vector<int> bag_path;
    std::vector<VertexSet> separators;               // S_0..S_M
    std::vector<std::vector<std::uint32_t>> states;  // support masks per layer
    std::vector<std::vector<Rat>> mass;              // ỹ_f per (layer, state)
    std::vector<std::vector<std::vector<Rat>>> joint;  // [m][a][b] = ỹ_{f_a ∪ f_b}

    int layers() const { return static_cast<int>(separators.size()); }
};

// Requires i and j to share no bag (the in-bag case is just lp_distance).
SeparatorChain build_separator_chain(const TreeDecomposition& td, const SaSolution& sol, Vertex i,
                                     Vertex j);

// Exact separation probabilities under the rounding process, one per target
// pair: in-bag pairs return ỹ_{i≠j} directly, others chain the separator
// transition matrices.
std::vector<Rat> exact_distribution(const Instance& inst, const TreeDecomposition& td,
                                    const SaSolution& sol,
                                    const std::vector<std::pair<Vertex, Vertex>>& targets);

// The rounding distribution over all of V, computed by DP along the plan.
// Enumeration oracle for small instances (guard n <= 16).
LocalDistribution full_joint_distribution(const Instance& inst, const TreeDecomposition& td,
                                          const SaSolution& sol, const TraversalPlan& plan);

// Max absolute difference between the joint distributions of f over
// bag_a ∪ bag_b induced by the two plans.
Rat order_invariance_check(const Instance& inst, const TreeDecomposition& td, const SaSolution& sol,
                           int bag_a, int bag_b, const TraversalPlan& p1, const TraversalPlan& p2);

// Conditional-expectation derandomization of sc_round: greedily minimizes
// E[Σ cap·sep - (α/c)·Σ dem·sep | prefix], ties to the lexicographically
// smallest assignment. The result certifies sparsity <= α/c whenever the
// per-pair separation guarantee holds for c.
RoundingOutcome derandomize(const Instance& inst, const TreeDecomposition& td, const SaSolution& sol,
                            const Rat& c);

nlohmann::json rounding_outcome_to_json(const RoundingOutcome& out);

}  // namespace twsc
