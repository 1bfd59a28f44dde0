#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "twsc/rounding.hpp"

namespace twsc {

// Layered symmetric flow graph of a Markov process X_0..X_N with two source
// and two sink states. Node masses are reach probabilities, step capacities
// are joint probabilities of consecutive states, so capacities form one unit
// of flow. comp is the per-layer complement involution.
struct MarkovFlowGraph {
    std::vector<std::vector<Rat>> mass;              // [layer][state]
    std::vector<std::vector<std::vector<Rat>>> cap;  // [step][from][to], 0 = no edge
    std::vector<std::vector<int>> comp;              // involution per layer

    // set when built from a solution chain: the separator vertex sets and the
    // assignment mask of each state
    std::vector<VertexSet> separators;
    std::vector<std::vector<std::uint32_t>> state_masks;

    int layers() const { return static_cast<int>(mass.size()); }
    int width(int layer) const { return static_cast<int>(mass[layer].size()); }
    int max_interior_width() const;
    int source() const { return 0; }                    // s_0 in layer 0
    int sink() const { return comp.back()[0]; }         // t_1 = complement of t_0
    // conservation, symmetry, half-mass endpoint layers; exact when tol = 0
    void check_invariants(double tol = 0.0) const;

    static MarkovFlowGraph from_chain(const SeparatorChain& chain);
};

// build_separator_chain + from_chain + invariant check.
MarkovFlowGraph build_chain(const SaSolution& sol, const TreeDecomposition& td, Vertex i, Vertex j);

struct LayeredFlow {
    std::vector<std::vector<std::vector<Rat>>> flow;  // same shape as cap
    Rat value;                                        // net out-flow of s_0
};

// 0 <= flow <= cap, conserved at interior states; throws IntegrityError.
void validate_flow(const MarkovFlowGraph& g, const LayeredFlow& f, double tol = 0.0);

// The relaxation's own contribution as a flow: every edge carries the mass of
// assignments extending f* = {i -> 0, j -> 1}; value is half the lp_distance.
LayeredFlow lp_flow(const SaSolution& sol, const SeparatorChain& chain);

struct PotentialProfile {
    std::vector<std::vector<Rat>> A;  // Pr[X_0 = s_0 | X_l = v] - 1/2
    std::vector<Rat> phi;             // Var[A(X_l)] per layer
    Rat p_source_sink;                // Pr[X_0 = s_0 and X_N = t_1]
};

PotentialProfile potentials(const MarkovFlowGraph& g);

// Pr[X_{l1} = u and X_{l2} = v] for all u, v.
std::vector<std::vector<Rat>> joint_between(const MarkovFlowGraph& g, int l1, int l2);

// Largest deviation of A(v) from the joint-weighted mean of layer-l1 A-values.
Rat a_stochastic_gap(const MarkovFlowGraph& g, const PotentialProfile& prof, int l1, int l2);

struct PotentialDrop {
    Rat lhs;  // phi(l1) - phi(l2)
    Rat rhs;  // sum p(u,v) (A(u) - A(v))^2 over the layer pair
    Rat difference;
};
PotentialDrop potential_drop_identity(const MarkovFlowGraph& g, int l1, int l2);

using ChainEdge = std::tuple<int, int, int>;  // (step, from, to)

struct MaxFlowResult {
    Rat value;
    std::vector<ChainEdge> min_cut;
    Rat min_cut_capacity;  // always equals value (checked)
    std::vector<std::vector<std::vector<Rat>>> flow;  // attained flow, cap-shaped
};

// Exact augmenting-path max flow from s_0 to t_1; `removed` edges carry no
// capacity.
MaxFlowResult max_flow(const MarkovFlowGraph& g, const std::vector<ChainEdge>& removed = {});

struct ClusterCut {
    std::vector<ChainEdge> removed;
    Rat capacity;       // total capacity of removed edges
    Rat phi_drop;       // phi(0) - phi(N)
    Rat relative_cost;  // capacity / phi_drop (0 when the drop is 0)
    Rat formula_bound;  // 100 for width <= 4, 2/eps_0^2 otherwise
    std::vector<std::string> phase_log;
};

// Produces an s_0 -> t_1 disconnecting edge set whose relative cost is the
// quantity bounded by the flow analysis: the specialized interval routine for
// width <= 4 layers, the epsilon-schedule cluster phases for wider chains.
ClusterCut cut_and_cluster(const MarkovFlowGraph& g);

// Charge bound for removing node sets far from a later layer: validates that
// the intervals are disjoint and every listed node is at A-distance >= rho
// from the interval's end layer, then returns (1/rho^2)(phi(0) - phi(N)).
Rat cut_charge_bound(const MarkovFlowGraph& g, const std::vector<std::pair<int, int>>& intervals,
                     const std::vector<std::vector<int>>& node_sets, const Rat& rho);

// Total capacity of the out-edges of the listed (layer, state) nodes.
Rat removal_capacity(const MarkovFlowGraph& g, const std::vector<std::pair<int, int>>& nodes);

// Seeded symmetric test chain; stickiness > 0 biases transitions toward the
// same relative position, pushing A(t_1) toward -1/2.
MarkovFlowGraph random_symmetric_chain(int interior_layers, int width, std::uint64_t seed,
                                       int stickiness = 0);

nlohmann::json chain_to_json(const MarkovFlowGraph& g);
MarkovFlowGraph chain_from_json(const nlohmann::json& j);

}  // namespace twsc
