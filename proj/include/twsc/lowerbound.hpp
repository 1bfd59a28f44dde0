#pragma once

#include "twsc/markov.hpp"

namespace twsc {

// Parameters of the explicit hard chain: k states per interior layer (even,
// >= 4), N+1 layers, eps in (0, 1/(2(N+k))) so every stated capacity is
// positive.
struct HkParams {
    int k = 4;
    int N = 0;
    Rat eps;
};

MarkovFlowGraph gen_hard_chain(const HkParams& p);

// The explicit staircase flow of value (N-k)*eps on gen_hard_chain(p):
// ride the top rail for j layers, descend the diagonal, ride the inner rail
// to the opposite sink.
LayeredFlow staircase_flow(const HkParams& p);

// A relaxation instance whose rounding process reproduces a given chain.
struct GapInstance {
    Instance instance;
    TreeDecomposition decomposition;  // path of bags B'_i ∪ B'_{i+1}
    SaSolution solution;
    Vertex s = 0, t = 0;
};

// Converts a symmetric chain with <= 2^r states per layer and a
// source-to-opposite-sink flow F into a pathwidth-(2r-1) instance with one
// (s,t) demand and a feasible solution whose lp_distance(s,t) is
// |F_sym| + |F_!=| >= |F|.
GapInstance flows_to_gaps(const MarkovFlowGraph& chain, const LayeredFlow& F, int r);

struct RoundingLossRow {
    int r = 0, k = 0, N = 0;
    Rat eps;
    Rat flow_value;  // |F| = (N-k)*eps
    Rat y_sep;       // lp_distance(s, t) of the emitted solution
    Rat sep_prob;    // exact rounding separation probability, 2*p(s_0,t_1)
    Rat ratio;       // sep_prob / y_sep, the empirical separation loss
};

// Builds the hard instance for k = 2^r (N = 10k^2, eps = 1/(4(N+k))) and
// reports how far the rounding separation falls below the solution's own
// separation value; the ratio lands near 1/(k-1).
RoundingLossRow rounding_loss_report(int r);

}  // namespace twsc
