#include <doctest.h>

#include "twsc/lowerbound.hpp"

using namespace twsc;

namespace {

// closed form of 1/2 + A(t_1) = Pr[opposite terminals] on the hard chain
Rat opposite_prob(const HkParams& p) {
    return Rat(2) * p.eps * Rat(Rat(p.N) + Rat(p.k * p.k, 4) - Rat(p.k, 2) - 2) / (p.k - 1);
}

}  // namespace

TEST_CASE("hard chain parameter validation") {
    CHECK_THROWS_AS(gen_hard_chain({3, 10, Rat(1, 100)}), ValidationError);
    CHECK_THROWS_AS(gen_hard_chain({5, 10, Rat(1, 100)}), ValidationError);
    CHECK_THROWS_AS(gen_hard_chain({4, 2, Rat(1, 100)}), ValidationError);
    CHECK_THROWS_AS(gen_hard_chain({4, 10, Rat(0)}), ValidationError);
    CHECK_THROWS_AS(gen_hard_chain({4, 10, Rat(1, 28)}), ValidationError);  // 1/(2(N+k))
    CHECK_THROWS_AS(staircase_flow({4, 4, Rat(1, 100)}), ValidationError);  // N must exceed k
}

TEST_CASE("hard chain matches its stated potentials exactly") {
    for (auto [k, N] : std::vector<std::pair<int, int>>{{4, 12}, {6, 14}, {8, 16}}) {
        HkParams p{k, N, Rat(1, 4 * (N + k))};
        auto g = gen_hard_chain(p);  // invariant check runs inside
        CHECK(g.layers() == N + 1);
        CHECK(g.max_interior_width() == k);
        auto prof = potentials(g);
        for (int j = 1; j < N; ++j)
            for (int i = 0; i < k; ++i)
                CHECK(prof.A[j][i] == Rat(1, 2) - Rat(i, k - 1));
        CHECK(Rat(Rat(1, 2) + prof.A[N][g.sink()]) == opposite_prob(p));
        CHECK(2 * prof.p_source_sink == opposite_prob(p));
        // sinks carry half the mass each, and A is antisymmetric across them
        CHECK(g.mass[N][g.sink()] == Rat(1, 2));
        CHECK(prof.A[N][0] == Rat(-prof.A[N][1]));
    }
}

TEST_CASE("staircase flow: value, feasibility, and weak maximality") {
    for (auto [k, N] : std::vector<std::pair<int, int>>{{4, 12}, {6, 20}}) {
        HkParams p{k, N, Rat(1, 4 * (N + k))};
        auto f = staircase_flow(p);  // validates feasibility and edge existence
        CHECK(f.value == Rat(N - k) * p.eps);
        CHECK(max_flow(gen_hard_chain(p)).value >= f.value);
    }
}

TEST_CASE("flow-to-opposite-mass ratio at the reference parameters") {
    HkParams p{4, 160, Rat(1, 400)};
    auto f = staircase_flow(p);
    const Rat opposite = opposite_prob(p);
    // |F| against the one-sided mass p(s_0,t_1) = opposite/2 clears 0.9(k-1);
    // against the full opposite mass the honest constant is half of that
    CHECK(Rat(f.value / (opposite / 2)) >= Rat(9, 10) * (p.k - 1));
    CHECK(Rat(f.value / opposite) >= Rat(9, 20) * (p.k - 1));
}

TEST_CASE("cut and cluster disconnects the hard chain") {
    HkParams p{4, 24, Rat(1, 4 * 28)};
    auto g = gen_hard_chain(p);
    auto cut = cut_and_cluster(g);  // throws if s_0 -> t_1 stays connected
    CHECK(cut.relative_cost <= cut.formula_bound);
    CHECK(cut.capacity >= max_flow(g).value);
}

TEST_CASE("flows_to_gaps emits a consistent relaxation instance") {
    HkParams p{4, 12, Rat(1, 4 * 16)};
    auto g = gen_hard_chain(p);
    auto f = staircase_flow(p);
    auto gap = flows_to_gaps(g, f, 2);  // salp integrity checked inside

    // path of bags of size <= 2r
    CHECK(gap.decomposition.bags.size() == 12);
    for (const auto& bag : gap.decomposition.bags) CHECK(bag.size() <= 4);
    CHECK(gap.instance.demands.size() == 1);
    CHECK(gap.solution.y({gap.s}) + gap.solution.y({gap.t}) -
              2 * gap.solution.y({gap.s, gap.t}) ==
          Rat(1));  // normalization: y_{s != t} = 1

    // the opposite mass dominates the input flow
    const Rat y_sep = lp_distance(gap.solution, gap.s, gap.t);
    CHECK(y_sep >= f.value);
    CHECK(y_sep <= Rat(1));

    // rounding the emitted solution reproduces the chain's separation mass
    auto exact = exact_distribution(gap.instance, gap.decomposition, gap.solution,
                                    {{gap.s, gap.t}});
    CHECK(exact[0] == 2 * potentials(g).p_source_sink);

    // and the regenerated separator chain is the input chain up to relabeling
    auto g2 = build_chain(gap.solution, gap.decomposition, gap.s, gap.t);
    CHECK(g2.layers() == g.layers());
    CHECK(potentials(g2).p_source_sink == potentials(g).p_source_sink);
    for (int l = 0; l < g.layers(); ++l) {
        std::vector<Rat> a = g.mass[l], b = g2.mass[l];
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        CHECK(a == b);
    }
}

TEST_CASE("flows_to_gaps input validation") {
    HkParams p{4, 12, Rat(1, 64)};
    auto g = gen_hard_chain(p);
    auto f = staircase_flow(p);
    CHECK_THROWS_AS(flows_to_gaps(g, f, 1), ValidationError);  // 4 states > 2^1
    auto bad = f;
    bad.flow[0][0][0] += Rat(1, 1000);  // breaks conservation
    CHECK_THROWS_AS(flows_to_gaps(g, bad, 2), IntegrityError);
}

TEST_CASE("rounding loss report at r = 2") {
    auto row = rounding_loss_report(2);
    CHECK(row.k == 4);
    CHECK(row.N == 160);
    CHECK(row.flow_value == Rat(row.N - row.k) * row.eps);
    CHECK(row.sep_prob == opposite_prob({row.k, row.N, row.eps}));
    CHECK(row.y_sep >= row.flow_value);
    CHECK(row.ratio == Rat(row.sep_prob / row.y_sep));
    CHECK(row.ratio >= row.sep_prob);  // y_sep <= 1
    // the rounding loses a factor on the order of k against the solution
    CHECK(row.ratio <= Rat(3, 2) / (row.k - 1));
    CHECK_THROWS_AS(rounding_loss_report(1), ValidationError);
}
