#include <doctest.h>

#include "twsc/markov.hpp"

using namespace twsc;

namespace {

Rat rat_abs(const Rat& x) { return x < 0 ? Rat(-x) : x; }

Instance path5() {
    return Instance::create(5,
                            {{0, 1, Rat(1)}, {1, 2, Rat(2)}, {2, 3, Rat(1)}, {3, 4, Rat(3)}},
                            {{0, 4, Rat(1)}, {1, 3, Rat(2)}});
}

TreeDecomposition path5_td() {
    return {{{0, 1}, {1, 2}, {2, 3}, {3, 4}}, {{0, 1}, {1, 2}, {2, 3}}};
}

SaSolution integral_path5_solution(const VertexSet& side0) {
    auto inst = path5();
    auto td = path5_td();
    auto rel = build_relaxation(inst, td);
    SaSolution sol;
    sol.mode = LpMode::rational;
    sol.values = rel.extract_y(rel.integral_witness(inst, side0));
    sol.registry = std::move(rel.registry);
    return sol;
}

// Pr[X_0 = s_0 and X_N = t_1] by explicit path enumeration.
Rat path_sum_oracle(const MarkovFlowGraph& g) {
    struct Walker {
        const MarkovFlowGraph& g;
        Rat total;
        void walk(int layer, int state, const Rat& prob) {
            if (prob == 0) return;
            if (layer + 1 == g.layers()) {
                if (state == g.sink()) total += prob;
                return;
            }
            for (int b = 0; b < g.width(layer + 1); ++b)
                walk(layer + 1, b, Rat(prob * g.cap[layer][state][b] / g.mass[layer][state]));
        }
    } w{g, Rat(0)};
    w.walk(0, g.source(), g.mass[0][g.source()]);
    return w.total;
}

}  // namespace

TEST_CASE("random symmetric chains satisfy the flow-graph invariants") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        for (int width : {2, 4, 6}) {
            auto g = random_symmetric_chain(5, width, seed);
            CHECK(g.max_interior_width() == width);
            Rat step_total;
            for (const auto& row : g.cap[2])
                for (const auto& c : row) step_total += c;
            CHECK(step_total == Rat(1));
        }
        auto a = random_symmetric_chain(4, 4, seed);
        auto b = random_symmetric_chain(4, 4, seed);
        CHECK(a.cap == b.cap);
    }
    CHECK_THROWS_AS(random_symmetric_chain(3, 3, 1), ValidationError);
    CHECK_THROWS_AS(random_symmetric_chain(0, 4, 1), ValidationError);
}

TEST_CASE("chain from a solved instance: masses, widths, endpoint potentials") {
    auto inst = path5();
    auto td = path5_td();
    auto sol = solve_relaxation(inst, td, LpMode::rational);
    auto g = build_chain(sol, td, 0, 4);
    CHECK(g.layers() == 5);
    CHECK(g.mass[0][0] == Rat(1, 2));
    CHECK(g.mass[0][1] == Rat(1, 2));
    for (int l = 0; l < g.layers(); ++l) CHECK(g.width(l) <= 2);  // width-1 decomposition
    auto prof = potentials(g);
    CHECK(prof.A[0][g.source()] == Rat(1, 2));
    CHECK(prof.A[0][1] == Rat(-1, 2));
    CHECK(prof.phi[0] == Rat(1, 4));
    for (std::size_t l = 0; l + 1 < prof.phi.size(); ++l) CHECK(prof.phi[l] >= prof.phi[l + 1]);
    // the chain reproduces the separation probability computed by rounding
    auto exact = exact_distribution(inst, td, sol, {{0, 4}});
    CHECK(2 * prof.p_source_sink == exact[0]);

    CHECK_THROWS_AS(build_chain(sol, td, 0, 1), ValidationError);  // same bag
}

TEST_CASE("A-stochastic property and the potential drop identity on random chains") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto g = random_symmetric_chain(4, 4, seed, seed % 2 ? 30 : 0);
        auto prof = potentials(g);
        const int N = g.layers() - 1;
        for (int l1 = 0; l1 < N; ++l1)
            for (int l2 = l1 + 1; l2 <= N; ++l2) {
                CHECK(a_stochastic_gap(g, prof, l1, l2) == Rat(0));
                auto drop = potential_drop_identity(g, l1, l2);
                CHECK(drop.difference == Rat(0));
                CHECK(drop.lhs >= 0);
            }
        // two ways of computing the source-sink mass agree exactly
        auto j = joint_between(g, 0, N);
        CHECK(j[g.source()][g.sink()] == prof.p_source_sink);
        CHECK(path_sum_oracle(g) == prof.p_source_sink);
    }
}

TEST_CASE("a deterministic chain has constant potential and zero drop") {
    MarkovFlowGraph g;
    g.mass = {{Rat(1, 2), Rat(1, 2)}, {Rat(1, 2), Rat(1, 2)}, {Rat(1, 2), Rat(1, 2)}};
    g.comp = {{1, 0}, {1, 0}, {1, 0}};
    for (int s = 0; s < 2; ++s) {
        std::vector<std::vector<Rat>> id(2, std::vector<Rat>(2));
        id[0][0] = id[1][1] = Rat(1, 2);
        g.cap.push_back(id);
    }
    g.check_invariants();
    auto drop = potential_drop_identity(g, 0, 2);
    CHECK(drop.lhs == Rat(0));
    CHECK(drop.rhs == Rat(0));
    CHECK(potentials(g).p_source_sink == Rat(0));
    CHECK(max_flow(g).value == Rat(0));
    CHECK(cut_and_cluster(g).capacity == Rat(0));
}

TEST_CASE("lp flow is feasible with value half the lp distance") {
    auto inst = path5();
    auto td = path5_td();
    auto sol = solve_relaxation(inst, td, LpMode::rational);
    auto chain = build_separator_chain(td, sol, 0, 4);
    auto g = MarkovFlowGraph::from_chain(chain);
    auto f = lp_flow(sol, chain);
    CHECK(f.value == lp_distance(sol, 0, 4) / 2);
    CHECK(max_flow(g).value >= f.value);
}

TEST_CASE("integral solution: deterministic chain, half-unit flow, 0/full lp flow") {
    auto sol = integral_path5_solution({0, 1});
    auto td = path5_td();
    auto chain = build_separator_chain(td, sol, 0, 4);
    auto g = MarkovFlowGraph::from_chain(chain);
    g.check_invariants();
    CHECK(max_flow(g).value == Rat(1, 2));
    auto f = lp_flow(sol, chain);
    CHECK(f.value == Rat(1, 2));
    for (std::size_t s = 0; s < f.flow.size(); ++s)
        for (std::size_t a = 0; a < f.flow[s].size(); ++a)
            for (std::size_t b = 0; b < f.flow[s][a].size(); ++b) {
                const bool zero = f.flow[s][a][b] == 0;
                const bool full = f.flow[s][a][b] == g.cap[s][a][b];
                CHECK((zero || full));
            }
}

TEST_CASE("max flow returns a matching min cut whose removal kills all flow") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto g = random_symmetric_chain(5, 4, seed, 10);
        auto res = max_flow(g);
        CHECK(res.value > 0);
        CHECK(res.min_cut_capacity == res.value);
        CHECK(max_flow(g, res.min_cut).value == Rat(0));
    }
}

TEST_CASE("cut and cluster disconnects narrow chains within the stated cost") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        // mix of mixing and sticky chains, widths 2 and 4
        auto g = random_symmetric_chain(3 + seed % 4, seed % 2 ? 4 : 2, seed,
                                        seed % 3 ? 0 : 60);
        auto cut = cut_and_cluster(g);  // throws if the cut fails to disconnect
        CHECK(cut.formula_bound == Rat(100));
        CHECK(cut.relative_cost <= Rat(100));
        CHECK(cut.capacity >= max_flow(g).value);  // weak duality
    }
}

TEST_CASE("cut and cluster handles wider chains with the phase schedule") {
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
        auto g = random_symmetric_chain(4, 6, seed, 80);
        auto cut = cut_and_cluster(g);
        CHECK(cut.capacity >= max_flow(g).value);
        CHECK(cut.relative_cost <= cut.formula_bound);
        CHECK(!cut.phase_log.empty());
    }
}

TEST_CASE("cut charge bound validates its premises and caps real removals") {
    auto g = random_symmetric_chain(5, 4, 7, 40);
    auto prof = potentials(g);
    const int l0 = 2, l1 = 4;
    // rho = largest min-distance of a layer-l0 node to layer l1
    Rat rho;
    int best = -1;
    for (int w = 0; w < g.width(l0); ++w) {
        Rat d = rat_abs(Rat(prof.A[l0][w] - prof.A[l1][0]));
        for (int x = 1; x < g.width(l1); ++x)
            d = std::min(d, rat_abs(Rat(prof.A[l0][w] - prof.A[l1][x])));
        if (d > rho) {
            rho = d;
            best = w;
        }
    }
    REQUIRE(best >= 0);
    REQUIRE(rho > 0);
    auto bound = cut_charge_bound(g, {{l0, l1}}, {{best}}, rho);
    CHECK(bound == Rat(prof.phi[0] - prof.phi[g.layers() - 1]) / (rho * rho));
    CHECK(removal_capacity(g, {{l0, best}}) <= bound);

    CHECK_THROWS_AS(cut_charge_bound(g, {{1, 3}, {2, 4}}, {{0}, {0}}, rho), ValidationError);
    CHECK_THROWS_AS(cut_charge_bound(g, {{l0, l1}}, {{best}}, Rat(10)), ValidationError);
    CHECK_THROWS_AS(cut_charge_bound(g, {{l0, l1}}, {{best}}, Rat(0)), ValidationError);
}

TEST_CASE("single-node-set charge bound on a single-path layer") {
    // deterministic identity chain: removing nothing is chargeable, bound is 0
    MarkovFlowGraph g;
    g.mass = {{Rat(1, 2), Rat(1, 2)}, {Rat(1, 2), Rat(1, 2)}, {Rat(1, 2), Rat(1, 2)}};
    g.comp = {{1, 0}, {1, 0}, {1, 0}};
    for (int s = 0; s < 2; ++s) {
        std::vector<std::vector<Rat>> id(2, std::vector<Rat>(2));
        id[0][0] = id[1][1] = Rat(1, 2);
        g.cap.push_back(id);
    }
    CHECK(cut_charge_bound(g, {}, {}, Rat(1, 10)) == Rat(0));
}

TEST_CASE("chain json round trip") {
    auto g = random_symmetric_chain(4, 4, 11, 20);
    auto j = chain_to_json(g);
    auto back = chain_from_json(j);
    CHECK(back.mass == g.mass);
    CHECK(back.cap == g.cap);
    CHECK(back.comp == g.comp);
    CHECK(j.contains("phi"));
    CHECK(j.contains("p_source_sink"));

    auto sol = solve_relaxation(path5(), path5_td(), LpMode::rational);
    auto gc = build_chain(sol, path5_td(), 0, 4);
    auto jc = chain_to_json(gc);
    CHECK(jc.contains("separators"));
}
