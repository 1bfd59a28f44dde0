#include <doctest.h>

#include "twsc/io.hpp"
#include "twsc/salp.hpp"

using namespace twsc;

namespace {

Instance single_edge() {
    return Instance::create(2, {{0, 1, Rat(1)}}, {{0, 1, Rat(1)}});
}

TreeDecomposition single_bag01() { return {{{0, 1}}, {}}; }

struct Solved {
    Instance inst;
    TreeDecomposition td;
    SaSolution sol;
};

Solved solved_ktree(int n, int r, std::uint64_t seed, LpMode mode = LpMode::rational) {
    auto gen = gen_partial_ktree(n, r, 1.0, seed);
    return {gen.instance, gen.decomposition, solve_relaxation(gen.instance, gen.decomposition, mode)};
}

}  // namespace

TEST_CASE("registry for the single-edge instance") {
    auto reg = SaVariableRegistry::create(single_edge(), single_bag01());
    CHECK(reg.columns() == 4);  // ∅, {0}, {1}, {0,1}
    CHECK(reg.column_of({}) == 0);
    CHECK(reg.column_of({0, 1}) >= 0);
    CHECK(!reg.covered({0, 1, 2}));
    CHECK(reg.ground_sets().size() == 1);
    CHECK(reg.maximal_sets().size() == 1);
}

TEST_CASE("registry unifies duplicate and nested ground sets") {
    // Path 0-1-2 with demands (0,1) and (0,2): bags {0,1},{1,2} produce
    // ground sets {0,1}, {0,1,2}, {0,1,2}, {0,1,2} -> one maximal set.
    auto inst = Instance::create(3, {{0, 1, Rat(1)}, {1, 2, Rat(1)}}, {{0, 1, Rat(1)}, {0, 2, Rat(1)}});
    TreeDecomposition td{{{0, 1}, {1, 2}}, {{0, 1}}};
    auto reg = SaVariableRegistry::create(inst, td);
    CHECK(reg.ground_sets().size() == 2);
    CHECK(reg.maximal_sets().size() == 1);
    CHECK(reg.maximal_sets()[0] == VertexSet{0, 1, 2});
    CHECK(reg.columns() == 8);
}

TEST_CASE("single-edge relaxation solves to objective 1 with full separation") {
    auto inst = single_edge();
    auto sol = solve_relaxation(inst, single_bag01(), LpMode::rational);
    CHECK(sol.objective == Rat(1));
    CHECK(lp_distance(sol, 0, 1) == Rat(1));
    CHECK(sol.y_tilde({0}) == Rat(1, 2));
    CHECK(sol.y_tilde({1}) == Rat(1, 2));
    CHECK(sol.y({0, 1}) == Rat(0));

    // conditional from the solved LP: Pr[f(1)=1 | f(0)=0] = ỹ_{{0},{1}} / ỹ_{{0}}
    auto cond = conditional_distribution(sol, {1}, {{0}, {}});
    CHECK(cond.prob[1] == y_tilde_pair(sol, {0}, {1}) / sol.y_tilde({0}));
    CHECK(cond.prob[1] == Rat(1));  // the pair is fully separated
}

TEST_CASE("inclusion-exclusion basics") {
    auto sol = solve_relaxation(single_edge(), single_bag01(), LpMode::rational);
    CHECK(y_inclusion_exclusion(sol, {}, {0}) == sol.y({0}));
    CHECK(y_inclusion_exclusion(sol, {0}, {}) == sol.y_empty() - sol.y({0}));
    CHECK_THROWS_AS(y_inclusion_exclusion(sol, {0}, {0, 1}), ValidationError);

    // partition identity over the full ground set
    Rat total;
    for (std::uint32_t a = 0; a < 4; ++a) {
        VertexSet zeros, ones;
        (a & 1 ? ones : zeros).push_back(0);
        (a & 2 ? ones : zeros).push_back(1);
        total += y_inclusion_exclusion(sol, zeros, ones);
    }
    CHECK(total == sol.y_empty());
}

TEST_CASE("local distributions on a solved k-tree instance") {
    auto s = solved_ktree(7, 2, 5);
    check_sa_integrity(s.sol);

    for (Vertex v = 0; v < s.inst.n; ++v) {
        auto d = local_distribution(s.sol, {v});
        CHECK(d.prob[0] == Rat(1, 2));  // complement symmetry forces a fair coin
        CHECK(d.prob[1] == Rat(1, 2));
    }

    auto empty = local_distribution(s.sol, {});
    CHECK(empty.prob.size() == 1);
    CHECK(empty.prob[0] == Rat(1));

    for (const auto& bag : s.td.bags) {
        auto mu = local_distribution(s.sol, bag);
        Rat total;
        for (const auto& p : mu.prob) {
            CHECK(p >= 0);
            total += p;
        }
        CHECK(total == Rat(1));
        // marginal consistency: every sub-bag distribution matches exactly
        for (std::uint32_t mask = 0; mask < (1u << bag.size()); ++mask) {
            VertexSet sub;
            for (std::size_t b = 0; b < bag.size(); ++b)
                if (mask & (1u << b)) sub.push_back(bag[b]);
            auto direct = local_distribution(s.sol, sub);
            auto via_marginal = marginalize(mu, sub);
            CHECK(direct.prob == via_marginal.prob);
        }
    }
}

TEST_CASE("conditional distributions") {
    auto s = solved_ktree(6, 2, 9);
    const auto& bag = s.td.bags[1];
    REQUIRE(bag.size() == 3);
    // conditioning on nothing equals the plain local distribution
    auto plain = local_distribution(s.sol, bag);
    auto cond = conditional_distribution(s.sol, bag, {});
    CHECK(plain.prob == cond.prob);

    // point mass when the target is inside the conditioning domain
    PartialAssignment f0{{bag[0]}, {bag[1]}};
    auto point = conditional_distribution(s.sol, {bag[0], bag[1]}, f0);
    CHECK(point.prob[2] == Rat(1));  // bag[0]->0, bag[1]->1
    CHECK(point.prob[0] == Rat(0));

    // chain rule: mu_B(f) = mu(f|first) * cond(rest | first)
    for (std::uint32_t a = 0; a < 8; ++a) {
        PartialAssignment head;
        (a & 1 ? head.ones : head.zeros).push_back(bag[0]);
        Rat head_p = local_distribution(s.sol, {bag[0]}).prob[a & 1];
        auto tail = conditional_distribution(s.sol, {bag[1], bag[2]}, head);
        CHECK(plain.prob[a] == head_p * tail.prob[a >> 1]);
    }
}

TEST_CASE("lp distance properties") {
    auto s = solved_ktree(8, 2, 13);
    CHECK_THROWS_AS(lp_distance(s.sol, 1, 1), ValidationError);
    for (const auto& e : s.inst.edges) {
        Rat d = lp_distance(s.sol, e.u, e.v);
        CHECK(d >= 0);
        CHECK(d <= 1);  // partition identity bound
        CHECK(d == 2 * y_tilde_pair(s.sol, {e.u}, {e.v}));  // symmetry
    }
    // normalization row: weighted demand distances sum to 1 after scaling
    Rat acc;
    for (const auto& d : s.inst.demands) acc += d.weight * lp_distance(s.sol, d.u, d.v);
    CHECK(acc == Rat(1) / s.sol.y_empty());
}

TEST_CASE("solutions are a fixed point of symmetrization") {
    auto s = solved_ktree(6, 1, 3);
    auto sym = symmetrize(s.sol);
    CHECK(sym.values == s.sol.values);
}

TEST_CASE("integral witness is feasible and bounds the optimum") {
    auto gen = gen_partial_ktree(7, 2, 1.0, 17);
    auto rel = build_relaxation(gen.instance, gen.decomposition);
    auto witness = rel.integral_witness(gen.instance, {gen.instance.demands[0].u});
    auto out = lp_solve(rel.lp, LpMode::rational, witness);  // throws if infeasible
    REQUIRE(out.status == LpStatus::optimal);

    auto cut = evaluate_cut(gen.instance, {gen.instance.demands[0].u});
    CHECK(out.objective <= cut.sparsity);  // relaxation is below the witness cut
    // the witness's y-values reproduce the cut indicator exactly
    auto y = rel.extract_y(witness);
    SaSolution wsol{rel.registry, LpMode::rational, y, Rat(0)};
    check_sa_integrity(wsol);
    CHECK(lp_distance(wsol, gen.instance.demands[0].u, gen.instance.demands[0].v) == Rat(1));
}

TEST_CASE("relaxation lower-bounds every cut (soundness)") {
    for (std::uint64_t seed : {2ull, 4ull, 6ull}) {
        auto s = solved_ktree(6, 2, seed);
        auto best = brute_force_sparsest_cut(s.inst);
        CHECK(s.sol.objective <= best.sparsity);
    }
}

TEST_CASE("rational and float modes agree") {
    auto gen = gen_partial_ktree(6, 2, 1.0, 23);
    auto rat = solve_relaxation(gen.instance, gen.decomposition, LpMode::rational);
    auto flt = solve_relaxation(gen.instance, gen.decomposition, LpMode::floating);
    double a = to_double(rat.objective), b = to_double(flt.objective);
    CHECK(std::abs(a - b) <= 1e-6 * (1.0 + std::abs(a)));
    check_sa_integrity(flt);
}

TEST_CASE("solution JSON round trip") {
    auto gen = gen_partial_ktree(5, 1, 1.0, 31);
    auto sol = solve_relaxation(gen.instance, gen.decomposition, LpMode::rational);
    auto j = sa_solution_to_json(sol);
    auto back = sa_solution_from_json(gen.instance, gen.decomposition, j);
    CHECK(back.values == sol.values);
    CHECK(back.objective == sol.objective);

    auto broken = j;
    broken["values"].erase(broken["values"].begin());
    CHECK_THROWS_AS(sa_solution_from_json(gen.instance, gen.decomposition, broken), ValidationError);
}

TEST_CASE("warm-started solve matches the plain solve") {
    auto gen = gen_partial_ktree(6, 2, 1.0, 41);
    auto plain = solve_relaxation(gen.instance, gen.decomposition, LpMode::rational, false);
    auto warm = solve_relaxation(gen.instance, gen.decomposition, LpMode::rational, true);
    CHECK(plain.objective == warm.objective);
}
