#include <doctest.h>

#include "twsc/simplex.hpp"

using namespace twsc;

namespace {

LinearProgram min_x_ge_3() {
    LinearProgram lp;
    lp.columns.push_back({"x", true});
    lp.rows.push_back({{{0, Rat(1)}}, LpRelation::ge, Rat(3)});
    lp.objective = {{0, Rat(1)}};
    return lp;
}

// max x + y s.t. x + 2y <= 4, 3x + y <= 6, expressed as minimization;
// optimum at the vertex (8/5, 6/5), value -14/5.
LinearProgram small_2d() {
    LinearProgram lp;
    lp.columns.push_back({"x", true});
    lp.columns.push_back({"y", true});
    lp.rows.push_back({{{0, Rat(1)}, {1, Rat(2)}}, LpRelation::le, Rat(4)});
    lp.rows.push_back({{{0, Rat(3)}, {1, Rat(1)}}, LpRelation::le, Rat(6)});
    lp.objective = {{0, Rat(-1)}, {1, Rat(-1)}};
    return lp;
}

}  // namespace

TEST_CASE("minimize x subject to x >= 3") {
    auto out = lp_solve(min_x_ge_3(), LpMode::rational);
    REQUIRE(out.status == LpStatus::optimal);
    CHECK(out.values[0] == Rat(3));
    CHECK(out.objective == Rat(3));
}

TEST_CASE("infeasible program") {
    LinearProgram lp;
    lp.columns.push_back({"x", true});
    lp.rows.push_back({{{0, Rat(1)}}, LpRelation::le, Rat(-1)});
    auto out = lp_solve(lp, LpMode::rational);
    CHECK(out.status == LpStatus::infeasible);
    CHECK(lp_solve(lp, LpMode::floating).status == LpStatus::infeasible);
}

TEST_CASE("unbounded program") {
    LinearProgram lp;
    lp.columns.push_back({"x", true});
    lp.objective = {{0, Rat(-1)}};
    CHECK(lp_solve(lp, LpMode::rational).status == LpStatus::unbounded);
    CHECK(lp_solve(lp, LpMode::floating).status == LpStatus::unbounded);

    // free column with nonzero cost, no constraints
    LinearProgram lp2;
    lp2.columns.push_back({"z", false});
    lp2.objective = {{0, Rat(1)}};
    CHECK(lp_solve(lp2, LpMode::rational).status == LpStatus::unbounded);
}

TEST_CASE("vertex optimum, both modes agree") {
    auto lp = small_2d();
    auto rat = lp_solve(lp, LpMode::rational);
    REQUIRE(rat.status == LpStatus::optimal);
    CHECK(rat.objective == Rat(-14, 5));
    CHECK(rat.values[0] == Rat(8, 5));
    CHECK(rat.values[1] == Rat(6, 5));

    auto flt = lp_solve(lp, LpMode::floating);
    REQUIRE(flt.status == LpStatus::optimal);
    CHECK(std::abs(flt.fobjective - (-2.8)) < 1e-6);
}

TEST_CASE("free variables and equality rows") {
    // min |z| style: z free, z = -5 via equality
    LinearProgram lp;
    lp.columns.push_back({"z", false});
    lp.rows.push_back({{{0, Rat(1)}}, LpRelation::eq, Rat(-5)});
    lp.objective = {{0, Rat(1)}};
    auto out = lp_solve(lp, LpMode::rational);
    REQUIRE(out.status == LpStatus::optimal);
    CHECK(out.values[0] == Rat(-5));
    CHECK(out.objective == Rat(-5));
}

TEST_CASE("determinism: identical outcomes on repeat solves") {
    auto lp = small_2d();
    auto a = lp_solve(lp, LpMode::rational);
    auto b = lp_solve(lp, LpMode::rational);
    CHECK(a.values == b.values);
    CHECK(a.objective == b.objective);
    auto fa = lp_solve(lp, LpMode::floating);
    auto fb = lp_solve(lp, LpMode::floating);
    CHECK(fa.fvalues == fb.fvalues);
}

TEST_CASE("warm start checks") {
    auto lp = small_2d();
    std::vector<Rat> feasible_point = {Rat(1), Rat(1)};
    auto out = lp_solve(lp, LpMode::rational, feasible_point);
    CHECK(out.objective <= Rat(-2));

    std::vector<Rat> infeasible_point = {Rat(5), Rat(5)};
    CHECK_THROWS_AS(lp_solve(lp, LpMode::rational, infeasible_point), ValidationError);
}

TEST_CASE("residual report") {
    auto lp = small_2d();
    auto rat = lp_solve(lp, LpMode::rational);
    auto rep = check_solution(lp, rat);
    CHECK(rep.max_row_residual == Rat(0));
    CHECK(rep.max_bound_violation == Rat(0));

    auto flt = lp_solve(lp, LpMode::floating);
    auto frep = check_solution(lp, flt);
    CHECK(frep.fmax_row_residual <= 1e-9);
    CHECK(frep.fmax_bound_violation <= 1e-9);
    REQUIRE(frep.duality_gap.has_value());
    CHECK(*frep.duality_gap <= 1e-6);

    // perturbed solution is flagged
    auto bad = rat;
    bad.values[0] += 1;
    auto brep = check_solution(lp, bad);
    CHECK(brep.max_row_residual > 0);
}

TEST_CASE("degenerate LP terminates (Bland safeguard)") {
    // Classic Beale-style degenerate example.
    LinearProgram lp;
    for (int j = 0; j < 4; ++j) lp.columns.push_back({"x" + std::to_string(j), true});
    lp.rows.push_back({{{0, Rat(1, 4)}, {1, Rat(-60)}, {2, Rat(-1, 25)}, {3, Rat(9)}}, LpRelation::le, Rat(0)});
    lp.rows.push_back({{{0, Rat(1, 2)}, {1, Rat(-90)}, {2, Rat(-1, 50)}, {3, Rat(3)}}, LpRelation::le, Rat(0)});
    lp.rows.push_back({{{2, Rat(1)}}, LpRelation::le, Rat(1)});
    lp.objective = {{0, Rat(-3, 4)}, {1, Rat(150)}, {2, Rat(-1, 50)}, {3, Rat(6)}};
    auto out = lp_solve(lp, LpMode::rational);
    REQUIRE(out.status == LpStatus::optimal);
    CHECK(out.objective == Rat(-1, 20));
}

TEST_CASE("plain-text dump") {
    auto text = dump_lp(min_x_ge_3());
    CHECK(text.find(">= 3 0:1") != std::string::npos);
    CHECK(text.find("minimize 0:1") != std::string::npos);
    CHECK(text.find("nonneg x") != std::string::npos);
}
