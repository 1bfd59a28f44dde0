#include "twsc/salp.hpp"

#include <algorithm>
#include <bit>

#include "twsc/io.hpp"

namespace twsc {

namespace {

constexpr double kFloatTol = 1e-9;

// Bit position of each member of U inside the sorted ground set S; U ⊆ S.
std::uint32_t mask_in(const VertexSet& U, const VertexSet& S) {
    std::uint32_t mask = 0;
    for (Vertex v : U) {
        auto it = std::lower_bound(S.begin(), S.end(), v);
        if (it == S.end() || *it != v) throw IntegrityError("mask_in: set is not a subset");
        mask |= 1u << (it - S.begin());
    }
    return mask;
}

VertexSet subset_of_mask(const VertexSet& S, std::uint32_t mask) {
    VertexSet out;
    for (std::size_t b = 0; b < S.size(); ++b)
        if (mask & (1u << b)) out.push_back(S[b]);
    return out;
}

}  // namespace

SaVariableRegistry SaVariableRegistry::create(const Instance& inst, const TreeDecomposition& td) {
    SaVariableRegistry reg;
    auto report = validate_decomposition(inst, td);
    if (!report.valid) throw ValidationError("registry: decomposition invalid: " + report.violations[0].what);

    std::vector<VertexSet> ground;
    for (const auto& bag : td.bags)
        for (const auto& d : inst.demands) ground.push_back(set_union(bag, {std::min(d.u, d.v), std::max(d.u, d.v)}));
    std::sort(ground.begin(), ground.end());
    ground.erase(std::unique(ground.begin(), ground.end()), ground.end());
    reg.ground_sets_ = ground;

    for (const auto& s : ground) {
        bool nested = false;
        for (const auto& t : ground)
            if (s != t && is_subset(s, t)) {
                nested = true;
                break;
            }
        if (!nested) reg.maximal_sets_.push_back(s);
    }

    // The empty set first, then all subsets of each maximal set; the first
    // maximal set registering a subset owns it.
    reg.subsets_.push_back({});
    reg.index_[{}] = 0;
    reg.owner_.push_back(0);
    for (int g = 0; g < static_cast<int>(reg.maximal_sets_.size()); ++g) {
        const auto& S = reg.maximal_sets_[g];
        for (std::uint32_t mask = 1; mask < (1u << S.size()); ++mask) {
            VertexSet U = subset_of_mask(S, mask);
            if (reg.index_.emplace(U, static_cast<int>(reg.subsets_.size())).second) {
                reg.subsets_.push_back(std::move(U));
                reg.owner_.push_back(g);
            }
        }
    }
    return reg;
}

int SaVariableRegistry::column_of(const VertexSet& I) const {
    auto it = index_.find(I);
    return it == index_.end() ? -1 : it->second;
}

bool SaVariableRegistry::covered(const VertexSet& I) const {
    // Every subset of a maximal set is registered, so coverage = membership.
    return column_of(I) >= 0;
}

void RelaxationLp::add_y_coeffs(const VertexSet& U, const Rat& coeff, std::map<int, Rat>& row) const {
    int col = registry.column_of(U);
    if (col < 0) throw ValidationError("relaxation: subset not covered by any ground set");
    const int g = registry.owner_of(col);
    const auto& S = registry.maximal_sets()[g];
    const std::uint32_t u_mask = mask_in(U, S);
    const std::uint32_t full = (1u << S.size()) - 1;
    // Each LP column carries the mass of an assignment and of its complement.
    for (std::uint32_t a = 0; a <= full; a += 2) {
        int count = ((a & u_mask) == u_mask) + (((full ^ a) & u_mask) == u_mask);
        if (count) row[mass_base[g] + static_cast<int>(a >> 1)] += coeff * count;
    }
}

std::vector<Rat> RelaxationLp::extract_y(const std::vector<Rat>& lp_values) const {
    std::vector<Rat> y(registry.columns());
    for (int col = 0; col < registry.columns(); ++col) {
        std::map<int, Rat> row;
        add_y_coeffs(registry.subset(col), Rat(1), row);
        Rat acc;
        for (const auto& [c, coeff] : row) acc += coeff * lp_values[c];
        y[col] = acc;
    }
    return y;
}

std::vector<Rat> RelaxationLp::integral_witness(const Instance& inst, const VertexSet& side0) const {
    Rat dem_cut;
    for (const auto& d : inst.demands)
        if (set_contains(side0, d.u) != set_contains(side0, d.v)) dem_cut += d.weight;
    if (dem_cut == 0) throw ValidationError("integral_witness: cut separates no positive demand");
    const Rat t = Rat(1) / (2 * dem_cut);

    std::vector<Rat> x(lp.columns.size());
    for (std::size_t g = 0; g < registry.maximal_sets().size(); ++g) {
        const auto& S = registry.maximal_sets()[g];
        std::uint32_t a = 0;  // induced assignment: side0 -> 0, rest -> 1
        for (std::size_t b = 0; b < S.size(); ++b)
            if (!set_contains(side0, S[b])) a |= 1u << b;
        if (a & 1u) a ^= (1u << S.size()) - 1;  // representative of the pair
        x[mass_base[g] + static_cast<int>(a >> 1)] = t;
    }
    return x;
}

RelaxationLp build_relaxation(const Instance& inst, const TreeDecomposition& td) {
    RelaxationLp rel;
    rel.registry = SaVariableRegistry::create(inst, td);
    const auto& maximal = rel.registry.maximal_sets();

    for (std::size_t g = 0; g < maximal.size(); ++g) {
        rel.mass_base.push_back(static_cast<int>(rel.lp.columns.size()));
        const auto& S = maximal[g];
        for (std::uint32_t a = 0; a < (1u << S.size()); a += 2)
            rel.lp.columns.push_back({"m" + std::to_string(g) + ":" + std::to_string(a), true});
    }

    // Shared-subset consistency: the same y_U computed in any covering
    // ground set must match its owner's value.
    for (std::size_t g = 0; g < maximal.size(); ++g) {
        const auto& S = maximal[g];
        const std::uint32_t full = (1u << S.size()) - 1;
        for (std::uint32_t mask = 0; mask <= full; ++mask) {
            VertexSet U = subset_of_mask(S, mask);
            int col = rel.registry.column_of(U);
            if (rel.registry.owner_of(col) == static_cast<int>(g)) continue;
            std::map<int, Rat> row;
            rel.add_y_coeffs(U, Rat(1), row);  // owner side
            const std::uint32_t u_mask = mask;
            for (std::uint32_t a = 0; a <= full; a += 2) {
                int count = ((a & u_mask) == u_mask) + (((full ^ a) & u_mask) == u_mask);
                if (count) row[rel.mass_base[g] + static_cast<int>(a >> 1)] -= Rat(count);
            }
            LpRow lp_row;
            for (auto& [c, coeff] : row)
                if (coeff != 0) lp_row.coeffs.emplace_back(c, coeff);
            if (lp_row.coeffs.empty()) continue;
            lp_row.rel = LpRelation::eq;
            lp_row.rhs = Rat(0);
            rel.lp.rows.push_back(std::move(lp_row));
        }
    }

    auto pair_distance_coeffs = [&rel](Vertex i, Vertex j, const Rat& coeff, std::map<int, Rat>& row) {
        // y_{i≠j} = y_{{i}} + y_{{j}} - 2 y_{{i,j}}
        rel.add_y_coeffs({i}, coeff, row);
        rel.add_y_coeffs({j}, coeff, row);
        rel.add_y_coeffs(canonical_set({i, j}), -2 * coeff, row);
    };

    std::map<int, Rat> norm;
    for (const auto& d : inst.demands) pair_distance_coeffs(d.u, d.v, d.weight, norm);
    LpRow norm_row;
    for (auto& [c, coeff] : norm)
        if (coeff != 0) norm_row.coeffs.emplace_back(c, coeff);
    norm_row.rel = LpRelation::eq;
    norm_row.rhs = Rat(1);
    rel.lp.rows.push_back(std::move(norm_row));

    std::map<int, Rat> obj;
    for (const auto& e : inst.edges) {
        if (!rel.registry.covered(canonical_set({e.u, e.v})))
            throw ValidationError("relaxation: edge not covered by any bag");
        if (e.weight != 0) pair_distance_coeffs(e.u, e.v, e.weight, obj);
    }
    for (auto& [c, coeff] : obj)
        if (coeff != 0) rel.lp.objective.emplace_back(c, coeff);
    return rel;
}

const Rat& SaSolution::y(const VertexSet& I) const {
    int col = registry.column_of(I);
    if (col < 0) throw ValidationError("sa solution: subset not covered by any ground set");
    return values[col];
}

Rat SaSolution::y_tilde(const VertexSet& I) const {
    if (values[0] <= 0) throw IntegrityError("sa solution: y_empty must be positive");
    return y(I) / values[0];
}

Rat y_inclusion_exclusion(const SaSolution& sol, const VertexSet& I, const VertexSet& J) {
    if (!set_intersect(I, J).empty()) throw ValidationError("y_inclusion_exclusion: I and J must be disjoint");
    const VertexSet all = set_union(I, J);
    if (!sol.registry.covered(all)) throw ValidationError("y_inclusion_exclusion: I∪J not covered");
    Rat acc;
    for (std::uint32_t mask = 0; mask < (1u << I.size()); ++mask) {
        VertexSet term = J;
        for (std::size_t b = 0; b < I.size(); ++b)
            if (mask & (1u << b)) term.push_back(I[b]);
        const Rat& v = sol.y(canonical_set(term));
        if (std::popcount(mask) % 2)
            acc -= v;
        else
            acc += v;
    }
    return acc;
}

Rat y_tilde_pair(const SaSolution& sol, const VertexSet& zeros, const VertexSet& ones) {
    if (sol.values[0] <= 0) throw IntegrityError("sa solution: y_empty must be positive");
    return y_inclusion_exclusion(sol, zeros, ones) / sol.values[0];
}

LocalDistribution marginalize(const LocalDistribution& dist, const VertexSet& sub) {
    if (!is_subset(sub, dist.domain)) throw ValidationError("marginalize: not a subset of the domain");
    const std::uint32_t sub_mask = mask_in(sub, dist.domain);
    LocalDistribution out;
    out.domain = sub;
    out.prob.assign(1u << sub.size(), Rat(0));
    for (std::uint32_t a = 0; a < dist.prob.size(); ++a) {
        std::uint32_t small = 0, b = 0;
        for (std::size_t p = 0; p < dist.domain.size(); ++p)
            if (sub_mask & (1u << p)) {
                if (a & (1u << p)) small |= 1u << b;
                ++b;
            }
        out.prob[small] += dist.prob[a];
    }
    return out;
}

namespace {

// Shared clamping policy: float-mode round-off slightly below zero is
// forgiven and renormalized away; genuine negativity is an integrity error.
LocalDistribution finish_distribution(LocalDistribution dist, LpMode mode, const char* what) {
    Rat total;
    for (auto& p : dist.prob) {
        if (p < 0) {
            if (mode == LpMode::rational || to_double(p) < -kFloatTol)
                throw IntegrityError(std::string(what) + ": negative probability mass");
            p = 0;
        }
        total += p;
    }
    if (mode == LpMode::rational) {
        if (total != 1) throw IntegrityError(std::string(what) + ": probabilities do not sum to 1");
    } else {
        if (std::abs(to_double(Rat(total - 1))) > 1e-6)
            throw IntegrityError(std::string(what) + ": probabilities far from sum 1");
        if (total == 0) throw IntegrityError(std::string(what) + ": all mass clamped away");
        for (auto& p : dist.prob) p /= total;
    }
    return dist;
}

}  // namespace

LocalDistribution local_distribution(const SaSolution& sol, const VertexSet& L) {
    if (!sol.registry.covered(L)) throw ValidationError("local_distribution: set not covered");
    LocalDistribution dist;
    dist.domain = L;
    dist.prob.resize(1u << L.size());
    for (std::uint32_t a = 0; a < dist.prob.size(); ++a) {
        VertexSet zeros, ones;
        for (std::size_t b = 0; b < L.size(); ++b)
            (a & (1u << b) ? ones : zeros).push_back(L[b]);
        dist.prob[a] = y_tilde_pair(sol, zeros, ones);
    }
    return finish_distribution(std::move(dist), sol.mode, "local_distribution");
}

LocalDistribution conditional_distribution(const SaSolution& sol, const VertexSet& L,
                                           const PartialAssignment& f0) {
    if (!set_intersect(f0.zeros, f0.ones).empty())
        throw ValidationError("conditional_distribution: inconsistent conditioning assignment");
    const VertexSet support = set_union(f0.domain(), L);
    if (!sol.registry.covered(support)) throw ValidationError("conditional_distribution: set not covered");
    const Rat y_f0 = y_inclusion_exclusion(sol, f0.zeros, f0.ones);
    if (y_f0 <= 0) throw ValidationError("conditional_distribution: conditioning outside the support");

    LocalDistribution dist;
    dist.domain = L;
    dist.prob.assign(1u << L.size(), Rat(0));
    for (std::uint32_t a = 0; a < dist.prob.size(); ++a) {
        VertexSet zeros = f0.zeros, ones = f0.ones;
        bool consistent = true;
        for (std::size_t b = 0; b < L.size(); ++b) {
            Vertex v = L[b];
            const bool one = a & (1u << b);
            if (set_contains(f0.zeros, v) || set_contains(f0.ones, v)) {
                if (one != set_contains(f0.ones, v)) consistent = false;
            } else {
                (one ? ones : zeros).push_back(v);
            }
        }
        if (!consistent) continue;
        dist.prob[a] = y_inclusion_exclusion(sol, canonical_set(zeros), canonical_set(ones)) / y_f0;
    }
    return finish_distribution(std::move(dist), sol.mode, "conditional_distribution");
}

Rat lp_distance(const SaSolution& sol, Vertex i, Vertex j) {
    if (i == j) throw ValidationError("lp_distance: endpoints must differ");
    return y_tilde_pair(sol, {std::min(i, j)}, {std::max(i, j)}) +
           y_tilde_pair(sol, {std::max(i, j)}, {std::min(i, j)});
}

SaSolution symmetrize(const SaSolution& sol) {
    SaSolution out = sol;
    for (int col = 0; col < sol.registry.columns(); ++col) {
        const VertexSet& I = sol.registry.subset(col);
        Rat all_zero = y_inclusion_exclusion(sol, I, {});
        out.values[col] = (sol.values[col] + all_zero) / 2;
    }
    return out;
}

void check_sa_integrity(const SaSolution& sol) {
    if (sol.values.size() != static_cast<std::size_t>(sol.registry.columns()))
        throw IntegrityError("sa integrity: value vector size mismatch");
    if (sol.values[0] <= 0) throw IntegrityError("sa integrity: y_empty must be positive");
    const Rat tol = sol.mode == LpMode::rational ? Rat(0) : rational_from_double(kFloatTol) * sol.values[0];
    for (const auto& S : sol.registry.maximal_sets()) {
        // All y_{I,J} with I∪J ⊆ S are sums of the 2^|S| assignment masses,
        // so mass nonnegativity is the tight inclusion-exclusion check.
        Rat total;
        std::vector<Rat> masses(1u << S.size());
        for (std::uint32_t a = 0; a < masses.size(); ++a) {
            VertexSet zeros, ones;
            for (std::size_t b = 0; b < S.size(); ++b)
                (a & (1u << b) ? ones : zeros).push_back(S[b]);
            masses[a] = y_inclusion_exclusion(sol, zeros, ones);
            if (masses[a] < -tol) throw IntegrityError("sa integrity: negative y_{I,J}");
            total += masses[a];
        }
        // The partition identity telescopes algebraically, so it is exact in
        // both modes; symmetry crosses ground-set consistency rows, which in
        // float mode only hold to the solver residual.
        if (total != sol.values[0]) throw IntegrityError("sa integrity: partition identity violated");
        const std::uint32_t full = (1u << S.size()) - 1;
        for (std::uint32_t a = 0; a < masses.size(); ++a) {
            Rat gap = masses[a] - masses[full ^ a];
            if (gap < -tol || gap > tol) throw IntegrityError("sa integrity: complement symmetry violated");
        }
    }
}

SaSolution solve_relaxation(const Instance& inst, const TreeDecomposition& td, LpMode mode,
                            bool use_witness_warm_start) {
    auto rel = build_relaxation(inst, td);
    std::optional<std::vector<Rat>> warm;
    if (use_witness_warm_start) warm = rel.integral_witness(inst, {inst.demands[0].u});
    auto out = lp_solve(rel.lp, mode, warm);
    if (out.status != LpStatus::optimal)
        throw IntegrityError("solve_relaxation: the relaxation is feasible and bounded, solver disagreed");

    SaSolution sol;
    sol.mode = mode;
    if (mode == LpMode::rational) {
        sol.values = rel.extract_y(out.values);
        sol.objective = out.objective;
    } else {
        std::vector<Rat> lifted;
        lifted.reserve(out.fvalues.size());
        for (double v : out.fvalues) lifted.push_back(rational_from_double(v));
        sol.values = rel.extract_y(lifted);
        sol.objective = rational_from_double(out.fobjective);
    }
    sol.registry = std::move(rel.registry);
    check_sa_integrity(sol);
    return sol;
}

nlohmann::json sa_solution_to_json(const SaSolution& sol) {
    nlohmann::json values = nlohmann::json::object();
    for (int col = 0; col < sol.registry.columns(); ++col)
        values[subset_key(sol.registry.subset(col))] = format_rational(sol.values[col]);
    return nlohmann::json{{"objective", format_rational(sol.objective)},
                          {"mode", sol.mode == LpMode::rational ? "rational" : "float"},
                          {"values", values}};
}

SaSolution sa_solution_from_json(const Instance& inst, const TreeDecomposition& td, const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("values") || !j["values"].is_object())
        throw ValidationError("solution file: expected object with \"values\"");
    SaSolution sol;
    sol.registry = SaVariableRegistry::create(inst, td);
    sol.mode = j.value("mode", "rational") == "float" ? LpMode::floating : LpMode::rational;
    sol.values.assign(sol.registry.columns(), Rat(0));
    std::vector<char> seen(sol.registry.columns(), 0);
    for (const auto& [key, val] : j["values"].items()) {
        int col = sol.registry.column_of(subset_from_key(key));
        if (col < 0) throw ValidationError("solution file: unknown subset " + key);
        std::optional<Rat> parsed;
        if (val.is_string()) parsed = parse_rational(val.get<std::string>());
        if (!parsed) throw ValidationError("solution file: bad rational for subset " + key);
        sol.values[col] = *parsed;
        seen[col] = 1;
    }
    for (int col = 0; col < sol.registry.columns(); ++col)
        if (!seen[col]) throw ValidationError("solution file: missing subset " + subset_key(sol.registry.subset(col)));
    std::optional<Rat> parsed_obj;
    if (j.contains("objective") && j["objective"].is_string())
        parsed_obj = parse_rational(j["objective"].get<std::string>());
    if (!parsed_obj) throw ValidationError("solution file: missing objective");
    sol.objective = *parsed_obj;
    check_sa_integrity(sol);
    return sol;
}

}  // namespace twsc
