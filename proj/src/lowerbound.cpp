#include "twsc/lowerbound.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>

namespace twsc {

namespace {

using Flow3 = std::vector<std::vector<std::vector<Rat>>>;

void validate_params(const HkParams& p) {
    if (p.k < 4 || p.k % 2 != 0) throw ValidationError("hard chain: k must be even and >= 4");
    if (p.N < 3) throw ValidationError("hard chain: need at least three transition steps");
    if (p.eps <= 0 || p.eps >= Rat(1, 2 * (p.N + p.k)))
        throw ValidationError("hard chain: eps must lie in (0, 1/(2(N+k)))");
}

}  // namespace

MarkovFlowGraph gen_hard_chain(const HkParams& p) {
    validate_params(p);
    const int k = p.k, N = p.N;
    const Rat& e = p.eps;
    MarkovFlowGraph g;
    g.mass.assign(N + 1, {});
    g.comp.assign(N + 1, {});
    g.mass[0] = {Rat(1, 2), Rat(1, 2)};
    g.comp[0] = {1, 0};
    g.comp[N] = {1, 0};
    for (int l = 1; l < N; ++l) {
        g.mass[l].assign(k, Rat(0));
        g.comp[l].resize(k);
        for (int v = 0; v < k; ++v) g.comp[l][v] = k - 1 - v;
    }
    g.cap.resize(N);
    g.cap[0].assign(2, std::vector<Rat>(k));
    for (int i = 1; i <= k - 2; ++i) {
        const Rat c = Rat(2) * e * (k - 1 - i) / (k - 1);
        g.cap[0][0][i] = c;
        g.cap[0][1][k - 1 - i] = c;
    }
    g.cap[0][0][0] = Rat(1, 2) - (k - 2) * e;
    g.cap[0][1][k - 1] = g.cap[0][0][0];
    for (int j = 1; j <= N - 2; ++j) {
        g.cap[j].assign(k, std::vector<Rat>(k));
        for (int i = 1; i <= k - 2; ++i) {
            g.cap[j][i - 1][i] += e;
            g.cap[j][i + 1][i] += e;
        }
        g.cap[j][0][0] = Rat(1, 2) - (j + k - 2) * e;
        g.cap[j][k - 1][k - 1] = g.cap[j][0][0];
        g.cap[j][1][1] += j * e;
        g.cap[j][k - 2][k - 2] += j * e;
    }
    // node masses follow from conservation
    g.mass[1] = {};
    for (int l = 1; l < N; ++l) {
        g.mass[l].assign(k, Rat(0));
        for (std::size_t a = 0; a < g.cap[l - 1].size(); ++a)
            for (int b = 0; b < k; ++b) g.mass[l][b] += g.cap[l - 1][a][b];
    }
    // each penultimate node hands its full mass to its side's sink
    g.cap[N - 1].assign(k, std::vector<Rat>(2));
    for (int i = 0; i < k / 2; ++i) {
        g.cap[N - 1][i][0] = g.mass[N - 1][i];
        g.cap[N - 1][k - 1 - i][1] = g.mass[N - 1][k - 1 - i];
    }
    g.mass[N] = {Rat(0), Rat(0)};
    for (int i = 0; i < k; ++i)
        for (int b = 0; b < 2; ++b) g.mass[N][b] += g.cap[N - 1][i][b];
    g.check_invariants();
    return g;
}

LayeredFlow staircase_flow(const HkParams& p) {
    validate_params(p);
    if (p.N <= p.k) throw ValidationError("staircase flow: N must exceed k");
    auto g = gen_hard_chain(p);
    const int k = p.k, N = p.N;
    LayeredFlow f;
    for (const auto& step : g.cap) {
        f.flow.emplace_back();
        for (const auto& row : step) f.flow.back().emplace_back(row.size());
    }
    auto state_at = [&](int j, int l) {
        if (l == 0) return 0;
        if (l == N) return 1;
        if (l <= j) return 0;
        if (l <= j + k - 2) return l - j;
        return k - 2;
    };
    for (int j = 1; j <= N - k; ++j)
        for (int l = 0; l < N; ++l) {
            const int a = state_at(j, l), b = state_at(j, l + 1);
            if (g.cap[l][a][b] == 0) throw IntegrityError("staircase flow: path uses a missing edge");
            f.flow[l][a][b] += p.eps;
        }
    f.value = Rat(N - k) * p.eps;
    validate_flow(g, f);
    return f;
}

namespace {

Flow3 mirror_flow(const MarkovFlowGraph& g, const Flow3& f) {
    Flow3 out;
    for (const auto& step : f) {
        out.emplace_back();
        for (const auto& row : step) out.back().emplace_back(row.size());
    }
    for (std::size_t s = 0; s < f.size(); ++s)
        for (std::size_t a = 0; a < f[s].size(); ++a)
            for (std::size_t b = 0; b < f[s][a].size(); ++b)
                out[s][g.comp[s][a]][g.comp[s + 1][b]] = f[s][a][b];
    return out;
}

// Path-weight accumulator: per step, per transition, per (f(s), f(t)) class.
struct PathTable {
    std::vector<std::vector<std::vector<std::array<Rat, 4>>>> w;

    explicit PathTable(const MarkovFlowGraph& g) {
        for (const auto& step : g.cap) {
            w.emplace_back();
            for (const auto& row : step)
                w.back().emplace_back(row.size());
        }
    }

    void record(const MarkovFlowGraph& g, const std::vector<int>& path, const Rat& weight) {
        // every recorded path is averaged with its complement image
        const Rat half = weight / 2;
        const int N = static_cast<int>(path.size()) - 1;
        const int cls = 2 * path[0] + path[N];
        const int mcls = 2 * (1 - path[0]) + (1 - path[N]);
        for (int l = 0; l < N; ++l) {
            w[l][path[l]][path[l + 1]][cls] += half;
            w[l][g.comp[l][path[l]]][g.comp[l + 1][path[l + 1]]][mcls] += half;
        }
    }

    // mass whose terminals disagree
    Rat opposite_mass() const {
        Rat total;
        for (const auto& row : w[0])
            for (const auto& cell : row) total += cell[1] + cell[2];
        return total;
    }
};

// Decompose a conserved nonnegative layered flow into paths and record each
// (with its mirror) into the table.
void strip_into(const MarkovFlowGraph& g, Flow3 m, PathTable& table) {
    const int N = static_cast<int>(m.size());
    while (true) {
        int start = -1;
        for (std::size_t a = 0; a < m[0].size() && start < 0; ++a)
            for (const auto& x : m[0][a])
                if (x > 0) {
                    start = static_cast<int>(a);
                    break;
                }
        if (start < 0) return;
        std::vector<int> path = {start};
        for (int l = 0; l < N; ++l) {
            int next = -1;
            for (std::size_t b = 0; b < m[l][path.back()].size() && next < 0; ++b)
                if (m[l][path.back()][b] > 0) next = static_cast<int>(b);
            if (next < 0) throw IntegrityError("flow decomposition: conservation broke mid-path");
            path.push_back(next);
        }
        Rat width = m[0][path[0]][path[1]];
        for (int l = 1; l < N; ++l) width = std::min(width, m[l][path[l]][path[l + 1]]);
        for (int l = 0; l < N; ++l) m[l][path[l]][path[l + 1]] -= width;
        table.record(g, path, width);
    }
}

Flow3 flow_difference(const Flow3& a, const Flow3& b, const char* what) {
    Flow3 out = a;
    for (std::size_t s = 0; s < a.size(); ++s)
        for (std::size_t i = 0; i < a[s].size(); ++i)
            for (std::size_t j = 0; j < a[s][i].size(); ++j) {
                out[s][i][j] -= b[s][i][j];
                if (out[s][i][j] < 0) throw IntegrityError(std::string(what) + ": negative residual");
            }
    return out;
}

Flow3 halve_sym(const MarkovFlowGraph& g, const Flow3& f) {
    Flow3 out = mirror_flow(g, f);
    for (std::size_t s = 0; s < f.size(); ++s)
        for (std::size_t a = 0; a < f[s].size(); ++a)
            for (std::size_t b = 0; b < f[s][a].size(); ++b)
                out[s][a][b] = (out[s][a][b] + f[s][a][b]) / 2;
    return out;
}

}  // namespace

GapInstance flows_to_gaps(const MarkovFlowGraph& g, const LayeredFlow& F, int r) {
    if (r < 1 || r > 5) throw ValidationError("flows_to_gaps: r must be in [1, 5]");
    g.check_invariants();
    const int N = g.layers() - 1;
    if (N < 2) throw ValidationError("flows_to_gaps: chain too short");
    for (int l = 1; l < N; ++l)
        if (g.width(l) > (1 << r))
            throw ValidationError("flows_to_gaps: a layer exceeds 2^r states");
    validate_flow(g, F);
    Rat stray;
    for (const auto& x : F.flow[0][g.comp[0][g.source()]]) stray += x;
    for (std::size_t a = 0; a < F.flow[N - 1].size(); ++a)
        stray += F.flow[N - 1][a][g.comp[N][g.sink()]];
    if (stray != 0)
        throw ValidationError("flows_to_gaps: F must route from s_0 to t_1 only");

    // decompose the full capacity into symmetric weighted paths:
    // F itself, then the residual's opposite-terminal part, then the rest
    PathTable table(g);
    strip_into(g, F.flow, table);
    Flow3 residual = flow_difference(g.cap, halve_sym(g, F.flow), "flows_to_gaps");
    MarkovFlowGraph rg = g;
    rg.cap = residual;
    auto opp = max_flow(rg);
    strip_into(g, opp.flow, table);
    residual = flow_difference(residual, halve_sym(g, opp.flow), "flows_to_gaps");
    strip_into(g, std::move(residual), table);
    const Rat opposite = table.opposite_mass();
    if (opposite < F.value) throw IntegrityError("flows_to_gaps: opposite mass fell below |F|");

    // assignment codes: complement state = bitwise complement
    const std::uint32_t full = (1u << r) - 1;
    std::vector<std::vector<std::uint32_t>> code(N + 1);
    code[0] = {0, 1};
    code[N] = {0, 1};
    if (g.source() == 1) std::swap(code[0][0], code[0][1]);
    if (g.sink() == 0) std::swap(code[N][0], code[N][1]);
    for (int l = 1; l < N; ++l) {
        code[l].assign(g.width(l), full + 1);
        std::set<std::uint32_t> used;
        for (int v = 0; v < g.width(l); ++v) {
            if (code[l][v] <= full) continue;
            std::uint32_t c = 0;
            while (used.count(c) || used.count(full ^ c)) ++c;
            code[l][v] = c;
            code[l][g.comp[l][v]] = full ^ c;
            used.insert(c);
            used.insert(full ^ c);
        }
    }

    // the instance: complete unit-capacity bags B'_i ∪ B'_{i+1} on a path
    GapInstance gap;
    gap.s = 0;
    gap.t = 1 + (N - 1) * r;
    const int n = 2 + (N - 1) * r;
    auto group = [&](int i) {  // vertices of B'_i
        VertexSet vs;
        if (i == 0) return VertexSet{gap.s};
        if (i == N) return VertexSet{gap.t};
        for (int q = 0; q < r; ++q) vs.push_back(1 + (i - 1) * r + q);
        return vs;
    };
    TreeDecomposition td;
    std::set<std::pair<int, int>> edge_set;
    for (int i = 0; i < N; ++i) {
        VertexSet bag = set_union(group(i), group(i + 1));
        for (std::size_t x = 0; x < bag.size(); ++x)
            for (std::size_t y = x + 1; y < bag.size(); ++y) edge_set.insert({bag[x], bag[y]});
        td.bags.push_back(std::move(bag));
        if (i > 0) td.tree_edges.push_back({i - 1, i});
    }
    std::vector<WeightedPair> edges;
    for (auto [u, v] : edge_set) edges.push_back({u, v, Rat(1)});
    gap.instance = Instance::create(n, std::move(edges), {{gap.s, gap.t, Rat(1)}});
    gap.decomposition = td;

    // local distribution per step over B_i ∪ {s,t}, then subset sums give ỹ
    auto registry = SaVariableRegistry::create(gap.instance, gap.decomposition);
    std::vector<VertexSet> ground(N);
    std::vector<std::vector<Rat>> zeta(N);
    for (int i = 0; i < N; ++i) {
        ground[i] = set_union(td.bags[i], VertexSet{gap.s, gap.t});
        zeta[i].assign(1u << ground[i].size(), Rat(0));
        auto pos = [&](Vertex v) {
            return std::lower_bound(ground[i].begin(), ground[i].end(), v) - ground[i].begin();
        };
        for (std::size_t a = 0; a < table.w[i].size(); ++a)
            for (std::size_t b = 0; b < table.w[i][a].size(); ++b)
                for (int cls = 0; cls < 4; ++cls) {
                    const Rat& weight = table.w[i][a][b][cls];
                    if (weight == 0) continue;
                    std::uint32_t mask = 0;
                    if (cls >> 1) mask |= 1u << pos(gap.s);
                    if (cls & 1) mask |= 1u << pos(gap.t);
                    auto set_group = [&](int gi, std::uint32_t c) {
                        if (gi == 0 || gi == N) return;
                        for (int q = 0; q < r; ++q)
                            if ((c >> q) & 1u) mask |= 1u << pos(1 + (gi - 1) * r + q);
                    };
                    set_group(i, code[i][a]);
                    set_group(i + 1, code[i + 1][b]);
                    zeta[i][mask] += weight;
                }
        // in-place superset sums: zeta[mask] = Pr[f = 1 on all of mask]
        for (std::size_t bit = 0; bit < ground[i].size(); ++bit)
            for (std::uint32_t mask = 0; mask < zeta[i].size(); ++mask)
                if (!(mask & (1u << bit))) zeta[i][mask] += zeta[i][mask | (1u << bit)];
    }

    std::map<VertexSet, int> step_of;
    for (int i = 0; i < N; ++i) step_of[ground[i]] = i;

    SaSolution sol;
    sol.mode = LpMode::rational;
    sol.values.resize(registry.columns());
    for (int col = 0; col < registry.columns(); ++col) {
        const auto& ms = registry.maximal_sets()[registry.owner_of(col)];
        auto it = step_of.find(ms);
        if (it == step_of.end())
            throw IntegrityError("flows_to_gaps: registry ground set has no matching bag");
        const int i = it->second;
        std::uint32_t mask = 0;
        for (Vertex v : registry.subset(col))
            mask |= 1u << (std::lower_bound(ground[i].begin(), ground[i].end(), v) -
                           ground[i].begin());
        sol.values[col] = zeta[i][mask] / opposite;  // scaled so normalization holds
    }
    sol.registry = std::move(registry);
    for (const auto& edge : gap.instance.edges) {
        const Rat yu = sol.y({edge.u}), yv = sol.y({edge.v});
        const Rat yuv = sol.y({edge.u, edge.v});
        sol.objective += edge.weight * (yu + yv - 2 * yuv);
    }
    gap.solution = std::move(sol);
    check_sa_integrity(gap.solution);
    return gap;
}

RoundingLossRow rounding_loss_report(int r) {
    if (r < 2) throw ValidationError("rounding loss report: r must be >= 2");
    RoundingLossRow row;
    row.r = r;
    row.k = 1 << r;
    row.N = 10 * row.k * row.k;
    row.eps = Rat(1, 4 * (row.N + row.k));
    HkParams params{row.k, row.N, row.eps};
    auto g = gen_hard_chain(params);
    auto f = staircase_flow(params);
    row.flow_value = f.value;
    auto gap = flows_to_gaps(g, f, r);
    row.y_sep = lp_distance(gap.solution, gap.s, gap.t);
    row.sep_prob = 2 * potentials(g).p_source_sink;
    row.ratio = row.sep_prob / row.y_sep;
    return row;
}

}  // namespace twsc
