#include "twsc/instances.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <iterator>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>

namespace twsc {

VertexSet canonical_set(VertexSet vertices) {
    std::sort(vertices.begin(), vertices.end());
    vertices.erase(std::unique(vertices.begin(), vertices.end()), vertices.end());
    return vertices;
}

bool set_contains(const VertexSet& set, Vertex v) {
    return std::binary_search(set.begin(), set.end(), v);
}

VertexSet set_union(const VertexSet& a, const VertexSet& b) {
    VertexSet out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

VertexSet set_intersect(const VertexSet& a, const VertexSet& b) {
    VertexSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

VertexSet set_minus(const VertexSet& a, const VertexSet& b) {
    VertexSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

bool is_subset(const VertexSet& a, const VertexSet& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

namespace {

void check_pairs(int n, std::vector<WeightedPair>& pairs, bool merge_duplicates, const char* what) {
    for (auto& p : pairs) {
        if (p.u == p.v) throw ValidationError(std::string(what) + ": self-loop at vertex " + std::to_string(p.u));
        if (p.u < 0 || p.v < 0 || p.u >= n || p.v >= n)
            throw ValidationError(std::string(what) + ": vertex id out of range");
        if (p.weight < 0) throw ValidationError(std::string(what) + ": negative weight");
        if (p.u > p.v) std::swap(p.u, p.v);
    }
    std::sort(pairs.begin(), pairs.end(),
              [](const WeightedPair& a, const WeightedPair& b) { return std::tie(a.u, a.v) < std::tie(b.u, b.v); });
    std::vector<WeightedPair> merged;
    for (auto& p : pairs) {
        if (!merged.empty() && merged.back().u == p.u && merged.back().v == p.v) {
            if (!merge_duplicates)
                throw ValidationError(std::string(what) + ": duplicate pair (" + std::to_string(p.u) + "," +
                                      std::to_string(p.v) + ")");
            merged.back().weight += p.weight;
        } else {
            merged.push_back(p);
        }
    }
    pairs = std::move(merged);
}

}  // namespace

Instance Instance::create(int n, std::vector<WeightedPair> edges, std::vector<WeightedPair> demands) {
    if (n < 1) throw ValidationError("instance: n must be >= 1");
    check_pairs(n, edges, /*merge_duplicates=*/false, "edges");
    check_pairs(n, demands, /*merge_duplicates=*/true, "demands");
    // Zero-weight demands would create degenerate rows downstream; drop them.
    std::erase_if(demands, [](const WeightedPair& d) { return d.weight == 0; });
    if (demands.empty()) throw ValidationError("instance: needs at least one positive-weight demand");
    Instance inst;
    inst.n = n;
    inst.edges = std::move(edges);
    inst.demands = std::move(demands);
    return inst;
}

int TreeDecomposition::width() const {
    std::size_t largest = 0;
    for (const auto& bag : bags) largest = std::max(largest, bag.size());
    return static_cast<int>(largest) - 1;
}

DecompositionReport validate_decomposition(const Instance& inst, const TreeDecomposition& td) {
    DecompositionReport report;
    report.width = td.width();
    auto violate = [&report](const std::string& what) { report.violations.push_back({what}); };

    const int m = static_cast<int>(td.bags.size());
    if (m == 0) {
        violate("no bags");
        return report;
    }
    for (int i = 0; i < m; ++i) {
        for (Vertex v : td.bags[i])
            if (v < 0 || v >= inst.n) violate("bag " + std::to_string(i) + " contains invalid vertex " + std::to_string(v));
    }

    // Tree-ness: m-1 edges, valid endpoints, connected.
    bool edges_ok = true;
    std::vector<std::vector<int>> adj(m);
    for (const auto& [a, b] : td.tree_edges) {
        if (a < 0 || b < 0 || a >= m || b >= m || a == b) {
            violate("bad tree edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
            edges_ok = false;
            continue;
        }
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    if (static_cast<int>(td.tree_edges.size()) != m - 1) {
        violate("tree has " + std::to_string(td.tree_edges.size()) + " edges, expected " + std::to_string(m - 1));
        edges_ok = false;
    }
    if (edges_ok) {
        std::vector<char> seen(m, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        int count = 0;
        while (!q.empty()) {
            int b = q.front();
            q.pop();
            ++count;
            for (int c : adj[b])
                if (!seen[c]) {
                    seen[c] = 1;
                    q.push(c);
                }
        }
        if (count != m) violate("bag tree is disconnected");
    }

    // Property (i)/(iii): coverage and connected subtree per vertex.
    for (Vertex v = 0; v < inst.n; ++v) {
        std::vector<int> holders;
        for (int i = 0; i < m; ++i)
            if (set_contains(td.bags[i], v)) holders.push_back(i);
        if (holders.empty()) {
            violate("vertex " + std::to_string(v) + " appears in no bag");
            continue;
        }
        if (!edges_ok) continue;
        std::vector<char> in_holders(m, 0), seen(m, 0);
        for (int i : holders) in_holders[i] = 1;
        std::queue<int> q;
        q.push(holders[0]);
        seen[holders[0]] = 1;
        int count = 0;
        while (!q.empty()) {
            int b = q.front();
            q.pop();
            ++count;
            for (int c : adj[b])
                if (in_holders[c] && !seen[c]) {
                    seen[c] = 1;
                    q.push(c);
                }
        }
        if (count != static_cast<int>(holders.size()))
            violate("bags containing vertex " + std::to_string(v) + " are not connected in the tree");
    }

    // Property (ii): every edge inside some bag.
    for (const auto& e : inst.edges) {
        bool covered = false;
        for (const auto& bag : td.bags)
            if (set_contains(bag, e.u) && set_contains(bag, e.v)) {
                covered = true;
                break;
            }
        if (!covered) violate("edge (" + std::to_string(e.u) + "," + std::to_string(e.v) + ") covered by no bag");
    }

    report.valid = report.violations.empty();
    return report;
}

VertexSet Assignment::side0() const {
    VertexSet out;
    for (Vertex v = 0; v < static_cast<Vertex>(labels.size()); ++v)
        if (labels[v] == 0) out.push_back(v);
    return out;
}

CutReport evaluate_cut(const Instance& inst, const VertexSet& side0) {
    for (Vertex v : side0)
        if (v < 0 || v >= inst.n) throw ValidationError("evaluate_cut: vertex " + std::to_string(v) + " out of range");
    CutReport report;
    report.side0 = canonical_set(side0);
    auto separated = [&report](const WeightedPair& p) {
        return set_contains(report.side0, p.u) != set_contains(report.side0, p.v);
    };
    for (const auto& e : inst.edges)
        if (separated(e)) report.cut_capacity += e.weight;
    for (const auto& d : inst.demands)
        if (separated(d)) report.cut_demand += d.weight;
    report.feasible = report.cut_demand > 0;
    if (report.feasible) report.sparsity = report.cut_capacity / report.cut_demand;
    return report;
}

int oracle_guard(int fallback) {
    if (const char* env = std::getenv("TWSC_GUARD_N")) {
        char* end = nullptr;
        long parsed = std::strtol(env, &end, 10);
        if (end && *end == '\0' && parsed > 0) return static_cast<int>(parsed);
    }
    return fallback;
}

CutReport brute_force_sparsest_cut(const Instance& inst, int max_n) {
    if (inst.n > max_n)
        throw ValidationError("brute_force_sparsest_cut: n=" + std::to_string(inst.n) + " exceeds guard " +
                              std::to_string(max_n));
    if (inst.n < 2) throw ValidationError("brute_force_sparsest_cut: n < 2 has no nontrivial cut");
    bool found = false;
    CutReport best;
    // Vertex 0 stays on side 0, so each mask over vertices 1..n-1 is one
    // bipartition; the all-ones mask is the trivial full cut.
    const std::uint32_t limit = 1u << (inst.n - 1);
    for (std::uint32_t mask = 0; mask + 1 < limit; ++mask) {
        VertexSet side0 = {0};
        for (int v = 1; v < inst.n; ++v)
            if (mask & (1u << (v - 1))) side0.push_back(v);
        CutReport cur = evaluate_cut(inst, side0);
        if (!cur.feasible) continue;
        if (!found || cur.sparsity < best.sparsity ||
            (cur.sparsity == best.sparsity && cur.side0 < best.side0)) {
            best = std::move(cur);
            found = true;
        }
    }
    if (!found) throw ValidationError("brute_force_sparsest_cut: no cut separates a positive demand");
    return best;
}

MaxcutReduction maxcut_reduction(const SimpleGraph& g) {
    if (g.n < 2) throw ValidationError("maxcut_reduction: need n >= 2");
    for (const auto& [u, v] : g.edges)
        if (u == v || u < 0 || v < 0 || u >= g.n || v >= g.n)
            throw ValidationError("maxcut_reduction: bad edge");
    MaxcutReduction red;
    red.s = g.n;
    red.t = g.n + 1;
    std::vector<WeightedPair> edges, demands;
    for (Vertex v = 0; v < g.n; ++v) {
        edges.push_back({v, red.s, Rat(1)});
        edges.push_back({v, red.t, Rat(1)});
    }
    for (const auto& [u, v] : g.edges) demands.push_back({u, v, Rat(1)});
    const Rat n3 = Rat(g.n) * g.n * g.n;
    demands.push_back({red.s, red.t, n3});
    red.instance = Instance::create(g.n + 2, std::move(edges), std::move(demands));
    for (Vertex v = 0; v < g.n; ++v) {
        red.decomposition.bags.push_back(canonical_set({v, red.s, red.t}));
        if (v > 0) red.decomposition.tree_edges.emplace_back(v - 1, v);
    }
    return red;
}

namespace {

double uniform01(std::mt19937_64& rng) {
    // Engine-only construction keeps outputs identical across standard
    // library implementations.
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive range
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

}  // namespace

GeneratedInstance gen_partial_ktree(int n, int r, double keep_prob, std::uint64_t seed) {
    if (r < 0 || n < r + 1) throw ValidationError("gen_partial_ktree: need n >= r+1, r >= 0");
    if (keep_prob < 0.0 || keep_prob > 1.0) throw ValidationError("gen_partial_ktree: keep_prob must be in [0,1]");
    std::mt19937_64 rng(seed);

    TreeDecomposition td;
    std::vector<std::pair<Vertex, Vertex>> ktree_edges;
    VertexSet base;
    for (Vertex v = 0; v <= r; ++v) base.push_back(v);
    td.bags.push_back(base);
    for (Vertex u = 0; u <= r; ++u)
        for (Vertex v = u + 1; v <= r; ++v) ktree_edges.emplace_back(u, v);
    for (Vertex v = r + 1; v < n; ++v) {
        int parent = uniform_int(rng, 0, static_cast<int>(td.bags.size()) - 1);
        VertexSet bag = td.bags[parent];
        bag.erase(bag.begin() + uniform_int(rng, 0, r));  // drop one, keep an r-clique
        for (Vertex u : bag) ktree_edges.emplace_back(std::min(u, v), std::max(u, v));
        bag.push_back(v);
        td.bags.push_back(canonical_set(bag));
        td.tree_edges.emplace_back(parent, static_cast<int>(td.bags.size()) - 1);
    }

    std::vector<WeightedPair> edges;
    for (const auto& [u, v] : ktree_edges) {
        if (keep_prob < 1.0 && uniform01(rng) >= keep_prob) continue;
        edges.push_back({u, v, Rat(uniform_int(rng, 4, 40)) / 4});  // capacities in [1, 10]
    }

    std::vector<std::pair<Vertex, Vertex>> all_pairs;
    for (Vertex u = 0; u < n; ++u)
        for (Vertex v = u + 1; v < n; ++v) all_pairs.emplace_back(u, v);
    // Fisher-Yates with the explicit engine, for cross-platform determinism.
    for (std::size_t i = all_pairs.size(); i > 1; --i)
        std::swap(all_pairs[i - 1], all_pairs[rng() % i]);
    const int want = (n + 1) / 2;
    std::vector<WeightedPair> demands;
    for (int i = 0; i < want && i < static_cast<int>(all_pairs.size()); ++i)
        demands.push_back({all_pairs[i].first, all_pairs[i].second, Rat(1)});

    GeneratedInstance out;
    out.instance = Instance::create(n, std::move(edges), std::move(demands));
    out.decomposition = std::move(td);
    return out;
}

namespace {

// Vertices outside T (and != v) reachable from v via interior vertices in T.
std::uint32_t reach_through(const std::vector<std::uint32_t>& adj, int n, std::uint32_t T, int v) {
    std::uint32_t seen = 1u << v;
    std::uint32_t frontier = adj[v];
    std::uint32_t result = adj[v] & ~T & ~seen;
    std::uint32_t inside = frontier & T & ~seen;
    while (inside) {
        int w = std::countr_zero(inside);
        seen |= 1u << w;
        result |= adj[w] & ~T & ~(1u << v);
        inside = (inside | (adj[w] & T)) & ~seen;
    }
    return result;
}

}  // namespace

std::optional<TreeDecomposition> find_decomposition_small(const Instance& inst, int r, int max_n) {
    const int n = inst.n;
    if (n > max_n)
        throw ValidationError("find_decomposition_small: n=" + std::to_string(n) + " exceeds guard " +
                              std::to_string(max_n));
    if (r < 0) return std::nullopt;

    std::vector<std::uint32_t> adj(n, 0);
    for (const auto& e : inst.edges) {
        adj[e.u] |= 1u << e.v;
        adj[e.v] |= 1u << e.u;
    }

    // reachable[S] = true when S can be eliminated (in some order) with every
    // vertex having <= r not-yet-eliminated neighbors at its turn.
    const std::uint32_t full = (n == 32) ? ~0u : ((1u << n) - 1);
    std::vector<char> ok(full + 1, 0);
    ok[0] = 1;
    for (std::uint32_t S = 1; S <= full; ++S) {
        for (std::uint32_t rest = S; rest; rest &= rest - 1) {
            int v = std::countr_zero(rest);
            std::uint32_t prev = S & ~(1u << v);
            if (!ok[prev]) continue;
            if (std::popcount(reach_through(adj, n, prev, v)) <= r) {
                ok[S] = 1;
                break;
            }
        }
    }
    if (!ok[full]) return std::nullopt;

    // Reconstruct an elimination order (order[p] eliminated p-th).
    std::vector<int> order(n);
    std::uint32_t S = full;
    for (int p = n - 1; p >= 0; --p) {
        for (std::uint32_t rest = S; rest; rest &= rest - 1) {
            int v = std::countr_zero(rest);
            std::uint32_t prev = S & ~(1u << v);
            if (ok[prev] && std::popcount(reach_through(adj, n, prev, v)) <= r) {
                order[p] = v;
                S = prev;
                break;
            }
        }
    }

    // Bag of order[p] is itself plus its later "fill" neighbors; the parent is
    // the bag of the earliest-eliminated of those neighbors.
    TreeDecomposition td;
    std::vector<int> position(n), bag_of(n);
    for (int p = 0; p < n; ++p) position[order[p]] = p;
    std::uint32_t prefix = 0;
    for (int p = 0; p < n; ++p) {
        int v = order[p];
        std::uint32_t later = reach_through(adj, n, prefix, v);
        VertexSet bag = {v};
        for (std::uint32_t rest = later; rest; rest &= rest - 1) bag.push_back(std::countr_zero(rest));
        bag_of[v] = static_cast<int>(td.bags.size());
        td.bags.push_back(canonical_set(bag));
        prefix |= 1u << v;
    }
    // Second pass for tree edges now that every bag index exists.
    prefix = 0;
    for (int p = 0; p < n; ++p) {
        int v = order[p];
        std::uint32_t later = reach_through(adj, n, prefix, v);
        prefix |= 1u << v;
        int parent_vertex = -1;
        for (std::uint32_t rest = later; rest; rest &= rest - 1) {
            int w = std::countr_zero(rest);
            if (parent_vertex == -1 || position[w] < position[parent_vertex]) parent_vertex = w;
        }
        if (parent_vertex >= 0) {
            td.tree_edges.emplace_back(bag_of[v], bag_of[parent_vertex]);
        } else if (p + 1 < n) {
            // Isolated remainder (disconnected graph or last vertex of a
            // component): attach to the next eliminated vertex's bag.
            td.tree_edges.emplace_back(bag_of[v], bag_of[order[p + 1]]);
        }
    }

    // Contract bags subsumed by a neighbor (the elimination construction
    // produces nested tails); keeps K_{r+1} at a single bag.
    bool changed = true;
    while (changed && td.bags.size() > 1) {
        changed = false;
        for (std::size_t e = 0; e < td.tree_edges.size() && !changed; ++e) {
            auto [a, b] = td.tree_edges[e];
            int victim = -1, keeper = -1;
            if (is_subset(td.bags[a], td.bags[b])) victim = a, keeper = b;
            else if (is_subset(td.bags[b], td.bags[a])) victim = b, keeper = a;
            if (victim < 0) continue;
            td.tree_edges.erase(td.tree_edges.begin() + static_cast<std::ptrdiff_t>(e));
            const int last = static_cast<int>(td.bags.size()) - 1;
            for (auto& [x, y] : td.tree_edges) {
                if (x == victim) x = keeper;
                if (y == victim) y = keeper;
                if (x == last) x = victim;  // move last bag into the vacated slot
                if (y == last) y = victim;
            }
            if (keeper == last) keeper = victim;
            td.bags[victim] = std::move(td.bags[last]);
            td.bags.pop_back();
            changed = true;
        }
    }

    auto report = validate_decomposition(inst, td);
    if (!report.valid || report.width > r)
        throw IntegrityError("find_decomposition_small: reconstruction produced an invalid decomposition");
    return td;
}

}  // namespace twsc
