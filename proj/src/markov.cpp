#include "twsc/markov.hpp"

#include <algorithm>
#include <queue>
#include <random>
#include <set>

#include "twsc/io.hpp"

namespace twsc {

namespace {

Rat rat_abs(const Rat& x) { return x < 0 ? Rat(-x) : x; }

bool within(const Rat& got, const Rat& want, double tol) {
    if (tol == 0.0) return got == want;
    return std::abs(to_double(Rat(got - want))) <= tol;
}

}  // namespace

int MarkovFlowGraph::max_interior_width() const {
    int w = 0;
    for (int l = 1; l + 1 < layers(); ++l) w = std::max(w, width(l));
    return std::max(w, 2);
}

void MarkovFlowGraph::check_invariants(double tol) const {
    if (layers() < 2 || cap.size() + 1 != mass.size() || comp.size() != mass.size())
        throw IntegrityError("chain: inconsistent layer shapes");
    if (width(0) != 2 || width(layers() - 1) != 2)
        throw IntegrityError("chain: endpoint layers must hold exactly two states");
    if (!within(mass[0][0], Rat(1, 2), tol) || !within(mass[0][1], Rat(1, 2), tol))
        throw IntegrityError("chain: source states must each carry mass 1/2");
    for (int l = 0; l < layers(); ++l) {
        if (static_cast<int>(comp[l].size()) != width(l))
            throw IntegrityError("chain: involution size mismatch");
        for (int v = 0; v < width(l); ++v) {
            int c = comp[l][v];
            if (c < 0 || c >= width(l) || c == v || comp[l][c] != v)
                throw IntegrityError("chain: complement map is not an involution");
            if (!within(mass[l][v], mass[l][c], tol))
                throw IntegrityError("chain: mass symmetry violated");
            if (mass[l][v] <= 0) throw IntegrityError("chain: nonpositive state mass");
        }
    }
    for (std::size_t s = 0; s < cap.size(); ++s) {
        const int w1 = width(static_cast<int>(s)), w2 = width(static_cast<int>(s) + 1);
        if (static_cast<int>(cap[s].size()) != w1) throw IntegrityError("chain: step shape mismatch");
        for (int a = 0; a < w1; ++a) {
            if (static_cast<int>(cap[s][a].size()) != w2) throw IntegrityError("chain: step shape mismatch");
            Rat out;
            for (int b = 0; b < w2; ++b) {
                if (cap[s][a][b] < (tol == 0.0 ? Rat(0) : rational_from_double(-tol)))
                    throw IntegrityError("chain: negative capacity");
                if (!within(cap[s][a][b], cap[s][comp[s][a]][comp[s + 1][b]], tol))
                    throw IntegrityError("chain: capacity symmetry violated");
                out += cap[s][a][b];
            }
            if (!within(out, mass[s][a], tol)) throw IntegrityError("chain: out-flow conservation violated");
        }
        for (int b = 0; b < w2; ++b) {
            Rat in;
            for (int a = 0; a < w1; ++a) in += cap[s][a][b];
            if (!within(in, mass[s + 1][b], tol)) throw IntegrityError("chain: in-flow conservation violated");
        }
    }
}

MarkovFlowGraph MarkovFlowGraph::from_chain(const SeparatorChain& chain) {
    MarkovFlowGraph g;
    g.mass = chain.mass;
    g.cap = chain.joint;
    g.separators = chain.separators;
    g.state_masks.reserve(chain.states.size());
    for (const auto& layer : chain.states)
        g.state_masks.emplace_back(layer.begin(), layer.end());
    for (int l = 0; l < g.layers(); ++l) {
        const std::uint32_t full = (1u << chain.separators[l].size()) - 1;
        std::vector<int> inv(g.width(l), -1);
        for (int v = 0; v < g.width(l); ++v) {
            const std::uint32_t want = full ^ g.state_masks[l][v];
            for (int c = 0; c < g.width(l); ++c)
                if (g.state_masks[l][c] == want) inv[v] = c;
            if (inv[v] < 0)
                throw IntegrityError("chain: support is not closed under assignment complement");
        }
        g.comp.push_back(std::move(inv));
    }
    return g;
}

MarkovFlowGraph build_chain(const SaSolution& sol, const TreeDecomposition& td, Vertex i, Vertex j) {
    auto g = MarkovFlowGraph::from_chain(build_separator_chain(td, sol, i, j));
    g.check_invariants(sol.mode == LpMode::rational ? 0.0 : 1e-6);
    return g;
}

void validate_flow(const MarkovFlowGraph& g, const LayeredFlow& f, double tol) {
    if (f.flow.size() != g.cap.size()) throw IntegrityError("flow: step count mismatch");
    const Rat low = tol == 0.0 ? Rat(0) : rational_from_double(-tol);
    for (std::size_t s = 0; s < g.cap.size(); ++s)
        for (std::size_t a = 0; a < g.cap[s].size(); ++a)
            for (std::size_t b = 0; b < g.cap[s][a].size(); ++b) {
                if (f.flow[s][a][b] < low) throw IntegrityError("flow: negative edge flow");
                if (Rat(f.flow[s][a][b] - g.cap[s][a][b]) > Rat(-low))
                    throw IntegrityError("flow: capacity exceeded");
            }
    for (int l = 1; l + 1 < g.layers(); ++l)
        for (int v = 0; v < g.width(l); ++v) {
            Rat in, out;
            for (std::size_t a = 0; a < g.cap[l - 1].size(); ++a) in += f.flow[l - 1][a][v];
            for (std::size_t b = 0; b < g.cap[l][v].size(); ++b) out += f.flow[l][v][b];
            if (!within(in, out, tol)) throw IntegrityError("flow: interior conservation violated");
        }
    Rat value;
    for (const auto& x : f.flow[0][g.source()]) value += x;
    if (!within(value, f.value, tol)) throw IntegrityError("flow: declared value mismatch");
}

LayeredFlow lp_flow(const SaSolution& sol, const SeparatorChain& chain) {
    LayeredFlow f;
    f.value = y_tilde_pair(sol, {chain.i}, {chain.j});
    for (std::size_t s = 0; s + 1 < chain.separators.size(); ++s) {
        const auto& Sa = chain.separators[s];
        const auto& Sb = chain.separators[s + 1];
        std::vector<std::vector<Rat>> mat(chain.states[s].size(),
                                          std::vector<Rat>(chain.states[s + 1].size()));
        for (std::size_t a = 0; a < chain.states[s].size(); ++a)
            for (std::size_t b = 0; b < chain.states[s + 1].size(); ++b) {
                std::map<Vertex, int> label = {{chain.i, 0}, {chain.j, 1}};
                bool consistent = true;
                auto place = [&](Vertex v, int bit) {
                    auto [it, fresh] = label.emplace(v, bit);
                    consistent &= fresh || it->second == bit;
                };
                for (std::size_t p = 0; p < Sa.size(); ++p)
                    place(Sa[p], (chain.states[s][a] >> p) & 1u);
                for (std::size_t p = 0; p < Sb.size(); ++p)
                    place(Sb[p], (chain.states[s + 1][b] >> p) & 1u);
                if (consistent) {
                    VertexSet zeros, ones;
                    for (const auto& [v, bit] : label) (bit ? ones : zeros).push_back(v);
                    mat[a][b] = y_tilde_pair(sol, zeros, ones);
                }
            }
        f.flow.push_back(std::move(mat));
    }
    auto g = MarkovFlowGraph::from_chain(chain);
    validate_flow(g, f, sol.mode == LpMode::rational ? 0.0 : 1e-6);
    return f;
}

PotentialProfile potentials(const MarkovFlowGraph& g) {
    PotentialProfile prof;
    // q[v] = Pr[X_0 = s_0 and X_l = v], propagated by the Markov transitions
    std::vector<Rat> q(2);
    q[g.source()] = g.mass[0][g.source()];
    for (int l = 0;; ++l) {
        std::vector<Rat> a(g.width(l));
        Rat mean, sq;
        for (int v = 0; v < g.width(l); ++v) {
            a[v] = q[v] / g.mass[l][v] - Rat(1, 2);
            mean += g.mass[l][v] * a[v];
            sq += g.mass[l][v] * a[v] * a[v];
        }
        prof.phi.push_back(sq - mean * mean);
        prof.A.push_back(std::move(a));
        if (l + 1 == g.layers()) break;
        std::vector<Rat> next(g.width(l + 1));
        for (int v = 0; v < g.width(l); ++v) {
            if (q[v] == 0) continue;
            const Rat scale = q[v] / g.mass[l][v];
            for (int w = 0; w < g.width(l + 1); ++w)
                if (g.cap[l][v][w] != 0) next[w] += scale * g.cap[l][v][w];
        }
        q = std::move(next);
    }
    prof.p_source_sink = q[g.sink()];
    return prof;
}

std::vector<std::vector<Rat>> joint_between(const MarkovFlowGraph& g, int l1, int l2) {
    if (l1 < 0 || l2 <= l1 || l2 >= g.layers()) throw ValidationError("joint_between: bad layer pair");
    std::vector<std::vector<Rat>> j(g.width(l1), std::vector<Rat>(g.width(l1)));
    for (int v = 0; v < g.width(l1); ++v) j[v][v] = g.mass[l1][v];
    for (int l = l1; l < l2; ++l) {
        std::vector<std::vector<Rat>> next(g.width(l1), std::vector<Rat>(g.width(l + 1)));
        for (int u = 0; u < g.width(l1); ++u)
            for (int v = 0; v < g.width(l); ++v) {
                if (j[u][v] == 0) continue;
                const Rat scale = j[u][v] / g.mass[l][v];
                for (int w = 0; w < g.width(l + 1); ++w)
                    if (g.cap[l][v][w] != 0) next[u][w] += scale * g.cap[l][v][w];
            }
        j = std::move(next);
    }
    return j;
}

Rat a_stochastic_gap(const MarkovFlowGraph& g, const PotentialProfile& prof, int l1, int l2) {
    auto j = joint_between(g, l1, l2);
    Rat worst;
    for (int v = 0; v < g.width(l2); ++v) {
        Rat mass, acc;
        for (int u = 0; u < g.width(l1); ++u) {
            mass += j[u][v];
            acc += j[u][v] * prof.A[l1][u];
        }
        if (mass == 0) continue;
        worst = std::max(worst, rat_abs(Rat(prof.A[l2][v] - acc / mass)));
    }
    return worst;
}

PotentialDrop potential_drop_identity(const MarkovFlowGraph& g, int l1, int l2) {
    auto prof = potentials(g);
    auto j = joint_between(g, l1, l2);
    PotentialDrop d;
    d.lhs = prof.phi[l1] - prof.phi[l2];
    for (int u = 0; u < g.width(l1); ++u)
        for (int v = 0; v < g.width(l2); ++v) {
            const Rat diff = prof.A[l1][u] - prof.A[l2][v];
            d.rhs += j[u][v] * diff * diff;
        }
    d.difference = d.lhs - d.rhs;
    return d;
}

namespace {

struct FlowNet {
    struct Arc {
        int to;
        Rat residual;
        int rev;
        int step = -1, from_state = -1, to_state = -1;  // forward arcs only
        Rat original;
    };
    std::vector<std::vector<Arc>> adj;
    std::vector<int> offset;
    int source = 0, sink = 0;

    FlowNet(const MarkovFlowGraph& g, const std::set<ChainEdge>& removed) {
        offset.resize(g.layers());
        int n = 0;
        for (int l = 0; l < g.layers(); ++l) {
            offset[l] = n;
            n += g.width(l);
        }
        adj.resize(n);
        source = offset[0] + g.source();
        sink = offset[g.layers() - 1] + g.sink();
        for (std::size_t s = 0; s < g.cap.size(); ++s)
            for (std::size_t a = 0; a < g.cap[s].size(); ++a)
                for (std::size_t b = 0; b < g.cap[s][a].size(); ++b) {
                    if (g.cap[s][a][b] == 0) continue;
                    if (removed.count({static_cast<int>(s), static_cast<int>(a), static_cast<int>(b)}))
                        continue;
                    const int u = offset[s] + static_cast<int>(a);
                    const int v = offset[s + 1] + static_cast<int>(b);
                    Arc fwd{v, g.cap[s][a][b], static_cast<int>(adj[v].size()),
                            static_cast<int>(s), static_cast<int>(a), static_cast<int>(b),
                            g.cap[s][a][b]};
                    Arc bwd{u, Rat(0), static_cast<int>(adj[u].size())};
                    adj[u].push_back(std::move(fwd));
                    adj[v].push_back(std::move(bwd));
                }
    }

    Rat run() {
        Rat total;
        while (true) {
            std::vector<std::pair<int, int>> parent(adj.size(), {-1, -1});
            std::queue<int> q;
            q.push(source);
            parent[source] = {source, 0};
            while (!q.empty() && parent[sink].first < 0) {
                int u = q.front();
                q.pop();
                for (std::size_t i = 0; i < adj[u].size(); ++i) {
                    const auto& arc = adj[u][i];
                    if (arc.residual == 0 || parent[arc.to].first >= 0) continue;
                    parent[arc.to] = {u, static_cast<int>(i)};
                    q.push(arc.to);
                }
            }
            if (parent[sink].first < 0) return total;
            Rat bottleneck;
            bool first = true;
            for (int v = sink; v != source;) {
                auto [u, i] = parent[v];
                if (first || adj[u][i].residual < bottleneck) bottleneck = adj[u][i].residual;
                first = false;
                v = u;
            }
            for (int v = sink; v != source;) {
                auto [u, i] = parent[v];
                adj[u][i].residual -= bottleneck;
                adj[v][adj[u][i].rev].residual += bottleneck;
                v = u;
            }
            total += bottleneck;
        }
    }
};

}  // namespace

MaxFlowResult max_flow(const MarkovFlowGraph& g, const std::vector<ChainEdge>& removed) {
    std::set<ChainEdge> gone(removed.begin(), removed.end());
    FlowNet net(g, gone);
    MaxFlowResult res;
    res.value = net.run();
    // min cut: forward arcs leaving the residual-reachable side
    std::vector<char> reach(net.adj.size(), 0);
    std::queue<int> q;
    q.push(net.source);
    reach[net.source] = 1;
    while (!q.empty()) {
        int u = q.front();
        q.pop();
        for (const auto& arc : net.adj[u])
            if (arc.residual != 0 && !reach[arc.to]) {
                reach[arc.to] = 1;
                q.push(arc.to);
            }
    }
    for (std::size_t u = 0; u < net.adj.size(); ++u) {
        if (!reach[u]) continue;
        for (const auto& arc : net.adj[u]) {
            if (arc.step < 0 || reach[arc.to]) continue;
            res.min_cut.emplace_back(arc.step, arc.from_state, arc.to_state);
            res.min_cut_capacity += arc.original;
        }
    }
    if (res.min_cut_capacity != res.value)
        throw IntegrityError("max_flow: min-cut certificate does not match the flow value");
    for (const auto& step : g.cap) {
        res.flow.emplace_back();
        for (const auto& row : step) res.flow.back().emplace_back(row.size());
    }
    for (const auto& arcs : net.adj)
        for (const auto& arc : arcs)
            if (arc.step >= 0)
                res.flow[arc.step][arc.from_state][arc.to_state] = arc.original - arc.residual;
    return res;
}

namespace {

struct Cluster {
    std::vector<int> states;  // sorted by (A, state id)
    Rat lo, hi;               // A^- and A^+
};

class CutRunner {
public:
    CutRunner(const MarkovFlowGraph& g, const PotentialProfile& prof, ClusterCut& out)
        : g_(g), prof_(prof), out_(out) {}

    void remove_node(int layer, int state) {
        for (int b = 0; b < g_.width(layer + 1); ++b)
            if (g_.cap[layer][state][b] != 0) removed_.insert({layer, state, b});
    }

    void remove_long_edges(const Rat& threshold) {
        for (std::size_t s = 0; s < g_.cap.size(); ++s)
            for (std::size_t a = 0; a < g_.cap[s].size(); ++a)
                for (std::size_t b = 0; b < g_.cap[s][a].size(); ++b) {
                    if (g_.cap[s][a][b] == 0) continue;
                    if (rat_abs(Rat(prof_.A[s][a] - prof_.A[s + 1][b])) >= threshold)
                        removed_.insert({static_cast<int>(s), static_cast<int>(a),
                                         static_cast<int>(b)});
                }
    }

    // viable = on a live directed s_0 -> t_1 path
    std::vector<std::vector<char>> viability() const {
        const int L = g_.layers();
        std::vector<std::vector<char>> fwd(L), bwd(L), viable(L);
        for (int l = 0; l < L; ++l) {
            fwd[l].assign(g_.width(l), 0);
            bwd[l].assign(g_.width(l), 0);
            viable[l].assign(g_.width(l), 0);
        }
        fwd[0][g_.source()] = 1;
        for (int l = 0; l + 1 < L; ++l)
            for (int a = 0; a < g_.width(l); ++a) {
                if (!fwd[l][a]) continue;
                for (int b = 0; b < g_.width(l + 1); ++b)
                    if (alive(l, a, b)) fwd[l + 1][b] = 1;
            }
        bwd[L - 1][g_.sink()] = 1;
        for (int l = L - 2; l >= 0; --l)
            for (int a = 0; a < g_.width(l); ++a)
                for (int b = 0; b < g_.width(l + 1); ++b)
                    if (bwd[l + 1][b] && alive(l, a, b)) bwd[l][a] = 1;
        for (int l = 0; l < L; ++l)
            for (int v = 0; v < g_.width(l); ++v) viable[l][v] = fwd[l][v] && bwd[l][v];
        return viable;
    }

    bool connected() const {
        auto v = viability();
        return v[g_.layers() - 1][g_.sink()] != 0;
    }

    std::vector<Cluster> layer_clusters(const std::vector<char>& viable, int layer,
                                        const Rat& threshold) const {
        std::vector<int> states;
        for (int v = 0; v < g_.width(layer); ++v)
            if (viable[v]) states.push_back(v);
        std::sort(states.begin(), states.end(), [&](int a, int b) {
            if (prof_.A[layer][a] != prof_.A[layer][b]) return prof_.A[layer][a] < prof_.A[layer][b];
            return a < b;
        });
        std::vector<Cluster> clusters;
        for (int v : states) {
            if (!clusters.empty() &&
                Rat(prof_.A[layer][v] - clusters.back().hi) <= threshold) {
                clusters.back().states.push_back(v);
                clusters.back().hi = prof_.A[layer][v];
            } else {
                clusters.push_back({{v}, prof_.A[layer][v], prof_.A[layer][v]});
            }
        }
        return clusters;
    }

    bool alive(int step, int a, int b) const {
        return g_.cap[step][a][b] != 0 && !removed_.count({step, a, b});
    }

    const std::set<ChainEdge>& removed() const { return removed_; }
    std::vector<ChainEdge> removed_list() const { return {removed_.begin(), removed_.end()}; }

    void log(std::string line) { out_.phase_log.push_back(std::move(line)); }

    const MarkovFlowGraph& g_;
    const PotentialProfile& prof_;
    ClusterCut& out_;
    std::set<ChainEdge> removed_;
};

void fast_path(CutRunner& run) {
    const auto& g = run.g_;
    const auto& prof = run.prof_;
    const int N = g.layers() - 1;
    const Rat astar = rat_abs(prof.A[N][0]);  // = sqrt(phi(N)) with two sink states
    run.remove_long_edges(astar * Rat(2, 7));
    run.log("cut all edges of length >= 2A*/7 with A* = " + format_rational(astar));
    int lo = 0;
    while (run.connected()) {
        auto viable = run.viability();
        int l1 = -1;
        for (int l = lo + 1; l < N && l1 < 0; ++l)
            for (int v = 0; v < g.width(l); ++v)
                if (viable[l][v] && rat_abs(prof.A[l][v]) <= astar / 7) {
                    l1 = l;
                    break;
                }
        int l0 = -1;
        if (l1 > 0) {
            for (int l = l1 - 1; l > 0 && l0 < 0; --l)
                for (int v = 0; v < g.width(l); ++v)
                    if (viable[l][v] && prof.A[l][v] >= astar * Rat(3, 7) &&
                        prof.A[l][v] <= astar * Rat(5, 7)) {
                        l0 = l;
                        break;
                    }
        }
        if (l1 < 0 || l0 < 0) {
            // The interval argument found no node to charge; fall back to the
            // unconditional source cut and report it.
            for (int b = 0; b < g.width(1); ++b)
                if (g.cap[0][g.source()][b] != 0) run.removed_.insert({0, g.source(), b});
            run.log("fallback: interval search failed, cutting the source out-edges");
            break;
        }
        int cut_count = 0;
        for (int v = 0; v < g.width(l0); ++v)
            if (viable[l0][v] && prof.A[l0][v] >= astar * Rat(3, 7) &&
                prof.A[l0][v] <= astar * Rat(5, 7)) {
                run.remove_node(l0, v);
                ++cut_count;
            }
        run.log("removed " + std::to_string(cut_count) + " node(s) in layer " + std::to_string(l0) +
                " charged to layers [" + std::to_string(l0) + "," + std::to_string(l1) + "]");
        lo = l1;
    }
}

void general_path(CutRunner& run, int k, const Rat& eps0) {
    const auto& g = run.g_;
    const auto& prof = run.prof_;
    const int N = g.layers() - 1;
    run.remove_long_edges(eps0);
    run.log("cut all edges of length >= eps_0 = " + format_rational(eps0));
    const Rat ratio = Rat(12) * k * k;
    Rat thr_prev = eps0;
    for (int phase = 1; phase <= k && run.connected(); ++phase, thr_prev *= ratio) {
        const Rat thr = thr_prev * ratio;
        while (run.connected()) {
            auto viable = run.viability();
            std::vector<std::vector<Cluster>> clusters(N + 1);
            int cap_count = 0;
            for (int l = 1; l < N; ++l) {
                clusters[l] = run.layer_clusters(viable[l], l, thr_prev);
                cap_count = std::max(cap_count, static_cast<int>(clusters[l].size()));
            }
            if (cap_count == 0) break;
            if (cap_count == 1) {
                int target = -1;
                for (int l = 1; l < N && target < 0; ++l)
                    if (!clusters[l].empty() && clusters[l][0].hi >= 0 &&
                        clusters[l][0].hi <= Rat(1, 6))
                        target = l;
                if (target < 0) {
                    for (int b = 0; b < g.width(1); ++b)
                        if (g.cap[0][g.source()][b] != 0) run.removed_.insert({0, g.source(), b});
                    run.log("fallback: no cluster in [0,1/6], cutting the source out-edges");
                    break;
                }
                for (int v : clusters[target][0].states) run.remove_node(target, v);
                run.log("phase " + std::to_string(phase) + ": removed the single cluster path at layer " +
                        std::to_string(target));
                continue;
            }
            // first layer whose cap_count viable clusters are pairwise > eps_j apart
            int l1 = -1;
            for (int l = 1; l < N && l1 < 0; ++l) {
                if (static_cast<int>(clusters[l].size()) != cap_count) continue;
                bool spread = true;
                for (std::size_t c = 0; c + 1 < clusters[l].size(); ++c)
                    spread &= Rat(clusters[l][c + 1].lo - clusters[l][c].hi) > thr;
                if (spread) l1 = l;
            }
            if (l1 < 0) break;  // remaining layers merge at the end of this phase

            // follow the disjoint cluster paths until two of them approach
            std::vector<Cluster> tracked = clusters[l1];
            std::vector<std::vector<Cluster>> path_layers = {tracked};
            int l2 = -1, pair_index = -1;
            for (int l = l1 + 1; l < N; ++l) {
                std::vector<Cluster> next;
                bool ok = true;
                for (const auto& x : tracked) {
                    int found = -1;
                    for (std::size_t c = 0; c < clusters[l].size() && ok; ++c) {
                        bool linked = false;
                        for (int a : x.states)
                            for (int b : clusters[l][c].states) linked |= run.alive(l - 1, a, b);
                        if (!linked) continue;
                        if (found >= 0) ok = false;
                        found = static_cast<int>(c);
                    }
                    if (found < 0) ok = false;
                    if (!ok) break;
                    next.push_back(clusters[l][found]);
                }
                if (!ok) break;
                tracked = std::move(next);
                path_layers.push_back(tracked);
                for (std::size_t c = 0; c + 1 < tracked.size(); ++c)
                    if (Rat(tracked[c + 1].lo - tracked[c].hi) <= thr / 3) {
                        l2 = l;
                        pair_index = static_cast<int>(c);
                    }
                if (l2 >= 0) break;
            }

            int cut_layer = -1, cut_path = -1;
            if (l2 >= 0) {
                const auto& first = path_layers.front();
                const auto& last = path_layers.back();
                const bool ascending = Rat(last[pair_index].hi - first[pair_index].hi) >= thr / 3;
                const int i = ascending ? pair_index : pair_index + 1;
                const Rat lo_a = ascending ? first[i].hi : last[i].lo;
                const Rat hi_a = ascending ? last[i].hi : first[i].lo;
                // gap of length >= eps_j/(3k) in layer l2's A-values inside (lo_a, hi_a)
                std::vector<Rat> marks = {lo_a, hi_a};
                for (int v = 0; v < g.width(l2); ++v)
                    if (viable[l2][v] && prof.A[l2][v] > lo_a && prof.A[l2][v] < hi_a)
                        marks.push_back(prof.A[l2][v]);
                std::sort(marks.begin(), marks.end());
                Rat a0, a1;
                bool found_gap = false;
                for (std::size_t m = 0; m + 1 < marks.size() && !found_gap; ++m)
                    if (Rat(marks[m + 1] - marks[m]) >= thr / (3 * k)) {
                        a0 = marks[m];
                        a1 = marks[m + 1];
                        found_gap = true;
                    }
                if (found_gap) {
                    const Rat lo_band = ascending ? Rat(a0 + Rat(2) * k * thr_prev)
                                                  : Rat(a1 - Rat(3) * k * thr_prev);
                    const Rat hi_band = ascending ? Rat(a0 + Rat(3) * k * thr_prev)
                                                  : Rat(a1 - Rat(2) * k * thr_prev);
                    for (int l = l1 + 1; l < l2 && cut_layer < 0; ++l) {
                        const auto& x = path_layers[l - l1][i];
                        const Rat val = ascending ? x.hi : x.lo;
                        if (val > lo_band && val < hi_band) {
                            cut_layer = l;
                            cut_path = i;
                        }
                    }
                }
            }
            if (cut_layer < 0) {
                // prescribed target not found; make progress on the first path
                cut_layer = l1;
                cut_path = pair_index >= 0 ? pair_index : 0;
                run.log("phase " + std::to_string(phase) + ": fallback removal at layer " +
                        std::to_string(l1));
            } else {
                run.log("phase " + std::to_string(phase) + ": removed cluster " +
                        std::to_string(cut_path) + " at layer " + std::to_string(cut_layer) +
                        " charged to layers [" + std::to_string(cut_layer) + "," +
                        std::to_string(l2) + "]");
            }
            for (int v : path_layers[cut_layer - l1][cut_path].states) run.remove_node(cut_layer, v);
        }
    }
    if (run.connected()) {
        for (int b = 0; b < g.width(1); ++b)
            if (g.cap[0][g.source()][b] != 0) run.removed_.insert({0, g.source(), b});
        run.log("fallback: phases left residual flow, cutting the source out-edges");
    }
}

}  // namespace

ClusterCut cut_and_cluster(const MarkovFlowGraph& g) {
    const auto prof = potentials(g);
    const int N = g.layers() - 1;
    const int k = g.max_interior_width();
    ClusterCut out;
    out.phi_drop = prof.phi[0] - prof.phi[N];
    Rat eps0(1);
    if (k > 4) {
        BigInt pow(1);
        const BigInt base = BigInt(12) * k * k;
        for (int j = 0; j + 1 < k; ++j) pow *= base;
        eps0 = Rat(1, BigInt(6) * k * pow);
        out.formula_bound = Rat(2) / (eps0 * eps0);
    } else {
        out.formula_bound = Rat(100);
    }
    CutRunner run(g, prof, out);

    const Rat a_t1 = prof.A[N][g.sink()];
    if (max_flow(g).value == 0) {
        out.phase_log.push_back("no source-to-sink flow; nothing to cut");
    } else if (a_t1 >= Rat(-1, 3)) {
        for (int b = 0; b < g.width(1); ++b)
            if (g.cap[0][g.source()][b] != 0) run.removed_.insert({0, g.source(), b});
        out.phase_log.push_back("A(t_1) = " + format_rational(a_t1) +
                                " >= -1/3: cutting the source out-edges");
    } else if (k <= 4 && prof.phi[N] < Rat(49, 200)) {
        for (int b = 0; b < g.width(1); ++b)
            if (g.cap[0][g.source()][b] != 0) run.removed_.insert({0, g.source(), b});
        out.phase_log.push_back("phi(N) < 49/200: cutting the source out-edges");
    } else if (k <= 4) {
        fast_path(run);
    } else {
        general_path(run, k, eps0);
    }

    out.removed = run.removed_list();
    for (const auto& [s, a, b] : out.removed) out.capacity += g.cap[s][a][b];
    out.relative_cost = out.phi_drop > 0 ? Rat(out.capacity / out.phi_drop) : Rat(0);
    if (max_flow(g, out.removed).value != 0)
        throw IntegrityError("cut_and_cluster: produced edge set does not disconnect the terminals");
    return out;
}

Rat cut_charge_bound(const MarkovFlowGraph& g, const std::vector<std::pair<int, int>>& intervals,
                     const std::vector<std::vector<int>>& node_sets, const Rat& rho) {
    if (intervals.size() != node_sets.size())
        throw ValidationError("cut_charge_bound: one node set per interval required");
    if (rho <= 0) throw ValidationError("cut_charge_bound: rho must be positive");
    auto order = intervals;
    std::sort(order.begin(), order.end());
    for (std::size_t j = 0; j + 1 < order.size(); ++j)
        if (order[j].second > order[j + 1].first)
            throw ValidationError("cut_charge_bound: intervals overlap");
    const auto prof = potentials(g);
    for (std::size_t j = 0; j < intervals.size(); ++j) {
        auto [l0, l1] = intervals[j];
        if (l0 < 0 || l1 <= l0 || l1 >= g.layers())
            throw ValidationError("cut_charge_bound: bad interval");
        for (int w : node_sets[j]) {
            if (w < 0 || w >= g.width(l0)) throw ValidationError("cut_charge_bound: bad node");
            for (int x = 0; x < g.width(l1); ++x)
                if (rat_abs(Rat(prof.A[l0][w] - prof.A[l1][x])) < rho)
                    throw ValidationError("cut_charge_bound: node too close to the charged layer");
        }
    }
    return (prof.phi[0] - prof.phi[g.layers() - 1]) / (rho * rho);
}

Rat removal_capacity(const MarkovFlowGraph& g, const std::vector<std::pair<int, int>>& nodes) {
    Rat total;
    for (auto [l, v] : nodes)
        for (int b = 0; b < g.width(l + 1); ++b) total += g.cap[l][v][b];
    return total;
}

MarkovFlowGraph random_symmetric_chain(int interior_layers, int width, std::uint64_t seed,
                                       int stickiness) {
    if (interior_layers < 1 || width < 2 || width % 2 != 0)
        throw ValidationError("random chain: need >= 1 interior layers and even width >= 2");
    std::mt19937_64 rng(seed);
    auto randint = [&rng](int lo, int hi) {
        return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
    };
    MarkovFlowGraph g;
    const int L = interior_layers + 2;
    for (int l = 0; l < L; ++l) {
        const int w = (l == 0 || l == L - 1) ? 2 : width;
        g.mass.emplace_back(w);
        std::vector<int> inv(w);
        for (int v = 0; v < w; ++v) inv[v] = w - 1 - v;
        g.comp.push_back(std::move(inv));
    }
    g.mass[0] = {Rat(1, 2), Rat(1, 2)};
    for (int l = 0; l + 1 < L; ++l) {
        const int w1 = static_cast<int>(g.mass[l].size());
        const int w2 = (l + 1 == L - 1) ? 2 : width;
        std::vector<std::vector<Rat>> t(w1, std::vector<Rat>(w2));
        for (int a = 0; a < w1 / 2; ++a) {
            const int target = w1 > 1 ? a * (w2 - 1) / (w1 - 1) : 0;
            std::vector<int> row(w2);
            int sum = 0;
            for (int b = 0; b < w2; ++b) {
                row[b] = randint(1, 8) + (b == target ? stickiness : 0);
                sum += row[b];
            }
            for (int b = 0; b < w2; ++b) {
                t[a][b] = Rat(row[b], sum);
                t[w1 - 1 - a][w2 - 1 - b] = t[a][b];
            }
        }
        std::vector<std::vector<Rat>> step(w1, std::vector<Rat>(w2));
        std::vector<Rat> next(w2);
        for (int a = 0; a < w1; ++a)
            for (int b = 0; b < w2; ++b) {
                step[a][b] = g.mass[l][a] * t[a][b];
                next[b] += step[a][b];
            }
        g.cap.push_back(std::move(step));
        g.mass[l + 1] = std::move(next);
    }
    g.check_invariants();
    return g;
}

nlohmann::json chain_to_json(const MarkovFlowGraph& g) {
    nlohmann::json j;
    auto prof = potentials(g);
    j["layers"] = nlohmann::json::array();
    for (int l = 0; l < g.layers(); ++l) {
        nlohmann::json layer;
        for (int v = 0; v < g.width(l); ++v) {
            nlohmann::json node;
            node["mass"] = format_rational(g.mass[l][v]);
            node["complement"] = g.comp[l][v];
            node["A"] = format_rational(prof.A[l][v]);
            if (!g.state_masks.empty()) node["assignment_mask"] = g.state_masks[l][v];
            layer.push_back(node);
        }
        j["layers"].push_back(layer);
    }
    j["phi"] = nlohmann::json::array();
    for (const auto& p : prof.phi) j["phi"].push_back(format_rational(p));
    j["edges"] = nlohmann::json::array();
    for (std::size_t s = 0; s < g.cap.size(); ++s)
        for (std::size_t a = 0; a < g.cap[s].size(); ++a)
            for (std::size_t b = 0; b < g.cap[s][a].size(); ++b)
                if (g.cap[s][a][b] != 0)
                    j["edges"].push_back({s, a, b, format_rational(g.cap[s][a][b])});
    j["p_source_sink"] = format_rational(prof.p_source_sink);
    if (!g.separators.empty()) {
        j["separators"] = nlohmann::json::array();
        for (const auto& sep : g.separators) j["separators"].push_back(sep);
    }
    return j;
}

MarkovFlowGraph chain_from_json(const nlohmann::json& j) {
    MarkovFlowGraph g;
    if (!j.contains("layers") || !j.contains("edges"))
        throw ValidationError("chain json: layers and edges required");
    for (const auto& layer : j.at("layers")) {
        std::vector<Rat> masses;
        std::vector<int> inv;
        for (const auto& node : layer) {
            auto m = parse_rational(node.at("mass").get<std::string>());
            if (!m) throw ValidationError("chain json: bad mass");
            masses.push_back(*m);
            inv.push_back(node.at("complement").get<int>());
        }
        g.mass.push_back(std::move(masses));
        g.comp.push_back(std::move(inv));
    }
    for (int l = 0; l + 1 < g.layers(); ++l)
        g.cap.emplace_back(g.width(l), std::vector<Rat>(g.width(l + 1)));
    for (const auto& e : j.at("edges")) {
        const int s = e.at(0).get<int>(), a = e.at(1).get<int>(), b = e.at(2).get<int>();
        auto c = parse_rational(e.at(3).get<std::string>());
        if (!c || s < 0 || s >= static_cast<int>(g.cap.size()) || a < 0 || a >= g.width(s) ||
            b < 0 || b >= g.width(s + 1))
            throw ValidationError("chain json: bad edge");
        g.cap[s][a][b] = *c;
    }
    g.check_invariants();
    return g;
}

}  // namespace twsc
