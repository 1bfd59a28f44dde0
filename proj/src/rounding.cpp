#include "twsc/rounding.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <random>

#include "twsc/io.hpp"

namespace twsc {

namespace {

std::vector<std::vector<int>> bag_adjacency(const TreeDecomposition& td) {
    std::vector<std::vector<int>> adj(td.bags.size());
    for (const auto& [a, b] : td.tree_edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& list : adj) std::sort(list.begin(), list.end());
    return adj;
}

PartialAssignment restrict_labels(const std::vector<int>& labels, const VertexSet& domain) {
    PartialAssignment f;
    for (Vertex v : domain) {
        if (labels[v] < 0) throw IntegrityError("restrict_labels: vertex not yet assigned");
        (labels[v] ? f.ones : f.zeros).push_back(v);
    }
    return f;
}

// Lexicographic order of assignments over a sorted domain: the smallest
// vertex's bit is the most significant.
bool lex_smaller(std::uint32_t a, std::uint32_t b, std::size_t width) {
    for (std::size_t bit = 0; bit < width; ++bit) {
        const bool x = a & (1u << bit), y = b & (1u << bit);
        if (x != y) return !x;
    }
    return false;
}

std::uint32_t sample_mask(const LocalDistribution& dist, std::mt19937_64& rng) {
    const BigInt hi = rng(), lo = rng();
    const Rat u((hi << 64) | lo, BigInt(1) << 128);  // uniform in [0,1)
    Rat acc;
    for (std::uint32_t mask = 0; mask < dist.prob.size(); ++mask) {
        acc += dist.prob[mask];
        if (u < acc) return mask;
    }
    // Round-off tail in float mode; probabilities sum to 1 exactly otherwise.
    return static_cast<std::uint32_t>(dist.prob.size()) - 1;
}

RoundingOutcome finish_outcome(const Instance& inst, std::vector<int> labels, std::uint64_t seed) {
    RoundingOutcome out;
    out.seed = seed;
    out.assignment.labels = std::move(labels);
    out.cut = evaluate_cut(inst, out.assignment.side0());
    auto separated = [&out](const WeightedPair& p) {
        return out.assignment.labels[p.u] != out.assignment.labels[p.v];
    };
    for (const auto& e : inst.edges) out.edge_cut.push_back(separated(e));
    for (const auto& d : inst.demands) out.demand_cut.push_back(separated(d));
    return out;
}

}  // namespace

TraversalPlan TraversalPlan::bfs(const TreeDecomposition& td, int root) {
    if (root < 0 || root >= static_cast<int>(td.bags.size()))
        throw ValidationError("traversal: root bag out of range");
    auto adj = bag_adjacency(td);
    TraversalPlan plan;
    plan.root = root;
    std::vector<char> seen(td.bags.size(), 0);
    std::queue<int> q;
    q.push(root);
    seen[root] = 1;
    VertexSet assigned;
    while (!q.empty()) {
        int b = q.front();
        q.pop();
        plan.order.push_back(b);
        plan.olds.push_back(set_intersect(td.bags[b], assigned));
        plan.news.push_back(set_minus(td.bags[b], assigned));
        assigned = set_union(assigned, td.bags[b]);
        for (int c : adj[b])
            if (!seen[c]) {
                seen[c] = 1;
                q.push(c);
            }
    }
    if (plan.order.size() != td.bags.size()) throw ValidationError("traversal: bag tree is disconnected");
    return plan;
}

void validate_plan(const Instance& inst, const TreeDecomposition& td, const TraversalPlan& plan) {
    if (plan.order.size() != td.bags.size() || plan.olds.size() != plan.order.size() ||
        plan.news.size() != plan.order.size())
        throw ValidationError("plan: must traverse every bag exactly once");
    auto adj = bag_adjacency(td);
    std::vector<char> placed(td.bags.size(), 0);
    VertexSet assigned;
    for (std::size_t p = 0; p < plan.order.size(); ++p) {
        int b = plan.order[p];
        if (b < 0 || b >= static_cast<int>(td.bags.size()) || placed[b])
            throw ValidationError("plan: order is not a permutation of bags");
        if (p == 0) {
            if (b != plan.root) throw ValidationError("plan: order must start at the root");
        } else {
            bool touches = false;
            for (int c : adj[b]) touches |= placed[c] != 0;
            if (!touches) throw ValidationError("plan: prefix is not connected at position " + std::to_string(p));
        }
        placed[b] = 1;
        if (plan.olds[p] != set_intersect(td.bags[b], assigned) ||
            plan.news[p] != set_minus(td.bags[b], assigned))
            throw ValidationError("plan: B+/B- split mismatch at position " + std::to_string(p));
        assigned = set_union(assigned, td.bags[b]);
    }
    if (static_cast<int>(assigned.size()) != inst.n)
        throw ValidationError("plan: traversal does not cover every vertex");
}

RoundingOutcome sc_round(const Instance& inst, const TreeDecomposition& td, const SaSolution& sol,
                         std::uint64_t seed) {
    auto plan = TraversalPlan::bfs(td, 0);
    std::mt19937_64 rng(seed);
    std::vector<int> labels(inst.n, -1);
    for (std::size_t p = 0; p < plan.order.size(); ++p) {
        if (plan.news[p].empty()) continue;
        auto dist = conditional_distribution(sol, plan.news[p], restrict_labels(labels, plan.olds[p]));
        const std::uint32_t mask = sample_mask(dist, rng);
        for (std::size_t b = 0; b < plan.news[p].size(); ++b)
            labels[plan.news[p][b]] = (mask >> b) & 1u;
    }
    return finish_outcome(inst, std::move(labels), seed);
}

SeparatorChain build_separator_chain(const TreeDecomposition& td, const SaSolution& sol, Vertex i,
                                     Vertex j) {
    if (i == j) throw ValidationError("separator chain: endpoints must differ");
    const int m = static_cast<int>(td.bags.size());
    std::vector<int> holds_i, holds_j;
    for (int b = 0; b < m; ++b) {
        if (set_contains(td.bags[b], i)) holds_i.push_back(b);
        if (set_contains(td.bags[b], j)) holds_j.push_back(b);
    }
    if (holds_i.empty() || holds_j.empty()) throw ValidationError("separator chain: endpoint in no bag");
    for (int b : holds_i)
        if (set_contains(td.bags[b], j))
            throw ValidationError("separator chain: endpoints share a bag; use lp_distance directly");

    // Distance to the subtree of bags holding j; walk downhill from the
    // closest bag holding i.
    auto adj = bag_adjacency(td);
    std::vector<int> dist(m, -1);
    std::queue<int> q;
    for (int b : holds_j) {
        dist[b] = 0;
        q.push(b);
    }
    while (!q.empty()) {
        int b = q.front();
        q.pop();
        for (int c : adj[b])
            if (dist[c] < 0) {
                dist[c] = dist[b] + 1;
                q.push(c);
            }
    }
    int b1 = -1;
    for (int b : holds_i)
        if (dist[b] >= 0 && (b1 < 0 || dist[b] < dist[b1])) b1 = b;
    if (b1 < 0) throw ValidationError("separator chain: endpoints are in different tree components");

    SeparatorChain chain;
    chain.i = i;
    chain.j = j;
    chain.bag_path.push_back(b1);
    while (dist[chain.bag_path.back()] > 0) {
        int cur = chain.bag_path.back();
        for (int c : adj[cur])
            if (dist[c] == dist[cur] - 1) {
                chain.bag_path.push_back(c);
                break;  // adjacency is sorted: smallest index on ties
            }
    }

    chain.separators.push_back({i});
    for (std::size_t p = 0; p + 1 < chain.bag_path.size(); ++p)
        chain.separators.push_back(set_intersect(td.bags[chain.bag_path[p]], td.bags[chain.bag_path[p + 1]]));
    chain.separators.push_back({j});

    const bool exact = sol.mode == LpMode::rational;
    const Rat support_tol = exact ? Rat(0) : rational_from_double(1e-9);
    for (const auto& S : chain.separators) {
        std::vector<std::uint32_t> sts;
        std::vector<Rat> ms;
        for (std::uint32_t mask = 0; mask < (1u << S.size()); ++mask) {
            VertexSet zeros, ones;
            for (std::size_t b = 0; b < S.size(); ++b)
                (mask & (1u << b) ? ones : zeros).push_back(S[b]);
            Rat y = y_tilde_pair(sol, zeros, ones);
            if (y > support_tol) {
                sts.push_back(mask);
                ms.push_back(y);
            }
        }
        chain.states.push_back(std::move(sts));
        chain.mass.push_back(std::move(ms));
    }

    for (int step = 1; step < chain.layers(); ++step) {
        const auto& Sa = chain.separators[step - 1];
        const auto& Sb = chain.separators[step];
        std::vector<std::vector<Rat>> mat(chain.states[step - 1].size(),
                                          std::vector<Rat>(chain.states[step].size()));
        for (std::size_t a = 0; a < chain.states[step - 1].size(); ++a) {
            for (std::size_t b = 0; b < chain.states[step].size(); ++b) {
                VertexSet zeros, ones;
                bool consistent = true;
                for (std::size_t p = 0; p < Sa.size(); ++p)
                    (chain.states[step - 1][a] & (1u << p) ? ones : zeros).push_back(Sa[p]);
                for (std::size_t p = 0; p < Sb.size(); ++p) {
                    Vertex v = Sb[p];
                    const bool one = chain.states[step][b] & (1u << p);
                    if (set_contains(Sa, v)) {
                        if (one != set_contains(ones, v)) consistent = false;
                    } else {
                        (one ? ones : zeros).push_back(v);
                    }
                }
                if (consistent)
                    mat[a][b] = y_tilde_pair(sol, canonical_set(zeros), canonical_set(ones));
            }
        }
        chain.joint.push_back(std::move(mat));
    }

    // Conservation is an algebraic identity of the solution vector; a
    // violation beyond support trimming means the solution is corrupt.
    const double cons_tol = 1e-6;
    auto conserved = [&](const Rat& got, const Rat& want) {
        if (exact) return got == want;
        return std::abs(to_double(Rat(got - want))) <= cons_tol;
    };
    for (int step = 1; step < chain.layers(); ++step) {
        for (std::size_t a = 0; a < chain.states[step - 1].size(); ++a) {
            Rat row;
            for (const auto& v : chain.joint[step - 1][a]) row += v;
            if (!conserved(row, chain.mass[step - 1][a]))
                throw IntegrityError("separator chain: out-flow conservation violated");
        }
        for (std::size_t b = 0; b < chain.states[step].size(); ++b) {
            Rat col;
            for (std::size_t a = 0; a < chain.states[step - 1].size(); ++a) col += chain.joint[step - 1][a][b];
            if (!conserved(col, chain.mass[step][b]))
                throw IntegrityError("separator chain: in-flow conservation violated");
        }
    }
    return chain;
}

namespace {

// Pr[X_0 = start ∧ X_M = end] by forward propagation of joint flows.
Rat chain_endpoint_mass(const SeparatorChain& chain, std::uint32_t start_mask, std::uint32_t end_mask) {
    std::vector<Rat> w(chain.states[0].size());
    bool found = false;
    for (std::size_t a = 0; a < chain.states[0].size(); ++a)
        if (chain.states[0][a] == start_mask) {
            w[a] = chain.mass[0][a];
            found = true;
        }
    if (!found) return Rat(0);
    for (std::size_t step = 0; step < chain.joint.size(); ++step) {
        std::vector<Rat> next(chain.states[step + 1].size());
        for (std::size_t a = 0; a < w.size(); ++a) {
            if (w[a] == 0) continue;
            const Rat scale = w[a] / chain.mass[step][a];
            for (std::size_t b = 0; b < next.size(); ++b)
                if (chain.joint[step][a][b] != 0) next[b] += scale * chain.joint[step][a][b];
        }
        w = std::move(next);
    }
    for (std::size_t b = 0; b < chain.states.back().size(); ++b)
        if (chain.states.back()[b] == end_mask) return w[b];
    return Rat(0);
}

}  // namespace

std::vector<Rat> exact_distribution(const Instance& inst, const TreeDecomposition& td,
                                    const SaSolution& sol,
                                    const std::vector<std::pair<Vertex, Vertex>>& targets) {
    std::vector<Rat> out;
    out.reserve(targets.size());
    for (auto [u, v] : targets) {
        bool share_bag = false;
        for (const auto& bag : td.bags)
            if (set_contains(bag, u) && set_contains(bag, v)) {
                share_bag = true;
                break;
            }
        if (share_bag) {
            out.push_back(lp_distance(sol, u, v));
            continue;
        }
        auto chain = build_separator_chain(td, sol, u, v);
        out.push_back(chain_endpoint_mass(chain, 0u, 1u) + chain_endpoint_mass(chain, 1u, 0u));
    }
    return out;
}

LocalDistribution full_joint_distribution(const Instance& inst, const TreeDecomposition& td,
                                          const SaSolution& sol, const TraversalPlan& plan) {
    if (inst.n > 16) throw ValidationError("full_joint_distribution: n exceeds the enumeration guard");
    validate_plan(inst, td, plan);
    LocalDistribution joint;
    joint.domain = {};
    joint.prob = {Rat(1)};
    for (std::size_t p = 0; p < plan.order.size(); ++p) {
        const auto& news = plan.news[p];
        if (news.empty()) continue;
        const auto& olds = plan.olds[p];
        VertexSet next_domain = set_union(joint.domain, news);
        std::vector<Rat> next(1u << next_domain.size());

        // positions of the old domain / news inside the new domain
        std::vector<int> old_pos(joint.domain.size()), new_pos(news.size()), olds_pos(olds.size());
        for (std::size_t b = 0; b < joint.domain.size(); ++b)
            old_pos[b] = static_cast<int>(std::lower_bound(next_domain.begin(), next_domain.end(),
                                                           joint.domain[b]) -
                                          next_domain.begin());
        for (std::size_t b = 0; b < news.size(); ++b)
            new_pos[b] = static_cast<int>(std::lower_bound(next_domain.begin(), next_domain.end(), news[b]) -
                                          next_domain.begin());
        for (std::size_t b = 0; b < olds.size(); ++b)
            olds_pos[b] = static_cast<int>(std::lower_bound(joint.domain.begin(), joint.domain.end(), olds[b]) -
                                           joint.domain.begin());

        std::vector<std::optional<LocalDistribution>> cache(1u << olds.size());
        for (std::uint32_t mask = 0; mask < joint.prob.size(); ++mask) {
            if (joint.prob[mask] == 0) continue;
            std::uint32_t key = 0;
            for (std::size_t b = 0; b < olds.size(); ++b)
                if (mask & (1u << olds_pos[b])) key |= 1u << b;
            if (!cache[key]) {
                PartialAssignment f0;
                for (std::size_t b = 0; b < olds.size(); ++b)
                    (key & (1u << b) ? f0.ones : f0.zeros).push_back(olds[b]);
                cache[key] = conditional_distribution(sol, news, f0);
            }
            std::uint32_t base = 0;
            for (std::size_t b = 0; b < joint.domain.size(); ++b)
                if (mask & (1u << b)) base |= 1u << old_pos[b];
            for (std::uint32_t ext = 0; ext < cache[key]->prob.size(); ++ext) {
                if (cache[key]->prob[ext] == 0) continue;
                std::uint32_t full = base;
                for (std::size_t b = 0; b < news.size(); ++b)
                    if (ext & (1u << b)) full |= 1u << new_pos[b];
                next[full] += joint.prob[mask] * cache[key]->prob[ext];
            }
        }
        joint.domain = std::move(next_domain);
        joint.prob = std::move(next);
    }
    return joint;
}

Rat order_invariance_check(const Instance& inst, const TreeDecomposition& td, const SaSolution& sol,
                           int bag_a, int bag_b, const TraversalPlan& p1, const TraversalPlan& p2) {
    if (bag_a < 0 || bag_b < 0 || bag_a >= static_cast<int>(td.bags.size()) ||
        bag_b >= static_cast<int>(td.bags.size()))
        throw ValidationError("order_invariance_check: bag index out of range");
    const VertexSet target = set_union(td.bags[bag_a], td.bags[bag_b]);
    auto m1 = marginalize(full_joint_distribution(inst, td, sol, p1), target);
    auto m2 = marginalize(full_joint_distribution(inst, td, sol, p2), target);
    Rat worst;
    for (std::size_t k = 0; k < m1.prob.size(); ++k) {
        Rat diff = m1.prob[k] - m2.prob[k];
        if (diff < 0) diff = -diff;
        worst = std::max(worst, diff);
    }
    return worst;
}

namespace {

// Partition-function engine for the tree MRF q(f) ∝ Π μ_B / Π μ_sep with
// vertex evidence. Separator tables are the bag-table marginals, so the
// telescoping is internally consistent even for clamped float solutions.
class MrfEngine {
public:
    MrfEngine(const TreeDecomposition& td, const SaSolution& sol) : td_(td) {
        const int m = static_cast<int>(td.bags.size());
        auto adj = bag_adjacency(td);
        parent_.assign(m, -1);
        std::vector<char> seen(m, 0);
        std::queue<int> q;
        q.push(0);
        seen[0] = 1;
        while (!q.empty()) {
            int b = q.front();
            q.pop();
            order_.push_back(b);
            for (int c : adj[b])
                if (!seen[c]) {
                    seen[c] = 1;
                    parent_[c] = b;
                    q.push(c);
                }
        }
        if (order_.size() != td.bags.size()) throw ValidationError("mrf engine: bag tree is disconnected");
        children_.assign(m, {});
        for (int b = 0; b < m; ++b)
            if (parent_[b] >= 0) children_[parent_[b]].push_back(b);
        bag_mu_.reserve(m);
        for (int b = 0; b < m; ++b) bag_mu_.push_back(local_distribution(sol, td.bags[b]));
        sep_.resize(m);
        sep_mu_.resize(m);
        for (int b = 0; b < m; ++b)
            if (parent_[b] >= 0) {
                sep_[b] = set_intersect(td.bags[b], td.bags[parent_[b]]);
                sep_mu_[b] = marginalize(bag_mu_[b], sep_[b]);
            }
    }

    // Z(evidence); labels -1 = free, 0/1 = clamped.
    Rat partition(const std::vector<int>& ev) const {
        const int m = static_cast<int>(td_.bags.size());
        std::vector<std::vector<Rat>> msg(m);
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            const int b = *it;
            const auto& bag = td_.bags[b];
            std::vector<Rat> table(bag_mu_[b].prob.size());
            for (std::uint32_t mask = 0; mask < table.size(); ++mask) {
                Rat w = bag_mu_[b].prob[mask];
                if (w == 0) continue;
                bool consistent = true;
                for (std::size_t p = 0; p < bag.size() && consistent; ++p)
                    if (ev[bag[p]] >= 0 && ev[bag[p]] != static_cast<int>((mask >> p) & 1u)) consistent = false;
                if (!consistent) continue;
                for (int c : children_[b]) {
                    std::uint32_t sub = 0;
                    for (std::size_t p = 0; p < sep_[c].size(); ++p) {
                        auto pos = std::lower_bound(bag.begin(), bag.end(), sep_[c][p]) - bag.begin();
                        if (mask & (1u << pos)) sub |= 1u << p;
                    }
                    w *= msg[c][sub];
                    if (w == 0) break;
                }
                table[mask] = w;
            }
            if (parent_[b] < 0) {
                Rat z;
                for (const auto& v : table) z += v;
                return z;
            }
            std::vector<Rat> out(sep_mu_[b].prob.size());
            for (std::uint32_t mask = 0; mask < table.size(); ++mask) {
                if (table[mask] == 0) continue;
                std::uint32_t sub = 0;
                for (std::size_t p = 0; p < sep_[b].size(); ++p) {
                    auto pos = std::lower_bound(bag.begin(), bag.end(), sep_[b][p]) - bag.begin();
                    if (mask & (1u << pos)) sub |= 1u << p;
                }
                out[sub] += table[mask];
            }
            for (std::uint32_t sub = 0; sub < out.size(); ++sub) {
                if (out[sub] == 0) continue;
                if (sep_mu_[b].prob[sub] == 0)
                    throw IntegrityError("mrf engine: mass outside the separator support");
                out[sub] /= sep_mu_[b].prob[sub];
            }
            msg[b] = std::move(out);
        }
        throw IntegrityError("mrf engine: traversal had no root");
    }

    // Pr[f(u) ≠ f(v) | evidence]; either endpoint may already be clamped.
    Rat separation_probability(std::vector<int>& ev, Vertex u, Vertex v, const Rat& z_base) const {
        if (ev[u] >= 0 && ev[v] >= 0) return Rat(ev[u] != ev[v] ? 1 : 0);
        if (z_base == 0) throw IntegrityError("mrf engine: conditioning on a zero-probability prefix");
        const int su = ev[u], sv = ev[v];
        Rat mass;
        for (int b = 0; b < 2; ++b) {
            if (su >= 0 && su != b) continue;
            if (sv >= 0 && sv != 1 - b) continue;
            ev[u] = b;
            ev[v] = 1 - b;
            mass += partition(ev);
        }
        ev[u] = su;
        ev[v] = sv;
        return mass / z_base;
    }

private:
    const TreeDecomposition& td_;
    std::vector<int> parent_, order_;
    std::vector<std::vector<int>> children_;
    std::vector<LocalDistribution> bag_mu_;
    std::vector<VertexSet> sep_;
    std::vector<LocalDistribution> sep_mu_;
};

}  // namespace

RoundingOutcome derandomize(const Instance& inst, const TreeDecomposition& td, const SaSolution& sol,
                            const Rat& c) {
    if (c <= 0 || c > 1) throw ValidationError("derandomize: c must lie in (0,1]");
    auto plan = TraversalPlan::bfs(td, 0);
    MrfEngine engine(td, sol);
    const Rat threshold = sol.objective / c;  // α/c

    std::vector<int> labels(inst.n, -1);
    auto score_of = [&](std::vector<int>& ev) {
        const Rat z = engine.partition(ev);
        Rat score;
        for (const auto& e : inst.edges)
            if (e.weight != 0) score += e.weight * engine.separation_probability(ev, e.u, e.v, z);
        for (const auto& d : inst.demands)
            score -= threshold * d.weight * engine.separation_probability(ev, d.u, d.v, z);
        return score;
    };

    for (std::size_t p = 0; p < plan.order.size(); ++p) {
        const auto& news = plan.news[p];
        if (news.empty()) continue;
        auto dist = conditional_distribution(sol, news, restrict_labels(labels, plan.olds[p]));
        std::optional<Rat> best;
        std::uint32_t best_mask = 0;
        for (std::uint32_t mask = 0; mask < dist.prob.size(); ++mask) {
            if (dist.prob[mask] == 0) continue;
            for (std::size_t b = 0; b < news.size(); ++b) labels[news[b]] = (mask >> b) & 1u;
            Rat score = score_of(labels);
            if (!best || score < *best || (score == *best && lex_smaller(mask, best_mask, news.size()))) {
                best = score;
                best_mask = mask;
            }
        }
        if (!best) throw IntegrityError("derandomize: conditional distribution had empty support");
        for (std::size_t b = 0; b < news.size(); ++b) labels[news[b]] = (best_mask >> b) & 1u;
    }

    auto out = finish_outcome(inst, std::move(labels), 0);
    if (!out.cut.feasible)
        out.failure = "derandomized assignment separates no demand";
    else if (out.cut.sparsity > threshold)
        out.failure = "cut sparsity " + format_rational(out.cut.sparsity) + " exceeds alpha/c = " +
                      format_rational(threshold) + "; the configured c is falsified";
    return out;
}

nlohmann::json rounding_outcome_to_json(const RoundingOutcome& out) {
    nlohmann::json j;
    j["labels"] = out.assignment.labels;
    j["cut_capacity"] = format_rational(out.cut.cut_capacity);
    j["cut_demand"] = format_rational(out.cut.cut_demand);
    j["sparsity"] = out.cut.feasible ? format_rational(out.cut.sparsity) : "undefined";
    j["seed"] = out.seed;
    if (out.failure) j["failure"] = *out.failure;
    return j;
}

}  // namespace twsc
