// twsc: generate / solve / round / analyze sparsest-cut relaxation pipelines.
#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

#include "twsc/io.hpp"
#include "twsc/lowerbound.hpp"

using namespace twsc;

namespace {

Rat parse_rat_flag(const std::string& text, const std::string& flag) {
    auto v = parse_rational(text);
    if (!v) throw ValidationError(flag + ": cannot parse rational '" + text + "'");
    return *v;
}

LpMode parse_mode(const std::string& text) {
    if (text == "rational") return LpMode::rational;
    if (text == "float") return LpMode::floating;
    throw ValidationError("--mode must be 'rational' or 'float'");
}

Instance load_instance(const std::string& path) {
    return instance_from_json(load_json_file(path));
}

TreeDecomposition load_decomposition(const std::string& path) {
    return decomposition_from_json(load_json_file(path));
}

SaSolution load_solution(const std::string& path, const Instance& inst,
                         const TreeDecomposition& td) {
    return sa_solution_from_json(inst, td, load_json_file(path));
}

void emit(const std::string& path, const nlohmann::json& j) {
    if (path == "-")
        std::cout << j.dump(2) << "\n";
    else
        save_json_file(path, j);
}

struct GenArgs {
    std::string kind;
    int n = 8, r = 2;
    double keep = 0.7;
    std::uint64_t seed = 0;
    std::string input, out_instance = "instance.json", out_decomposition = "decomposition.json";
};

int cmd_gen(const GenArgs& a) {
    Instance inst;
    TreeDecomposition td;
    if (a.kind == "ktree") {
        auto gen = gen_partial_ktree(a.n, a.r, a.keep, a.seed);
        inst = std::move(gen.instance);
        td = std::move(gen.decomposition);
    } else if (a.kind == "maxcut") {
        if (a.input.empty()) throw ValidationError("gen maxcut requires --input graph file");
        auto j = load_json_file(a.input);
        SimpleGraph g;
        g.n = j.at("n").get<int>();
        for (const auto& e : j.at("edges")) g.edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        auto red = maxcut_reduction(g);
        inst = std::move(red.instance);
        td = std::move(red.decomposition);
    } else if (a.kind == "path") {
        if (a.n < 2) throw ValidationError("gen path requires --n >= 2");
        std::vector<WeightedPair> edges;
        std::uint64_t state = a.seed * 6364136223846793005ull + 1442695040888963407ull;
        for (int v = 0; v + 1 < a.n; ++v) {
            state = state * 6364136223846793005ull + 1442695040888963407ull;
            edges.push_back({v, v + 1, Rat(1 + (state >> 33) % 9)});
        }
        inst = Instance::create(a.n, std::move(edges), {{0, a.n - 1, Rat(1)}});
        for (int v = 0; v + 1 < a.n; ++v) {
            td.bags.push_back({v, v + 1});
            if (v) td.tree_edges.push_back({v - 1, v});
        }
    } else {
        throw ValidationError("gen kind must be ktree, maxcut, or path");
    }
    emit(a.out_instance, instance_to_json(inst));
    emit(a.out_decomposition, decomposition_to_json(td));
    std::cout << "n=" << inst.n << " edges=" << inst.edges.size()
              << " demands=" << inst.demands.size() << " width=" << td.width() << "\n";
    return 0;
}

int cmd_decompose(const std::string& instance_path, int r, const std::string& out) {
    auto inst = load_instance(instance_path);
    auto td = find_decomposition_small(inst, r, oracle_guard(16));
    if (!td) throw ValidationError("no decomposition of width <= " + std::to_string(r) +
                                   " (or n exceeds the search guard)");
    emit(out, decomposition_to_json(*td));
    std::cout << "width=" << td->width() << " bags=" << td->bags.size() << "\n";
    return 0;
}

int cmd_solve(const std::string& instance_path, const std::string& decomposition_path,
              const std::string& mode, bool warm, const std::string& out) {
    auto inst = load_instance(instance_path);
    auto td = load_decomposition(decomposition_path);
    auto report = validate_decomposition(inst, td);
    if (!report.valid)
        throw ValidationError("invalid decomposition: " + report.violations.front().what);
    auto sol = solve_relaxation(inst, td, parse_mode(mode), warm);
    emit(out, sa_solution_to_json(sol));
    std::cout << "objective=" << format_rational(sol.objective)
              << " (~" << to_double(sol.objective) << ")\n";
    return 0;
}

int cmd_round(const std::string& instance_path, const std::string& decomposition_path,
              const std::string& solution_path, bool do_derandomize, std::uint64_t seed,
              const std::string& c_text, const std::string& out) {
    auto inst = load_instance(instance_path);
    auto td = load_decomposition(decomposition_path);
    auto sol = load_solution(solution_path, inst, td);
    RoundingOutcome outcome = do_derandomize
                                  ? derandomize(inst, td, sol, parse_rat_flag(c_text, "--c"))
                                  : sc_round(inst, td, sol, seed);
    emit(out, rounding_outcome_to_json(outcome));
    if (outcome.failure) {
        std::cout << "failure: " << *outcome.failure << "\n";
        return 1;
    }
    std::cout << "sparsity=" << format_rational(outcome.cut.sparsity)
              << " capacity=" << format_rational(outcome.cut.cut_capacity)
              << " demand=" << format_rational(outcome.cut.cut_demand) << "\n";
    return 0;
}

int cmd_oracle(const std::string& instance_path, int max_n, bool json_out) {
    auto inst = load_instance(instance_path);
    auto best = brute_force_sparsest_cut(inst, max_n);
    if (json_out) {
        nlohmann::json j = {{"side0", best.side0},
                            {"cut_capacity", format_rational(best.cut_capacity)},
                            {"cut_demand", format_rational(best.cut_demand)},
                            {"sparsity", format_rational(best.sparsity)}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "optimum=" << format_rational(best.sparsity) << " side0={";
        for (std::size_t i = 0; i < best.side0.size(); ++i)
            std::cout << (i ? "," : "") << best.side0[i];
        std::cout << "}\n";
    }
    return 0;
}

int cmd_markov(const std::string& instance_path, const std::string& decomposition_path,
               const std::string& solution_path, std::pair<int, int> pair,
               const std::string& out) {
    auto inst = load_instance(instance_path);
    auto td = load_decomposition(decomposition_path);
    auto sol = load_solution(solution_path, inst, td);
    auto g = build_chain(sol, td, pair.first, pair.second);
    if (!out.empty()) emit(out, chain_to_json(g));
    auto prof = potentials(g);
    std::cout << "layers=" << g.layers() << " max_width=" << g.max_interior_width() << "\n";
    for (int l = 0; l < g.layers(); ++l) {
        std::cout << "layer " << std::setw(3) << l << "  phi=" << std::setw(12)
                  << to_double(prof.phi[l]) << "  A=[";
        for (int v = 0; v < g.width(l); ++v)
            std::cout << (v ? " " : "") << to_double(prof.A[l][v]);
        std::cout << "]\n";
    }
    auto mf = max_flow(g);
    auto cut = cut_and_cluster(g);
    std::cout << "p_opposite=" << format_rational(Rat(2 * prof.p_source_sink))
              << " max_flow=" << format_rational(mf.value)
              << " cut_capacity=" << format_rational(cut.capacity)
              << " relative_cost=" << format_rational(cut.relative_cost) << "\n";
    return 0;
}

int cmd_lowerbound(int r, int k, int N, const std::string& eps_text, bool to_instance,
                   const std::string& out_chain, const std::string& out_prefix) {
    if (r > 0) {
        auto row = rounding_loss_report(r);
        std::cout << "r=" << row.r << " k=" << row.k << " N=" << row.N
                  << " eps=" << format_rational(row.eps)
                  << "\n|F|=" << format_rational(row.flow_value)
                  << " y_sep=" << format_rational(row.y_sep)
                  << " sep_prob=" << format_rational(row.sep_prob)
                  << "\nloss ratio=" << to_double(row.ratio) << " (~1.33/(k-1)="
                  << 4.0 / (3 * (row.k - 1)) << ")\n";
        if (to_instance) {
            HkParams params{row.k, row.N, row.eps};
            auto gap = flows_to_gaps(gen_hard_chain(params), staircase_flow(params), r);
            emit(out_prefix + "_instance.json", instance_to_json(gap.instance));
            emit(out_prefix + "_decomposition.json", decomposition_to_json(gap.decomposition));
            emit(out_prefix + "_solution.json", sa_solution_to_json(gap.solution));
        }
        return 0;
    }
    if (k <= 0 || N <= 0) throw ValidationError("lowerbound needs --r or both --k and --N");
    HkParams params{k, N, parse_rat_flag(eps_text, "--eps")};
    auto g = gen_hard_chain(params);
    if (!out_chain.empty()) emit(out_chain, chain_to_json(g));
    auto f = staircase_flow(params);
    auto prof = potentials(g);
    std::cout << "|F|=" << format_rational(f.value)
              << " p(s0,t1)=" << format_rational(prof.p_source_sink)
              << " max_flow=" << format_rational(max_flow(g).value) << "\n";
    return 0;
}

int cmd_report(const std::string& instance_path, const std::string& decomposition_path,
               const std::string& solution_path, const std::string& cut_path, bool json_out) {
    auto inst = load_instance(instance_path);
    auto td = load_decomposition(decomposition_path);
    auto sol = load_solution(solution_path, inst, td);
    nlohmann::json j;
    j["objective"] = format_rational(sol.objective);
    std::optional<CutReport> cut;
    if (!cut_path.empty()) {
        auto cj = load_json_file(cut_path);
        VertexSet side0;
        auto labels = cj.at("labels").get<std::vector<int>>();
        for (int v = 0; v < static_cast<int>(labels.size()); ++v)
            if (labels[v] == 0) side0.push_back(v);
        cut = evaluate_cut(inst, side0);
        j["sparsity"] = format_rational(cut->sparsity);
        j["sparsity_over_objective"] = to_double(Rat(cut->sparsity / sol.objective));
    }
    std::optional<CutReport> opt;
    if (inst.n <= oracle_guard(16)) {
        opt = brute_force_sparsest_cut(inst, oracle_guard(16));
        j["optimum"] = format_rational(opt->sparsity);
        if (cut) j["sparsity_over_optimum"] = to_double(Rat(cut->sparsity / opt->sparsity));
    }
    std::vector<std::pair<Vertex, Vertex>> targets;
    for (const auto& d : inst.demands) targets.push_back({d.u, d.v});
    auto probs = exact_distribution(inst, td, sol, targets);
    auto& rows = j["demands"] = nlohmann::json::array();
    Rat min_ratio;
    bool first = true;
    for (std::size_t d = 0; d < targets.size(); ++d) {
        const Rat y = lp_distance(sol, targets[d].first, targets[d].second);
        const Rat ratio = y == 0 ? Rat(1) : Rat(probs[d] / y);
        rows.push_back({{"i", targets[d].first},
                        {"j", targets[d].second},
                        {"y_separated", format_rational(y)},
                        {"prob_separated", format_rational(probs[d])},
                        {"ratio", to_double(ratio)}});
        if (first || ratio < min_ratio) min_ratio = ratio;
        first = false;
    }
    if (!first) j["min_demand_ratio"] = format_rational(min_ratio);
    if (json_out) {
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    std::cout << "objective        " << j["objective"].get<std::string>() << "\n";
    if (cut) {
        std::cout << "cut sparsity     " << j["sparsity"].get<std::string>() << "  ("
                  << j["sparsity_over_objective"].get<double>() << " x objective)\n";
    }
    if (opt) std::cout << "brute-force OPT  " << j["optimum"].get<std::string>() << "\n";
    std::cout << "demand pairs (y_sep, prob, ratio):\n";
    for (const auto& row : j["demands"])
        std::cout << "  (" << row["i"].get<int>() << "," << row["j"].get<int>() << ")  "
                  << row["y_separated"].get<std::string>() << "  "
                  << row["prob_separated"].get<std::string>() << "  "
                  << row["ratio"].get<double>() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparsest-cut relaxation toolkit"};
    app.require_subcommand(1);

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "generate an instance + decomposition");
    gen->add_option("kind", gen_args.kind, "ktree | maxcut | path")->required();
    gen->add_option("--n", gen_args.n);
    gen->add_option("--r", gen_args.r);
    gen->add_option("--keep", gen_args.keep, "edge keep probability for ktree");
    gen->add_option("--seed", gen_args.seed);
    gen->add_option("--input", gen_args.input, "graph file for the maxcut reduction");
    gen->add_option("--out-instance", gen_args.out_instance);
    gen->add_option("--out-decomposition", gen_args.out_decomposition);

    std::string instance_path, decomposition_path, solution_path, cut_path;
    std::string mode = "rational", out = "-", c_text = "1/100", eps_text, out_chain,
                out_prefix = "gap";
    bool warm = false, do_derandomize = false, json_out = false, to_instance = false;
    std::uint64_t seed = 0;
    int r = 0, k = 0, N = 0, max_n = 26;
    std::pair<int, int> pair{0, 0};

    auto* decompose = app.add_subcommand("decompose", "find a width-r tree decomposition");
    decompose->add_option("--instance", instance_path)->required();
    decompose->add_option("--r", r)->required();
    decompose->add_option("--out", out);

    auto* solve = app.add_subcommand("solve", "solve the bag-local relaxation");
    solve->add_option("--instance", instance_path)->required();
    solve->add_option("--decomposition", decomposition_path)->required();
    solve->add_option("--mode", mode, "rational | float");
    solve->add_flag("--warm-start", warm, "seed the solver with an integral witness");
    solve->add_option("--out", out);

    auto* round = app.add_subcommand("round", "round a solution to a cut");
    round->add_option("--instance", instance_path)->required();
    round->add_option("--decomposition", decomposition_path)->required();
    round->add_option("--solution", solution_path)->required();
    round->add_option("--seed", seed);
    round->add_flag("--derandomize", do_derandomize);
    round->add_option("--c", c_text, "per-pair separation constant for --derandomize");
    round->add_option("--out", out);

    auto* oracle = app.add_subcommand("oracle", "brute-force sparsest cut");
    oracle->add_option("--instance", instance_path)->required();
    oracle->add_option("--max-n", max_n, "enumeration guard (env TWSC_GUARD_N overrides)");
    oracle->add_flag("--json", json_out);

    auto* markov = app.add_subcommand("markov", "chain analysis for one demand pair");
    markov->add_option("--instance", instance_path)->required();
    markov->add_option("--decomposition", decomposition_path)->required();
    markov->add_option("--solution", solution_path)->required();
    markov->add_option("--pair", pair, "demand endpoints i j")->required();
    markov->add_option("--out", out_chain)->expected(1);

    auto* lowerbound = app.add_subcommand("lowerbound", "hard chains and gap instances");
    lowerbound->add_option("--r", r, "loss report for k = 2^r, N = 10k^2");
    lowerbound->add_option("--k", k);
    lowerbound->add_option("--N", N);
    lowerbound->add_option("--eps", eps_text, "rational, e.g. 1/400");
    lowerbound->add_flag("--to-instance", to_instance, "emit the gap instance files");
    lowerbound->add_option("--out-chain", out_chain);
    lowerbound->add_option("--out-prefix", out_prefix);

    auto* report = app.add_subcommand("report", "LP vs cut vs oracle comparison");
    report->add_option("--instance", instance_path)->required();
    report->add_option("--decomposition", decomposition_path)->required();
    report->add_option("--solution", solution_path)->required();
    report->add_option("--cut", cut_path);
    report->add_flag("--json", json_out);

    try {
        app.parse(argc, argv);
        if (gen->parsed()) return cmd_gen(gen_args);
        if (decompose->parsed()) return cmd_decompose(instance_path, r, out);
        if (solve->parsed()) return cmd_solve(instance_path, decomposition_path, mode, warm, out);
        if (round->parsed())
            return cmd_round(instance_path, decomposition_path, solution_path, do_derandomize,
                             seed, c_text, out);
        if (oracle->parsed()) return cmd_oracle(instance_path, max_n, json_out);
        if (markov->parsed())
            return cmd_markov(instance_path, decomposition_path, solution_path, pair, out_chain);
        if (lowerbound->parsed())
            return cmd_lowerbound(r, k, N, eps_text, to_instance, out_chain, out_prefix);
        if (report->parsed())
            return cmd_report(instance_path, decomposition_path, solution_path, cut_path, json_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
