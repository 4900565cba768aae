#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>

#include "covmatch/baseline.hpp"
#include "covmatch/directed.hpp"
#include "covmatch/undirected.hpp"

namespace covmatch {

enum class ExperimentMode { undirected, dag, cyclic };

inline std::string to_string(ExperimentMode m) {
    switch (m) {
        case ExperimentMode::undirected: return "undirected";
        case ExperimentMode::dag: return "dag";
        default: return "cyclic";
    }
}

inline ExperimentMode experiment_mode_from_string(const std::string& s) {
    if (s == "undirected") return ExperimentMode::undirected;
    if (s == "dag") return ExperimentMode::dag;
    if (s == "cyclic") return ExperimentMode::cyclic;
    throw ParameterError("unknown experiment mode: " + s);
}

/// Basin-hopping budget preset: desk for small machines, paper for the
/// full-scale configuration.
struct SolverBudget {
    int cycles = 20;  // K
    int samples = 8;  // L
    int capacity = 8; // L'
};

inline SolverBudget budget_from_string(const std::string& s) {
    if (s == "desk") return SolverBudget{20, 8, 8};
    if (s == "paper") return SolverBudget{200, 64, 64};
    throw ParameterError("unknown budget preset: " + s + " (want desk|paper)");
}

/// Declarative sweep description. t_list uses -1 for the asymptotic
/// covariance. Weight range and edge densities default to the standard
/// recipes for each mode when left unset.
struct ExperimentConfig {
    ExperimentMode mode = ExperimentMode::undirected;
    std::vector<int> n_list{20};
    std::vector<long> t_list{-1};
    int n_graphs = 10;
    double alpha = 0.0;
    std::string budget = "desk";
    std::uint64_t seed = 1;
    std::string out_dir = "covmatch_out";
    int workers = 1;
    std::vector<std::string> methods{"covmatch"};
    std::string undirected_solver = "auto"; // exact | bnb | auto
    double eig_floor = 0.0;                 // 0 = disabled
    double m_factor = 2.0;                  // edges = round(m_factor * N)
    double er_prob = 0.0;                   // 0 = use 2/N
    std::optional<WeightRange> weights;

    void validate() const {
        if (n_list.empty()) throw ParameterError("config: n_list must be nonempty");
        if (t_list.empty()) throw ParameterError("config: t_list must be nonempty");
        if (n_graphs < 1) throw ParameterError("config: n_graphs must be >= 1");
        if (alpha < 0.0) throw ParameterError("config: alpha must be >= 0");
        if (workers < 1) throw ParameterError("config: workers must be >= 1");
        if (methods.empty()) throw ParameterError("config: methods must be nonempty");
        budget_from_string(budget);
        for (const auto& m : methods) {
            if (m != "covmatch" && m != "sigmatch")
                throw ParameterError("config: unknown method " + m);
            if (m == "sigmatch" && mode != ExperimentMode::undirected)
                throw ParameterError("config: sigmatch is benchmarked in undirected mode only");
        }
    }

    WeightRange weight_range() const {
        if (weights) return *weights;
        return mode == ExperimentMode::dag ? WeightRange{0.5, 2.0, false}
                                           : WeightRange{0.1, 1.0, false};
    }
};

inline ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    try {
        if (j.contains("mode")) cfg.mode = experiment_mode_from_string(j["mode"]);
        if (j.contains("n_list")) cfg.n_list = j["n_list"].get<std::vector<int>>();
        if (j.contains("t_list")) {
            cfg.t_list.clear();
            for (const auto& t : j["t_list"]) {
                if (t.is_string()) {
                    const auto s = t.get<std::string>();
                    if (s == "asymptotic" || s == "inf")
                        cfg.t_list.push_back(-1);
                    else
                        throw ParameterError("config: bad t_list token " + s);
                } else {
                    cfg.t_list.push_back(t.get<long>());
                }
            }
        }
        if (j.contains("n_graphs")) cfg.n_graphs = j["n_graphs"].get<int>();
        if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
        if (j.contains("budget")) cfg.budget = j["budget"].get<std::string>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
        if (j.contains("methods")) cfg.methods = j["methods"].get<std::vector<std::string>>();
        if (j.contains("undirected_solver"))
            cfg.undirected_solver = j["undirected_solver"].get<std::string>();
        if (j.contains("eig_floor")) cfg.eig_floor = j["eig_floor"].get<double>();
        if (j.contains("m_factor")) cfg.m_factor = j["m_factor"].get<double>();
        if (j.contains("er_prob")) cfg.er_prob = j["er_prob"].get<double>();
        if (j.contains("weights")) {
            WeightRange w;
            w.lo_abs = j["weights"].at("lo").get<double>();
            w.hi_abs = j["weights"].at("hi").get<double>();
            if (j["weights"].contains("nonnegative"))
                w.nonnegative = j["weights"]["nonnegative"].get<bool>();
            cfg.weights = w;
        }
    } catch (const json::exception& e) {
        throw ParameterError(std::string("config: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

/// Floors the covariance spectrum at floor * lambda_max (a ridge for barely
/// positive sample covariances). Disabled when floor <= 0.
inline CovSpec apply_eig_floor(const CovSpec& c, double floor) {
    if (floor <= 0.0) return c;
    EigenPair eig = evd_sym(c);
    const double lmin = floor * eig.lambda(0);
    Vector lam = eig.lambda.cwiseMax(lmin);
    Matrix fixed = eig.u * lam.asDiagonal() * eig.u.transpose();
    CovSpec out = c;
    out.c = 0.5 * (fixed + fixed.transpose().eval());
    return out;
}

/// True when the estimate attains a strictly lower structural objective
/// than the truth: evidence that a sparser graph reproduces the covariance.
inline bool flag_nonidentifiable(const Gso& truth, const Gso& estimate,
                                 const DirectedProblem& p) {
    if (truth.n != estimate.n) throw ParameterError("flag_nonidentifiable: size mismatch");
    return objective_j_matrix(p, estimate.entries) <
           objective_j_matrix(p, truth.entries) - 1e-9;
}

/// Undirected variant: flagged when the exact-recovery conditions fail.
inline bool flag_nonidentifiable(const Gso& truth, const Gso& estimate,
                                 const UndirectedProblem&) {
    if (truth.n != estimate.n) throw ParameterError("flag_nonidentifiable: size mismatch");
    return !identifiability_check(truth).identifiable();
}

namespace detail {

inline constexpr std::uint64_t kSaltTruth = 0x7472757468ull;
inline constexpr std::uint64_t kSaltFiniteT = 0x74646174ull;
inline constexpr std::uint64_t kSaltSolver = 0x736f6c76ull;
inline constexpr std::uint64_t kSaltHeldOut = 0x67726964ull;

inline std::uint64_t t_key(long t) { return t < 0 ? 0ull : static_cast<std::uint64_t>(t) + 1ull; }

inline std::string t_label(long t) { return t < 0 ? "inf" : std::to_string(t); }

inline std::string artifact_name(ExperimentMode mode, int n, long t, int g,
                                 const std::string& method) {
    return "inst_" + to_string(mode) + "_n" + std::to_string(n) + "_t" + t_label(t) + "_g" +
           std::to_string(g) + "_" + method + ".json";
}

} // namespace detail

struct ExperimentStats {
    int computed = 0;
    int skipped = 0;
    std::string aggregate_path;
};

/// Runs the full (N, T, graph, method) grid. Each instance writes a JSON
/// artifact; cells whose artifact already exists are skipped, so interrupted
/// runs resume cleanly. The aggregate CSV is rebuilt from the artifacts at
/// the end, making resumed and uninterrupted runs byte-identical.
inline ExperimentStats run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + cfg.out_dir);

    const SolverBudget budget = budget_from_string(cfg.budget);
    const WeightRange wr = cfg.weight_range();
    ExperimentStats stats;

    for (int n : cfg.n_list) {
        for (int g = 0; g < cfg.n_graphs; ++g) {
            const std::uint64_t graph_seed = derive_seed(
                cfg.seed, {detail::kSaltTruth, static_cast<std::uint64_t>(cfg.mode),
                           static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(g)});
            std::optional<Gso> truth; // generated lazily, shared across T
            auto get_truth = [&]() -> const Gso& {
                if (!truth) {
                    const long m = std::lround(cfg.m_factor * n);
                    switch (cfg.mode) {
                        case ExperimentMode::undirected:
                            truth = gen_undirected(n, m, wr, graph_seed);
                            break;
                        case ExperimentMode::dag: {
                            const double p = cfg.er_prob > 0.0 ? cfg.er_prob : 2.0 / n;
                            truth = gen_dag(n, p, wr, graph_seed);
                            break;
                        }
                        case ExperimentMode::cyclic:
                            truth = gen_cyclic_directed(n, m, wr, graph_seed);
                            break;
                    }
                }
                return *truth;
            };
            for (long t : cfg.t_list) {
                for (const auto& method : cfg.methods) {
                    const fs::path artifact =
                        fs::path(cfg.out_dir) / detail::artifact_name(cfg.mode, n, t, g, method);
                    if (fs::exists(artifact)) {
                        ++stats.skipped;
                        continue;
                    }
                    const Gso& s_true = get_truth();
                    CovSpec cov = t < 0 ? asymptotic_cov(SemModel(s_true))
                                        : sample_cov(sample_data(
                                              SemModel(s_true), t,
                                              derive_seed(cfg.seed,
                                                          {detail::kSaltFiniteT,
                                                           static_cast<std::uint64_t>(cfg.mode),
                                                           static_cast<std::uint64_t>(n),
                                                           static_cast<std::uint64_t>(g),
                                                           detail::t_key(t)})));
                    cov = apply_eig_floor(cov, cfg.eig_floor);

                    json art;
                    art["mode"] = to_string(cfg.mode);
                    art["n"] = n;
                    art["t"] = t;
                    art["graph_index"] = g;
                    art["method"] = method;
                    art["seed"] = cfg.seed;

                    const auto t0 = std::chrono::steady_clock::now();
                    Gso estimate;
                    bool flagged = false;
                    if (method == "sigmatch") {
                        estimate = sigmatch(cov, cfg.alpha);
                        flagged = (n <= kMaxEnumerationNodes)
                                      ? !identifiability_check(s_true).identifiable()
                                      : false;
                    } else if (cfg.mode == ExperimentMode::undirected) {
                        UndirectedProblem prob = build_problem(cov, cfg.alpha);
                        const bool exact = cfg.undirected_solver == "exact" ||
                                           (cfg.undirected_solver == "auto" && n <= 20);
                        const SignVector q = exact ? solve_exact(prob) : solve_bnb(prob);
                        estimate = reconstruct_from_problem(prob, q);
                        art["objective"] = objective(prob, q);
                        json qj = json::array();
                        for (int i = 0; i < q.n(); ++i) qj.push_back(q.q(i));
                        art["q"] = qj;
                        if (n <= kMaxEnumerationNodes) {
                            const auto rep = identifiability_check(s_true);
                            art["cond_i"] = rep.cond_i;
                            art["cond_ii"] = rep.cond_ii;
                            flagged = !rep.identifiable();
                        }
                    } else {
                        DirectedProblem prob = make_directed_problem(cov, cfg.alpha);
                        BasinHopConfig bh;
                        bh.seed = derive_seed(cfg.seed, {detail::kSaltSolver,
                                                         static_cast<std::uint64_t>(cfg.mode),
                                                         static_cast<std::uint64_t>(n),
                                                         static_cast<std::uint64_t>(g),
                                                         detail::t_key(t)});
                        bh.workers = cfg.workers;
                        const CandidateSet c0 = initial_candidate_set(prob, budget.capacity, bh.seed);
                        const BasinHopResult res =
                            basin_hop_candidates(prob, c0, bh, budget.cycles, budget.samples);
                        estimate = reconstruct_directed(prob, res.best);
                        art["final_cost"] = res.best.cost;
                        art["cycles_used"] = res.cycles_used;
                        art["candidate_costs"] = res.candidate_costs;
                        flagged = flag_nonidentifiable(s_true, estimate, prob);
                    }
                    const auto t1 = std::chrono::steady_clock::now();
                    art["runtime_s"] = std::chrono::duration<double>(t1 - t0).count();
                    art["nse"] = nse(s_true, estimate);
                    art["flagged"] = flagged;
                    art["s_hat"] = matrix_to_json(estimate.entries);
                    save_json(artifact.string(), art);
                    ++stats.computed;
                }
            }
        }
    }

    // aggregate, rebuilt from artifacts in deterministic order
    const fs::path agg_path = fs::path(cfg.out_dir) / "aggregate.csv";
    std::ofstream agg(agg_path);
    if (!agg) throw IoError("cannot write " + agg_path.string());
    agg << "mode,N,T,method,mean_nse,std_nse,mean_runtime,n_flagged_nonidentifiable\n";
    for (int n : cfg.n_list) {
        for (long t : cfg.t_list) {
            for (const auto& method : cfg.methods) {
                std::vector<double> unflagged_nse;
                double runtime_sum = 0.0;
                int flagged_count = 0;
                for (int g = 0; g < cfg.n_graphs; ++g) {
                    const fs::path artifact =
                        fs::path(cfg.out_dir) / detail::artifact_name(cfg.mode, n, t, g, method);
                    const json art = load_json(artifact.string());
                    runtime_sum += art.at("runtime_s").get<double>();
                    if (art.at("flagged").get<bool>())
                        ++flagged_count;
                    else
                        unflagged_nse.push_back(art.at("nse").get<double>());
                }
                double mean_nse = std::numeric_limits<double>::quiet_NaN();
                double std_nse = std::numeric_limits<double>::quiet_NaN();
                if (!unflagged_nse.empty()) {
                    double sum = 0.0;
                    for (double v : unflagged_nse) sum += v;
                    mean_nse = sum / static_cast<double>(unflagged_nse.size());
                    double ss = 0.0;
                    for (double v : unflagged_nse) ss += (v - mean_nse) * (v - mean_nse);
                    std_nse = unflagged_nse.size() > 1
                                  ? std::sqrt(ss / static_cast<double>(unflagged_nse.size() - 1))
                                  : 0.0;
                }
                agg << to_string(cfg.mode) << ',' << n << ',' << detail::t_label(t) << ','
                    << method << ',' << format_double(mean_nse) << ',' << format_double(std_nse)
                    << ',' << format_double(runtime_sum / cfg.n_graphs) << ',' << flagged_count
                    << '\n';
            }
        }
    }
    agg.close();
    stats.aggregate_path = agg_path.string();
    return stats;
}

struct GridSearchResult {
    // (N, T) -> (best alpha, mean NSE at that alpha)
    std::map<std::pair<int, long>, std::pair<double, double>> best;
    json to_json() const {
        json cells = json::array();
        for (const auto& [key, val] : best)
            cells.push_back(json{{"n", key.first},
                                 {"t", key.second},
                                 {"alpha", val.first},
                                 {"mean_nse", val.second}});
        return json{{"cells", cells}};
    }
};

/// Evaluates the sweep per alpha on a held-out seed block and picks the
/// argmin mean NSE per (N, T); ties go to the smaller alpha.
inline GridSearchResult grid_search_alpha(const ExperimentConfig& cfg,
                                          const std::vector<double>& alphas) {
    if (alphas.empty()) throw ParameterError("grid_search_alpha: empty alpha list");
    namespace fs = std::filesystem;
    GridSearchResult result;
    std::vector<double> sorted_alphas = alphas;
    std::sort(sorted_alphas.begin(), sorted_alphas.end());
    for (size_t k = 0; k < sorted_alphas.size(); ++k) {
        ExperimentConfig sub = cfg;
        sub.alpha = sorted_alphas[k];
        sub.seed = derive_seed(cfg.seed, {detail::kSaltHeldOut});
        sub.out_dir = (fs::path(cfg.out_dir) / ("alpha_" + std::to_string(k))).string();
        run_experiment(sub);
        for (int n : cfg.n_list) {
            for (long t : cfg.t_list) {
                std::vector<double> unflagged;
                for (int g = 0; g < cfg.n_graphs; ++g) {
                    const fs::path artifact =
                        fs::path(sub.out_dir) /
                        detail::artifact_name(cfg.mode, n, t, g, cfg.methods.front());
                    const json art = load_json(artifact.string());
                    if (!art.at("flagged").get<bool>())
                        unflagged.push_back(art.at("nse").get<double>());
                }
                double mean = std::numeric_limits<double>::infinity();
                if (!unflagged.empty()) {
                    mean = 0.0;
                    for (double v : unflagged) mean += v;
                    mean /= static_cast<double>(unflagged.size());
                }
                const auto key = std::make_pair(n, t);
                auto it = result.best.find(key);
                if (it == result.best.end() || mean < it->second.second)
                    result.best[key] = {sorted_alphas[k], mean};
            }
        }
    }
    return result;
}

} // namespace covmatch
