#pragma once

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "covmatch/graph_gen.hpp"
#include "covmatch/sem.hpp"

namespace covmatch {

/// Normalized squared error ||S* - S||_F^2 / ||S||_F^2.
inline double nse(const Gso& s_true, const Gso& s_est) {
    if (s_true.n != s_est.n) throw ParameterError("nse: size mismatch");
    const double denom = s_true.entries.squaredNorm();
    if (denom == 0.0) throw UndefinedMetricError("nse: reference graph is zero");
    return (s_est.entries - s_true.entries).squaredNorm() / denom;
}

struct EvalReport {
    double nse_value = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double runtime_s = 0.0;
    std::vector<std::string> flags;

    json to_json() const {
        return json{{"nse", nse_value},   {"precision", precision}, {"recall", recall},
                    {"f1", f1},           {"runtime_s", runtime_s}, {"flags", flags}};
    }
};

/// Edge-support precision/recall/f1. Truth support is the nonzero
/// off-diagonal pattern; the estimate's support is |w| > threshold.
/// Empty predictions give precision 1 by convention.
inline std::tuple<double, double, double> support_metrics(const Gso& s_true, const Gso& s_est,
                                                          double threshold = 0.0) {
    if (s_true.n != s_est.n) throw ParameterError("support_metrics: size mismatch");
    long tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < s_true.n; ++i)
        for (int j = 0; j < s_true.n; ++j) {
            if (i == j) continue;
            const bool t = s_true.entries(i, j) != 0.0;
            const bool e = std::abs(s_est.entries(i, j)) > threshold;
            if (t && e) ++tp;
            else if (!t && e) ++fp;
            else if (t && !e) ++fn;
        }
    const double precision = (tp + fp) == 0 ? 1.0 : double(tp) / double(tp + fp);
    const double recall = (tp + fn) == 0 ? 1.0 : double(tp) / double(tp + fn);
    const double f1 = (precision + recall) == 0.0
                          ? 0.0
                          : 2.0 * precision * recall / (precision + recall);
    return {precision, recall, f1};
}

struct SigmatchOptions {
    double alpha = 0.0;
    bool symmetric_hollow = false; // demonstration variant with structure enforced
    double tol = 1e-8;             // stop when a sweep changes the objective less
    int max_sweeps = 10000;
};

namespace detail {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

inline double sigmatch_objective(const Matrix& s, const Matrix& c, double alpha) {
    return (s * c * s.transpose()).trace() - 2.0 * (s * c).trace() +
           alpha * s.array().abs().sum();
}

} // namespace detail

/// Node-domain fit: minimizes tr(S C S^T) - 2 tr(S C) + alpha ||S||_1 by
/// cyclic coordinate descent with soft thresholding. Rows decouple in the
/// unconstrained form; no hollowness or symmetry is imposed unless the
/// symmetric_hollow variant is requested.
inline Gso sigmatch_ex(const CovSpec& cov, const SigmatchOptions& opts,
                       std::vector<double>* objective_trace = nullptr) {
    if (opts.alpha < 0.0) throw ParameterError("sigmatch: alpha must be >= 0");
    const int n = cov.n();
    const Matrix& c = cov.c;
    Matrix s = Matrix::Zero(n, n);
    double prev = detail::sigmatch_objective(s, c, opts.alpha);
    if (objective_trace) objective_trace->push_back(prev);

    if (!opts.symmetric_hollow) {
        // y_i = C x_i per row, kept incrementally
        Matrix y = Matrix::Zero(n, n); // column i holds C * s.row(i)^T
        for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double a = c(j, j);
                    if (a <= 0.0) continue;
                    const double partial = y(j, i) - a * s(i, j);
                    const double t =
                        detail::soft_threshold(c(j, i) - partial, opts.alpha / 2.0) / a;
                    const double dx = t - s(i, j);
                    if (dx != 0.0) {
                        y.col(i) += dx * c.col(j);
                        s(i, j) = t;
                    }
                }
            }
            const double obj = detail::sigmatch_objective(s, c, opts.alpha);
            if (objective_trace) objective_trace->push_back(obj);
            if (prev - obj <= opts.tol) break;
            prev = obj;
        }
        return Gso(n, GraphKind::directed, std::move(s));
    }

    // symmetric hollow variant: coordinates are unordered pairs (i, j)
    Matrix y = Matrix::Zero(n, n); // y = S C
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double a = c(i, i) + c(j, j);
                if (a <= 0.0) continue;
                const double partial =
                    (y(i, j) - s(i, j) * c(j, j)) + (y(j, i) - s(i, j) * c(i, i));
                const double t =
                    detail::soft_threshold(2.0 * c(i, j) - partial, opts.alpha) / a;
                const double dx = t - s(i, j);
                if (dx != 0.0) {
                    y.row(i) += dx * c.row(j);
                    y.row(j) += dx * c.row(i);
                    s(i, j) = t;
                    s(j, i) = t;
                }
            }
        }
        const double obj = detail::sigmatch_objective(s, c, opts.alpha);
        if (objective_trace) objective_trace->push_back(obj);
        if (prev - obj <= opts.tol) break;
        prev = obj;
    }
    return Gso(n, GraphKind::undirected, std::move(s));
}

inline Gso sigmatch(const CovSpec& cov, double alpha) {
    SigmatchOptions opts;
    opts.alpha = alpha;
    return sigmatch_ex(cov, opts);
}

/// Constrained gradient of the asymptotic node-domain objective at the true
/// symmetric graph: -4 (I - S)^{-1}. Nonzero off-diagonal entries certify
/// that the truth is not a stationary point of that objective. The value is
/// cross-checked internally against the assembled raw partial derivatives.
inline Matrix sigmatch_stationarity_defect(const Gso& s_true) {
    s_true.validate();
    if (s_true.kind != GraphKind::undirected)
        throw ParameterError("sigmatch_stationarity_defect: graph must be undirected");
    const Matrix h = mixing_matrix(SemModel(s_true));
    const Matrix defect = -4.0 * h;
    // raw partial: 2 (S - I) (I - S)^{-2}; assembled symmetrized form must
    // reproduce the closed form
    const Matrix raw = 2.0 * (s_true.entries - Matrix::Identity(s_true.n, s_true.n)) * (h * h);
    const Matrix assembled = raw + raw.transpose();
    if ((assembled - defect).norm() > 1e-8 * std::max(1.0, defect.norm()))
        throw Error("sigmatch_stationarity_defect: gradient assembly mismatch");
    return defect;
}

/// Zeroes entries with |value| < w_min.
inline Gso prune(const Gso& s, double w_min) {
    if (w_min < 0.0) throw ParameterError("prune: w_min must be >= 0");
    Gso out = s;
    for (int i = 0; i < s.n; ++i)
        for (int j = 0; j < s.n; ++j)
            if (std::abs(out.entries(i, j)) < w_min) out.entries(i, j) = 0.0;
    return out;
}

/// Rank-correlation surrogate covariance: entry (i, j) = sin(pi/2 * tau_ij)
/// with tau the tie-corrected (tau-b) Kendall correlation. Unit diagonal,
/// symmetric, entries in [-1, 1].
inline CovSpec kendall_copula_cov(const DataMatrix& d) {
    const long t = d.t();
    if (t < 2) throw ParameterError("kendall_copula_cov: need at least two samples");
    const int n = static_cast<int>(d.x.rows());
    for (int i = 0; i < n; ++i)
        if ((d.x.row(i).array() == d.x(i, 0)).all())
            throw DegenerateVariableError("kendall_copula_cov: row " + std::to_string(i) +
                                          " is constant");
    Matrix c = Matrix::Identity(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
            for (long a = 0; a < t; ++a) {
                for (long b = a + 1; b < t; ++b) {
                    const double dx = d.x(i, a) - d.x(i, b);
                    const double dy = d.x(j, a) - d.x(j, b);
                    if (dx == 0.0) ++ties_x;
                    if (dy == 0.0) ++ties_y;
                    if (dx == 0.0 || dy == 0.0) continue;
                    if ((dx > 0.0) == (dy > 0.0)) ++concordant;
                    else ++discordant;
                }
            }
            const double n0 = 0.5 * double(t) * double(t - 1);
            const double denom = std::sqrt((n0 - double(ties_x)) * (n0 - double(ties_y)));
            if (denom == 0.0)
                throw DegenerateVariableError("kendall_copula_cov: degenerate pair");
            const double tau = double(concordant - discordant) / denom;
            const double entry = std::sin(0.5 * std::numbers::pi * tau);
            c(i, j) = entry;
            c(j, i) = entry;
        }
    }
    CovSpec cs;
    cs.c = std::move(c); // already exactly symmetric with unit diagonal
    cs.source = CovSource::sample;
    cs.sample_count = t;
    return cs;
}

/// Per run, keeps the top_k off-diagonal entries by |weight| (ties broken by
/// smaller (i, j)); an edge enters the consensus iff it survives in at least
/// min_freq runs. Output is an unweighted 0/1 graph.
inline Gso consensus_graph(const std::vector<Gso>& graphs, int top_k, int min_freq) {
    if (graphs.empty()) throw ParameterError("consensus_graph: empty graph list");
    if (top_k < 0 || min_freq < 0)
        throw ParameterError("consensus_graph: top_k and min_freq must be >= 0");
    const int n = graphs.front().n;
    for (const auto& g : graphs)
        if (g.n != n) throw ParameterError("consensus_graph: size mismatch");
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(n, n);
    for (const auto& g : graphs) {
        std::vector<std::tuple<double, int, int>> entries;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (i != j && g.entries(i, j) != 0.0)
                    entries.emplace_back(std::abs(g.entries(i, j)), i, j);
        std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
        });
        const size_t keep = std::min(entries.size(), static_cast<size_t>(top_k));
        for (size_t k = 0; k < keep; ++k)
            counts(std::get<1>(entries[k]), std::get<2>(entries[k])) += 1;
    }
    Matrix consensus = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (counts(i, j) >= min_freq && i != j) consensus(i, j) = 1.0;
    return Gso(n, GraphKind::directed, std::move(consensus));
}

} // namespace covmatch
