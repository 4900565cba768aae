#pragma once

#include <utility>
#include <vector>

#include "covmatch/gso.hpp"

namespace covmatch {

/// (I - S) condition numbers above this trigger a resample; mixing-matrix
/// computations downstream must stay stable.
inline constexpr double kMaxConditionNumber = 1e8;

namespace detail {

inline double condition_number(const Matrix& a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smin;
}

inline bool mixing_is_stable(const Matrix& s) {
    const Matrix a = Matrix::Identity(s.rows(), s.cols()) - s;
    return condition_number(a) <= kMaxConditionNumber;
}

/// First m elements of a Fisher-Yates draw over [0, pool) without replacement.
inline std::vector<long> sample_without_replacement(long pool, long m, Rng& rng) {
    std::vector<long> idx(static_cast<size_t>(pool));
    for (long i = 0; i < pool; ++i) idx[static_cast<size_t>(i)] = i;
    for (long k = 0; k < m; ++k) {
        const long j = k + static_cast<long>(rng.bounded(static_cast<std::uint64_t>(pool - k)));
        std::swap(idx[static_cast<size_t>(k)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(m));
    return idx;
}

inline constexpr std::uint64_t kSaltUndirected = 0x756e646972ull;
inline constexpr std::uint64_t kSaltDag = 0x646167ull;
inline constexpr std::uint64_t kSaltCyclic = 0x6379636cull;
inline constexpr int kGenRetries = 100;

} // namespace detail

/// True iff the directed graph on the nonzero entries has no cycle
/// (Kahn's topological sort; entry (i, j) is the edge j -> i).
inline bool is_acyclic(const Gso& s) {
    const int n = s.n;
    std::vector<int> indegree(static_cast<size_t>(n), 0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && s.entries(i, j) != 0.0) ++indegree[static_cast<size_t>(i)];
    std::vector<int> queue;
    queue.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        if (indegree[static_cast<size_t>(i)] == 0) queue.push_back(i);
    int removed = 0;
    while (!queue.empty()) {
        const int j = queue.back();
        queue.pop_back();
        ++removed;
        for (int i = 0; i < n; ++i)
            if (i != j && s.entries(i, j) != 0.0 && --indegree[static_cast<size_t>(i)] == 0)
                queue.push_back(i);
    }
    return removed == n;
}

/// Symmetric hollow graph with exactly m edges; weights drawn from the
/// two-sided range. Identical seed gives an identical graph.
inline Gso gen_undirected(int n, long m, const WeightRange& w, std::uint64_t seed) {
    if (n < 1) throw ParameterError("gen_undirected: n must be >= 1");
    const long pool = static_cast<long>(n) * (n - 1) / 2;
    if (m < 0 || m > pool)
        throw ParameterError("gen_undirected: m out of range [0, n(n-1)/2]");
    w.validate();
    std::vector<std::pair<int, int>> pairs;
    pairs.reserve(static_cast<size_t>(pool));
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    for (int attempt = 0; attempt < detail::kGenRetries; ++attempt) {
        Rng rng(derive_seed(seed, {detail::kSaltUndirected, static_cast<std::uint64_t>(attempt)}));
        Matrix s = Matrix::Zero(n, n);
        for (long sel : detail::sample_without_replacement(pool, m, rng)) {
            const auto [i, j] = pairs[static_cast<size_t>(sel)];
            const double weight = draw_weight(rng, w);
            s(i, j) = weight;
            s(j, i) = weight;
        }
        if (detail::mixing_is_stable(s)) return Gso(n, GraphKind::undirected, std::move(s));
    }
    throw GenerationError("gen_undirected: no well-conditioned graph after retries");
}

/// Random DAG: Erdos-Renyi draw on unordered pairs, lower-triangular
/// orientation, then a random vertex relabeling. Always acyclic.
inline Gso gen_dag(int n, double p, const WeightRange& w, std::uint64_t seed) {
    if (n < 1) throw ParameterError("gen_dag: n must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("gen_dag: p must lie in [0, 1]");
    w.validate();
    for (int attempt = 0; attempt < detail::kGenRetries; ++attempt) {
        Rng rng(derive_seed(seed, {detail::kSaltDag, static_cast<std::uint64_t>(attempt)}));
        Matrix lower = Matrix::Zero(n, n);
        for (int i = 1; i < n; ++i)
            for (int j = 0; j < i; ++j)
                if (rng.uniform01() < p) lower(i, j) = draw_weight(rng, w);
        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
        for (int k = n - 1; k > 0; --k)
            std::swap(perm[static_cast<size_t>(k)],
                      perm[rng.bounded(static_cast<std::uint64_t>(k + 1))]);
        Matrix s = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (lower(i, j) != 0.0)
                    s(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]) = lower(i, j);
        if (detail::mixing_is_stable(s)) return Gso(n, GraphKind::directed, std::move(s));
    }
    throw GenerationError("gen_dag: no well-conditioned graph after retries");
}

/// Directed graph with exactly m edges containing at least one cycle;
/// acyclic draws are discarded and regenerated.
inline Gso gen_cyclic_directed(int n, long m, const WeightRange& w, std::uint64_t seed,
                               int max_retries = 100) {
    if (n < 1) throw ParameterError("gen_cyclic_directed: n must be >= 1");
    const long pool = static_cast<long>(n) * (n - 1);
    if (m < 0 || m > pool)
        throw ParameterError("gen_cyclic_directed: m out of range [0, n(n-1)]");
    if (max_retries < 1) throw ParameterError("gen_cyclic_directed: max_retries must be >= 1");
    w.validate();
    for (int attempt = 0; attempt < max_retries; ++attempt) {
        Rng rng(derive_seed(seed, {detail::kSaltCyclic, static_cast<std::uint64_t>(attempt)}));
        Matrix s = Matrix::Zero(n, n);
        for (long sel : detail::sample_without_replacement(pool, m, rng)) {
            // ordered pair index -> (i, j), i != j
            const int i = static_cast<int>(sel / (n - 1));
            int j = static_cast<int>(sel % (n - 1));
            if (j >= i) ++j;
            s(i, j) = draw_weight(rng, w);
        }
        Gso g(n, GraphKind::directed, std::move(s));
        if (!is_acyclic(g) && detail::mixing_is_stable(g.entries)) return g;
    }
    throw GenerationError("gen_cyclic_directed: retries exhausted without a cyclic, "
                          "well-conditioned draw");
}

} // namespace covmatch
