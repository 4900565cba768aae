#pragma once

#include <string>

#include "covmatch/errors.hpp"
#include "covmatch/io.hpp"
#include "covmatch/rng.hpp"

namespace covmatch {

enum class GraphKind { undirected, directed };

inline std::string to_string(GraphKind k) {
    return k == GraphKind::undirected ? "undirected" : "directed";
}

inline GraphKind graph_kind_from_string(const std::string& s) {
    if (s == "undirected") return GraphKind::undirected;
    if (s == "directed") return GraphKind::directed;
    throw ParameterError("unknown graph kind: " + s);
}

/// Weighted adjacency matrix with zero diagonal. Entry (i, j) is the weight
/// of the edge j -> i.
struct Gso {
    int n = 0;
    GraphKind kind = GraphKind::directed;
    Matrix entries;

    Gso() = default;
    Gso(int n_, GraphKind k, Matrix e) : n(n_), kind(k), entries(std::move(e)) {}

    /// Hollow diagonal always; exact symmetry when undirected.
    void validate() const {
        if (entries.rows() != n || entries.cols() != n)
            throw ParameterError("adjacency matrix shape does not match n");
        for (int i = 0; i < n; ++i)
            if (entries(i, i) != 0.0)
                throw ParameterError("adjacency matrix has a nonzero diagonal entry");
        if (kind == GraphKind::undirected && entries != entries.transpose().eval())
            throw ParameterError("undirected adjacency matrix is not symmetric");
    }

    /// Number of nonzero off-diagonal entries; upper_only counts each
    /// undirected edge once.
    int nonzero_count(bool upper_only = false) const {
        int c = 0;
        for (int i = 0; i < n; ++i)
            for (int j = upper_only ? i + 1 : 0; j < n; ++j)
                if (i != j && entries(i, j) != 0.0) ++c;
        return c;
    }
};

inline json gso_to_json(const Gso& g) {
    json triplets = json::array();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j)
            if (g.entries(i, j) != 0.0)
                triplets.push_back(json::array({i, j, g.entries(i, j)}));
    return json{{"n", g.n}, {"kind", to_string(g.kind)}, {"triplets", triplets}};
}

inline Gso gso_from_json(const json& j) {
    Gso g;
    try {
        g.n = j.at("n").get<int>();
        g.kind = graph_kind_from_string(j.at("kind").get<std::string>());
        g.entries = Matrix::Zero(g.n, g.n);
        for (const auto& t : j.at("triplets")) {
            const int i = t.at(0).get<int>();
            const int k = t.at(1).get<int>();
            if (i < 0 || i >= g.n || k < 0 || k >= g.n)
                throw IoError("triplet index out of range");
            g.entries(i, k) = t.at(2).get<double>();
        }
    } catch (const json::exception& e) {
        throw IoError(std::string("bad graph JSON: ") + e.what());
    }
    g.validate();
    return g;
}

/// Loads a graph from .json (with kind metadata) or dense .csv
/// (kind inferred from symmetry).
inline Gso load_gso(const std::string& path) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        return gso_from_json(load_json(path));
    Matrix m = read_matrix_csv(path);
    if (m.rows() != m.cols()) throw IoError("graph CSV is not square: " + path);
    const GraphKind kind = (m == m.transpose().eval()) ? GraphKind::undirected
                                                       : GraphKind::directed;
    Gso g(static_cast<int>(m.rows()), kind, std::move(m));
    g.validate();
    return g;
}

inline void save_gso(const std::string& path, const Gso& g) {
    if (path.size() > 5 && path.substr(path.size() - 5) == ".json")
        save_json(path, gso_to_json(g));
    else
        write_matrix_csv(path, g.entries);
}

/// Magnitude range for edge weights: draws from [-hi,-lo] U [lo,hi], or
/// [lo,hi] when nonnegative is set.
struct WeightRange {
    double lo_abs = 0.1;
    double hi_abs = 1.0;
    bool nonnegative = false;

    void validate() const {
        if (!(lo_abs > 0.0) || !(lo_abs <= hi_abs))
            throw ParameterError("weight range requires 0 < lo_abs <= hi_abs");
    }
};

inline double draw_weight(Rng& rng, const WeightRange& w) {
    const double mag = rng.uniform(w.lo_abs, w.hi_abs);
    return w.nonnegative ? mag : rng.sign() * mag;
}

} // namespace covmatch
