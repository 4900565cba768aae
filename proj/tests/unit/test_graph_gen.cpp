#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace covmatch;

TEST_CASE("gen_undirected: empty graph") {
    const Gso g = gen_undirected(2, 0, {0.1, 1.0}, 1);
    CHECK(g.entries.isZero(0.0));
    CHECK(g.kind == GraphKind::undirected);
    CHECK_NOTHROW(g.validate());
}

TEST_CASE("gen_undirected: exact edge count, range, symmetry") {
    const Gso g = gen_undirected(20, 40, {0.1, 1.0}, 99);
    g.validate();
    CHECK(g.nonzero_count(true) == 40);
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j) {
            const double w = g.entries(i, j);
            if (w != 0.0) {
                CHECK(std::abs(w) >= 0.1);
                CHECK(std::abs(w) <= 1.0);
                CHECK(g.entries(j, i) == w);
            }
        }
    // two-sided draw produces both signs at this edge count
    int pos = 0, neg = 0;
    for (int i = 0; i < 20; ++i)
        for (int j = i + 1; j < 20; ++j) {
            if (g.entries(i, j) > 0) ++pos;
            if (g.entries(i, j) < 0) ++neg;
        }
    CHECK(pos > 0);
    CHECK(neg > 0);
}

TEST_CASE("gen_undirected: seeded determinism") {
    const Gso a = gen_undirected(15, 30, {0.1, 1.0}, 1234);
    const Gso b = gen_undirected(15, 30, {0.1, 1.0}, 1234);
    CHECK(a.entries == b.entries);
    const Gso c = gen_undirected(15, 30, {0.1, 1.0}, 1235);
    CHECK(a.entries != c.entries);
}

TEST_CASE("gen_undirected: parameter validation") {
    CHECK_THROWS_AS(gen_undirected(4, 7, {0.1, 1.0}, 1), ParameterError);
    CHECK_THROWS_AS(gen_undirected(4, -1, {0.1, 1.0}, 1), ParameterError);
    CHECK_THROWS_AS(gen_undirected(4, 2, {0.0, 1.0}, 1), ParameterError);
    CHECK_THROWS_AS(gen_undirected(4, 2, {2.0, 1.0}, 1), ParameterError);
}

TEST_CASE("gen_undirected: nonnegative flag restricts the sign") {
    WeightRange w{0.1, 1.0, true};
    const Gso g = gen_undirected(10, 20, w, 7);
    CHECK(g.entries.minCoeff() >= 0.0);
}

TEST_CASE("gen_dag: p=0 gives the zero matrix") {
    const Gso g = gen_dag(3, 0.0, {0.5, 2.0}, 1);
    CHECK(g.entries.isZero(0.0));
    CHECK(is_acyclic(g));
}

TEST_CASE("gen_dag: always acyclic, weights in range") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Gso g = gen_dag(20, 0.1, {0.5, 2.0}, seed);
        g.validate();
        CHECK(is_acyclic(g));
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                if (g.entries(i, j) != 0.0) {
                    CHECK(std::abs(g.entries(i, j)) >= 0.5);
                    CHECK(std::abs(g.entries(i, j)) <= 2.0);
                }
    }
}

TEST_CASE("gen_dag: edge count concentrates near the expected value") {
    // p = 2/N on N(N-1)/2 pairs gives N-1 = 19 expected edges
    double total = 0.0;
    const int runs = 200;
    for (int seed = 0; seed < runs; ++seed)
        total += gen_dag(20, 0.1, {0.5, 2.0}, static_cast<std::uint64_t>(seed)).nonzero_count();
    const double mean = total / runs;
    CHECK(mean > 16.0);
    CHECK(mean < 22.0);
}

TEST_CASE("gen_cyclic_directed: forced 2-cycle") {
    const Gso g = gen_cyclic_directed(2, 2, {0.1, 0.4}, 5);
    CHECK(g.entries(0, 1) != 0.0);
    CHECK(g.entries(1, 0) != 0.0);
    CHECK_FALSE(is_acyclic(g));
}

TEST_CASE("gen_cyclic_directed: exact edges, contains a cycle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Gso g = gen_cyclic_directed(20, 40, {0.1, 1.0}, seed);
        g.validate();
        CHECK(g.nonzero_count() == 40);
        CHECK_FALSE(is_acyclic(g));
    }
}

TEST_CASE("gen_cyclic_directed: impossible request exhausts retries") {
    // a single directed edge can never contain a cycle
    CHECK_THROWS_AS(gen_cyclic_directed(3, 1, {0.1, 1.0}, 1, 5), GenerationError);
}

TEST_CASE("is_acyclic basics") {
    CHECK(is_acyclic(Gso(3, GraphKind::directed, Matrix::Zero(3, 3))));
    Matrix lower = Matrix::Zero(3, 3);
    lower(1, 0) = 1.0;
    lower(2, 1) = -2.0;
    CHECK(is_acyclic(Gso(3, GraphKind::directed, lower)));
    Matrix cyc = Matrix::Zero(2, 2);
    cyc(0, 1) = 0.5;
    cyc(1, 0) = 0.5;
    CHECK_FALSE(is_acyclic(Gso(2, GraphKind::directed, cyc)));
}

TEST_CASE("generated graphs keep (I - S) well conditioned") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Gso g = gen_undirected(12, 24, {0.1, 1.0}, seed);
        CHECK_NOTHROW(mixing_matrix(SemModel(g)));
        const Gso d = gen_cyclic_directed(12, 24, {0.1, 1.0}, seed);
        CHECK_NOTHROW(mixing_matrix(SemModel(d)));
    }
}
