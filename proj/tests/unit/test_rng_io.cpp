#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "helpers.hpp"

using namespace covmatch;

TEST_CASE("derive_seed separates streams and is reproducible") {
    const auto a = derive_seed(42, {1, 2});
    const auto b = derive_seed(42, {1, 2});
    const auto c = derive_seed(42, {2, 1});
    CHECK(a == b);
    CHECK(a != c);
    CHECK(derive_seed(42, {1}) != derive_seed(43, {1}));
}

TEST_CASE("Rng streams are deterministic") {
    Rng r1(7), r2(7);
    for (int i = 0; i < 100; ++i) {
        CHECK(r1.uniform01() == r2.uniform01());
        CHECK(r1.normal() == r2.normal());
    }
}

TEST_CASE("Rng bounded draws stay in range and hit all values") {
    Rng rng(3);
    std::vector<int> seen(5, 0);
    for (int i = 0; i < 2000; ++i) {
        const auto v = rng.bounded(5);
        REQUIRE(v < 5);
        ++seen[static_cast<size_t>(v)];
    }
    for (int count : seen) CHECK(count > 0);
}

TEST_CASE("Rng normal moments are sane") {
    Rng rng(11);
    double sum = 0, sumsq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(std::abs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("CSV matrix round trip is bit exact") {
    Rng rng(5);
    Matrix m(4, 3);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = rng.normal() * std::pow(10.0, rng.uniform(-12, 12));
    m(0, 0) = 0.0;
    m(1, 2) = -1e-300;
    m(2, 1) = 0.1; // not representable exactly; must still round trip
    std::stringstream ss;
    write_matrix_csv(ss, m);
    const Matrix back = read_matrix_csv(ss);
    REQUIRE(back.rows() == m.rows());
    REQUIRE(back.cols() == m.cols());
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 3; ++j) CHECK(back(i, j) == m(i, j));
}

TEST_CASE("JSON matrix round trip is bit exact") {
    Rng rng(6);
    Matrix m(3, 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();
    const json j = matrix_to_json(m);
    const json reparsed = json::parse(j.dump());
    const Matrix back = matrix_from_json(reparsed);
    for (int i = 0; i < 3; ++i)
        for (int k = 0; k < 3; ++k) CHECK(back(i, k) == m(i, k));
}

TEST_CASE("Gso JSON round trip preserves kind and weights") {
    Matrix e = Matrix::Zero(3, 3);
    e(0, 1) = 0.30000000000000004;
    e(1, 0) = 0.30000000000000004;
    e(2, 0) = -1.0 / 3.0;
    e(0, 2) = -1.0 / 3.0;
    const Gso g(3, GraphKind::undirected, e);
    const json j = json::parse(gso_to_json(g).dump());
    const Gso back = gso_from_json(j);
    CHECK(back.kind == GraphKind::undirected);
    CHECK(back.entries == g.entries);
}

TEST_CASE("CSV parse errors are reported") {
    std::stringstream ss("1,2\n3\n");
    CHECK_THROWS_AS(read_matrix_csv(ss), IoError);
    std::stringstream empty("");
    CHECK_THROWS_AS(read_matrix_csv(empty), IoError);
    std::stringstream junk("1,abc\n");
    CHECK_THROWS_AS(read_matrix_csv(junk), IoError);
}

TEST_CASE("Gso validation catches broken invariants") {
    Matrix e = Matrix::Zero(2, 2);
    e(0, 0) = 1.0;
    CHECK_THROWS_AS(Gso(2, GraphKind::directed, e).validate(), ParameterError);
    Matrix f = Matrix::Zero(2, 2);
    f(0, 1) = 1.0;
    CHECK_THROWS_AS(Gso(2, GraphKind::undirected, f).validate(), ParameterError);
    CHECK_NOTHROW(Gso(2, GraphKind::directed, f).validate());
}
