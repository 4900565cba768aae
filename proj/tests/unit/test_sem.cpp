#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"

using namespace covmatch;
using testhelp::neumann_series;

TEST_CASE("mixing_matrix: trivial and nilpotent cases") {
    const Gso zero(3, GraphKind::undirected, Matrix::Zero(3, 3));
    CHECK(mixing_matrix(SemModel(zero)).isApprox(Matrix::Identity(3, 3), 1e-14));

    Matrix s = Matrix::Zero(2, 2);
    s(0, 1) = 0.5; // upper-triangular: H = I + S
    Matrix expected(2, 2);
    expected << 1.0, 0.5, 0.0, 1.0;
    CHECK(mixing_matrix(SemModel(Gso(2, GraphKind::directed, s))).isApprox(expected, 1e-14));
}

TEST_CASE("mixing_matrix equals the power series for a DAG") {
    const Gso g = gen_dag(5, 0.5, {0.5, 2.0}, 21);
    const Matrix h = mixing_matrix(SemModel(g));
    // S is nilpotent, so the series terminates exactly at N terms
    const Matrix oracle = neumann_series(g.entries, 5);
    CHECK((h - oracle).norm() <= 1e-10 * oracle.norm());
}

TEST_CASE("mixing_matrix residual contract and singular input") {
    const Gso g = gen_undirected(10, 20, {0.1, 1.0}, 3);
    const Matrix h = mixing_matrix(SemModel(g));
    const Matrix a = Matrix::Identity(10, 10) - g.entries;
    CHECK((a * h - Matrix::Identity(10, 10)).norm() <= 1e-10 * 10);

    Matrix bad = Matrix::Zero(2, 2); // S = I - ones => I - S singular
    bad(0, 1) = 1.0;
    bad(1, 0) = 1.0;
    Matrix s = Matrix::Zero(2, 2);
    s(0, 1) = 1.0;
    s(1, 0) = 1.0; // eigenvalue 1 makes (I - S) singular
    CHECK_THROWS_AS(mixing_matrix(SemModel(Gso(2, GraphKind::undirected, s))), SingularityError);
}

TEST_CASE("sample_data: determinism and base case") {
    const Gso zero(4, GraphKind::undirected, Matrix::Zero(4, 4));
    const DataMatrix a = sample_data(SemModel(zero), 50, 9);
    const DataMatrix b = sample_data(SemModel(zero), 50, 9);
    CHECK(a.x == b.x);
    CHECK(a.t() == 50);
    CHECK_THROWS_AS(sample_data(SemModel(zero), 0, 1), ParameterError);

    Matrix not_pd = -Matrix::Identity(4, 4);
    CHECK_THROWS_AS(sample_data(SemModel(zero, not_pd), 10, 1), ParameterError);
}

TEST_CASE("sample_data columns do not depend on T") {
    // per-column streams: the first 10 columns match between a T=10 and T=40 run
    const Gso g = gen_undirected(5, 8, {0.1, 1.0}, 17);
    const DataMatrix small = sample_data(SemModel(g), 10, 31);
    const DataMatrix large = sample_data(SemModel(g), 40, 31);
    CHECK(small.x == large.x.leftCols(10));
}

TEST_CASE("sample_cov: single column and brute-force oracle") {
    DataMatrix one;
    one.x = Vector::LinSpaced(3, 1.0, 3.0);
    const CovSpec c1 = sample_cov(one);
    CHECK(c1.c.isApprox(one.x * one.x.transpose(), 1e-15));

    Rng rng(23);
    DataMatrix d;
    d.x.resize(4, 100);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 100; ++j) d.x(i, j) = rng.normal();
    Matrix oracle = Matrix::Zero(4, 4);
    for (int t = 0; t < 100; ++t) oracle += d.x.col(t) * d.x.col(t).transpose();
    oracle /= 100.0;
    const CovSpec c = sample_cov(d);
    CHECK((c.c - oracle).norm() <= 1e-12 * oracle.norm());
    CHECK(c.c == c.c.transpose().eval());
    CHECK(c.sample_count == 100);
}

TEST_CASE("sample_cov: orthogonal rows of norm sqrt(T) give identity") {
    const int t = 8;
    Matrix x(2, t);
    for (int j = 0; j < t; ++j) {
        x(0, j) = (j % 2 == 0) ? 1.0 : -1.0;
        x(1, j) = (j / 2 % 2 == 0) ? 1.0 : -1.0;
    }
    CHECK(sample_cov({x}).c.isApprox(Matrix::Identity(2, 2), 1e-14));
}

TEST_CASE("asymptotic_cov: closed forms and positivity") {
    const Gso zero(3, GraphKind::undirected, Matrix::Zero(3, 3));
    CHECK(asymptotic_cov(SemModel(zero)).c.isApprox(Matrix::Identity(3, 3), 1e-14));

    Matrix s(2, 2);
    s << 0.0, 0.5, 0.5, 0.0;
    const Matrix a = Matrix::Identity(2, 2) - s;
    const Matrix oracle = (a * a).inverse(); // explicit 2x2 route
    const CovSpec c = asymptotic_cov(SemModel(Gso(2, GraphKind::undirected, s)));
    CHECK((c.c - oracle).norm() <= 1e-12 * oracle.norm());
    CHECK(c.source == CovSource::asymptotic);

    const Gso g = gen_undirected(8, 16, {0.1, 1.0}, 4);
    Matrix sig = testhelp::random_spd(8, 0.5, 3.0, 11);
    const CovSpec cx = asymptotic_cov(SemModel(g, sig));
    Eigen::SelfAdjointEigenSolver<Matrix> es(cx.c);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("asymptotic eigenvalues are (1 - lambda_S)^{-2} for identity noise") {
    const Gso g = gen_undirected(5, 7, {0.1, 0.8}, 13);
    Eigen::SelfAdjointEigenSolver<Matrix> s_eig(g.entries);
    const CovSpec c = asymptotic_cov(SemModel(g));
    Eigen::SelfAdjointEigenSolver<Matrix> c_eig(c.c);
    std::vector<double> expect;
    for (int i = 0; i < 5; ++i)
        expect.push_back(1.0 / std::pow(1.0 - s_eig.eigenvalues()(i), 2));
    std::sort(expect.begin(), expect.end());
    for (int i = 0; i < 5; ++i)
        CHECK(std::abs(c_eig.eigenvalues()(i) - expect[static_cast<size_t>(i)]) <=
              1e-9 * expect[static_cast<size_t>(i)]);
}

TEST_CASE("law of large numbers: sample covariance approaches the asymptotic one") {
    const Gso g = gen_undirected(6, 12, {0.1, 0.6}, 8);
    const SemModel model(g);
    const DataMatrix d = sample_data(model, 1000000, 77);
    const CovSpec cs = sample_cov(d);
    const CovSpec ca = asymptotic_cov(model);
    CHECK((cs.c - ca.c).norm() <= 5e-2);
}

TEST_CASE("likelihood gradient vanishes at the sample covariance") {
    // d/dSigma [log det Sigma + tr(Sigma^{-1} C)] = Sigma^{-1} - Sigma^{-1} C Sigma^{-1}
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const Matrix c = testhelp::random_spd(6, 0.3, 4.0, seed);
        const Matrix cinv = c.inverse();
        const Matrix grad = cinv - cinv * c * cinv;
        CHECK(grad.norm() <= 1e-10);
    }
}

TEST_CASE("colored noise sampling matches its asymptotic covariance") {
    const Gso g = gen_undirected(4, 6, {0.1, 0.5}, 19);
    Vector diag_sig(4);
    diag_sig << 1.0, 2.0, 0.5, 3.0;
    const SemModel model(g, Matrix(diag_sig.asDiagonal()));
    const DataMatrix d = sample_data(model, 400000, 5);
    const CovSpec cs = sample_cov(d);
    const CovSpec ca = asymptotic_cov(model);
    CHECK((cs.c - ca.c).norm() <= 5e-2 * ca.c.norm());
}
