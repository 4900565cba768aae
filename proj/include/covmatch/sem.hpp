#pragma once

#include "covmatch/gso.hpp"

namespace covmatch {

/// Linear structural model x = Sx + e with noise covariance sigma_e
/// (empty matrix means identity).
struct SemModel {
    Gso s;
    Matrix sigma_e;

    explicit SemModel(Gso g) : s(std::move(g)) {}
    SemModel(Gso g, Matrix noise_cov) : s(std::move(g)), sigma_e(std::move(noise_cov)) {
        if (sigma_e.size() != 0 &&
            (sigma_e.rows() != s.n || sigma_e.cols() != s.n))
            throw ParameterError("sigma_e shape does not match the graph");
    }

    bool identity_noise() const { return sigma_e.size() == 0; }
};

struct DataMatrix {
    Matrix x; // N x T, one observation per column
    long t() const { return x.cols(); }
};

enum class CovSource { sample, asymptotic };

/// A covariance source: either a sample covariance from data or the
/// analytic asymptotic covariance. Always exactly symmetric.
struct CovSpec {
    Matrix c;
    CovSource source = CovSource::sample;
    long sample_count = 0;

    static CovSpec sample(Matrix m, long t) {
        CovSpec cs;
        cs.c = 0.5 * (m + m.transpose().eval());
        cs.source = CovSource::sample;
        cs.sample_count = t;
        return cs;
    }
    static CovSpec asymptotic(Matrix m) {
        CovSpec cs;
        cs.c = 0.5 * (m + m.transpose().eval());
        cs.source = CovSource::asymptotic;
        return cs;
    }
    int n() const { return static_cast<int>(c.rows()); }
};

inline json covspec_to_json(const CovSpec& cs) {
    return json{{"source", cs.source == CovSource::sample ? "sample" : "asymptotic"},
                {"sample_count", cs.sample_count},
                {"c", matrix_to_json(cs.c)}};
}

inline CovSpec covspec_from_json(const json& j) {
    Matrix m = matrix_from_json(j.at("c"));
    if (j.at("source").get<std::string>() == "sample")
        return CovSpec::sample(std::move(m), j.at("sample_count").get<long>());
    return CovSpec::asymptotic(std::move(m));
}

/// H = (I - S)^{-1}, refined so that ||(I - S) H - I||_F <= 1e-10 * N.
inline Matrix mixing_matrix(const SemModel& model) {
    const int n = model.s.n;
    const Matrix a = Matrix::Identity(n, n) - model.s.entries;
    Eigen::PartialPivLU<Matrix> lu(a);
    Matrix h = lu.solve(Matrix::Identity(n, n));
    if (!h.allFinite()) throw SingularityError("mixing_matrix: (I - S) is singular");
    // one step of iterative refinement keeps the residual tight even near
    // the condition-number guard
    h += lu.solve(Matrix::Identity(n, n) - a * h);
    const double resid = (a * h - Matrix::Identity(n, n)).norm();
    if (!(resid <= 1e-10 * n))
        throw SingularityError("mixing_matrix: residual " + std::to_string(resid) +
                               " exceeds tolerance; (I - S) is numerically singular");
    return h;
}

namespace detail {
inline constexpr std::uint64_t kSaltSampleData = 0x64617461ull;
}

/// Draws T columns x_t = H e_t with e_t ~ N(0, sigma_e). Each column uses an
/// independent stream derived from (seed, column), so the result does not
/// depend on how columns are scheduled across threads.
inline DataMatrix sample_data(const SemModel& model, long t, std::uint64_t seed) {
    if (t < 1) throw ParameterError("sample_data: t must be >= 1");
    const int n = model.s.n;
    Matrix chol_l;
    if (!model.identity_noise()) {
        Eigen::LLT<Matrix> llt(0.5 * (model.sigma_e + model.sigma_e.transpose().eval()));
        if (llt.info() != Eigen::Success)
            throw ParameterError("sample_data: sigma_e is not positive definite");
        chol_l = llt.matrixL();
    }
    const Matrix h = mixing_matrix(model);
    DataMatrix d;
    d.x.resize(n, t);
    Vector z(n), e(n);
    for (long col = 0; col < t; ++col) {
        Rng rng(derive_seed(seed, {detail::kSaltSampleData, static_cast<std::uint64_t>(col)}));
        for (int i = 0; i < n; ++i) z(i) = rng.normal();
        if (chol_l.size() != 0)
            e.noalias() = chol_l * z;
        else
            e = z;
        d.x.col(col).noalias() = h * e;
    }
    return d;
}

/// C = (1/T) X X^T, symmetrized.
inline CovSpec sample_cov(const DataMatrix& d) {
    const double t = static_cast<double>(d.t());
    Matrix c = (d.x * d.x.transpose()) / t;
    return CovSpec::sample(std::move(c), d.t());
}

/// Sigma_x = H sigma_e H^T; the exact T -> infinity covariance.
inline CovSpec asymptotic_cov(const SemModel& model) {
    const Matrix h = mixing_matrix(model);
    Matrix c;
    if (model.identity_noise())
        c = h * h.transpose();
    else
        c = h * model.sigma_e * h.transpose();
    return CovSpec::asymptotic(std::move(c));
}

} // namespace covmatch
