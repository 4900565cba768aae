#pragma once

#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "covmatch/sem.hpp"

namespace covmatch {

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending.
/// Sign convention: each eigenvector's largest-magnitude entry is positive
/// (ties resolved to the lowest index), so identical input bytes produce
/// identical output bytes.
struct EigenPair {
    Matrix u;
    Vector lambda;
    int n() const { return static_cast<int>(lambda.size()); }
};

/// Orthogonal matrix with an optional objective value and provenance tag.
struct OrthoPoint {
    Matrix v;
    double cost = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed_tag = 0;
    int n() const { return static_cast<int>(v.rows()); }
};

inline EigenPair evd_sym(const Matrix& c) {
    if (!c.allFinite()) throw ParameterError("evd_sym: input has non-finite entries");
    if (c.rows() != c.cols()) throw ParameterError("evd_sym: matrix must be square");
    const double asym = (c - c.transpose().eval()).norm();
    if (asym > 1e-8 * std::max(1.0, c.norm()))
        throw ParameterError("evd_sym: matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (c + c.transpose().eval()));
    if (es.info() != Eigen::Success) throw ParameterError("evd_sym: eigensolver failed");
    const int n = static_cast<int>(c.rows());
    EigenPair p;
    p.lambda.resize(n);
    p.u.resize(n, n);
    for (int j = 0; j < n; ++j) { // solver returns ascending order
        p.lambda(j) = es.eigenvalues()(n - 1 - j);
        p.u.col(j) = es.eigenvectors().col(n - 1 - j);
    }
    for (int j = 0; j < n; ++j) {
        int imax = 0;
        double best = -1.0;
        for (int i = 0; i < n; ++i) {
            const double a = std::abs(p.u(i, j));
            if (a > best) {
                best = a;
                imax = i;
            }
        }
        if (p.u(imax, j) < 0.0) p.u.col(j) = -p.u.col(j);
    }
    return p;
}

inline EigenPair evd_sym(const CovSpec& c) { return evd_sym(c.c); }

/// Haar-distributed orthogonal matrix: Gaussian matrix -> QR, with the Q
/// columns sign-corrected by the diagonal of R. Both parities occur.
inline OrthoPoint random_orthogonal(int n, std::uint64_t seed) {
    if (n < 1) throw ParameterError("random_orthogonal: n must be >= 1");
    Rng rng(seed);
    Matrix g(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) g(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix& r = qr.matrixQR();
    for (int j = 0; j < n; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    OrthoPoint p;
    p.v = std::move(q);
    p.seed_tag = seed;
    return p;
}

/// Angle at which a rotation block is treated as a rotation by pi (the
/// principal logarithm stops being unique).
inline constexpr double kPiBranchTol = 1e-6;

/// Principal logarithm of an orthogonal matrix with det > 0. Returns the
/// real skew-symmetric L with exp(L) = u.
///
/// Computed through the real Schur form: an orthogonal matrix is normal, so
/// its quasi-triangular factor is block diagonal with 1x1 blocks (+-1) and
/// 2x2 rotation blocks. Each rotation block [c -s; s c] contributes the
/// angle atan2(s, c); a +1 block contributes zero. A -1 block, or an angle
/// within kPiBranchTol of pi, is a rotation by pi whose plane is not unique,
/// reported as BranchAmbiguityError.
inline Matrix ortho_log(const Matrix& u) {
    const int n = static_cast<int>(u.rows());
    if (u.cols() != n) throw ParameterError("ortho_log: matrix must be square");
    if (!(Eigen::PartialPivLU<Matrix>(u).determinant() > 0.0))
        throw ParityError("ortho_log: determinant must be positive");
    Eigen::RealSchur<Matrix> schur(u);
    if (schur.info() != Eigen::Success) throw Error("ortho_log: Schur decomposition failed");
    const Matrix& t = schur.matrixT();
    const Matrix& q = schur.matrixU();
    Matrix block_log = Matrix::Zero(n, n);
    int i = 0;
    while (i < n) {
        const bool two_by_two = (i + 1 < n) && (t(i + 1, i) != 0.0);
        if (two_by_two) {
            const double c = 0.5 * (t(i, i) + t(i + 1, i + 1));
            const double s = t(i + 1, i);
            const double theta = std::atan2(s, c);
            if (std::abs(theta) > std::numbers::pi - kPiBranchTol)
                throw BranchAmbiguityError("ortho_log: rotation block within tolerance of pi");
            block_log(i, i + 1) = -theta;
            block_log(i + 1, i) = theta;
            i += 2;
        } else {
            if (t(i, i) < 0.0)
                throw BranchAmbiguityError("ortho_log: eigenvalue -1 (rotation by pi)");
            i += 1;
        }
    }
    Matrix l = q * block_log * q.transpose();
    return 0.5 * (l - l.transpose().eval());
}

inline Matrix ortho_log(const OrthoPoint& u) { return ortho_log(u.v); }

/// Exponential of a skew-symmetric matrix; lands on the det +1 component.
inline OrthoPoint ortho_exp(const Matrix& l) {
    if (l.rows() != l.cols()) throw ParameterError("ortho_exp: matrix must be square");
    const double skew_defect = (l + l.transpose().eval()).norm();
    if (skew_defect > 1e-8 * std::max(l.norm(), 1e-300))
        throw ParameterError("ortho_exp: input is not skew-symmetric");
    OrthoPoint p;
    p.v = l.exp();
    return p;
}

inline constexpr std::uint64_t kSaltGeoHaar = 0x67656f48ull;
inline constexpr std::uint64_t kSaltGeoTau = 0x67656f54ull;

/// Perturbs v by a moderate rotation: draws Haar U_raw, walks a fraction
/// tau ~ U(tau_min, tau_max) along the geodesic from I towards U_raw, and
/// returns U' v. A det < 0 draw has its first column flipped before the
/// logarithm and the flip undone afterwards, so both components of O(N)
/// stay reachable. Rotation-by-pi draws are resampled (at most 10 times).
inline OrthoPoint geodesic_sample(const OrthoPoint& v, double tau_min, double tau_max,
                                  std::uint64_t seed) {
    if (!(tau_min >= 0.0 && tau_min <= tau_max && tau_max <= 1.0))
        throw ParameterError("geodesic_sample: need 0 <= tau_min <= tau_max <= 1");
    const int n = v.n();
    for (int attempt = 0; attempt < 10; ++attempt) {
        OrthoPoint raw = random_orthogonal(
            n, derive_seed(seed, {kSaltGeoHaar, static_cast<std::uint64_t>(attempt)}));
        Rng rng(derive_seed(seed, {kSaltGeoTau, static_cast<std::uint64_t>(attempt)}));
        const double tau = rng.uniform(tau_min, tau_max);
        Matrix u = raw.v;
        const bool negative_parity = Eigen::PartialPivLU<Matrix>(u).determinant() < 0.0;
        if (negative_parity) u.col(0) = -u.col(0);
        Matrix l;
        try {
            l = ortho_log(u);
        } catch (const BranchAmbiguityError&) {
            continue;
        }
        Matrix up = (tau * l).exp();
        if (negative_parity) up.col(0) = -up.col(0);
        OrthoPoint out;
        out.v = up * v.v;
        out.seed_tag = v.seed_tag;
        return out;
    }
    throw BranchAmbiguityError("geodesic_sample: repeated rotation-by-pi draws");
}

} // namespace covmatch
