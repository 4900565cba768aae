#pragma once

#include <covmatch/covmatch.hpp>

namespace testhelp {

using covmatch::Matrix;
using covmatch::Vector;

/// Independent matrix exponential: scaling and squaring around a plain
/// Taylor series. Used as an oracle against the production path.
inline Matrix expm_series(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    int squarings = 0;
    double norm = a.norm();
    Matrix scaled = a;
    while (norm > 0.25) {
        scaled *= 0.5;
        norm *= 0.5;
        ++squarings;
    }
    Matrix term = Matrix::Identity(n, n);
    Matrix sum = term;
    for (int k = 1; k <= 24; ++k) {
        term = (term * scaled) / static_cast<double>(k);
        sum += term;
    }
    for (int s = 0; s < squarings; ++s) sum = sum * sum;
    return sum;
}

/// Truncated power series for (I - S)^{-1}; exact for nilpotent S.
inline Matrix neumann_series(const Matrix& s, int terms) {
    Matrix acc = Matrix::Identity(s.rows(), s.cols());
    Matrix power = acc;
    for (int k = 1; k < terms; ++k) {
        power = power * s;
        acc += power;
    }
    return acc;
}

/// Random symmetric hollow matrix with entries in [-scale, scale].
inline Matrix random_symmetric_hollow(int n, double scale, covmatch::Rng& rng) {
    Matrix s = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double w = rng.uniform(-scale, scale);
            s(i, j) = w;
            s(j, i) = w;
        }
    return s;
}

/// Random symmetric positive definite matrix with eigenvalues in [lo, hi].
inline Matrix random_spd(int n, double lo, double hi, std::uint64_t seed) {
    const Matrix q = covmatch::random_orthogonal(n, seed).v;
    covmatch::Rng rng(covmatch::derive_seed(seed, {0x535044ull}));
    Vector lam(n);
    for (int i = 0; i < n; ++i) lam(i) = rng.uniform(lo, hi);
    Matrix m = q * lam.asDiagonal() * q.transpose();
    return 0.5 * (m + m.transpose().eval());
}

/// Symmetric matrix with zero diagonal and the prescribed zero-sum spectrum,
/// built by Givens rotations that zero one diagonal entry at a time.
inline Matrix zero_diag_with_spectrum(const Vector& evals, std::uint64_t seed) {
    const int n = static_cast<int>(evals.size());
    const Matrix q = covmatch::random_orthogonal(n, seed).v;
    Matrix m = q * evals.asDiagonal() * q.transpose();
    std::vector<int> active(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) active[static_cast<size_t>(i)] = i;
    for (int step = 0; step < n - 1; ++step) {
        int pos = -1, neg = -1;
        for (int idx : active) {
            if (m(idx, idx) > 1e-14 && pos < 0) pos = idx;
            if (m(idx, idx) < -1e-14 && neg < 0) neg = idx;
        }
        if (pos < 0 || neg < 0) break;
        const int i = pos, j = neg;
        // rotate in the (i, j) plane so the new (i, i) entry is zero:
        // with t = tan(theta), q t^2 + 2 r t + p = 0
        const double p = m(i, i), r = m(i, j), qq = m(j, j);
        const double disc = std::sqrt(r * r - qq * p);
        const double t1 = (-r + disc) / qq;
        const double t2 = (-r - disc) / qq;
        const double t = std::abs(t1) <= std::abs(t2) ? t1 : t2;
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        Matrix g = Matrix::Identity(n, n);
        g(i, i) = c;
        g(j, j) = c;
        g(i, j) = -s;
        g(j, i) = s;
        m = (g.transpose() * m * g).eval();
        m(i, i) = 0.0;
        for (int k = 0; k < n; ++k) {
            m(i, k) = m(k, i) = 0.5 * (m(i, k) + m(k, i));
        }
        active.erase(std::find(active.begin(), active.end(), i));
    }
    for (int i = 0; i < n; ++i) m(i, i) = 0.0;
    return 0.5 * (m + m.transpose().eval());
}

/// Walks the manifold of hollow graphs sharing the covariance of s0 and
/// returns a distant member, or an empty matrix if the walk stalls.
/// Continuation in local coordinates Q <- Q exp(skew(step)) with the exact
/// Jacobian of g(Q) = diag(Q^T (I - S0)) - 1.
inline Matrix covariance_equivalent_alternative(const Matrix& s0, double target_dist,
                                                int max_steps = 300) {
    const int n = static_cast<int>(s0.rows());
    const Matrix a = Matrix::Identity(n, n) - s0;
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
    const int np = static_cast<int>(pairs.size());
    auto skew = [&](const Vector& w) {
        Matrix o = Matrix::Zero(n, n);
        for (int k = 0; k < np; ++k) {
            o(pairs[static_cast<size_t>(k)].first, pairs[static_cast<size_t>(k)].second) = w(k);
            o(pairs[static_cast<size_t>(k)].second, pairs[static_cast<size_t>(k)].first) = -w(k);
        }
        return o;
    };
    auto gfun = [&](const Matrix& q) -> Vector {
        return (q.transpose() * a).diagonal() - Vector::Ones(n);
    };
    auto jac = [&](const Matrix& q) -> Matrix {
        const Matrix qta = q.transpose() * a;
        Matrix jm = Matrix::Zero(n, np);
        for (int k = 0; k < np; ++k) {
            const auto [i, j] = pairs[static_cast<size_t>(k)];
            jm(i, k) = -qta(j, i);
            jm(j, k) = qta(i, j);
        }
        return jm;
    };
    Matrix q = Matrix::Identity(n, n);
    Vector t_prev = Vector::Zero(np);
    for (int step = 0; step < max_steps; ++step) {
        const Matrix jm = jac(q);
        Eigen::JacobiSVD<Matrix> svd(jm, Eigen::ComputeFullV);
        Vector t = svd.matrixV().col(np - 1);
        if (t_prev.norm() > 0 && t.dot(t_prev) < 0) t = -t;
        t_prev = t;
        q = (q * expm_series(skew(0.08 * t))).eval();
        for (int it = 0; it < 60; ++it) {
            const Vector gv = gfun(q);
            if (gv.norm() < 1e-14) break;
            const Matrix jl = jac(q);
            const Vector d = jl.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV).solve(-gv);
            q = (q * expm_series(skew(d))).eval();
        }
        if ((q - Matrix::Identity(n, n)).norm() > target_dist && gfun(q).norm() < 1e-12) {
            Matrix s1 = Matrix::Identity(n, n) - q.transpose() * a;
            for (int i = 0; i < n; ++i) s1(i, i) = 0.0;
            return s1;
        }
    }
    return Matrix();
}

} // namespace testhelp
