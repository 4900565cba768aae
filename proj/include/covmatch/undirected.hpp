#pragma once

#include <algorithm>
#include <bit>
#include <functional>
#include <numeric>
#include <vector>

#include "covmatch/spectral.hpp"

namespace covmatch {

/// Entries are exactly -1 or +1.
struct SignVector {
    Eigen::VectorXi q;

    int n() const { return static_cast<int>(q.size()); }
    void validate() const {
        for (int i = 0; i < n(); ++i)
            if (q(i) != 1 && q(i) != -1)
                throw ParameterError("sign vector entries must be +-1");
    }
    Vector as_double() const { return q.cast<double>(); }
};

/// Sign-ambiguity selection problem. The reconstruction map is
///   Shat(q) = I - left * diag(q) * right,
/// and the penalties factor through it exactly:
///   ||w q - 1||^2      == ||diag(Shat(q))||^2      (hollowness)
///   ||m q - vec(I)||_1 == ||Shat(q)||_1            (sparsity)
/// With identity noise, left = U diag(lambda^{-1/2}) and right = U^T; the
/// colored-noise build supplies the generally non-orthogonal factors.
struct UndirectedProblem {
    Matrix w;     // N x N
    Matrix m;     // N^2 x N, column k = vec(left_col_k * right_row_k)
    double alpha = 0.0;
    EigenPair eig;
    Matrix left;  // N x N
    Matrix right; // N x N
    bool colored = false;
    Matrix sigma_e; // set when colored

    int n() const { return static_cast<int>(w.cols()); }
};

/// Budget for exhaustive sign enumeration.
inline constexpr int kMaxEnumerationNodes = 24;

namespace detail {

inline Vector vec_identity(int n) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(n) * n);
    for (int j = 0; j < n; ++j) v(static_cast<Eigen::Index>(j) * n + j) = 1.0;
    return v;
}

inline UndirectedProblem problem_from_factors(Matrix left, Matrix right, double alpha,
                                              EigenPair eig, bool colored, Matrix sigma_e) {
    if (alpha < 0.0) throw ParameterError("sparsity weight alpha must be >= 0");
    const int n = static_cast<int>(left.rows());
    UndirectedProblem p;
    p.w = left.cwiseProduct(right.transpose());
    p.m.resize(static_cast<Eigen::Index>(n) * n, n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            p.m.block(static_cast<Eigen::Index>(j) * n, k, n, 1) = right(k, j) * left.col(k);
    p.alpha = alpha;
    p.eig = std::move(eig);
    p.left = std::move(left);
    p.right = std::move(right);
    p.colored = colored;
    p.sigma_e = std::move(sigma_e);
    return p;
}

inline void check_spectrum_positive(const Vector& lambda, const char* who) {
    const double lmax = lambda(0);
    const double lmin = lambda(lambda.size() - 1);
    if (!(lmax > 0.0) || lmin <= 1e-12 * lmax)
        throw RankDeficiencyError(std::string(who) +
                                  ": covariance spectrum is not safely positive");
}

} // namespace detail

/// Builds the identity-noise problem from a covariance with strictly
/// positive spectrum.
inline UndirectedProblem build_problem(const CovSpec& c, double alpha) {
    EigenPair eig = evd_sym(c);
    detail::check_spectrum_positive(eig.lambda, "build_problem");
    const Vector d = eig.lambda.array().rsqrt().matrix();
    Matrix left = eig.u * d.asDiagonal();
    Matrix right = eig.u.transpose();
    return detail::problem_from_factors(std::move(left), std::move(right), alpha,
                                        std::move(eig), false, Matrix());
}

/// Colored-noise variant. Diagonalizes C * sigma_e through the symmetric
/// congruence K = sigma_e^{1/2} C sigma_e^{1/2}, so the eigenpairs are real
/// whenever the model is consistent; a nonpositive spectrum of K means no
/// real square root exists and is reported as ModelMismatchError.
/// Reconstruction map: Shat(q) = I - sigma_e U_xe diag(lambda^{-1/2}) diag(q) U_xe^{-1}.
inline UndirectedProblem build_problem_colored(const CovSpec& c, const Matrix& sigma_e,
                                               double alpha) {
    const int n = c.n();
    if (sigma_e.rows() != n || sigma_e.cols() != n)
        throw ParameterError("build_problem_colored: sigma_e shape mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> se(0.5 * (sigma_e + sigma_e.transpose().eval()));
    if (se.info() != Eigen::Success || se.eigenvalues()(0) <= 0.0)
        throw ParameterError("build_problem_colored: sigma_e must be positive definite");
    const Matrix sqrt_sig = se.operatorSqrt();
    const Matrix inv_sqrt_sig = se.operatorInverseSqrt();
    EigenPair eig = evd_sym(Matrix(sqrt_sig * c.c * sqrt_sig));
    const double mu_max = eig.lambda(0);
    const double mu_min = eig.lambda(eig.lambda.size() - 1);
    if (!(mu_max > 0.0) || mu_min <= 1e-12 * mu_max)
        throw ModelMismatchError("build_problem_colored: C * sigma_e has no positive "
                                 "real eigendecomposition");
    const Matrix u_xe = inv_sqrt_sig * eig.u;
    const Matrix u_xe_inv = eig.u.transpose() * sqrt_sig;
    const Vector d = eig.lambda.array().rsqrt().matrix();
    Matrix left = sigma_e * u_xe * d.asDiagonal();
    return detail::problem_from_factors(std::move(left), Matrix(u_xe_inv), alpha,
                                        std::move(eig), true, Matrix(sigma_e));
}

/// Composite penalty ||w q - 1||^2 + alpha ||m q - vec(I)||_1.
inline double objective(const UndirectedProblem& p, const SignVector& sv) {
    sv.validate();
    if (sv.n() != p.n()) throw ParameterError("objective: sign vector length mismatch");
    const Vector qd = sv.as_double();
    const double hollow = (p.w * qd - Vector::Ones(p.n())).squaredNorm();
    if (p.alpha == 0.0) return hollow;
    const Vector s = p.m * qd - detail::vec_identity(p.n());
    return hollow + p.alpha * s.lpNorm<1>();
}

/// Shat(q) = I - U diag(q) diag(lambda^{-1/2}) U^T, symmetrized. The diagonal
/// is returned as computed; it vanishes only at the correct q.
inline Gso reconstruct_undirected(const EigenPair& eig, const SignVector& sv) {
    sv.validate();
    const int n = eig.n();
    if (sv.n() != n) throw ParameterError("reconstruct_undirected: length mismatch");
    detail::check_spectrum_positive(eig.lambda, "reconstruct_undirected");
    const Vector d = eig.lambda.array().rsqrt().matrix().cwiseProduct(sv.as_double());
    Matrix s = Matrix::Identity(n, n) - eig.u * d.asDiagonal() * eig.u.transpose();
    s = 0.5 * (s + s.transpose().eval());
    return Gso(n, GraphKind::undirected, std::move(s));
}

/// Reconstruction through the problem's own factors; identical to
/// reconstruct_undirected for identity noise, and the colored-noise map
/// otherwise. Symmetrized (exact at the optimum).
inline Gso reconstruct_from_problem(const UndirectedProblem& p, const SignVector& sv) {
    sv.validate();
    const int n = p.n();
    if (sv.n() != n) throw ParameterError("reconstruct_from_problem: length mismatch");
    Matrix s = Matrix::Identity(n, n) -
               p.left * sv.as_double().asDiagonal() * p.right;
    s = 0.5 * (s + s.transpose().eval());
    return Gso(n, GraphKind::undirected, std::move(s));
}

namespace detail {

/// Shared incremental state for Gray-code enumeration: residuals of both
/// penalty terms are updated in O(N) / O(N^2) per sign flip.
struct GrayScan {
    const UndirectedProblem& p;
    Eigen::VectorXi q;
    Vector r;       // w q - 1
    Vector s;       // m q - vec(I), only when alpha > 0
    double l1 = 0.0;

    explicit GrayScan(const UndirectedProblem& prob)
        : p(prob), q(Eigen::VectorXi::Constant(prob.n(), -1)) {
        const Vector qd = q.cast<double>();
        r = p.w * qd - Vector::Ones(p.n());
        if (p.alpha > 0.0) {
            s = p.m * qd - vec_identity(p.n());
            l1 = s.lpNorm<1>();
        }
    }

    double value() const { return r.squaredNorm() + p.alpha * l1; }

    void flip(int i) {
        q(i) = -q(i);
        const double delta = 2.0 * q(i);
        r += delta * p.w.col(i);
        if (p.alpha > 0.0) {
            const auto col = p.m.col(i);
            for (Eigen::Index k = 0; k < s.size(); ++k) {
                const double old = s(k);
                s(k) = old + delta * col(k);
                l1 += std::abs(s(k)) - std::abs(old);
            }
        }
    }
};

inline bool lex_smaller(const Eigen::VectorXi& a, const Eigen::VectorXi& b) {
    for (int i = 0; i < a.size(); ++i)
        if (a(i) != b(i)) return a(i) < b(i);
    return false;
}

} // namespace detail

/// Globally optimal sign vector by exhaustive enumeration (N <= 24).
/// Ties go to the lexicographically smallest q, with -1 < +1.
inline SignVector solve_exact(const UndirectedProblem& p) {
    const int n = p.n();
    if (n > kMaxEnumerationNodes)
        throw BudgetError("solve_exact: N exceeds the enumeration budget of 24");
    detail::GrayScan scan(p);
    Eigen::VectorXi best_q = scan.q;
    double best = scan.value();
    const std::uint64_t total = 1ull << n;
    for (std::uint64_t k = 1; k < total; ++k) {
        scan.flip(std::countr_zero(k));
        const double v = scan.value();
        if (v < best || (v == best && detail::lex_smaller(scan.q, best_q))) {
            best = v;
            best_q = scan.q;
        }
    }
    return SignVector{best_q};
}

namespace detail {

/// Box relaxation of the smooth term by projected coordinate minimization.
/// Returns the relaxed point; callers derive a valid lower bound from it via
/// the first-order convexity correction.
struct BoxRelaxation {
    const Matrix& w;
    Matrix wtw;
    Vector wt1;

    explicit BoxRelaxation(const Matrix& w_) : w(w_), wtw(w_.transpose() * w_),
                                               wt1(w_.transpose() * Vector::Ones(w_.rows())) {}

    /// 20 sweeps of coordinate minimization over x in [-1, 1]^free.
    void minimize(Vector& x, const std::vector<int>& free) const {
        if (free.empty()) return;
        Vector y = wtw * x; // gradient/2 + wt1 bookkeeping
        for (int sweep = 0; sweep < 20; ++sweep) {
            for (int i : free) {
                const double a = wtw(i, i);
                if (a <= 0.0) continue;
                const double partial = y(i) - a * x(i);
                double xi = (wt1(i) - partial) / a;
                xi = std::clamp(xi, -1.0, 1.0);
                const double dx = xi - x(i);
                if (dx != 0.0) {
                    y += dx * wtw.col(i);
                    x(i) = xi;
                }
            }
        }
    }

    /// Valid lower bound on min over the free box of ||W x - 1||^2 with the
    /// fixed coordinates pinned: value at x plus the linearization minimum.
    double lower_bound(const Vector& x, const std::vector<int>& free) const {
        const Vector r = w * x - Vector::Ones(w.rows());
        double lb = r.squaredNorm();
        if (!free.empty()) {
            const Vector g = 2.0 * (w.transpose() * r);
            for (int i : free)
                lb += std::min(g(i) * (-1.0 - x(i)), g(i) * (1.0 - x(i)));
        }
        return std::max(lb, 0.0);
    }
};

} // namespace detail

/// Depth-first branch and bound over sign vectors. Branches on entries in
/// descending column-norm order of W; node bounds combine the box-relaxed
/// smooth term with the exact per-entry l1 lower bound given the fixed
/// entries. Always terminates (worst case enumerates); the returned
/// objective matches solve_exact.
inline SignVector solve_bnb(const UndirectedProblem& p) {
    const int n = p.n();
    const Vector vec_i = detail::vec_identity(n);

    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return p.w.col(a).norm() > p.w.col(b).norm();
    });

    detail::BoxRelaxation relax(p.w);
    const bool use_l1 = p.alpha > 0.0;
    Matrix m_abs;
    if (use_l1) m_abs = p.m.cwiseAbs();

    // incumbent: rounded root relaxation plus one-flip descent
    Vector x0 = Vector::Zero(n);
    std::vector<int> all(static_cast<size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    relax.minimize(x0, all);
    SignVector inc;
    inc.q.resize(n);
    for (int i = 0; i < n; ++i) inc.q(i) = x0(i) >= 0.0 ? 1 : -1;
    double best = objective(p, inc);
    for (bool improved = true; improved;) {
        improved = false;
        for (int i = 0; i < n; ++i) {
            inc.q(i) = -inc.q(i);
            const double v = objective(p, inc);
            if (v < best) {
                best = v;
                improved = true;
            } else {
                inc.q(i) = -inc.q(i);
            }
        }
    }
    Eigen::VectorXi best_q = inc.q;

    // node state, maintained incrementally along the DFS path
    Eigen::VectorXi q_fix = Eigen::VectorXi::Zero(n);
    Vector s_fix, a_free;
    if (use_l1) {
        s_fix = -vec_i;
        a_free = m_abs.rowwise().sum();
    }
    std::vector<char> is_free(static_cast<size_t>(n), 1);

    auto l1_lower_bound = [&]() -> double {
        double lb = 0.0;
        for (Eigen::Index k = 0; k < s_fix.size(); ++k)
            lb += std::max(0.0, std::abs(s_fix(k)) - a_free(k));
        return lb;
    };

    struct Frame {
        int depth;
        Vector x; // warm start for the box relaxation
    };

    const double prune_slack = 1e-13;

    std::function<void(int, Vector&)> dfs = [&](int depth, Vector& x_warm) {
        if (depth == n) {
            SignVector leaf{q_fix};
            const double v = objective(p, leaf);
            if (v < best || (v == best && detail::lex_smaller(q_fix, best_q))) {
                best = v;
                best_q = q_fix;
            }
            return;
        }
        std::vector<int> free;
        free.reserve(static_cast<size_t>(n - depth));
        for (int i = 0; i < n; ++i)
            if (is_free[static_cast<size_t>(i)]) free.push_back(i);
        relax.minimize(x_warm, free);
        double lb = relax.lower_bound(x_warm, free);
        if (use_l1) lb += p.alpha * l1_lower_bound();
        if (lb >= best - prune_slack) return;

        const int var = order[static_cast<size_t>(depth)];
        const int first = x_warm(var) >= 0.0 ? 1 : -1;
        for (int pass = 0; pass < 2; ++pass) {
            const int val = pass == 0 ? first : -first;
            q_fix(var) = val;
            is_free[static_cast<size_t>(var)] = 0;
            if (use_l1) {
                s_fix += static_cast<double>(val) * p.m.col(var);
                a_free -= m_abs.col(var);
            }
            Vector x_child = x_warm;
            x_child(var) = static_cast<double>(val);
            dfs(depth + 1, x_child);
            if (use_l1) {
                s_fix -= static_cast<double>(val) * p.m.col(var);
                a_free += m_abs.col(var);
            }
            is_free[static_cast<size_t>(var)] = 1;
            q_fix(var) = 0;
        }
    };

    Vector x_root = x0;
    dfs(0, x_root);
    return SignVector{best_q};
}

struct IdentifiabilityReport {
    bool cond_i = false;  // no opposite eigenvalue pair in the mixing matrix
    bool cond_ii = false; // unique binary solution of the hollowness system
    bool identifiable() const { return cond_i && cond_ii; }
};

/// Checks the exact-recovery conditions for a symmetric graph:
///   (i)  H = (I - S)^{-1} has no two eigenvalues that are negatives of
///        each other (tolerance 1e-9);
///   (ii) (U_H o U_H) diag(|lambda_H|^{-1}) q = 1 has exactly one binary
///        solution (residual 1e-6, exhaustive over 2^N, N <= 24).
inline IdentifiabilityReport identifiability_check(const Gso& s) {
    s.validate();
    if (s.kind != GraphKind::undirected)
        throw ParameterError("identifiability_check: graph must be undirected");
    if (s.n > kMaxEnumerationNodes)
        throw BudgetError("identifiability_check: N exceeds the enumeration budget of 24");
    const Matrix h = mixing_matrix(SemModel(s));
    const EigenPair eh = evd_sym(Matrix(0.5 * (h + h.transpose().eval())));
    const int n = s.n;
    IdentifiabilityReport rep;
    rep.cond_i = true;
    for (int i = 0; i < n && rep.cond_i; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(eh.lambda(i) + eh.lambda(j)) <= 1e-9) {
                rep.cond_i = false;
                break;
            }
    // order columns by |lambda|^2 descending to mirror the covariance EVD;
    // any fixed order yields the same solution count
    std::vector<int> ord(static_cast<size_t>(n));
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int a, int b) {
        return eh.lambda(a) * eh.lambda(a) > eh.lambda(b) * eh.lambda(b);
    });
    Matrix a(n, n);
    for (int k = 0; k < n; ++k) {
        const int src = ord[static_cast<size_t>(k)];
        a.col(k) = eh.u.col(src).cwiseAbs2() / std::abs(eh.lambda(src));
    }
    Eigen::VectorXi q = Eigen::VectorXi::Constant(n, -1);
    Vector r = a * q.cast<double>() - Vector::Ones(n);
    int solutions = (r.norm() <= 1e-6) ? 1 : 0;
    const std::uint64_t total = 1ull << n;
    for (std::uint64_t k = 1; k < total && solutions < 2; ++k) {
        const int i = std::countr_zero(k);
        q(i) = -q(i);
        r += (2.0 * q(i)) * a.col(i);
        if (r.norm() <= 1e-6) ++solutions;
    }
    rep.cond_ii = (solutions == 1);
    return rep;
}

} // namespace covmatch
