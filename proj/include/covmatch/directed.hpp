#pragma once

#include <atomic>
#include <mutex>
#include <thread>

#include "covmatch/spectral.hpp"

namespace covmatch {

/// Rotation-ambiguity problem over the orthogonal group. The feasible map is
///   Shat(V) = I - lhs * V * rhs,
/// with lhs = I, rhs = diag(lambda^{-1/2}) U^T for identity noise, and
/// lhs = sigma_e^{1/2}, rhs = L^{-1} (C = L L^T) for colored noise. Every
/// orthogonal V reproduces the covariance exactly; the structural objective
/// selects among the feasible points.
struct DirectedProblem {
    EigenPair eig;      // of the covariance
    double alpha = 1e-2;
    double huber_delta = 1e-3;
    bool colored = false;
    Matrix chol_l;      // C = chol_l * chol_l^T
    Matrix chol_l_inv;
    Matrix sigma_e_sqrt; // identity when not colored
    Matrix rhs;

    int n() const { return eig.n(); }
};

namespace detail {

inline double median_of(Vector v) {
    std::sort(v.data(), v.data() + v.size());
    const Eigen::Index k = v.size();
    return (k % 2 == 1) ? v(k / 2) : 0.5 * (v(k / 2 - 1) + v(k / 2));
}

inline Matrix cholesky_lower(const Matrix& c, const char* who) {
    Eigen::LLT<Matrix> llt(c);
    if (llt.info() != Eigen::Success)
        throw RankDeficiencyError(std::string(who) + ": covariance is not positive definite");
    return llt.matrixL();
}

} // namespace detail

/// Smoothing width defaults to 1e-3 times the median of lambda^{-1/2},
/// scaling with the magnitude of the reconstructed entries.
inline DirectedProblem make_directed_problem(const CovSpec& c, double alpha,
                                             double huber_delta = 0.0) {
    if (alpha < 0.0) throw ParameterError("sparsity weight alpha must be >= 0");
    DirectedProblem p;
    p.eig = evd_sym(c);
    detail::check_spectrum_positive(p.eig.lambda, "make_directed_problem");
    const Vector d = p.eig.lambda.array().rsqrt().matrix();
    p.alpha = alpha;
    p.huber_delta = huber_delta > 0.0 ? huber_delta : 1e-3 * detail::median_of(d);
    p.rhs = d.asDiagonal() * p.eig.u.transpose();
    p.chol_l = detail::cholesky_lower(c.c, "make_directed_problem");
    p.chol_l_inv = p.chol_l.triangularView<Eigen::Lower>().solve(
        Matrix::Identity(p.n(), p.n()));
    p.sigma_e_sqrt = Matrix::Identity(p.n(), p.n());
    return p;
}

inline DirectedProblem make_directed_problem_colored(const CovSpec& c, const Matrix& sigma_e,
                                                     double alpha, double huber_delta = 0.0) {
    if (alpha < 0.0) throw ParameterError("sparsity weight alpha must be >= 0");
    const int n = c.n();
    if (sigma_e.rows() != n || sigma_e.cols() != n)
        throw ParameterError("make_directed_problem_colored: sigma_e shape mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> se(0.5 * (sigma_e + sigma_e.transpose().eval()));
    if (se.info() != Eigen::Success || se.eigenvalues()(0) <= 0.0)
        throw ParameterError("make_directed_problem_colored: sigma_e must be positive definite");
    DirectedProblem p;
    p.eig = evd_sym(c);
    detail::check_spectrum_positive(p.eig.lambda, "make_directed_problem_colored");
    p.alpha = alpha;
    p.huber_delta = huber_delta > 0.0
                        ? huber_delta
                        : 1e-3 * detail::median_of(p.eig.lambda.array().rsqrt().matrix());
    p.colored = true;
    p.chol_l = detail::cholesky_lower(c.c, "make_directed_problem_colored");
    p.chol_l_inv = p.chol_l.triangularView<Eigen::Lower>().solve(Matrix::Identity(n, n));
    p.sigma_e_sqrt = se.operatorSqrt();
    p.rhs = p.chol_l_inv;
    return p;
}

namespace detail {

inline void shat_into(const DirectedProblem& p, const Matrix& v, Matrix& shat) {
    if (p.colored)
        shat.noalias() = -(p.sigma_e_sqrt * v) * p.rhs;
    else
        shat.noalias() = -(v * p.rhs);
    shat.diagonal().array() += 1.0;
}

inline double huber(double x, double delta) {
    const double a = std::abs(x);
    return a <= delta ? x * x / (2.0 * delta) : a - 0.5 * delta;
}

inline double j_exact_of(const Matrix& shat, double alpha) {
    return shat.diagonal().squaredNorm() + alpha * shat.array().abs().sum();
}

inline double j_smooth_of(const Matrix& shat, double alpha, double delta) {
    double l1s = 0.0;
    for (Eigen::Index j = 0; j < shat.cols(); ++j)
        for (Eigen::Index i = 0; i < shat.rows(); ++i) l1s += huber(shat(i, j), delta);
    return shat.diagonal().squaredNorm() + alpha * l1s;
}

/// Gamma = -lhs^T (2 Diag(Shat) + alpha * phi(Shat)) rhs^T, where phi is the
/// elementwise sign (subgradient, with sign(0) = 0) or its Huber smoothing.
inline void grad_into(const DirectedProblem& p, const Matrix& shat, bool smooth,
                      Matrix& scratch, Matrix& gamma) {
    if (smooth)
        scratch = (shat / p.huber_delta).cwiseMax(-1.0).cwiseMin(1.0) * (-p.alpha);
    else
        scratch = shat.array().sign().matrix() * (-p.alpha);
    scratch.diagonal() -= 2.0 * shat.diagonal();
    if (p.colored)
        gamma.noalias() = p.sigma_e_sqrt * (scratch * p.rhs.transpose());
    else
        gamma.noalias() = scratch * p.rhs.transpose();
}

} // namespace detail

/// Structural objective at V: ||diag(Shat)||^2 + alpha ||Shat||_1, or with
/// the Huber surrogate of the l1 term when smooth. Defined for arbitrary
/// (not necessarily orthogonal) V so finite differences are meaningful.
inline double objective_j(const DirectedProblem& p, const OrthoPoint& v, bool smooth = false) {
    Matrix shat(p.n(), p.n());
    detail::shat_into(p, v.v, shat);
    return smooth ? detail::j_smooth_of(shat, p.alpha, p.huber_delta)
                  : detail::j_exact_of(shat, p.alpha);
}

/// Structural objective evaluated directly at a candidate adjacency matrix.
inline double objective_j_matrix(const DirectedProblem& p, const Matrix& s) {
    return detail::j_exact_of(s, p.alpha);
}

/// Euclidean gradient of objective_j with respect to V.
inline Matrix euclidean_grad(const DirectedProblem& p, const OrthoPoint& v, bool smooth = true) {
    Matrix shat(p.n(), p.n()), scratch(p.n(), p.n()), gamma(p.n(), p.n());
    detail::shat_into(p, v.v, shat);
    detail::grad_into(p, shat, smooth, scratch, gamma);
    return gamma;
}

/// Step-size schedule with exponential interpolation between the endpoints,
/// a Huber->sign switch after stall_switch non-improving iterations, and an
/// early stop after plateau_stop of them.
struct GdSchedule {
    int r_max = 10000;
    double mu_start = 2e-2;
    double mu_end = 4e-3;
    int stall_switch = 30;
    int plateau_stop = 35;

    void validate() const {
        if (r_max < 1) throw ParameterError("GdSchedule: r_max must be >= 1");
        if (!(mu_start >= mu_end && mu_end > 0.0))
            throw ParameterError("GdSchedule: need mu_start >= mu_end > 0");
        if (stall_switch < 1 || plateau_stop < 1)
            throw ParameterError("GdSchedule: counters must be >= 1");
    }
};

/// Step-size presets: fresh perturbations take coarse steps, candidate
/// restarts refine with fine ones.
inline GdSchedule fresh_start_schedule() { return GdSchedule{10000, 2e-2, 4e-3, 30, 35}; }
inline GdSchedule candidate_start_schedule() { return GdSchedule{10000, 1e-3, 2e-4, 30, 35}; }

struct RiemannResult {
    OrthoPoint point;
    int iterations = 0;
    bool reached_sign_mode = false;
    double max_orth_residual = 0.0; // only tracked on request
};

/// Riemannian gradient descent on the orthogonal group:
///   G_r = Gamma_r V_r^T - V_r Gamma_r^T   (tangent projection)
///   G_r <- G_r / ||G_r||_F                (unit geodesic speed)
///   V_{r+1} = exp(-mu_r G_r) V_r          (exponential map)
/// The exponential map keeps every iterate orthogonal for any step size.
/// Tracks the best exact objective seen (including v0) and returns that
/// iterate. The sparsity gradient starts with the Huber smoothing and
/// switches to the sign subgradient after stall_switch consecutive
/// non-improving iterations; plateau_stop of them stops the run.
inline RiemannResult riemann_gd_detailed(const DirectedProblem& p, const OrthoPoint& v0,
                                         const GdSchedule& sched,
                                         bool track_orthogonality = false) {
    sched.validate();
    const int n = p.n();
    if (v0.n() != n) throw ParameterError("riemann_gd: start point has wrong size");
    Matrix v = v0.v;
    Matrix shat(n, n), scratch(n, n), gamma(n, n), g(n, n), step(n, n);
    detail::shat_into(p, v, shat);
    RiemannResult res;
    res.point.v = v;
    res.point.cost = detail::j_exact_of(shat, p.alpha);
    res.point.seed_tag = v0.seed_tag;
    bool sign_mode = false;
    int stall = 0;
    const double ratio = sched.mu_end / sched.mu_start;
    const double denom = sched.r_max > 1 ? static_cast<double>(sched.r_max - 1) : 1.0;
    for (int r = 0; r < sched.r_max; ++r) {
        detail::grad_into(p, shat, !sign_mode, scratch, gamma);
        g.noalias() = gamma * v.transpose();
        g.noalias() -= v * gamma.transpose();
        const double gnorm = g.norm();
        res.iterations = r + 1;
        if (gnorm == 0.0) break; // stationary point
        const double mu = sched.mu_start * std::pow(ratio, static_cast<double>(r) / denom);
        step.noalias() = g * (-mu / gnorm);
        v = (step.exp() * v).eval();
        if (track_orthogonality) {
            const double resid =
                (v.transpose() * v - Matrix::Identity(n, n)).norm();
            res.max_orth_residual = std::max(res.max_orth_residual, resid);
        }
        detail::shat_into(p, v, shat);
        const double j = detail::j_exact_of(shat, p.alpha);
        if (j < res.point.cost) {
            res.point.cost = j;
            res.point.v = v;
            stall = 0;
        } else {
            ++stall;
            if (!sign_mode && stall >= sched.stall_switch) {
                sign_mode = true;
                res.reached_sign_mode = true;
            }
            if (stall >= sched.plateau_stop) break;
        }
    }
    return res;
}

inline OrthoPoint riemann_gd(const DirectedProblem& p, const OrthoPoint& v0,
                             const GdSchedule& sched) {
    return riemann_gd_detailed(p, v0, sched).point;
}

namespace detail {
inline constexpr std::uint64_t kSaltHop = 0x686f70ull;
inline constexpr std::uint64_t kSaltPick = 0x7069636bull;
inline constexpr std::uint64_t kSaltPerturb = 0x70657274ull;
inline constexpr std::uint64_t kSaltInitSet = 0x63306330ull;

/// Runs fn(0..n_tasks) on a small worker pool. Task outputs must go to
/// task-indexed storage; results are then independent of scheduling.
template <typename F>
inline void parallel_for_tasks(int n_tasks, int workers, F&& fn) {
    if (workers <= 1 || n_tasks <= 1) {
        for (int i = 0; i < n_tasks; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto body = [&] {
        for (int i = next.fetch_add(1); i < n_tasks; i = next.fetch_add(1)) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const int nw = std::min(workers, n_tasks);
    pool.reserve(static_cast<size_t>(nw));
    for (int w = 0; w < nw; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

} // namespace detail

/// Perturb-refine-accept loop around a single incumbent. K = 0 returns v0
/// untouched. Deterministic given the seed.
inline OrthoPoint basin_hop(const DirectedProblem& p, const OrthoPoint& v0,
                            const GdSchedule& sched, int k, double tau_min, double tau_max,
                            std::uint64_t seed) {
    if (k < 0) throw ParameterError("basin_hop: k must be >= 0");
    OrthoPoint incumbent = v0;
    incumbent.cost = objective_j(p, v0, false);
    for (int cycle = 1; cycle <= k; ++cycle) {
        const OrthoPoint perturbed = geodesic_sample(
            incumbent, tau_min, tau_max,
            derive_seed(seed, {detail::kSaltHop, static_cast<std::uint64_t>(cycle)}));
        const OrthoPoint refined = riemann_gd(p, perturbed, sched);
        if (refined.cost < incumbent.cost) incumbent = refined;
    }
    return incumbent;
}

/// Diversity-filtered pool of refined points: pairwise squared Frobenius
/// distance above delta, at most capacity members.
struct CandidateSet {
    std::vector<OrthoPoint> members;
    int capacity = 8;
    double delta = 0.5;

    bool satisfies_invariant() const {
        if (static_cast<int>(members.size()) > capacity) return false;
        for (size_t a = 0; a < members.size(); ++a)
            for (size_t b = a + 1; b < members.size(); ++b)
                if ((members[a].v - members[b].v).squaredNorm() <= delta) return false;
        return true;
    }
};

/// Admission in ascending (cost, seed_tag) order; a point enters only if its
/// squared distance to every admitted point exceeds delta.
inline CandidateSet candidate_set_update(std::vector<OrthoPoint> refined, int capacity,
                                         double delta) {
    std::sort(refined.begin(), refined.end(), [](const OrthoPoint& a, const OrthoPoint& b) {
        if (a.cost != b.cost) return a.cost < b.cost;
        return a.seed_tag < b.seed_tag;
    });
    CandidateSet out;
    out.capacity = capacity;
    out.delta = delta;
    for (auto& cand : refined) {
        if (static_cast<int>(out.members.size()) == capacity) break;
        bool distinct = true;
        for (const auto& kept : out.members)
            if ((cand.v - kept.v).squaredNorm() <= delta) {
                distinct = false;
                break;
            }
        if (distinct) out.members.push_back(std::move(cand));
    }
    return out;
}

struct BasinHopConfig {
    GdSchedule fresh_sched = fresh_start_schedule();
    GdSchedule candidate_sched = candidate_start_schedule();
    double tau_min = 0.5;
    double tau_max = 0.8;
    double delta_unstable = 0.5; // admission threshold before stabilization
    double delta_stable = 0.01;  // and after the Huber->sign transition
    std::uint64_t seed = 1;
    int workers = 1;
};

struct BasinHopResult {
    OrthoPoint best;
    CandidateSet final_set;
    int cycles_used = 0;
    std::vector<double> candidate_costs;
};

/// Candidate set of capacity (= c0.capacity) Haar starts for the solver.
inline CandidateSet initial_candidate_set(const DirectedProblem& p, int capacity,
                                          std::uint64_t seed) {
    if (capacity < 1) throw ParameterError("initial_candidate_set: capacity must be >= 1");
    CandidateSet c;
    c.capacity = capacity;
    for (int i = 0; i < capacity; ++i) {
        OrthoPoint v = random_orthogonal(
            p.n(), derive_seed(seed, {detail::kSaltInitSet, static_cast<std::uint64_t>(i)}));
        v.seed_tag = static_cast<std::uint64_t>(i);
        v.cost = objective_j(p, v, false);
        c.members.push_back(std::move(v));
    }
    return c;
}

/// Multi-start basin hopping with a diversity-filtered candidate set.
///
/// Per cycle: L fresh perturbations are drawn around uniformly chosen
/// candidates, everything in C union S is refined in parallel (candidate
/// restarts use the fine schedule, fresh samples the coarse one), and C is
/// rebuilt by diversity admission. The admission threshold switches from
/// delta_unstable to delta_stable once any refinement has reported the
/// Huber->sign transition. Every random draw comes from a stream derived
/// from (seed, cycle, slot), so the result is identical for any worker
/// count.
inline BasinHopResult basin_hop_candidates(const DirectedProblem& p, const CandidateSet& c0,
                                           const BasinHopConfig& cfg, int k, int l) {
    if (c0.members.empty())
        throw ParameterError("basin_hop_candidates: initial candidate set is empty");
    if (k < 0 || l < 0) throw ParameterError("basin_hop_candidates: k and l must be >= 0");
    cfg.fresh_sched.validate();
    cfg.candidate_sched.validate();

    std::vector<OrthoPoint> candidates = c0.members;
    for (auto& c : candidates)
        if (std::isnan(c.cost)) c.cost = objective_j(p, c, false);
    const int capacity = c0.capacity;
    bool stabilized = false;

    BasinHopResult result;
    for (int cycle = 1; cycle <= k; ++cycle) {
        const int n_cand = static_cast<int>(candidates.size());
        const int n_tasks = n_cand + l;
        std::vector<OrthoPoint> starts(static_cast<size_t>(n_tasks));
        std::vector<char> from_candidate(static_cast<size_t>(n_tasks), 0);
        for (int i = 0; i < n_cand; ++i) {
            starts[static_cast<size_t>(i)] = candidates[static_cast<size_t>(i)];
            from_candidate[static_cast<size_t>(i)] = 1;
        }
        for (int slot = 0; slot < l; ++slot) {
            Rng pick(derive_seed(cfg.seed, {detail::kSaltPick, static_cast<std::uint64_t>(cycle),
                                            static_cast<std::uint64_t>(slot)}));
            const auto chosen = static_cast<size_t>(pick.bounded(static_cast<std::uint64_t>(n_cand)));
            OrthoPoint sample = geodesic_sample(
                candidates[chosen], cfg.tau_min, cfg.tau_max,
                derive_seed(cfg.seed, {detail::kSaltPerturb, static_cast<std::uint64_t>(cycle),
                                       static_cast<std::uint64_t>(slot)}));
            // tags order points by creation time; initial candidates sit below 2^20
            sample.seed_tag = (static_cast<std::uint64_t>(cycle) << 20) |
                              static_cast<std::uint64_t>(slot);
            starts[static_cast<size_t>(n_cand + slot)] = std::move(sample);
        }
        std::vector<RiemannResult> refined(static_cast<size_t>(n_tasks));
        detail::parallel_for_tasks(n_tasks, cfg.workers, [&](int i) {
            const GdSchedule& sched =
                from_candidate[static_cast<size_t>(i)] ? cfg.candidate_sched : cfg.fresh_sched;
            refined[static_cast<size_t>(i)] =
                riemann_gd_detailed(p, starts[static_cast<size_t>(i)], sched);
        });
        std::vector<OrthoPoint> pool;
        pool.reserve(static_cast<size_t>(n_tasks));
        for (auto& r : refined) {
            stabilized = stabilized || r.reached_sign_mode;
            pool.push_back(std::move(r.point));
        }
        CandidateSet updated = candidate_set_update(
            std::move(pool), capacity, stabilized ? cfg.delta_stable : cfg.delta_unstable);
        candidates = std::move(updated.members);
        result.cycles_used = cycle;
    }

    CandidateSet final_set;
    final_set.capacity = capacity;
    final_set.delta = stabilized ? cfg.delta_stable : cfg.delta_unstable;
    final_set.members = candidates;
    result.final_set = std::move(final_set);
    const auto best_it = std::min_element(
        candidates.begin(), candidates.end(), [](const OrthoPoint& a, const OrthoPoint& b) {
            if (a.cost != b.cost) return a.cost < b.cost;
            return a.seed_tag < b.seed_tag;
        });
    result.best = *best_it;
    for (const auto& c : result.final_set.members) result.candidate_costs.push_back(c.cost);
    return result;
}

/// Shat = I - lhs V rhs through the problem's own factors. The diagonal is
/// left as computed; it is a diagnostic for how hollow the estimate is.
inline Gso reconstruct_directed(const DirectedProblem& p, const OrthoPoint& v) {
    const int n = p.n();
    if (v.n() != n) throw ParameterError("reconstruct_directed: size mismatch");
    Matrix shat(n, n);
    detail::shat_into(p, v.v, shat);
    return Gso(n, GraphKind::directed, std::move(shat));
}

/// Cholesky-route reconstruction Shat = I - sigma_e^{1/2} V L^{-1}; with
/// identity noise this is an equally feasible parameterization of the same
/// covariance constraint.
inline Gso reconstruct_directed_colored(const DirectedProblem& p, const OrthoPoint& v) {
    const int n = p.n();
    if (v.n() != n) throw ParameterError("reconstruct_directed_colored: size mismatch");
    Matrix shat = -(p.sigma_e_sqrt * v.v) * p.chol_l_inv;
    shat.diagonal().array() += 1.0;
    return Gso(n, GraphKind::directed, std::move(shat));
}

} // namespace covmatch
