#pragma once

// Closed-form kernel least-squares solution, single SGD/GD updates,
// schedule execution with per-step trajectory records, and step-size
// planning from the dominance structure of the Gram matrix.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kbias/linalg.hpp"
#include "kbias/prng.hpp"
#include "kbias/spectral.hpp"

namespace kbias {

enum class Algorithm { Sgd, Gd };

inline const char* algorithm_name(Algorithm a) {
    return a == Algorithm::Sgd ? "sgd" : "gd";
}

struct Stage {
    double eta = 0.0;
    std::size_t steps = 0;
};

/// Feasible step-size ranges derived from the Gram matrix, together with
/// the constants they are built from. All constants are instantiated at
/// their smallest admissible values.
struct Feasibility {
    double tau = 0.0;
    double lambda1 = 0.0, lambda2 = 0.0, lambda_n = 0.0;
    double gamma1 = 0.0, gamma_n = 0.0;
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0, c6 = 0.0, c7 = 0.0;
    double eta1_lo = 0.0, eta1_hi = 0.0;
    bool eta1_empty = true;
    double eta2_max = 0.0;
    double eta_gd_max = 0.0;
};

struct StepPlan {
    Algorithm algo = Algorithm::Sgd;
    std::vector<Stage> stages;
    std::optional<Feasibility> feasibility;  // present for planner-labeled plans

    static StepPlan single(Algorithm a, double eta, std::size_t k) {
        StepPlan p;
        p.algo = a;
        p.stages = {{eta, k}};
        p.validate();
        return p;
    }

    /// Two fixed-step stages; k2_total counts all steps, so the second
    /// stage runs k2_total - k1 of them.
    static StepPlan two_stage(Algorithm a, double eta1, std::size_t k1, double eta2,
                              std::size_t k2_total) {
        if (k2_total < k1) throw std::invalid_argument("StepPlan: k2 must be >= k1");
        StepPlan p;
        p.algo = a;
        p.stages = {{eta1, k1}, {eta2, k2_total - k1}};
        p.validate();
        return p;
    }

    std::size_t total_steps() const {
        std::size_t t = 0;
        for (const auto& s : stages) t += s.steps;
        return t;
    }

    void validate() const {
        if (stages.empty() || stages.size() > 2)
            throw std::invalid_argument("StepPlan: one or two stages required");
        for (const auto& s : stages)
            if (!(s.eta > 0.0)) throw std::invalid_argument("StepPlan: step sizes must be > 0");
    }

    double eta_at(std::size_t t) const {  // t counts from 1
        std::size_t seen = 0;
        for (const auto& s : stages) {
            seen += s.steps;
            if (t <= seen) return s.eta;
        }
        throw std::out_of_range("StepPlan: step index beyond schedule");
    }
};

struct StepRecord {
    std::size_t t = 0;
    Vector alpha;
    Vector b;  // alpha - alpha_hat
    double rq = 0.0;
    bool rq_defined = false;  // false when ||b|| = 0
    double p1_norm = 0.0;
    double pm1_norm = 0.0;
    bool proj_defined = false;
    double train_loss = 0.0;
    double est_error = 0.0;
};

struct Trajectory {
    std::uint64_t seed = 0;
    StepPlan plan;
    std::vector<StepRecord> steps;

    const StepRecord& final_record() const {
        if (steps.empty()) throw std::logic_error("Trajectory: empty");
        return steps.back();
    }
};

/// alpha_hat = K^{-1} y by Gaussian elimination with partial pivoting.
/// Rejects matrices whose spectrum is not safely positive and checks the
/// residual of the computed solution.
inline Vector closed_form_solution(const Matrix& k, const Vector& y) {
    if (!k.square() || k.rows() != y.size())
        throw std::invalid_argument("closed_form_solution: shape mismatch");
    const auto dec = eig_sym(k);
    if (!(dec.gammas.back() > 1e-10 * dec.gammas.front()))
        throw std::runtime_error("closed_form_solution: matrix is not safely positive definite");
    Vector alpha = solve_gauss(k, y);
    const double resid = norm2(vec_sub(mat_vec(k, alpha), y));
    if (resid > 1e-8 * norm2(y))
        throw std::runtime_error("closed_form_solution: residual check failed");
    return alpha;
}

/// One stochastic update on the sampled index i (0-based):
/// alpha' = alpha - eta (K_i^T alpha - y_i) K_i.
inline Vector sgd_step(const Vector& alpha, const Matrix& k, const Vector& y, std::size_t i,
                       double eta) {
    if (i >= y.size()) throw std::invalid_argument("sgd_step: index out of range");
    if (!(eta > 0.0)) throw std::invalid_argument("sgd_step: eta must be > 0");
    const Vector ki = k.row_vec(i);
    const double resid = dot(ki, alpha) - y[i];
    Vector out = alpha;
    axpy(-eta * resid, ki, out);
    return out;
}

/// Full-gradient update alpha' = alpha - (eta / n) K^T (K alpha - y).
inline Vector gd_step(const Vector& alpha, const Matrix& k, const Vector& y, double eta) {
    if (!(eta > 0.0)) throw std::invalid_argument("gd_step: eta must be > 0");
    const std::size_t n = y.size();
    const Vector resid = vec_sub(mat_vec(k, alpha), y);
    const Vector grad = mat_t_vec(k, resid);
    Vector out = alpha;
    axpy(-eta / static_cast<double>(n), grad, out);
    return out;
}

namespace detail {

struct DominanceConstants {
    std::size_t n = 0;
    double tau = 0.0;
    Vector lambdas;  // diagonal, descending
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0;
    double cross = 0.0;  // 2 lambda_1 + (n-2) tau
};

inline DominanceConstants dominance_constants(const Matrix& k) {
    if (!k.square()) throw std::invalid_argument("dominance_constants: square matrix required");
    DominanceConstants dc;
    dc.n = k.rows();
    dc.lambdas = diagonal(k);
    for (double l : dc.lambdas)
        if (!(l > 0.0)) throw std::invalid_argument("dominance_constants: nonpositive diagonal");
    std::sort(dc.lambdas.begin(), dc.lambdas.end(), std::greater<>());
    dc.tau = max_abs_offdiag(k);
    const double nd = static_cast<double>(dc.n);
    dc.c1 = dc.lambdas.back() - nd * dc.tau;
    if (!(dc.c1 > 0.0))
        throw std::runtime_error("dominance_constants: off-diagonal mass too large (c1 <= 0)");
    dc.c2 = dc.lambdas.front() + nd * dc.tau;
    dc.c3 = dc.c2 / (dc.c1 * dc.c1);
    dc.cross = 2.0 * dc.lambdas.front() + (nd - 2.0) * dc.tau;
    dc.c4 = (dc.lambdas.front() + std::sqrt(nd) * dc.tau) * dc.cross * dc.c3;
    return dc;
}

}  // namespace detail

/// Step-size feasibility from the Gram matrix: the open window for the
/// first-stage SGD step, the cap for the second stage, and the cap for GD.
inline Feasibility plan_step_sizes(const Matrix& k) {
    const auto dc = detail::dominance_constants(k);
    const auto dec = eig_sym(k);
    const double nd = static_cast<double>(dc.n);
    const double rtn_tau = std::sqrt(nd) * dc.tau;

    Feasibility f;
    f.tau = dc.tau;
    f.lambda1 = dc.lambdas.front();
    f.lambda2 = dc.n >= 2 ? dc.lambdas[1] : dc.lambdas.front();
    f.lambda_n = dc.lambdas.back();
    f.gamma1 = dec.gammas.front();
    f.gamma_n = dec.gammas.back();
    f.c1 = dc.c1;
    f.c2 = dc.c2;
    f.c3 = dc.c3;
    f.c4 = dc.c4;
    f.c5 = dc.c3 * dc.c3 * dc.cross * dc.cross * rtn_tau + dc.c4;
    f.c7 = rtn_tau + dc.c4;

    // denominator shared by the second-window constant
    const double d = f.lambda_n * f.lambda_n - dc.cross * nd * dc.tau;
    bool c6_ok = false;
    if (d > 0.0) {
        const double den = 1.0 - dc.c4 * rtn_tau / d;
        if (den > 0.0) {
            f.c6 = (rtn_tau - dc.c4 * dc.c4 * dc.tau / (std::sqrt(nd) * d) +
                    f.lambda2 * f.lambda2 * dc.c4 / d) /
                   den;
            c6_ok = true;
        }
    }

    const double lower_den = f.lambda1 * f.lambda1 - f.c5 * rtn_tau;
    const double upper_den = f.lambda2 * f.lambda2 + f.c6 * rtn_tau;
    f.eta1_empty = !c6_ok || !(lower_den > 0.0) || upper_den >= lower_den;
    if (!f.eta1_empty) {
        f.eta1_lo = 2.0 / lower_den;
        f.eta1_hi = 2.0 / upper_den;
    }
    f.eta2_max = 1.0 / (f.lambda1 * f.lambda1 + f.c7 * rtn_tau);
    f.eta_gd_max = nd / (f.c2 * f.c2);
    return f;
}

/// Contraction / coupling diagnostics of one stochastic update at step size
/// eta: the expected factor on the distinguished component (q1), a uniform
/// bound on the factor of the complementary component (q_minus1_bound), and
/// the cross-coupling term (xi).
struct StepDiagnostics {
    double q1 = 0.0;
    double q_minus1_bound = 0.0;
    double xi = 0.0;
};

inline StepDiagnostics step_diagnostics(const Matrix& k, double eta, const ProjectionPair& proj) {
    if (!(eta > 0.0)) throw std::invalid_argument("step_diagnostics: eta must be > 0");
    const auto dc = detail::dominance_constants(k);
    const double nd = static_cast<double>(dc.n);
    const double lam2 = dc.n >= 2 ? dc.lambdas[1] : dc.lambdas.front();

    const Vector p1k1 = mat_vec(proj.p1, k.col_vec(0));
    const double p1k1_sq = dot(p1k1, p1k1);

    StepDiagnostics sd;
    sd.q1 = (nd - 1.0) / nd + std::abs(1.0 - eta * p1k1_sq) / nd;
    sd.xi = dc.c4 * eta * dc.tau / std::sqrt(nd);
    const double spec_hi = lam2 * lam2 + (2.0 * dc.lambdas.front() + (nd - 1.0) * dc.tau) * nd * dc.tau;
    const double bracket = eta * eta * (lam2 * lam2 + (nd - 1.0) * dc.tau * dc.tau) - 2.0 * eta;
    sd.q_minus1_bound = std::sqrt(std::max(0.0, 1.0 + spec_hi / nd * bracket));
    return sd;
}

/// Runs a step plan from alpha0 and records the trajectory. Indices for the
/// stochastic updates come from the seeded generator; the full-gradient
/// path consumes no randomness. Records are kept at t = 0, every
/// record_every-th step, and the final step. Aborts if ||b_t|| exceeds
/// 1e8 ||b_0||.
inline Trajectory run_schedule(const Matrix& k, const Vector& y, const Vector& alpha0,
                               const StepPlan& plan, std::uint64_t seed,
                               const ProjectionPair* projections = nullptr,
                               std::size_t record_every = 1) {
    plan.validate();
    if (record_every < 1) throw std::invalid_argument("run_schedule: record_every must be >= 1");
    if (alpha0.size() != y.size()) throw std::invalid_argument("run_schedule: shape mismatch");
    for (double v : alpha0)
        if (!std::isfinite(v)) throw std::invalid_argument("run_schedule: alpha0 not finite");

    const std::size_t n = y.size();
    const Vector alpha_hat = closed_form_solution(k, y);

    Trajectory traj;
    traj.seed = seed;
    traj.plan = plan;

    auto record = [&](std::size_t t, const Vector& alpha) {
        StepRecord r;
        r.t = t;
        r.alpha = alpha;
        r.b = vec_sub(alpha, alpha_hat);
        const Vector kb = mat_vec(k, r.b);
        const Vector resid = vec_sub(mat_vec(k, alpha), y);
        r.train_loss = dot(resid, resid) / (2.0 * static_cast<double>(n));
        r.est_error = dot(r.b, kb);
        const double bsq = dot(r.b, r.b);
        if (bsq > 0.0) {
            r.rq = dot(kb, kb) / bsq;
            r.rq_defined = true;
        }
        if (projections != nullptr) {
            r.p1_norm = norm2(mat_vec(projections->p1, r.b));
            r.pm1_norm = norm2(mat_vec(projections->pm1, r.b));
            r.proj_defined = true;
        }
        traj.steps.push_back(std::move(r));
    };

    Pcg32 rng(seed, kStreamSgdIndex);
    Vector alpha = alpha0;
    const double b0_norm = norm2(vec_sub(alpha0, alpha_hat));
    record(0, alpha);

    const std::size_t total = plan.total_steps();
    for (std::size_t t = 1; t <= total; ++t) {
        const double eta = plan.eta_at(t);
        if (plan.algo == Algorithm::Sgd) {
            const std::size_t i = rng.next_below(static_cast<std::uint32_t>(n));
            alpha = sgd_step(alpha, k, y, i, eta);
        } else {
            alpha = gd_step(alpha, k, y, eta);
        }
        if (b0_norm > 0.0 && norm2(vec_sub(alpha, alpha_hat)) > 1e8 * b0_norm)
            throw std::runtime_error("run_schedule: trajectory diverged");
        if (t % record_every == 0 || t == total) record(t, alpha);
    }
    return traj;
}

}  // namespace kbias
