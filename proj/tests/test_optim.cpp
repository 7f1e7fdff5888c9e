#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "kbias/optim.hpp"
#include "kbias/prng.hpp"
#include "kbias/spectral.hpp"

using namespace kbias;

namespace {

Matrix random_spd(std::size_t n, Pcg32& rng) {
    Matrix a(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a(i, j) = rng.next_gaussian();
    Matrix s = mat_mul(transpose(a), a);
    for (std::size_t i = 0; i < n; ++i) s(i, i) += 0.5;  // keep it safely positive
    return s;
}

Matrix random_dominant(std::size_t n, double ratio, Pcg32& rng) {
    Vector diag(n);
    for (auto& d : diag) d = rng.next_uniform(0.5, 2.0);
    std::sort(diag.begin(), diag.end(), std::greater<>());
    const double tau = ratio * diag.back();
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) k(i, i) = diag[i];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = rng.next_uniform(-tau, tau);
            k(i, j) = v;
            k(j, i) = v;
        }
    return k;
}

Vector random_vec(std::size_t n, Pcg32& rng) {
    Vector v(n);
    for (auto& x : v) x = rng.next_gaussian();
    return v;
}

}  // namespace

TEST_CASE("closed form solution basics") {
    const Matrix eye = Matrix::identity(3);
    const Vector y = {1.0, -2.0, 0.5};
    const Vector a = closed_form_solution(eye, y);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(a[i] == Catch::Approx(y[i]).margin(1e-14));

    Matrix d(2, 2);
    d(0, 0) = 2.0;
    d(1, 1) = 4.0;
    const Vector a2 = closed_form_solution(d, {2.0, 8.0});
    REQUIRE(a2[0] == Catch::Approx(1.0).margin(1e-14));
    REQUIRE(a2[1] == Catch::Approx(2.0).margin(1e-14));

    Pcg32 rng(3u);
    for (int rep = 0; rep < 10; ++rep) {
        const Matrix k = random_spd(10, rng);
        const Vector yy = random_vec(10, rng);
        const Vector alpha = closed_form_solution(k, yy);
        REQUIRE(norm2(vec_sub(mat_vec(k, alpha), yy)) <= 1e-8 * norm2(yy));
    }
}

TEST_CASE("closed form solution rejects near-singular matrices") {
    Matrix k(2, 2);
    k(0, 0) = 1.0;
    k(1, 1) = 1.0;
    k(0, 1) = k(1, 0) = 1.0;  // rank one
    REQUIRE_THROWS_AS(closed_form_solution(k, {1.0, 1.0}), std::runtime_error);
}

TEST_CASE("sgd step examples") {
    const Matrix eye = Matrix::identity(3);
    const Vector y = {1.0, 1.0, 1.0};
    const Vector zero(3, 0.0);
    const Vector a = sgd_step(zero, eye, y, 0, 0.5);
    REQUIRE(a[0] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(a[1] == 0.0);
    REQUIRE(a[2] == 0.0);
    REQUIRE_THROWS_AS(sgd_step(zero, eye, y, 3, 0.5), std::invalid_argument);
}

TEST_CASE("sgd step is a fixed point at the solution and matches a recompute") {
    Pcg32 rng(41u);
    const Matrix k = random_spd(6, rng);
    const Vector y = random_vec(6, rng);
    const Vector alpha_hat = closed_form_solution(k, y);
    for (std::size_t i = 0; i < 6; ++i) {
        const Vector next = sgd_step(alpha_hat, k, y, i, 0.3);
        for (std::size_t j = 0; j < 6; ++j)
            REQUIRE(next[j] == Catch::Approx(alpha_hat[j]).margin(1e-9));
    }
    // straight-line recompute of the update formula
    for (int rep = 0; rep < 10; ++rep) {
        const Vector alpha = random_vec(6, rng);
        const std::size_t i = rng.next_below(6);
        const double eta = rng.next_uniform(0.01, 1.0);
        const Vector got = sgd_step(alpha, k, y, i, eta);
        double resid = -y[i];
        for (std::size_t j = 0; j < 6; ++j) resid += k(i, j) * alpha[j];
        for (std::size_t j = 0; j < 6; ++j) {
            const double want = alpha[j] - eta * resid * k(i, j);
            REQUIRE(got[j] == Catch::Approx(want).margin(1e-14));
        }
    }
}

TEST_CASE("gd step examples and unbiasedness identity") {
    Matrix one(1, 1);
    one(0, 0) = 1.0;
    const Vector g = gd_step({0.0}, one, {1.0}, 1.0);
    REQUIRE(g[0] == Catch::Approx(1.0).margin(1e-15));

    Pcg32 rng(43u);
    const std::size_t n = 7;
    const Matrix k = random_spd(n, rng);
    const Vector y = random_vec(n, rng);
    const Vector alpha_hat = closed_form_solution(k, y);
    const Vector fixed = gd_step(alpha_hat, k, y, 0.4);
    for (std::size_t j = 0; j < n; ++j)
        REQUIRE(fixed[j] == Catch::Approx(alpha_hat[j]).margin(1e-9));

    // averaging the stochastic update over all indices equals the
    // full-gradient update at the same step size
    for (int rep = 0; rep < 10; ++rep) {
        const Vector alpha = random_vec(n, rng);
        const double eta = rng.next_uniform(0.01, 0.5);
        Vector avg(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const Vector s = sgd_step(alpha, k, y, i, eta);
            for (std::size_t j = 0; j < n; ++j) avg[j] += s[j] / static_cast<double>(n);
        }
        const Vector gstep = gd_step(alpha, k, y, eta);
        for (std::size_t j = 0; j < n; ++j)
            REQUIRE(avg[j] == Catch::Approx(gstep[j]).margin(1e-12));
    }
}

TEST_CASE("step plan construction and validation") {
    const StepPlan p = StepPlan::two_stage(Algorithm::Sgd, 0.1, 50, 0.01, 1050);
    REQUIRE(p.total_steps() == 1050);
    REQUIRE(p.eta_at(1) == 0.1);
    REQUIRE(p.eta_at(50) == 0.1);
    REQUIRE(p.eta_at(51) == 0.01);
    REQUIRE(p.eta_at(1050) == 0.01);
    REQUIRE_THROWS_AS(StepPlan::two_stage(Algorithm::Sgd, 0.1, 50, 0.01, 49),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(StepPlan::single(Algorithm::Gd, -0.1, 10), std::invalid_argument);
}

TEST_CASE("planner on a clean spectral gap") {
    Matrix k(5, 5);
    k(0, 0) = 2.0;
    for (std::size_t i = 1; i < 5; ++i) k(i, i) = 1.0;
    const Feasibility f = plan_step_sizes(k);
    REQUIRE_FALSE(f.eta1_empty);
    REQUIRE(f.eta1_lo == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(f.eta1_hi == Catch::Approx(2.0).margin(1e-12));
    REQUIRE(f.eta2_max == Catch::Approx(0.25).margin(1e-12));
    REQUIRE(f.eta_gd_max == Catch::Approx(5.0 / 4.0).margin(1e-12));
}

TEST_CASE("planner flags a missing spectral gap") {
    const Feasibility f = plan_step_sizes(Matrix::identity(4));
    REQUIRE(f.eta1_empty);
}

TEST_CASE("planner matches an independent evaluation of its formulas") {
    Pcg32 rng(47u);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t n = 8;
        Matrix k = random_dominant(n, 1e-3, rng);
        k(0, 0) = 1.0;  // force a gap
        k(1, 1) = 0.8;
        for (std::size_t i = 2; i < n; ++i) k(i, i) = std::min(k(i, i), 0.8);
        Vector lam = diagonal(k);
        std::sort(lam.begin(), lam.end(), std::greater<>());
        const double tau = max_abs_offdiag(k);
        const double nd = static_cast<double>(n);
        const double c1 = lam.back() - nd * tau;
        const double c2 = lam.front() + nd * tau;
        const double c3 = c2 / (c1 * c1);
        const double cross = 2.0 * lam.front() + (nd - 2.0) * tau;
        const double c4 = (lam.front() + std::sqrt(nd) * tau) * cross * c3;
        const double c5 = c3 * c3 * cross * cross * std::sqrt(nd) * tau + c4;
        const double dd = lam.back() * lam.back() - cross * nd * tau;
        const double c6 = (std::sqrt(nd) * tau - c4 * c4 * tau / (std::sqrt(nd) * dd) +
                           lam[1] * lam[1] * c4 / dd) /
                          (1.0 - c4 * std::sqrt(nd) * tau / dd);
        const double c7 = std::sqrt(nd) * tau + c4;

        const Feasibility f = plan_step_sizes(k);
        REQUIRE(f.c1 == Catch::Approx(c1).epsilon(1e-12));
        REQUIRE(f.c2 == Catch::Approx(c2).epsilon(1e-12));
        REQUIRE(f.c3 == Catch::Approx(c3).epsilon(1e-12));
        REQUIRE(f.c4 == Catch::Approx(c4).epsilon(1e-12));
        REQUIRE(f.c5 == Catch::Approx(c5).epsilon(1e-12));
        REQUIRE(f.c6 == Catch::Approx(c6).epsilon(1e-12));
        REQUIRE(f.c7 == Catch::Approx(c7).epsilon(1e-12));
        REQUIRE_FALSE(f.eta1_empty);
        REQUIRE(f.eta1_lo ==
                Catch::Approx(2.0 / (1.0 - c5 * std::sqrt(nd) * tau)).epsilon(1e-12));
        REQUIRE(f.eta1_hi ==
                Catch::Approx(2.0 / (0.64 + c6 * std::sqrt(nd) * tau)).epsilon(1e-12));
        REQUIRE(f.eta2_max == Catch::Approx(1.0 / (1.0 + c7 * std::sqrt(nd) * tau)).epsilon(1e-12));
        REQUIRE(f.eta_gd_max == Catch::Approx(nd / (c2 * c2)).epsilon(1e-12));
    }
}

TEST_CASE("planner rejects overwhelming off-diagonal mass") {
    Matrix k(4, 4);
    for (std::size_t i = 0; i < 4; ++i) k(i, i) = 1.0;
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            if (i != j) k(i, j) = 0.3;
    REQUIRE_THROWS_AS(plan_step_sizes(k), std::runtime_error);
}

TEST_CASE("run_schedule stays at the solution") {
    Pcg32 rng(53u);
    const Matrix k = random_dominant(5, 1e-3, rng);
    const Vector y = random_vec(5, rng);
    const Vector alpha_hat = closed_form_solution(k, y);
    const auto plan = StepPlan::two_stage(Algorithm::Sgd, 0.2, 5, 0.05, 15);
    const Trajectory traj = run_schedule(k, y, alpha_hat, plan, 1u);
    for (const auto& r : traj.steps) {
        REQUIRE(norm2(r.b) <= 1e-9);
        REQUIRE(r.train_loss <= 1e-15);
    }
}

TEST_CASE("gd trajectory follows the eigenbasis closed form") {
    // For the full-gradient path the error components scale by
    // (1 - eta gamma_i^2 / n) each step.
    Matrix k(2, 2);
    k(0, 0) = 2.0;
    k(1, 1) = 1.0;
    const Vector y = {1.0, 1.0};
    const auto dec = eig_sym(k);
    const double eta = 0.4;  // below 2 / (2^2 / 2) cap for stability
    const auto plan = StepPlan::single(Algorithm::Gd, eta, 20);
    const Trajectory traj = run_schedule(k, y, {0.0, 0.0}, plan, 0u);
    const Vector b0 = traj.steps.front().b;
    for (const auto& r : traj.steps) {
        for (std::size_t i = 0; i < 2; ++i) {
            const double qi = 1.0 - eta * dec.gammas[i] * dec.gammas[i] / 2.0;
            const double want = std::pow(qi, static_cast<double>(r.t)) * b0[i];
            REQUIRE(r.b[i] == Catch::Approx(want).margin(1e-10));
        }
    }

    Pcg32 rng(59u);
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t n = 6;
        const Matrix kk = random_dominant(n, 1e-3, rng);
        const Vector yy = random_vec(n, rng);
        const auto kdec = eig_sym(kk);
        const Feasibility f = plan_step_sizes(kk);
        const double e = 0.8 * f.eta_gd_max;
        const Trajectory t2 =
            run_schedule(kk, yy, Vector(n, 0.0), StepPlan::single(Algorithm::Gd, e, 30), 0u);
        const Vector w0 = mat_t_vec(kdec.vectors, t2.steps.front().b);
        const auto& fin = t2.final_record();
        const Vector wk = mat_t_vec(kdec.vectors, fin.b);
        for (std::size_t i = 0; i < n; ++i) {
            const double qi = 1.0 - e * kdec.gammas[i] * kdec.gammas[i] / static_cast<double>(n);
            const double want = std::pow(qi, static_cast<double>(fin.t)) * w0[i];
            REQUIRE(wk[i] == Catch::Approx(want).margin(1e-8 * std::abs(w0[i]) + 1e-12));
        }
    }
}

TEST_CASE("long gd runs land on the bottom eigenvalue ratio") {
    Pcg32 rng(73u);
    for (int rep = 0; rep < 5; ++rep) {
        const std::size_t n = 8;
        Matrix k = random_dominant(n, 1e-4, rng);
        k(n - 1, n - 1) = 0.3;  // force a gap below the rest
        for (std::size_t i = 0; i + 1 < n; ++i) k(i, i) = std::max(k(i, i), 0.6);
        const auto dec = eig_sym(k);
        const Vector y = random_vec(n, rng);
        const Feasibility f = plan_step_sizes(k);
        const double eta = 0.9 * f.eta_gd_max;
        const Vector alpha_hat = closed_form_solution(k, y);
        const Vector w0 = mat_t_vec(dec.vectors, vec_scale(alpha_hat, -1.0));
        double head = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) head += w0[i] * w0[i];
        const double eps_prime = 0.01;
        const double gn = dec.gammas.back();
        const double q_second = 1.0 - eta * dec.gammas[n - 2] * dec.gammas[n - 2] / 8.0;
        const double q_last = 1.0 - eta * gn * gn / 8.0;
        const double target = gn * gn * eps_prime * w0[n - 1] * w0[n - 1] /
                              (dec.gammas.front() * dec.gammas.front() * head);
        const auto k_steps = static_cast<std::size_t>(
            std::max(1.0, std::ceil(0.5 * std::log(target) / std::log(q_second / q_last))));
        const Trajectory traj = run_schedule(k, y, Vector(n, 0.0),
                                             StepPlan::single(Algorithm::Gd, eta, k_steps), 0u,
                                             nullptr, k_steps);
        const double ratio = std::sqrt(traj.final_record().rq);
        REQUIRE(ratio >= gn * (1.0 - 1e-12));
        REQUIRE(ratio <= std::sqrt(1.0 + eps_prime) * gn * (1.0 + 1e-12));
    }
}

TEST_CASE("gd train loss is monotone under the step cap") {
    Pcg32 rng(67u);
    const std::size_t n = 8;
    const Matrix k = random_dominant(n, 1e-3, rng);
    const Vector y = random_vec(n, rng);
    const Feasibility f = plan_step_sizes(k);
    const Trajectory traj = run_schedule(
        k, y, Vector(n, 0.0), StepPlan::single(Algorithm::Gd, 0.95 * f.eta_gd_max, 200), 0u);
    for (std::size_t i = 1; i < traj.steps.size(); ++i)
        REQUIRE(traj.steps[i].train_loss <= traj.steps[i - 1].train_loss * (1.0 + 1e-12));
}

TEST_CASE("same seed gives a bit-identical trajectory") {
    Pcg32 rng(71u);
    const Matrix k = random_dominant(6, 1e-3, rng);
    const Vector y = random_vec(6, rng);
    const auto plan = StepPlan::two_stage(Algorithm::Sgd, 0.1, 20, 0.01, 60);
    const Trajectory a = run_schedule(k, y, Vector(6, 0.0), plan, 99u);
    const Trajectory b = run_schedule(k, y, Vector(6, 0.0), plan, 99u);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i)
        for (std::size_t j = 0; j < 6; ++j) REQUIRE(a.steps[i].alpha[j] == b.steps[i].alpha[j]);
}

TEST_CASE("divergent schedules abort") {
    Matrix k(2, 2);
    k(0, 0) = 2.0;
    k(1, 1) = 1.0;
    const Vector y = {1.0, 1.0};
    REQUIRE_THROWS_AS(
        run_schedule(k, y, {0.0, 0.0}, StepPlan::single(Algorithm::Gd, 50.0, 500), 0u),
        std::runtime_error);
}

TEST_CASE("record decimation keeps the endpoints") {
    Matrix k(2, 2);
    k(0, 0) = 2.0;
    k(1, 1) = 1.0;
    const Vector y = {1.0, 1.0};
    const Trajectory t =
        run_schedule(k, y, {0.0, 0.0}, StepPlan::single(Algorithm::Gd, 0.1, 25), 0u, nullptr, 10);
    REQUIRE(t.steps.size() == 4);  // 0, 10, 20, 25
    REQUIRE(t.steps.front().t == 0);
    REQUIRE(t.steps.back().t == 25);
}

TEST_CASE("step diagnostics at zero off-diagonal mass") {
    Matrix k(5, 5);
    k(0, 0) = 2.0;
    for (std::size_t i = 1; i < 5; ++i) k(i, i) = 1.0;
    const auto pp = projection_pair(k);
    const double nd = 5.0;

    // q1 follows its formula with the diagonal's leading entry
    for (double eta : {0.1, 0.3, 0.7}) {
        const auto sd = step_diagnostics(k, eta, pp);
        REQUIRE(sd.xi == 0.0);
        REQUIRE(sd.q1 == Catch::Approx((nd - 1.0) / nd + std::abs(1.0 - eta * 4.0) / nd)
                             .epsilon(1e-12));
    }

    // inside the first-stage window the leading component expands while the
    // complement contracts
    const Feasibility f = plan_step_sizes(k);
    const double eta1 = 0.5 * (f.eta1_lo + f.eta1_hi);
    const auto sd1 = step_diagnostics(k, eta1, pp);
    REQUIRE(sd1.q1 > 1.0);
    REQUIRE(sd1.q_minus1_bound < 1.0);

    // below the second-stage cap everything contracts
    const auto sd2 = step_diagnostics(k, 0.9 * f.eta2_max, pp);
    REQUIRE(sd2.q1 < 1.0);
}
