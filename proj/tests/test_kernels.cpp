#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "kbias/data.hpp"
#include "kbias/kernels.hpp"
#include "kbias/prng.hpp"
#include "kbias/spectral.hpp"

using namespace kbias;

namespace {

// Quadrature oracle for the spline kernel: composite Simpson on [0,1] of
// (s-u)_+ (t-u)_+.
double spline_kernel_quadrature(double s, double t, int panels = 20000) {
    auto f = [s, t](double u) {
        const double a = std::max(0.0, s - u);
        const double b = std::max(0.0, t - u);
        return a * b;
    };
    const double h = 1.0 / panels;
    double acc = f(0.0) + f(1.0);
    for (int i = 1; i < panels; ++i) acc += (i % 2 ? 4.0 : 2.0) * f(i * h);
    return acc * h / 3.0;
}

Vector random_vec(std::size_t d, Pcg32& rng) {
    Vector v(d);
    for (auto& x : v) x = rng.next_gaussian();
    return v;
}

}  // namespace

TEST_CASE("polynomial kernel value at unit inner product") {
    const auto spec = KernelSpec::polynomial(0.01, 2);
    const Vector e1 = {1.0, 0.0};
    REQUIRE(eval_kernel(spec, e1, e1) == Catch::Approx(1.0201).epsilon(1e-14));
}

TEST_CASE("bilinear kernel vanishes on orthogonal inputs") {
    const Vector a = {1.0, 0.0, 0.0};
    const Vector b = {0.0, 2.0, 0.0};
    REQUIRE(eval_kernel(KernelSpec::bilinear(), a, b) == 0.0);
}

TEST_CASE("cubic spline kernel matches the quadrature oracle") {
    const auto spec = KernelSpec::cubic_spline();
    // Frozen from the oracle: K(1,1) = 1/3.
    REQUIRE(spline_kernel_quadrature(1.0, 1.0) == Catch::Approx(1.0 / 3.0).epsilon(1e-9));
    REQUIRE(eval_kernel(spec, {1.0}, {1.0}) == Catch::Approx(1.0 / 3.0).epsilon(1e-12));
    const double pts[] = {0.0, 0.17, 0.3, 0.55, 0.8, 1.0};
    for (double s : pts)
        for (double t : pts) {
            const double oracle = spline_kernel_quadrature(s, t);
            REQUIRE(eval_kernel(spec, {s}, {t}) == Catch::Approx(oracle).margin(1e-9));
        }
}

TEST_CASE("gaussian kernel is one at zero distance") {
    const Vector x = {0.3, -0.4, 1.1};
    REQUIRE(eval_kernel(KernelSpec::gaussian(0.7), x, x) == 1.0);
}

TEST_CASE("eval_kernel rejects bad inputs") {
    REQUIRE_THROWS_AS(eval_kernel(KernelSpec::bilinear(), {1.0, 2.0}, {1.0}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(eval_kernel(KernelSpec::cubic_spline(), {1.5}, {0.5}),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(eval_kernel(KernelSpec::cubic_spline(), {0.1, 0.2}, {0.1, 0.2}),
                      std::invalid_argument);
    const double inf = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(eval_kernel(KernelSpec::bilinear(), {inf}, {1.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(KernelSpec::polynomial(0.1, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(KernelSpec::rbf(-1.0), std::invalid_argument);
}

TEST_CASE("kernel symmetry across all families") {
    Pcg32 rng(31u);
    const KernelSpec specs[] = {KernelSpec::bilinear(),      KernelSpec::polynomial(0.01, 3),
                                KernelSpec::rbf(1.5),        KernelSpec::gaussian(0.8),
                                KernelSpec::laplace(1.2),    KernelSpec::sigmoid(2.0, 0.1)};
    for (const auto& spec : specs)
        for (int rep = 0; rep < 20; ++rep) {
            const Vector a = random_vec(6, rng);
            const Vector b = random_vec(6, rng);
            REQUIRE(eval_kernel(spec, a, b) == eval_kernel(spec, b, a));
        }
    for (int rep = 0; rep < 20; ++rep) {
        const Vector a = {rng.next_u01()};
        const Vector b = {rng.next_u01()};
        REQUIRE(eval_kernel(KernelSpec::cubic_spline(), a, b) ==
                eval_kernel(KernelSpec::cubic_spline(), b, a));
    }
}

TEST_CASE("gram matrix basics") {
    Matrix eye_rows(2, 2);
    eye_rows(0, 0) = 1.0;
    eye_rows(1, 1) = 1.0;
    const Matrix k = gram_matrix(KernelSpec::bilinear(), eye_rows);
    REQUIRE(k(0, 0) == 1.0);
    REQUIRE(k(1, 1) == 1.0);
    REQUIRE(k(0, 1) == 0.0);
    REQUIRE(k(1, 0) == 0.0);

    const DataSet ds = sample_sphere_data(6, 4, 11u, 0.5, 1.0);
    const auto spec = KernelSpec::polynomial(0.01, 2);
    const Matrix kp = gram_matrix(spec, ds.X);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            REQUIRE(kp(i, j) == kp(j, i));
            REQUIRE(kp(i, j) ==
                    Catch::Approx(eval_kernel(spec, ds.X.row_vec(i), ds.X.row_vec(j)))
                        .epsilon(1e-15));
        }

    const Matrix kg = gram_matrix(KernelSpec::gaussian(1.0), ds.X);
    for (std::size_t i = 0; i < 6; ++i) REQUIRE(kg(i, i) == 1.0);
}

TEST_CASE("dominance report examples") {
    const Matrix eye = Matrix::identity(3);
    const auto r1 = dominance_report(eye, 0.5);
    REQUIRE(r1.tau == 0.0);
    REQUIRE(r1.ratio == 0.0);
    REQUIRE(r1.is_dominant);

    Matrix k2(2, 2);
    k2(0, 0) = 1.0;
    k2(1, 1) = 1.0;
    k2(0, 1) = k2(1, 0) = 0.5;
    const auto r2 = dominance_report(k2, 0.1);
    REQUIRE(r2.ratio == Catch::Approx(0.5));
    REQUIRE_FALSE(r2.is_dominant);

    Matrix k3(2, 2);
    k3(0, 0) = 2.0;
    k3(1, 1) = 1.0;
    k3(0, 1) = k3(1, 0) = 0.01;
    const auto r3 = dominance_report(k3, 0.1);
    REQUIRE(r3.tau == Catch::Approx(0.01));
    REQUIRE(r3.ratio == Catch::Approx(0.01));
    REQUIRE(r3.is_dominant);
    REQUIRE(r3.diag_descending);

    Matrix bad(2, 2);
    bad(0, 0) = 1.0;
    bad(1, 1) = 0.0;
    REQUIRE_THROWS_AS(dominance_report(bad, 0.1), std::invalid_argument);
}

TEST_CASE("predicted off-diagonal bounds") {
    REQUIRE(predicted_offdiag_bound(KernelSpec::bilinear(), 0.05) == 0.05);
    REQUIRE(predicted_offdiag_bound(KernelSpec::sigmoid(2.0, 0.01), 0.1) ==
            Catch::Approx(std::tanh(2.0 * 0.1 + 0.01)).epsilon(1e-15));
    // Frozen from evaluating tau^(2 c0 (1 - tau)) at c0 = 1, tau = 0.1;
    // the rbf scale that corresponds to c0 = 1 is -log(0.1).
    const double oracle = std::pow(0.1, 1.8);
    REQUIRE(oracle == Catch::Approx(0.015848931924611134).epsilon(1e-12));
    REQUIRE(predicted_offdiag_bound(KernelSpec::rbf(-std::log(0.1)), 0.1) ==
            Catch::Approx(oracle).epsilon(1e-12));
    REQUIRE_THROWS_AS(predicted_offdiag_bound(KernelSpec::cubic_spline(), 0.1),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(predicted_offdiag_bound(KernelSpec::bilinear(), 1.5),
                      std::invalid_argument);
}

TEST_CASE("gram matrices of PSD families are numerically PSD") {
    const KernelSpec specs[] = {KernelSpec::bilinear(), KernelSpec::gaussian(0.9),
                                KernelSpec::rbf(1.3), KernelSpec::laplace(1.1)};
    for (const auto& spec : specs) {
        const DataSet ds = sample_sphere_data(8, 5, 77u, 0.5, 1.0);
        const Matrix k = gram_matrix(spec, ds.X);
        const auto dec = eig_sym(k);
        REQUIRE(dec.gammas.back() >= -1e-8 * spectral_norm(dec));
    }
    // spline kernel on scalars in [0,1]
    Pcg32 rng(5u);
    Matrix x(8, 1);
    for (std::size_t i = 0; i < 8; ++i) x(i, 0) = rng.next_u01();
    const Matrix k = gram_matrix(KernelSpec::cubic_spline(), x);
    const auto dec = eig_sym(k);
    REQUIRE(dec.gammas.back() >= -1e-8 * spectral_norm(dec));
}

TEST_CASE("dominance bounds hold on high-dimensional sphere data") {
    const KernelSpec specs[] = {KernelSpec::bilinear(),      KernelSpec::polynomial(0.01, 2),
                                KernelSpec::sigmoid(2.0, 0.001), KernelSpec::rbf(2.0),
                                KernelSpec::gaussian(0.5),   KernelSpec::laplace(1.0)};
    for (std::size_t trial = 0; trial < 100; ++trial) {
        const DataSet ds = sample_sphere_data(8, 10000, split_seed(1234, trial), 1.0, 1.0);
        double tau_obs = 0.0;
        for (std::size_t i = 0; i < ds.n(); ++i)
            for (std::size_t j = i + 1; j < ds.n(); ++j)
                tau_obs = std::max(tau_obs,
                                   std::abs(dot(ds.X.row_vec(i), ds.X.row_vec(j))));
        REQUIRE(tau_obs > 0.0);
        REQUIRE(tau_obs < 1.0);
        for (const auto& spec : specs) {
            const Matrix k = gram_matrix(spec, ds.X);
            const double bound = predicted_offdiag_bound(spec, tau_obs);
            REQUIRE(max_abs_offdiag(k) <= bound * (1.0 + 1e-12) + 1e-300);
        }
    }
}
