#pragma once

// Synthetic data generation: near-unit-sphere design matrices and the sine
// regression model used by the simulation harness. All generators are pure
// functions of their seed.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "kbias/linalg.hpp"
#include "kbias/prng.hpp"

namespace kbias {

struct DataSet {
    Matrix X;
    Vector y;  // empty for design-only data sets
    std::uint64_t seed = 0;
    std::string generator_id;
    double noise_sd = 0.0;
    double sq_norm_lo = 1.0;
    double sq_norm_hi = 1.0;

    std::size_t n() const { return X.rows(); }
    std::size_t dim() const { return X.cols(); }
};

namespace detail {

inline void check_sq_norm_range(double lo, double hi) {
    if (!(lo > 0.0) || !(hi >= lo))
        throw std::invalid_argument("sq_norm_range: need 0 < lo <= hi");
}

/// Fills row i with a standard Gaussian direction rescaled so its squared
/// norm is uniform in [lo, hi]. Draw order per row: dim gaussians, then one
/// uniform for the norm.
inline void fill_scaled_sphere_row(Matrix& x, std::size_t i, double lo, double hi, Pcg32& rng) {
    const std::size_t d = x.cols();
    double nrm2 = 0.0;
    do {
        nrm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double g = rng.next_gaussian();
            x(i, j) = g;
            nrm2 += g * g;
        }
    } while (nrm2 == 0.0);
    const double target = rng.next_uniform(lo, hi);
    const double scale = std::sqrt(target / nrm2);
    for (std::size_t j = 0; j < d; ++j) x(i, j) *= scale;
}

}  // namespace detail

/// Rows uniform on the sphere, rescaled to squared norm uniform in [lo, hi].
inline DataSet sample_sphere_data(std::size_t n, std::size_t d, std::uint64_t seed,
                                  double lo, double hi) {
    if (n < 1 || d < 1) throw std::invalid_argument("sample_sphere_data: n, d must be >= 1");
    detail::check_sq_norm_range(lo, hi);
    DataSet ds;
    ds.X = Matrix(n, d);
    ds.seed = seed;
    ds.generator_id = "sphere";
    ds.sq_norm_lo = lo;
    ds.sq_norm_hi = hi;
    Pcg32 rng(seed, kStreamSphere);
    for (std::size_t i = 0; i < n; ++i) detail::fill_scaled_sphere_row(ds.X, i, lo, hi, rng);
    return ds;
}

/// Response of the sine model on already-normalized rows: the row sum of
/// coordinate-wise sines plus N(0, noise_sd^2) noise.
inline Vector sine_targets(const Matrix& x, double noise_sd, Pcg32& rng) {
    if (noise_sd < 0.0) throw std::invalid_argument("sine_targets: noise_sd must be >= 0");
    Vector y(x.rows(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) s += std::sin(x(i, j));
        y[i] = s;
    }
    if (noise_sd > 0.0)
        for (std::size_t i = 0; i < x.rows(); ++i) y[i] += noise_sd * rng.next_gaussian();
    return y;
}

/// Sine regression data: X entries i.i.d. N(0,1), rows rescaled to squared
/// norm uniform in [lo, hi], and y computed from the rescaled rows. The
/// responses are evaluated after normalization; that ordering is part of
/// the generator's contract.
inline DataSet simulate_sine_regression(std::size_t n, std::size_t p, double noise_sd,
                                        std::uint64_t seed, double lo, double hi) {
    if (n < 1 || p < 1)
        throw std::invalid_argument("simulate_sine_regression: n, p must be >= 1");
    if (noise_sd < 0.0)
        throw std::invalid_argument("simulate_sine_regression: noise_sd must be >= 0");
    detail::check_sq_norm_range(lo, hi);
    DataSet ds;
    ds.X = Matrix(n, p);
    ds.seed = seed;
    ds.generator_id = "sine";
    ds.noise_sd = noise_sd;
    ds.sq_norm_lo = lo;
    ds.sq_norm_hi = hi;
    Pcg32 rng(seed, kStreamSine);
    for (std::size_t i = 0; i < n; ++i) detail::fill_scaled_sphere_row(ds.X, i, lo, hi, rng);
    ds.y = sine_targets(ds.X, noise_sd, rng);
    return ds;
}

/// Threshold sqrt(4 ln(2 n^2 / delta) / d) for the pairwise inner products
/// of n uniform unit vectors in dimension d.
inline double sphere_tail_threshold(std::size_t n, std::size_t d, double delta) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("sphere_tail_threshold: delta must be in (0,1)");
    const double nn = static_cast<double>(n);
    return std::sqrt(4.0 * std::log(2.0 * nn * nn / delta) / static_cast<double>(d));
}

/// Monte Carlo estimate of how often max_{i!=j} |<x_i, x_j>| reaches the
/// tail threshold for unit vectors; the estimate should not exceed delta.
inline double tau_bound_check(std::size_t n, std::size_t d, double delta, std::size_t trials,
                              std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("tau_bound_check: trials must be >= 1");
    if (n < 2) throw std::invalid_argument("tau_bound_check: n must be >= 2");
    const double nn = static_cast<double>(n);
    if (static_cast<double>(d) < 4.0 * std::log(2.0 * nn * nn / delta))
        throw std::invalid_argument("tau_bound_check: d below 4 ln(2 n^2 / delta)");
    const double threshold = sphere_tail_threshold(n, d, delta);
    Pcg32 rng(seed, kStreamTauCheck);
    Matrix x(n, d);
    std::size_t hits = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        for (std::size_t i = 0; i < n; ++i) detail::fill_scaled_sphere_row(x, i, 1.0, 1.0, rng);
        double mx = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < d; ++c) s += x(i, c) * x(j, c);
                mx = std::max(mx, std::abs(s));
            }
        if (mx >= threshold) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace kbias
