#pragma once

// Directional-bias and generalization metrics, the level-set lower bound
// for quadratic losses, held-out prediction error, and a one-sided
// Wilcoxon signed-rank test (exact by enumeration at small sample sizes).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "kbias/kernels.hpp"
#include "kbias/linalg.hpp"
#include "kbias/spectral.hpp"

namespace kbias {

enum class RrqMode {
    ErrorDirection,    // measure the error vector b itself
    GradientDirection  // measure K^2 b, the gradient direction of the loss
};

struct BiasMeasurement {
    double rq = 0.0;        // ||K b||^2 / ||b||^2
    double rq_ratio = 0.0;  // ||K b|| / ||b||
    double rrq = 0.0;       // rq / gamma_1^2
    double gamma1 = 0.0;
    double gamma_n = 0.0;
};

inline BiasMeasurement bias_measurement(const EigenDecomposition& eigs, const Matrix& k,
                                        const Vector& b, RrqMode mode = RrqMode::ErrorDirection) {
    Vector v = b;
    if (mode == RrqMode::GradientDirection) v = mat_vec(k, mat_vec(k, b));
    const double vn = norm2(v);
    if (!(vn > 0.0)) throw std::invalid_argument("bias_measurement: zero vector");
    // Normalizing first makes the quotient invariant under rescaling of b.
    const Vector u = vec_scale(v, 1.0 / vn);
    const Vector ku = mat_vec(k, u);
    BiasMeasurement m;
    m.rq = dot(ku, ku);
    m.rq_ratio = std::sqrt(m.rq);
    m.gamma1 = eigs.gammas.front();
    m.gamma_n = eigs.gammas.back();
    m.rrq = m.rq / (m.gamma1 * m.gamma1);
    return m;
}

/// Excess error of the coefficient vector alpha = alpha_hat + b within the
/// representer class: the quadratic form b^T K b.
inline double estimation_error(const Matrix& k, const Vector& b) {
    return dot(b, mat_vec(k, b));
}

/// Smallest achievable estimation error on the level set of training loss
/// a: 2 n a / gamma_1.
inline double delta_star(double a, std::size_t n, double gamma1) {
    if (a < 0.0) throw std::invalid_argument("delta_star: a must be >= 0");
    if (!(gamma1 > 0.0)) throw std::invalid_argument("delta_star: gamma1 must be > 0");
    return 2.0 * static_cast<double>(n) * a / gamma1;
}

/// Per-iterate generalization quantities: the training loss level, the
/// estimation error, the level-set infimum at that level, the comparison
/// factor of the full-gradient lower bound, and held-out error.
struct GeneralizationRecord {
    double train_loss = 0.0;
    double est_error = 0.0;  // b^T K b
    double delta_star = 0.0; // 2 n a / gamma_1 at a = train_loss
    double m_bound = 0.0;    // (gamma_1 / gamma_n) (1 - eps_prime)
    double pred_mse = 0.0;
};

inline GeneralizationRecord generalization_record(const EigenDecomposition& eigs, const Matrix& k,
                                                  const Vector& b, double train_loss,
                                                  double pred_mse, double eps_prime = 0.01) {
    GeneralizationRecord r;
    r.train_loss = train_loss;
    r.est_error = dot(b, mat_vec(k, b));
    r.delta_star = 2.0 * static_cast<double>(k.rows()) * train_loss / eigs.gammas.front();
    r.m_bound = eigs.gammas.front() / eigs.gammas.back() * (1.0 - eps_prime);
    r.pred_mse = pred_mse;
    return r;
}

struct LevelSetBound {
    double bound = 0.0;          // a / ||A^T A||_2
    Vector argmin_direction;     // unit vector achieving it
};

/// Lower bound on ||v||^2 over the level set ||A v||^2 = a, achieved along
/// the top eigenvector of A^T A.
inline LevelSetBound quad_levelset_bound(const Matrix& a_mat, double a) {
    if (a < 0.0) throw std::invalid_argument("quad_levelset_bound: a must be >= 0");
    if (a_mat.rows() == 0 || a_mat.cols() == 0)
        throw std::invalid_argument("quad_levelset_bound: empty matrix");
    if (frobenius_norm(a_mat) == 0.0)
        throw std::invalid_argument("quad_levelset_bound: zero matrix");
    const std::size_t d = a_mat.cols();
    Matrix ata(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < a_mat.rows(); ++r) s += a_mat(r, i) * a_mat(r, j);
            ata(i, j) = s;
            ata(j, i) = s;
        }
    const auto dec = eig_sym(ata);
    LevelSetBound out;
    out.bound = a / dec.gammas.front();
    out.argmin_direction = dec.vectors.col_vec(0);
    return out;
}

/// Mean squared prediction error of the representer estimator
/// f(x) = sum_j alpha_j K(x_j, x) on held-out points.
inline double prediction_error(const KernelSpec& spec, const Matrix& x_train, const Vector& alpha,
                               const Matrix& x_test, const Vector& y_test) {
    if (x_test.rows() == 0) throw std::invalid_argument("prediction_error: empty test set");
    if (x_train.rows() != alpha.size() || x_test.rows() != y_test.size() ||
        x_train.cols() != x_test.cols())
        throw std::invalid_argument("prediction_error: shape mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < x_test.rows(); ++i) {
        const Vector xt = x_test.row_vec(i);
        double pred = 0.0;
        for (std::size_t j = 0; j < x_train.rows(); ++j)
            pred += alpha[j] * eval_kernel(spec, x_train.row_vec(j), xt);
        const double d = pred - y_test[i];
        total += d * d;
    }
    return total / static_cast<double>(x_test.rows());
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test
// ---------------------------------------------------------------------------

enum class Alternative { Greater, Less };

inline const char* alternative_name(Alternative a) {
    return a == Alternative::Greater ? "greater" : "less";
}

struct WilcoxonResult {
    double statistic = 0.0;  // W+, sum of ranks of positive differences
    double p_value = 0.0;    // exact when m <= 20, else normal approximation
    double p_normal = 0.0;   // normal approximation, always reported
    std::size_t m = 0;       // sample size after dropping zero differences
    bool exact = false;
    // conventions used
    std::string zeros = "drop";
    std::string ties = "average-rank";
};

namespace detail {

inline double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Average ranks of |d|, plus the tie-group sizes needed for the variance
/// correction of the normal approximation.
inline void ranks_of_abs(const std::vector<double>& absd, std::vector<double>& ranks,
                         std::vector<std::size_t>& tie_sizes) {
    const std::size_t m = absd.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&absd](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
    ranks.assign(m, 0.0);
    std::size_t i = 0;
    while (i < m) {
        std::size_t j = i;
        while (j + 1 < m && absd[order[j + 1]] == absd[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t l = i; l <= j; ++l) ranks[order[l]] = avg;
        if (j > i) tie_sizes.push_back(j - i + 1);
        i = j + 1;
    }
}

inline double wilcoxon_p_exact(const std::vector<double>& ranks, double w_plus, Alternative alt) {
    const std::size_t m = ranks.size();
    const std::size_t total = std::size_t{1} << m;
    // subset sums via the lowest-set-bit recurrence
    std::vector<double> sums(total, 0.0);
    for (std::size_t mask = 1; mask < total; ++mask) {
        const std::size_t low = mask & (~mask + 1);
        std::size_t bit = 0;
        while ((std::size_t{1} << bit) != low) ++bit;
        sums[mask] = sums[mask ^ low] + ranks[bit];
    }
    const double eps = 1e-9;
    std::size_t count = 0;
    if (alt == Alternative::Greater) {
        for (double s : sums)
            if (s >= w_plus - eps) ++count;
    } else {
        for (double s : sums)
            if (s <= w_plus + eps) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(total);
}

inline double wilcoxon_p_normal(double w_plus, std::size_t m,
                                const std::vector<std::size_t>& tie_sizes, Alternative alt) {
    const double md = static_cast<double>(m);
    const double mean = md * (md + 1.0) / 4.0;
    double var = md * (md + 1.0) * (2.0 * md + 1.0) / 24.0;
    for (std::size_t t : tie_sizes) {
        const double td = static_cast<double>(t);
        var -= td * (td * td - 1.0) / 48.0;
    }
    if (!(var > 0.0)) return 1.0;  // all ranks tied away; test carries no information
    const double sd = std::sqrt(var);
    if (alt == Alternative::Greater) return normal_sf((w_plus - mean - 0.5) / sd);
    return normal_cdf((w_plus - mean + 0.5) / sd);
}

}  // namespace detail

/// One-sided Wilcoxon signed-rank test on paired samples. Differences of
/// zero are dropped; tied magnitudes receive average ranks. The p-value is
/// exact (enumeration of all sign assignments) for m <= 20 and uses the
/// tie-corrected normal approximation with continuity correction beyond.
inline WilcoxonResult wilcoxon_signed_rank(const Vector& x, const Vector& y, Alternative alt) {
    if (x.size() != y.size() || x.empty())
        throw std::invalid_argument("wilcoxon_signed_rank: need equal nonempty samples");
    std::vector<double> d;
    d.reserve(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i] - y[i];
        if (v != 0.0) d.push_back(v);
    }
    if (d.empty())
        throw std::runtime_error("wilcoxon_signed_rank: all differences are zero; test undefined");

    std::vector<double> absd(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) absd[i] = std::abs(d[i]);
    std::vector<double> ranks;
    std::vector<std::size_t> tie_sizes;
    detail::ranks_of_abs(absd, ranks, tie_sizes);

    WilcoxonResult res;
    res.m = d.size();
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0) res.statistic += ranks[i];
    res.p_normal = detail::wilcoxon_p_normal(res.statistic, res.m, tie_sizes, alt);
    if (res.m <= 20) {
        res.exact = true;
        res.p_value = detail::wilcoxon_p_exact(ranks, res.statistic, alt);
    } else {
        res.exact = false;
        res.p_value = res.p_normal;
    }
    return res;
}

}  // namespace kbias
