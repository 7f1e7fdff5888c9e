#pragma once

// Kernel function evaluation, Gram matrix construction, and
// diagonal-dominance analysis of Gram matrices.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "kbias/linalg.hpp"

namespace kbias {

enum class KernelFamily { Bilinear, Polynomial, Rbf, Gaussian, Laplace, Sigmoid, CubicSpline };

inline const char* family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::Bilinear: return "bilinear";
        case KernelFamily::Polynomial: return "polynomial";
        case KernelFamily::Rbf: return "rbf";
        case KernelFamily::Gaussian: return "gaussian";
        case KernelFamily::Laplace: return "laplace";
        case KernelFamily::Sigmoid: return "sigmoid";
        case KernelFamily::CubicSpline: return "cubic_spline";
    }
    return "unknown";
}

inline KernelFamily family_from_name(const std::string& s) {
    if (s == "bilinear") return KernelFamily::Bilinear;
    if (s == "polynomial") return KernelFamily::Polynomial;
    if (s == "rbf") return KernelFamily::Rbf;
    if (s == "gaussian") return KernelFamily::Gaussian;
    if (s == "laplace") return KernelFamily::Laplace;
    if (s == "sigmoid") return KernelFamily::Sigmoid;
    if (s == "cubic_spline") return KernelFamily::CubicSpline;
    throw std::invalid_argument("unknown kernel family: " + s);
}

/// Tagged kernel descriptor. Only the parameters of the selected family are
/// meaningful; the factory functions set them.
struct KernelSpec {
    KernelFamily family = KernelFamily::Bilinear;
    double offset = 0.0;  // additive constant of polynomial / sigmoid
    int degree = 2;       // polynomial exponent
    double gamma = 1.0;   // rbf scale
    double sigma = 1.0;   // gaussian / laplace bandwidth
    double alpha = 1.0;   // sigmoid slope

    static KernelSpec bilinear() { return {}; }
    static KernelSpec polynomial(double c, int m) {
        KernelSpec s;
        s.family = KernelFamily::Polynomial;
        s.offset = c;
        s.degree = m;
        s.validate();
        return s;
    }
    static KernelSpec rbf(double gamma) {
        KernelSpec s;
        s.family = KernelFamily::Rbf;
        s.gamma = gamma;
        s.validate();
        return s;
    }
    static KernelSpec gaussian(double sigma) {
        KernelSpec s;
        s.family = KernelFamily::Gaussian;
        s.sigma = sigma;
        s.validate();
        return s;
    }
    static KernelSpec laplace(double sigma) {
        KernelSpec s;
        s.family = KernelFamily::Laplace;
        s.sigma = sigma;
        s.validate();
        return s;
    }
    static KernelSpec sigmoid(double alpha, double c) {
        KernelSpec s;
        s.family = KernelFamily::Sigmoid;
        s.alpha = alpha;
        s.offset = c;
        s.validate();
        return s;
    }
    static KernelSpec cubic_spline() {
        KernelSpec s;
        s.family = KernelFamily::CubicSpline;
        return s;
    }

    void validate() const {
        switch (family) {
            case KernelFamily::Polynomial:
                if (degree < 1) throw std::invalid_argument("polynomial degree must be >= 1");
                if (!std::isfinite(offset)) throw std::invalid_argument("polynomial offset not finite");
                break;
            case KernelFamily::Rbf:
                if (!(gamma > 0.0)) throw std::invalid_argument("rbf gamma must be > 0");
                break;
            case KernelFamily::Gaussian:
            case KernelFamily::Laplace:
                if (!(sigma > 0.0)) throw std::invalid_argument("bandwidth sigma must be > 0");
                break;
            case KernelFamily::Sigmoid:
                if (!(alpha > 0.0)) throw std::invalid_argument("sigmoid alpha must be > 0");
                if (offset < 0.0) throw std::invalid_argument("sigmoid offset must be >= 0");
                break;
            case KernelFamily::Bilinear:
            case KernelFamily::CubicSpline:
                break;
        }
    }
};

namespace detail {

inline void require_finite(const Vector& x, const char* what) {
    for (double v : x)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite input");
}

inline double sq_dist(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

/// Closed form of the spline kernel K(s,t) = integral_0^1 (s-u)_+ (t-u)_+ du
/// for s, t in [0,1]: with m = min(s,t), the integrand is supported on
/// [0, m] and integrates to s*t*m - (s+t)*m^2/2 + m^3/3.
inline double cubic_spline_kernel(double s, double t) {
    const double m = std::min(s, t);
    return s * t * m - (s + t) * m * m / 2.0 + m * m * m / 3.0;
}

}  // namespace detail

inline double eval_kernel(const KernelSpec& spec, const Vector& x1, const Vector& x2) {
    spec.validate();
    if (x1.size() != x2.size()) throw std::invalid_argument("eval_kernel: dimension mismatch");
    if (x1.empty()) throw std::invalid_argument("eval_kernel: empty input");
    detail::require_finite(x1, "eval_kernel");
    detail::require_finite(x2, "eval_kernel");
    switch (spec.family) {
        case KernelFamily::Bilinear:
            return dot(x1, x2);
        case KernelFamily::Polynomial:
            return std::pow(dot(x1, x2) + spec.offset, spec.degree);
        case KernelFamily::Rbf:
            return std::exp(-spec.gamma * detail::sq_dist(x1, x2));
        case KernelFamily::Gaussian:
            return std::exp(-detail::sq_dist(x1, x2) / (2.0 * spec.sigma * spec.sigma));
        case KernelFamily::Laplace:
            return std::exp(-std::sqrt(detail::sq_dist(x1, x2)) / spec.sigma);
        case KernelFamily::Sigmoid:
            return std::tanh(spec.alpha * dot(x1, x2) + spec.offset);
        case KernelFamily::CubicSpline: {
            if (x1.size() != 1)
                throw std::invalid_argument("cubic spline kernel takes scalar inputs");
            const double s = x1[0];
            const double t = x2[0];
            if (s < 0.0 || s > 1.0 || t < 0.0 || t > 1.0)
                throw std::invalid_argument("cubic spline kernel inputs must lie in [0,1]");
            return detail::cubic_spline_kernel(s, t);
        }
    }
    throw std::logic_error("eval_kernel: unhandled family");
}

/// Builds the Gram matrix K(i,j) = K(x_i, x_j) for the rows of X. The upper
/// triangle is computed and mirrored, so the result is symmetric exactly.
inline Matrix gram_matrix(const KernelSpec& spec, const Matrix& x) {
    const std::size_t n = x.rows();
    if (n < 2) throw std::invalid_argument("gram_matrix: need at least two rows");
    Matrix k(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const Vector xi = x.row_vec(i);
        k(i, i) = eval_kernel(spec, xi, xi);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = eval_kernel(spec, xi, x.row_vec(j));
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

struct DominanceReport {
    double tau = 0.0;              // max |K_ij|, i != j
    double lambda_min_diag = 0.0;  // smallest diagonal entry
    double ratio = 0.0;            // tau / lambda_min_diag
    double threshold = 0.0;
    bool is_dominant = false;      // ratio <= threshold
    bool diag_descending = false;  // diagonal already sorted descending as given
};

inline DominanceReport dominance_report(const Matrix& k, double threshold) {
    if (!k.square()) throw std::invalid_argument("dominance_report: square matrix required");
    const std::size_t n = k.rows();
    DominanceReport rep;
    rep.threshold = threshold;
    rep.lambda_min_diag = k(0, 0);
    rep.diag_descending = true;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(k(i, i) > 0.0))
            throw std::invalid_argument("dominance_report: nonpositive diagonal entry");
        rep.lambda_min_diag = std::min(rep.lambda_min_diag, k(i, i));
        if (i > 0 && k(i, i) > k(i - 1, i - 1)) rep.diag_descending = false;
    }
    rep.tau = max_abs_offdiag(k);
    rep.ratio = rep.tau / rep.lambda_min_diag;
    rep.is_dominant = rep.ratio <= threshold;
    return rep;
}

/// Closed-form bound on off-diagonal Gram entries for unit-norm data whose
/// pairwise inner products are bounded by tau_tilde. Inner-product families
/// use the smoothness bound of the transformation; distance families use
/// the squared-distance lower bound 2 - 2*tau_tilde.
inline double predicted_offdiag_bound(const KernelSpec& spec, double tau_tilde) {
    spec.validate();
    if (!(tau_tilde > 0.0 && tau_tilde < 1.0))
        throw std::invalid_argument("predicted_offdiag_bound: tau_tilde must be in (0,1)");
    switch (spec.family) {
        case KernelFamily::Bilinear:
            return tau_tilde;
        case KernelFamily::Polynomial: {
            const double m = static_cast<double>(spec.degree);
            return (1.0 + m) * tau_tilde +
                   0.5 * m * std::exp((m - 1.0) * tau_tilde) * tau_tilde * tau_tilde;
        }
        case KernelFamily::Sigmoid:
            return std::tanh(spec.alpha * tau_tilde + spec.offset);
        case KernelFamily::Rbf:
            return std::exp(-2.0 * spec.gamma * (1.0 - tau_tilde));
        case KernelFamily::Gaussian:
            // gamma-equivalent scale is 1 / (2 sigma^2)
            return std::exp(-(1.0 - tau_tilde) / (spec.sigma * spec.sigma));
        case KernelFamily::Laplace:
            return std::exp(-std::sqrt(2.0 - 2.0 * tau_tilde) / spec.sigma);
        case KernelFamily::CubicSpline:
            throw std::invalid_argument("predicted_offdiag_bound: unsupported family");
    }
    throw std::logic_error("predicted_offdiag_bound: unhandled family");
}

}  // namespace kbias
