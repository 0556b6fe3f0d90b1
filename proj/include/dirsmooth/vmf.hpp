#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dirsmooth/rng.hpp"

namespace dirsmooth {

/// Ambient dimension d of the sphere S^{d-1}, with the derived constants
/// a_d = (d-1)/2 and C_d = 1/B(1/2, a_d) of the cross-sectional density h_d.
struct Dimension {
    int d;
    double a;      // (d-1)/2
    double c_d;    // normalizing constant of h_d
    double log_c_d;

    explicit Dimension(int dim) : d(dim) {
        if (dim < 2) throw std::invalid_argument("Dimension: d must be >= 2");
        a = 0.5 * (dim - 1);
        log_c_d = std::lgamma(0.5 * dim) - std::lgamma(0.5) - std::lgamma(a);
        c_d = std::exp(log_c_d);
    }
};

struct VmfOptions {
    double eps = 1e-14;            // absolute truncation bound for the series
    double t_switch_override = 0;  // > 0 replaces the default series/asymptotic switch
};

/// Concentration at which evaluation switches from the Taylor series to the
/// large-argument expansions.
inline double t_switch(const Dimension& dim, const VmfOptions& opts = {}) {
    if (opts.t_switch_override > 0) return opts.t_switch_override;
    return std::min(100.0 * dim.d, 300.0);
}

/// Natural parameter z of vMF(z); the zero vector is the uniform law.
/// Norms below 1e-14 collapse to exactly zero so the direction never blows up.
struct VmfParam {
    Eigen::VectorXd z;

    explicit VmfParam(Eigen::VectorXd zz) : z(std::move(zz)) {
        if (z.size() < 2) throw std::invalid_argument("VmfParam: dimension must be >= 2");
        const double t = z.norm();
        if (t > 0 && t < 1e-14) z.setZero();
    }

    int dim() const { return static_cast<int>(z.size()); }
    double concentration() const { return z.norm(); }

    /// Mean direction z/||z||; only defined for nonzero parameters.
    Eigen::VectorXd direction() const {
        const double t = z.norm();
        if (t == 0) throw std::domain_error("VmfParam: direction undefined at z = 0");
        return z / t;
    }
};

/// Moments of vMF(z): cumulant value, mean vector, covariance matrix, and the
/// scalar moments of the cosine U_t along the mean direction.
struct VmfMoments {
    double gamma;
    Eigen::VectorXd mu;
    Eigen::MatrixXd sigma;
    double eut;   // E U_t
    double vut;   // Var U_t
    double perp;  // (1 - E U_t^2)/(d-1), the tangential eigenvalue
};

/// Density h_d(u) = C_d (1-u^2)^{a_d-1} of the cosine of a uniform draw
/// against a fixed direction.
inline double density_hd(double u, const Dimension& dim) {
    if (!(std::abs(u) < 1.0))
        throw std::domain_error("density_hd: |u| must be < 1");
    return dim.c_d * std::pow(1.0 - u * u, dim.a - 1.0);
}

/// Taylor evaluation of G_d(t) = sum_k c_{d,k} t^{2k}. The stopping rule
/// bounds the dropped tail by eps: stop once the current term is <= eps and
/// the term ratio (t/2)^2/((k+1)(k+d/2)) has fallen to 1/2 or less.
inline double g_series(const Dimension& dim, double t, double eps,
                       const VmfOptions& opts = {}) {
    if (!(eps > 0)) throw std::invalid_argument("g_series: eps must be > 0");
    if (std::abs(t) > t_switch(dim, opts))
        throw std::out_of_range("g_series: |t| exceeds the series range; "
                                "use the asymptotic path");
    const double q = 0.25 * t * t;  // (t/2)^2
    double term = 1.0;
    double sum = 0.0;
    const double half_d = 0.5 * dim.d;
    for (long k = 0; k < 1000000; ++k) {
        sum += term;
        const double ratio = q / ((k + 1.0) * (k + half_d));
        if (term <= eps && ratio <= 0.5) return sum;
        term *= ratio;
    }
    throw std::runtime_error("g_series: series failed to terminate");
}

/// Derivatives of G_d through the dimension-shift recursion:
/// G_d'(t) = (t/d) G_{d+2}(t),
/// G_d''(t) = G_{d+2}(t)/d + t^2 G_{d+4}(t)/(d(d+2)).
inline double g_deriv(const Dimension& dim, double t, int order,
                      const VmfOptions& opts = {}) {
    if (order != 1 && order != 2)
        throw std::invalid_argument("g_deriv: order must be 1 or 2");
    if (std::abs(t) > t_switch(dim, opts))
        throw std::out_of_range("g_deriv: |t| exceeds the series range");
    const double eps = opts.eps;
    const Dimension dp2(dim.d + 2);
    if (order == 1) return t / dim.d * g_series(dp2, t, eps, opts);
    const Dimension dp4(dim.d + 4);
    return g_series(dp2, t, eps, opts) / dim.d +
           t * t / (dim.d * (dim.d + 2.0)) * g_series(dp4, t, eps, opts);
}

namespace detail {

struct ScalarMoments {
    double gamma;
    double eut;
    double eut2;  // E U_t^2
    double vut;
    double perp;
};

/// Caches the dimension triple (d, d+2, d+4) used by the series path, so hot
/// loops do not recompute lgamma constants per evaluation.
struct MomentCtx {
    Dimension dim, dp2, dp4;
    explicit MomentCtx(int d) : dim(d), dp2(d + 2), dp4(d + 4) {}
};

inline ScalarMoments scalar_moments_series(const MomentCtx& ctx, double t,
                                           const VmfOptions& opts) {
    const int d = ctx.dim.d;
    const double gd = g_series(ctx.dim, t, opts.eps, opts);
    const double r2 = g_series(ctx.dp2, t, opts.eps, opts) / gd;
    const double r4 = g_series(ctx.dp4, t, opts.eps, opts) / gd;
    ScalarMoments m;
    m.gamma = std::log(gd);
    m.eut = t / d * r2;
    m.eut2 = r2 / d + t * t / (d * (d + 2.0)) * r4;
    m.vut = m.eut2 - m.eut * m.eut;
    m.perp = (1.0 - m.eut2) / (d - 1.0);
    return m;
}

// Large-t expansions built from the endpoint expansion of h_d: with
// beta_j = binom(a-1, j)(-1/2)^j,
//   E[(1-U_t)^l] = (a)_l t^-l P_l(t)/P_0(t),
//   P_l(t) = sum_j beta_j (l+a)_j t^-j,
// and log G_d(t) = t - a log t + log(2^{a-1} Gamma(d/2)/Gamma(1/2)) + log P_0(t).
// Eight terms keep the seam against the series below 1e-12 relative.
inline ScalarMoments scalar_moments_asymptotic(const Dimension& dim, double t) {
    constexpr int kTerms = 8;
    const double a = dim.a;
    double beta = 1.0;   // beta_j
    double pw = 1.0;     // t^-j
    double rf0 = 1.0, rf1 = 1.0, rf2 = 1.0;  // rising factorials (l+a)_j
    double p0 = 0.0, p1 = 0.0, p2 = 0.0;
    for (int j = 0; j <= kTerms; ++j) {
        const double b = beta * pw;
        p0 += b * rf0;
        p1 += b * rf1;
        p2 += b * rf2;
        rf0 *= a + j;
        rf1 *= a + 1.0 + j;
        rf2 *= a + 2.0 + j;
        beta *= (a - 1.0 - j) / (j + 1.0) * (-0.5);
        pw /= t;
    }
    const double e1 = a * (p1 / p0) / t;                      // E(1 - U_t)
    const double m2 = a * (a + 1.0) * (p2 / p0) / (t * t);    // E(1 - U_t)^2
    ScalarMoments m;
    m.eut = 1.0 - e1;
    m.eut2 = 1.0 - 2.0 * e1 + m2;
    m.vut = m2 - e1 * e1;
    m.perp = (2.0 * e1 - m2) / (dim.d - 1.0);
    m.gamma = t - a * std::log(t) + (a - 1.0) * std::log(2.0) +
              std::lgamma(0.5 * dim.d) - std::lgamma(0.5) + std::log(p0);
    return m;
}

/// Scalar moment bundle at concentration t >= 0.
inline ScalarMoments scalar_moments(const MomentCtx& ctx, double t,
                                    const VmfOptions& opts = {}) {
    if (t <= t_switch(ctx.dim, opts)) return scalar_moments_series(ctx, t, opts);
    return scalar_moments_asymptotic(ctx.dim, t);
}

inline ScalarMoments scalar_moments(const Dimension& dim, double t,
                                    const VmfOptions& opts = {}) {
    if (t > t_switch(dim, opts)) return scalar_moments_asymptotic(dim, t);
    return scalar_moments_series(MomentCtx(dim.d), t, opts);
}

} // namespace detail

/// gamma_tilde_d(t) = log G_d(t); even in t.
inline double gamma_tilde(const Dimension& dim, double t, const VmfOptions& opts = {}) {
    return detail::scalar_moments(dim, std::abs(t), opts).gamma;
}

/// First derivative of gamma_tilde_d (equals E U_t); odd in t.
inline double gamma_tilde_prime(const Dimension& dim, double t, const VmfOptions& opts = {}) {
    const double v = detail::scalar_moments(dim, std::abs(t), opts).eut;
    return t < 0 ? -v : v;
}

/// Second derivative of gamma_tilde_d (equals Var U_t); even in t.
inline double gamma_tilde_second(const Dimension& dim, double t, const VmfOptions& opts = {}) {
    return detail::scalar_moments(dim, std::abs(t), opts).vut;
}

/// Mean vector, covariance matrix and cumulant value of vMF(z), via the
/// representation Y = U_t v + sqrt(1-U_t^2) S_v:
///   mu(z) = (E U_t) v,
///   Sigma(z) = Var(U_t) vv^T + (1 - E U_t^2)/(d-1) (I - vv^T).
inline VmfMoments vmf_moments(const VmfParam& p, const VmfOptions& opts = {}) {
    const int d = p.dim();
    const Dimension dim(d);
    const double t = p.concentration();
    const auto s = detail::scalar_moments(dim, t, opts);

    VmfMoments m;
    m.gamma = s.gamma;
    m.eut = s.eut;
    m.vut = s.vut;
    m.perp = s.perp;
    if (t == 0) {
        m.mu = Eigen::VectorXd::Zero(d);
        m.sigma = Eigen::MatrixXd::Identity(d, d) / d;
        return m;
    }
    const Eigen::VectorXd v = p.z / t;
    m.mu = s.eut * v;
    m.sigma = s.perp * Eigen::MatrixXd::Identity(d, d) +
              (s.vut - s.perp) * (v * v.transpose());
    return m;
}

/// Inverse of the mean map: given m with ||m|| < 1, find z with mu(z) = m.
/// Solves gamma_tilde'(t) = ||m|| by safeguarded Newton (slope gamma_tilde'')
/// inside a geometrically grown bracket.
inline VmfParam mu_inverse(const Eigen::VectorXd& m, const Dimension& dim,
                           const VmfOptions& opts = {}) {
    constexpr double kEpsBoundary = 1e-9;
    constexpr double kResidualTol = 1e-12;
    const double r = m.norm();
    if (r == 0) return VmfParam(Eigen::VectorXd::Zero(dim.d));
    if (!(r < 1.0 - kEpsBoundary))
        throw std::domain_error("mu_inverse: mean resultant length " +
                                std::to_string(r) +
                                " too close to 1 (concentration overflow)");

    auto eut_at = [&](double t) { return detail::scalar_moments(dim, t, opts).eut; };

    // bracket [lo, hi] with eut(lo) <= r <= eut(hi)
    double lo = 0.0;
    double hi = std::max(1.0, dim.d * r / (1.0 - r * r));
    for (int i = 0; i < 200 && eut_at(hi) < r; ++i) {
        lo = hi;
        hi *= 2.0;
    }
    if (eut_at(hi) < r)
        throw std::runtime_error("mu_inverse: failed to bracket the root");

    double t = std::min(std::max(dim.d * r / (1.0 - r * r), lo), hi);
    double res = eut_at(t) - r;
    for (int it = 0; it < 200 && std::abs(res) > kResidualTol; ++it) {
        if (res > 0) hi = t; else lo = t;
        const double slope = detail::scalar_moments(dim, t, opts).vut;
        double next = t - res / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        t = next;
        res = eut_at(t) - r;
    }
    return VmfParam(t / r * m);
}

namespace detail {

// Marsaglia-Tsang gamma sampler, shape >= 1.
inline double sample_gamma(double shape, CounterRng& rng) {
    const double d0 = shape - 1.0 / 3.0;
    const double c0 = 1.0 / std::sqrt(9.0 * d0);
    for (;;) {
        const double x = rng.normal();
        const double f = 1.0 + c0 * x;
        if (f <= 0) continue;
        const double v = f * f * f;
        const double u = rng.uniform_pos();
        if (std::log(u) < 0.5 * x * x + d0 * (1.0 - v + std::log(v))) return d0 * v;
    }
}

inline double sample_beta_sym(double shape, CounterRng& rng) {
    const double g1 = sample_gamma(shape, rng);
    const double g2 = sample_gamma(shape, rng);
    return g1 / (g1 + g2);
}

inline Eigen::VectorXd sample_uniform_sphere(int d, CounterRng& rng) {
    Eigen::VectorXd g(d);
    for (;;) {
        for (int i = 0; i < d; ++i) g[i] = rng.normal();
        const double n = g.norm();
        if (n > 1e-12) return g / n;
    }
}

// von Mises angle with concentration t about angle 0 (Best & Fisher rejection
// with a wrapped Cauchy envelope).
inline double sample_von_mises_angle(double t, CounterRng& rng) {
    if (t < 1e-12) return (2.0 * rng.uniform() - 1.0) * M_PI;
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * t * t);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * t);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
        const double z = std::cos(M_PI * rng.uniform());
        const double f = (1.0 + r * z) / (r + z);
        const double c = t * (r - f);
        const double u2 = rng.uniform_pos();
        if (c * (2.0 - c) - u2 > 0 || std::log(c / u2) + 1.0 - c >= 0) {
            const double theta = std::acos(std::clamp(f, -1.0, 1.0));
            return rng.uniform() < 0.5 ? -theta : theta;
        }
    }
}

// Cosine U_t against the mean direction, density proportional to
// exp(t u) h_d(u) on (-1,1); Wood's envelope rejection, d >= 3.
inline double sample_cosine(const Dimension& dim, double t, CounterRng& rng) {
    const double dm1 = dim.d - 1.0;
    const double b = dm1 / (2.0 * t + std::sqrt(4.0 * t * t + dm1 * dm1));
    const double x0 = (1.0 - b) / (1.0 + b);
    const double c = t * x0 + dm1 * std::log(1.0 - x0 * x0);
    for (;;) {
        const double zb = sample_beta_sym(dim.a, rng);
        const double w = (1.0 - (1.0 + b) * zb) / (1.0 - (1.0 - b) * zb);
        const double u = rng.uniform_pos();
        if (t * w + dm1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
    }
}

inline Eigen::VectorXd sample_vmf_one(const VmfParam& p, CounterRng& rng) {
    const int d = p.dim();
    const double t = p.concentration();
    if (t == 0) return sample_uniform_sphere(d, rng);
    const Eigen::VectorXd v = p.z / t;
    if (d == 2) {
        const double theta = std::atan2(v[1], v[0]) + sample_von_mises_angle(t, rng);
        Eigen::VectorXd y(2);
        y << std::cos(theta), std::sin(theta);
        return y;
    }
    const double u = sample_cosine(Dimension(d), t, rng);
    // tangential part: uniform on the unit sphere of v-perp
    Eigen::VectorXd s(d);
    for (;;) {
        for (int i = 0; i < d; ++i) s[i] = rng.normal();
        s -= v.dot(s) * v;
        const double n = s.norm();
        if (n > 1e-12) { s /= n; break; }
    }
    Eigen::VectorXd y = u * v + std::sqrt(std::max(0.0, 1.0 - u * u)) * s;
    return y / y.norm();
}

} // namespace detail

/// i.i.d. draws from vMF(z); draw i depends only on (seed, i).
inline std::vector<Eigen::VectorXd> sample_vmf(const VmfParam& p, long count,
                                               std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("sample_vmf: count must be >= 0");
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        CounterRng rng(seed, 0, static_cast<std::uint64_t>(i));
        out.push_back(detail::sample_vmf_one(p, rng));
    }
    return out;
}

} // namespace dirsmooth
