#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "dirsmooth/vmf.hpp"

namespace dirsmooth {

namespace detail {

inline void check_unit_2(const Eigen::Vector2d& v, const char* who) {
    if (std::abs(v.norm() - 1.0) > 1e-8)
        throw std::domain_error(std::string(who) + ": input must be a unit vector");
}

/// Reduce an angle to [0, pi).
inline double wrap_half_turn(double beta) {
    beta = std::fmod(beta, M_PI);
    if (beta < 0) beta += M_PI;
    if (beta >= M_PI) beta = 0;  // fmod rounding at the seam
    return beta;
}

} // namespace detail

/// Axis-to-direction map on the circle: y(v) = (v1^2 - v2^2, 2 v1 v2),
/// i.e. complex squaring; y(v) = y(-v).
inline Eigen::Vector2d axis_to_direction(const Eigen::Vector2d& v) {
    detail::check_unit_2(v, "axis_to_direction");
    return {v[0] * v[0] - v[1] * v[1], 2.0 * v[0] * v[1]};
}

/// Half-angle representative of a direction: the unique v with angle in
/// [0, pi) and axis_to_direction(v) = y.
inline Eigen::Vector2d direction_to_axis(const Eigen::Vector2d& y) {
    detail::check_unit_2(y, "direction_to_axis");
    const double theta = detail::wrap_half_turn(0.5 * std::atan2(y[1], y[0]));
    return {std::cos(theta), std::sin(theta)};
}

/// Bingham distribution on the circle, parametrized by w = kappa (cos b, sin b)
/// with preferred axis angle b in [0, pi). Constructors canonicalize w into
/// the upper half-plane (w2 > 0, or w2 = 0 and w1 >= 0), which identifies
/// w with -w (both describe the same axial law).
struct BinghamAxisParam {
    Eigen::Vector2d w;
    double kappa;
    double beta;

    explicit BinghamAxisParam(const Eigen::Vector2d& ww) {
        kappa = ww.norm();
        if (kappa == 0) {
            w.setZero();
            beta = 0;
            return;
        }
        beta = detail::wrap_half_turn(std::atan2(ww[1], ww[0]));
        w = kappa * axis();
    }

    Eigen::Vector2d axis() const { return {std::cos(beta), std::sin(beta)}; }
};

/// Traceless symmetric 2x2 matrix W = [[z1, z2], [z2, -z1]] and its
/// coordinate vector z; satisfies v^T W v = z^T y(v) for unit v.
struct TracelessSymmetric2 {
    double z1, z2;

    Eigen::Matrix2d matrix() const {
        Eigen::Matrix2d w;
        w << z1, z2, z2, -z1;
        return w;
    }

    double quadratic_form(const Eigen::Vector2d& v) const {
        return z1 * (v[0] * v[0] - v[1] * v[1]) + 2.0 * z2 * v[0] * v[1];
    }
};

/// Angle-doubling map to the vMF parameter: z = kappa (cos 2b, sin 2b), so
/// that V ~ Bh(w) iff y(V) ~ vMF(z).
inline VmfParam w_to_z(const BinghamAxisParam& w) {
    Eigen::VectorXd z(2);
    z << w.kappa * std::cos(2.0 * w.beta), w.kappa * std::sin(2.0 * w.beta);
    return VmfParam(z);
}

/// Angle-halving inverse of w_to_z (canonicalized).
inline BinghamAxisParam z_to_w(const VmfParam& z) {
    if (z.dim() != 2) throw std::invalid_argument("z_to_w: z must be 2-dimensional");
    const double kappa = z.concentration();
    if (kappa == 0) return BinghamAxisParam(Eigen::Vector2d::Zero());
    const double beta = detail::wrap_half_turn(0.5 * std::atan2(z.z[1], z.z[0]));
    return BinghamAxisParam(Eigen::Vector2d(kappa * std::cos(beta), kappa * std::sin(beta)));
}

inline TracelessSymmetric2 w_to_matrix(const BinghamAxisParam& w) {
    const VmfParam z = w_to_z(w);
    return {z.z[0], z.z[1]};
}

/// Angular density exp(kappa cos(2(theta - beta)) - gamma_tilde_2(kappa))
/// with respect to the uniform distribution on [0, 2 pi).
inline double bh_angular_density(const BinghamAxisParam& w, double theta,
                                 const VmfOptions& opts = {}) {
    static const Dimension d2(2);
    return std::exp(w.kappa * std::cos(2.0 * (theta - w.beta)) -
                    gamma_tilde(d2, w.kappa, opts));
}

/// E(V V^T) for V ~ Bh(w):
///   (1 - gamma_tilde_2'(kappa))/2 I_2 + gamma_tilde_2'(kappa) u u^T.
inline Eigen::Matrix2d bh_second_moment(const BinghamAxisParam& w,
                                        const VmfOptions& opts = {}) {
    static const Dimension d2(2);
    const double gp = gamma_tilde_prime(d2, w.kappa, opts);
    const Eigen::Vector2d u = w.axis();
    return 0.5 * (1.0 - gp) * Eigen::Matrix2d::Identity() + gp * (u * u.transpose());
}

/// Draws from Bh(w): push a vMF(w_to_z(w)) draw through angle halving and
/// attach an independent uniform sign. Draw i depends only on (seed, i).
inline std::vector<Eigen::Vector2d> sample_bingham(const BinghamAxisParam& w,
                                                   long count, std::uint64_t seed) {
    if (count < 0) throw std::invalid_argument("sample_bingham: count must be >= 0");
    const VmfParam z = w_to_z(w);
    std::vector<Eigen::Vector2d> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        CounterRng rng(seed, 1, static_cast<std::uint64_t>(i));
        const Eigen::VectorXd y = detail::sample_vmf_one(z, rng);
        Eigen::Vector2d v = direction_to_axis(Eigen::Vector2d(y[0], y[1]));
        if (rng.uniform() < 0.5) v = -v;
        out.push_back(v);
    }
    return out;
}

/// Endpoints +/- gamma_tilde_2'(kappa) u of the segment visualizing Bh(w).
inline std::pair<Eigen::Vector2d, Eigen::Vector2d>
bh_axis_segment(const BinghamAxisParam& w, const VmfOptions& opts = {}) {
    static const Dimension d2(2);
    const Eigen::Vector2d e = gamma_tilde_prime(d2, w.kappa, opts) * w.axis();
    return {e, -e};
}

/// Sampled boundary of the "axial histogram": points
/// sqrt(f(theta)) (cos theta, sin theta) on a uniform theta grid of the
/// given resolution over [0, 2 pi).
inline std::vector<Eigen::Vector2d> bh_axial_histogram_curve(
    const BinghamAxisParam& w, int resolution, const VmfOptions& opts = {}) {
    if (resolution < 1) throw std::invalid_argument("bh_axial_histogram_curve: resolution must be >= 1");
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(static_cast<std::size_t>(resolution));
    for (int i = 0; i < resolution; ++i) {
        const double theta = 2.0 * M_PI * i / resolution;
        const double rad = std::sqrt(bh_angular_density(w, theta, opts));
        pts.emplace_back(rad * std::cos(theta), rad * std::sin(theta));
    }
    return pts;
}

} // namespace dirsmooth
