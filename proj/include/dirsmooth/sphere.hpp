#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dirsmooth/bingham.hpp"
#include "dirsmooth/local_glm.hpp"
#include "dirsmooth/vmf.hpp"

namespace dirsmooth {

/// One axial observation on the sphere: location x in S^2 and a unit tangent
/// axis v in S^2 with v perpendicular to x. Mild tangency violations (up to
/// 1e-6) are repaired by re-projection; larger ones are rejected.
struct AxialObservation {
    Eigen::Vector3d x;
    Eigen::Vector3d v;

    AxialObservation(const Eigen::Vector3d& loc, const Eigen::Vector3d& axis)
        : x(loc), v(axis) {
        if (std::abs(x.norm() - 1.0) > 1e-6 || std::abs(v.norm() - 1.0) > 1e-6)
            throw std::domain_error("AxialObservation: x and v must be unit vectors");
        x.normalize();
        const double dot = x.dot(v);
        if (std::abs(dot) > 1e-6)
            throw std::domain_error("AxialObservation: v is not tangent at x");
        v -= dot * x;
        v.normalize();
    }
};

/// Stereographic projection with reference point e1 = (1,0,0):
/// P(x) = 2/(1+x1) (x2, x3). Undefined at the antipode -e1.
inline Eigen::Vector2d stereo_project(const Eigen::Vector3d& x) {
    if (!(x[0] > -1.0 + 1e-12))
        throw std::domain_error("stereo_project: point at the antipode");
    const double nu = 2.0 / (1.0 + x[0]);
    return {nu * x[1], nu * x[2]};
}

/// Inverse projection P^{-1}(z) = (2w - 1, w z1, w z2), w = 4/(4 + ||z||^2).
inline Eigen::Vector3d stereo_inverse(const Eigen::Vector2d& z) {
    const double omega = 4.0 / (4.0 + z.squaredNorm());
    return {2.0 * omega - 1.0, omega * z[0], omega * z[1]};
}

/// Normalized tangent map A(x) of the projection; an isometry on x-perp:
/// A(x) = [[-x2/(1+x1), 1, 0], [-x3/(1+x1), 0, 1]].
inline Eigen::Vector2d tangent_map(const Eigen::Vector3d& x, const Eigen::Vector3d& v) {
    if (!(x[0] > -1.0 + 1e-12))
        throw std::domain_error("tangent_map: point at the antipode");
    if (std::abs(x.dot(v)) > 1e-9)
        throw std::domain_error("tangent_map: v is not tangent at x");
    const double s = 1.0 / (1.0 + x[0]);
    return {v[1] - x[1] * s * v[0], v[2] - x[2] * s * v[0]};
}

/// Rotation B with det 1 and B x_o = e1, composed of a rotation about the
/// x3-axis followed by one about the x2-axis; at the antipode a fixed 180
/// degree rotation about e2 is used.
inline Eigen::Matrix3d rotation_to_pole(const Eigen::Vector3d& x_o) {
    if (1.0 + x_o[0] < 1e-12) {
        Eigen::Matrix3d b;
        b << -1, 0, 0, 0, 1, 0, 0, 0, -1;
        return b;
    }
    const double alpha = std::atan2(x_o[1], x_o[0]);
    const double rho = std::hypot(x_o[0], x_o[1]);
    const double beta = std::atan2(x_o[2], rho);
    Eigen::Matrix3d rz, ry;
    rz << std::cos(alpha), std::sin(alpha), 0,
         -std::sin(alpha), std::cos(alpha), 0,
          0, 0, 1;
    ry << std::cos(beta), 0, std::sin(beta),
          0, 1, 0,
         -std::sin(beta), 0, std::cos(beta);
    return ry * rz;
}

struct TransformedAxialData {
    Dataset data;           // covariates P(B x_i), responses y(A(B x_i) B v_i)
    long dropped_antipodal; // observations at the antipode of x_o
    std::vector<std::size_t> kept;  // original indices, order preserved
};

/// Pull the axial observations into the plane of the reference point encoded
/// by rot (rot x_o = e1): covariates are the projected locations, responses
/// the angle-doubled images of the mapped tangent axes. Observations at the
/// antipode are dropped and counted, not fatal.
inline TransformedAxialData transform_dataset(const Eigen::Matrix3d& rot,
                                              const std::vector<AxialObservation>& obs) {
    std::vector<Eigen::Vector2d> cov, resp;
    std::vector<std::size_t> kept;
    cov.reserve(obs.size());
    resp.reserve(obs.size());
    long dropped = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const Eigen::Vector3d bx = rot * obs[i].x;
        if (!(bx[0] > -1.0 + 1e-12)) {
            ++dropped;
            continue;
        }
        const Eigen::Vector3d bv = rot * obs[i].v;
        cov.push_back(stereo_project(bx));
        Eigen::Vector2d a = tangent_map(bx, bv);
        a /= a.norm();  // conformality makes this a no-op up to rounding
        resp.push_back(axis_to_direction(a));
        kept.push_back(i);
    }
    Eigen::MatrixXd X(2, static_cast<Eigen::Index>(cov.size()));
    Eigen::MatrixXd Y(2, static_cast<Eigen::Index>(resp.size()));
    for (std::size_t i = 0; i < cov.size(); ++i) {
        X.col(static_cast<Eigen::Index>(i)) = cov[i];
        Y.col(static_cast<Eigen::Index>(i)) = resp[i];
    }
    return {Dataset(std::move(X), std::move(Y)), dropped, std::move(kept)};
}

inline TransformedAxialData transform_dataset(const Eigen::Vector3d& x_o,
                                              const std::vector<AxialObservation>& obs) {
    return transform_dataset(rotation_to_pole(x_o), obs);
}

/// A fitted Bingham field value at x_o: tangent parameter vector f_hat with
/// concentration kappa_hat and preferred axis u_hat.
struct BinghamFieldFit {
    Eigen::Vector3d x_o;
    Eigen::Vector3d f_hat;
    double kappa_hat;
    int order;
    double N;
    bool converged;

    Eigen::Vector3d u_hat() const {
        if (kappa_hat == 0)
            throw std::domain_error("BinghamFieldFit: axis undefined at kappa = 0");
        return f_hat / kappa_hat;
    }
};

/// Fit the local Bingham parameter at x_o using an explicit rotation; any
/// valid rotation yields the same back-transformed estimate.
inline BinghamFieldFit fit_axial_with_rotation(const Eigen::Vector3d& x_o,
                                               const Eigen::Matrix3d& rot,
                                               const std::vector<AxialObservation>& obs,
                                               int order, double N,
                                               const FitOptions& opts = {}) {
    const TransformedAxialData td = transform_dataset(rot, obs);
    const LocalBasis probe(order, Eigen::Vector2d::Zero());
    if (td.data.n() < probe.r)
        throw FitError("fit_axial: fewer usable observations than basis functions");
    const LocalFit fit = fit_local(td.data, Eigen::Vector2d::Zero(), order, N, opts);
    const BinghamAxisParam w = z_to_w(VmfParam(fit.model.theta.col(0)));
    const Eigen::Vector3d lifted(0.0, w.w[0], w.w[1]);
    Eigen::Vector3d f = rot.transpose() * lifted;
    // Bh(f) = Bh(-f); fix the representative so the result does not depend on
    // the rotation choice: largest-magnitude component positive
    if (f.norm() > 0) {
        int arg = 0;
        f.cwiseAbs().maxCoeff(&arg);
        if (f[arg] < 0) f = -f;
    }
    BinghamFieldFit out;
    out.x_o = x_o;
    out.f_hat = f;
    out.kappa_hat = w.kappa;
    out.order = order;
    out.N = N;
    out.converged = fit.model.converged;
    return out;
}

inline BinghamFieldFit fit_axial(const Eigen::Vector3d& x_o,
                                 const std::vector<AxialObservation>& obs, int order,
                                 double N, const FitOptions& opts = {}) {
    return fit_axial_with_rotation(x_o, rotation_to_pole(x_o), obs, order, N, opts);
}

/// Psi(x_o, f) = E(V V^T) for V ~ Bh(x_o, f) with tangent parameter f:
/// (1 - g')/2 (I - x_o x_o^T) + g' u u^T, g' = gamma_tilde_2'(||f||).
inline Eigen::Matrix3d psi(const Eigen::Vector3d& x_o, const Eigen::Vector3d& f,
                           const VmfOptions& opts = {}) {
    if (std::abs(x_o.dot(f)) > 1e-8)
        throw std::domain_error("psi: f is not tangent at x_o");
    const Eigen::Matrix3d tang = Eigen::Matrix3d::Identity() - x_o * x_o.transpose();
    const double kappa = f.norm();
    if (kappa == 0) return 0.5 * tang;
    static const Dimension d2(2);
    const double gp = gamma_tilde_prime(d2, kappa, opts);
    const Eigen::Vector3d u = f / kappa;
    return 0.5 * (1.0 - gp) * tang + gp * (u * u.transpose());
}

struct DiagnosticsReport {
    double r2_model;
    double r2_residual;
    double ratio;
    long points_used;
};

/// R^2-style diagnostics over fits whose reference points are observation
/// locations: r2_model averages gamma_tilde_2'(kappa-hat)^2, r2_residual
/// averages 1 - 2 ||V V^T - Psi||_F^2 over the matched observations.
inline DiagnosticsReport diagnostics(const std::vector<BinghamFieldFit>& fits,
                                     const std::vector<AxialObservation>& obs_at_fits,
                                     const VmfOptions& opts = {}) {
    if (fits.empty()) throw std::invalid_argument("diagnostics: no fits supplied");
    if (fits.size() != obs_at_fits.size())
        throw std::invalid_argument("diagnostics: fits and observations must be paired");
    static const Dimension d2(2);
    double model_sum = 0, resid_sum = 0;
    for (std::size_t i = 0; i < fits.size(); ++i) {
        const double gp = gamma_tilde_prime(d2, fits[i].kappa_hat, opts);
        model_sum += gp * gp;
        const Eigen::Vector3d& v = obs_at_fits[i].v;
        const Eigen::Matrix3d dev =
            v * v.transpose() - psi(obs_at_fits[i].x, fits[i].f_hat, opts);
        resid_sum += 1.0 - 2.0 * dev.squaredNorm();
    }
    DiagnosticsReport rep;
    rep.points_used = static_cast<long>(fits.size());
    rep.r2_model = model_sum / static_cast<double>(fits.size());
    rep.r2_residual = resid_sum / static_cast<double>(fits.size());
    rep.ratio = rep.r2_residual / rep.r2_model;
    return rep;
}

/// Greedy farthest-point subsample of the observation locations: returns up
/// to `count` indices spread evenly (max-min chordal distance), starting from
/// the first observation.
inline std::vector<std::size_t> farthest_point_subset(
    const std::vector<AxialObservation>& obs, std::size_t count) {
    std::vector<std::size_t> picked;
    if (obs.empty() || count == 0) return picked;
    const std::size_t n = obs.size();
    std::vector<double> mind(n, std::numeric_limits<double>::infinity());
    std::size_t current = 0;
    picked.push_back(current);
    while (picked.size() < std::min(count, n)) {
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dd = (obs[i].x - obs[current].x).squaredNorm();
            if (dd < mind[i]) mind[i] = dd;
            if (mind[i] > best) {
                best = mind[i];
                arg = i;
            }
        }
        if (best <= 0) break;  // all remaining locations coincide with picks
        picked.push_back(arg);
        current = arg;
    }
    return picked;
}

} // namespace dirsmooth
