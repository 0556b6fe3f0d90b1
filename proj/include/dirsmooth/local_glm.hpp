#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dirsmooth/vmf.hpp"

namespace dirsmooth {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Regression sample: covariate vectors X_i in R^q (columns of X) and unit
/// response vectors Y_i in S^{d-1} (columns of Y).
struct Dataset {
    Eigen::MatrixXd X;  // q x n
    Eigen::MatrixXd Y;  // d x n

    Dataset(Eigen::MatrixXd covariates, Eigen::MatrixXd responses)
        : X(std::move(covariates)), Y(std::move(responses)) {
        if (X.cols() != Y.cols())
            throw std::invalid_argument("Dataset: covariate/response counts differ");
        for (Eigen::Index i = 0; i < Y.cols(); ++i) {
            if (std::abs(Y.col(i).norm() - 1.0) > 1e-9)
                throw std::invalid_argument("Dataset: response " + std::to_string(i) +
                                            " is not unit-norm");
        }
    }

    Eigen::Index n() const { return X.cols(); }
    Eigen::Index q() const { return X.rows(); }
    Eigen::Index d() const { return Y.rows(); }
};

/// Centered polynomial basis at x_o: order 0 is the constant 1, order 1
/// appends x - x_o, order 2 appends the products (x_j - x_oj)(x_k - x_ok),
/// j <= k. All non-constant functions vanish at the center.
struct LocalBasis {
    int order;
    Eigen::VectorXd center;
    int r;

    LocalBasis(int ord, Eigen::VectorXd x_o) : order(ord), center(std::move(x_o)) {
        const int q = static_cast<int>(center.size());
        switch (order) {
            case 0: r = 1; break;
            case 1: r = q + 1; break;
            case 2: r = (q + 1) * (q + 2) / 2; break;
            default: throw std::invalid_argument("LocalBasis: order must be 0, 1 or 2");
        }
    }
};

inline Eigen::VectorXd basis_eval(const LocalBasis& basis, const Eigen::VectorXd& x) {
    const int q = static_cast<int>(basis.center.size());
    if (x.size() != q) throw std::invalid_argument("basis_eval: dimension mismatch");
    Eigen::VectorXd f(basis.r);
    f[0] = 1.0;
    if (basis.order == 0) return f;
    const Eigen::VectorXd u = x - basis.center;
    f.segment(1, q) = u;
    if (basis.order == 1) return f;
    int idx = q + 1;
    for (int j = 0; j < q; ++j)
        for (int k = j; k < q; ++k) f[idx++] = u[j] * u[k];
    return f;
}

/// Smooth nearest-neighbor weights w_i = exp(-s ||X_i - x_o||^2) with the
/// scale s calibrated so that the weights sum to N.
struct WeightProfile {
    double s = 0;
    Eigen::VectorXd weights;
    double effective_n = 0;

    static WeightProfile uniform(Eigen::Index n) {
        WeightProfile wp;
        wp.s = 0;
        wp.weights = Eigen::VectorXd::Ones(n);
        wp.effective_n = static_cast<double>(n);
        return wp;
    }
};

struct FitOptions {
    double tol_grad_scale = 1e-8;   // gradient tolerance = scale * (1 + effective_n)
    int max_iterations = 50;
    double ridge_start_rel = 1e-8;  // ridge = rel * trace(H)/(d r)
    double ridge_max_rel = 1e2;
    double concentration_cap = 1e4; // reject iterates with ||Theta F_i|| beyond this
    double init_clip = 50.0;        // clip on the initial concentration
    double tol_weight_rel = 1e-9;   // weight-sum tolerance = rel * n
    VmfOptions vmf;
};

/// Solve sum_i exp(-s ||X_i - x_o||^2) = N for s >= 0. The sum is strictly
/// decreasing in s (from n at s=0 towards the number of points at x_o), so a
/// bracketed bisection with Newton acceleration applies.
inline WeightProfile solve_weight_scale(const Dataset& data, const Eigen::VectorXd& x_o,
                                        double N, const FitOptions& opts = {}) {
    const Eigen::Index n = data.n();
    if (!(N > 0 && N < static_cast<double>(n)))
        throw std::invalid_argument("solve_weight_scale: need 0 < N < n");
    const Eigen::VectorXd dist2 =
        (data.X.colwise() - x_o).colwise().squaredNorm().transpose();
    const Eigen::Index at_center = (dist2.array() == 0.0).count();
    if (N <= static_cast<double>(at_center))
        throw std::domain_error("solve_weight_scale: N <= number of points at x_o, "
                                "no finite scale exists");

    const double tol = opts.tol_weight_rel * static_cast<double>(n);
    Eigen::VectorXd w(n);
    auto weight_sum = [&](double s) {
        w = (-s * dist2.array()).exp();
        return w.sum();
    };

    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 400 && weight_sum(hi) > N; ++i) {
        lo = hi;
        hi *= 2.0;
    }

    double s = 0.5 * (lo + hi);
    double res = weight_sum(s) - N;
    for (int it = 0; it < 200 && std::abs(res) > tol; ++it) {
        if (res > 0) lo = s; else hi = s;
        const double slope = -(dist2.array() * w.array()).sum();
        double next = s - res / slope;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        s = next;
        res = weight_sum(s) - N;
    }

    WeightProfile wp;
    wp.s = s;
    wp.weights = w;
    wp.effective_n = w.sum();
    return wp;
}

/// A fitted local model: basis, coefficient matrix Theta (d x r) and the
/// Newton diagnostics. objective_path holds the objective at the start and
/// after each accepted step; it never increases.
struct LocalModel {
    LocalBasis basis;
    Eigen::MatrixXd theta;
    bool converged = false;
    int iterations = 0;
    double final_gradient_norm = 0;
    std::vector<double> objective_path;
};

namespace detail {

inline Eigen::MatrixXd design_matrix(const LocalBasis& basis, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd F(basis.r, X.cols());
    for (Eigen::Index i = 0; i < X.cols(); ++i) F.col(i) = basis_eval(basis, X.col(i));
    return F;
}

inline double weighted_nll(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& F,
                           const Eigen::MatrixXd& Y, const Eigen::VectorXd& w,
                           const VmfOptions& vopts) {
    const Eigen::MatrixXd Z = theta * F;
    const MomentCtx ctx(static_cast<int>(Y.rows()));
    double L = 0;
    for (Eigen::Index i = 0; i < F.cols(); ++i) {
        const double t = Z.col(i).norm();
        L += w[i] * (scalar_moments(ctx, t, vopts).gamma - Y.col(i).dot(Z.col(i)));
    }
    return L;
}

/// Gradient G = sum_i w_i (mu(Theta F_i) - Y_i) F_i^T and Hessian
/// H = sum_i w_i F_i F_i^T (x) Sigma(Theta F_i) in column-stacked vec order.
inline void weighted_grad_hess(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& F,
                               const Eigen::MatrixXd& Y, const Eigen::VectorXd& w,
                               const VmfOptions& vopts, Eigen::MatrixXd& G,
                               Eigen::MatrixXd& H) {
    const Eigen::Index d = Y.rows(), r = F.rows(), n = F.cols();
    const MomentCtx ctx(static_cast<int>(d));
    G.setZero(d, r);
    H.setZero(d * r, d * r);
    const Eigen::MatrixXd Z = theta * F;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd sigma(d, d);
    Eigen::VectorXd v(d), diff(d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double t = Z.col(i).norm();
        const auto m = scalar_moments(ctx, t, vopts);
        if (t == 0) {
            diff = -Y.col(i);
            sigma = eye / static_cast<double>(d);
        } else {
            v = Z.col(i) / t;
            diff = m.eut * v - Y.col(i);
            sigma = m.perp * eye;
            sigma.noalias() += (m.vut - m.perp) * (v * v.transpose());
        }
        const double wi = w[i];
        G.noalias() += wi * diff * F.col(i).transpose();
        for (Eigen::Index j = 0; j < r; ++j) {
            const double fj = F(j, i);
            for (Eigen::Index k = j; k < r; ++k)
                H.block(j * d, k * d, d, d) += (wi * fj * F(k, i)) * sigma;
        }
    }
    H.triangularView<Eigen::StrictlyLower>() = H.transpose();
}

inline Eigen::VectorXd initial_concentration(const Eigen::MatrixXd& Y,
                                             const Eigen::VectorXd& w,
                                             const FitOptions& opts) {
    const Dimension dim(static_cast<int>(Y.rows()));
    Eigen::VectorXd ybar = (Y * w) / w.sum();
    const double r = ybar.norm();
    Eigen::VectorXd z;
    if (r >= 1.0 - 1e-9) {
        z = (opts.init_clip / r) * ybar;
    } else {
        z = mu_inverse(ybar, dim, opts.vmf).z;
        if (z.norm() > opts.init_clip) z *= opts.init_clip / z.norm();
    }
    return z;
}

/// Damped Newton minimization of the weighted negative log-likelihood over
/// Theta. Steps that fail to decrease the objective are halved; if no step
/// length succeeds, a growing ridge is added to the Hessian.
inline LocalModel newton_fit_engine(const Eigen::MatrixXd& F, const Eigen::MatrixXd& Y,
                                    const Eigen::VectorXd& w, const LocalBasis& basis,
                                    const FitOptions& opts) {
    const Eigen::Index d = Y.rows(), r = F.rows(), n = F.cols();
    if (n == 0) throw FitError("newton_fit: empty dataset");
    const double effective_n = w.sum();
    const double tol_grad = opts.tol_grad_scale * (1.0 + effective_n);

    LocalModel model{basis, Eigen::MatrixXd::Zero(d, r), false, 0, 0, {}};
    model.theta.col(0) = initial_concentration(Y, w, opts);

    double L = weighted_nll(model.theta, F, Y, w, opts.vmf);
    model.objective_path.push_back(L);
    Eigen::MatrixXd G, H;

    auto concentration_ok = [&](const Eigen::MatrixXd& theta) {
        return ((theta * F).colwise().norm().maxCoeff()) <= opts.concentration_cap;
    };

    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        weighted_grad_hess(model.theta, F, Y, w, opts.vmf, G, H);
        model.final_gradient_norm = G.norm();
        model.iterations = iter;
        if (model.final_gradient_norm <= tol_grad) {
            model.converged = true;
            return model;
        }

        const Eigen::Map<const Eigen::VectorXd> gvec(G.data(), d * r);
        const double ridge_unit = H.trace() / static_cast<double>(d * r);
        double ridge_rel = 0;
        bool accepted = false;
        bool had_usable_step = false;
        while (!accepted) {
            Eigen::MatrixXd Hreg = H;
            if (ridge_rel > 0)
                Hreg.diagonal().array() += ridge_rel * ridge_unit;
            const Eigen::LDLT<Eigen::MatrixXd> ldlt(Hreg);
            Eigen::VectorXd step = ldlt.solve(-gvec);
            if (ldlt.info() == Eigen::Success && step.allFinite()) {
                had_usable_step = true;
                const Eigen::Map<const Eigen::MatrixXd> delta(step.data(), d, r);
                for (double alpha = 1.0; alpha >= 1e-12; alpha *= 0.5) {
                    Eigen::MatrixXd cand = model.theta + alpha * delta;
                    if (!concentration_ok(cand)) continue;
                    const double Lc = weighted_nll(cand, F, Y, w, opts.vmf);
                    if (std::isfinite(Lc) && Lc <= L) {
                        model.theta = std::move(cand);
                        L = Lc;
                        model.objective_path.push_back(L);
                        accepted = true;
                        break;
                    }
                }
            }
            if (!accepted) {
                ridge_rel = (ridge_rel == 0) ? opts.ridge_start_rel : ridge_rel * 10.0;
                if (ridge_rel > opts.ridge_max_rel) {
                    if (!had_usable_step)
                        throw FitError("newton_fit: Hessian singular after maximal ridge");
                    // stalled: either pinned at the concentration cap (separated
                    // data) or at numerical stationarity; report non-convergence
                    model.iterations = iter + 1;
                    return model;
                }
            }
        }
    }

    weighted_grad_hess(model.theta, F, Y, w, opts.vmf, G, H);
    model.final_gradient_norm = G.norm();
    model.iterations = opts.max_iterations;
    model.converged = model.final_gradient_norm <= tol_grad;
    return model;
}

} // namespace detail

/// Weighted negative log-likelihood sum_i w_i (gamma(Theta F_i) - Y_i^T Theta F_i).
inline double nll(const LocalModel& model, const Dataset& data, const WeightProfile& wp) {
    const Eigen::MatrixXd F = detail::design_matrix(model.basis, data.X);
    return detail::weighted_nll(model.theta, F, data.Y, wp.weights, {});
}

inline Eigen::MatrixXd nll_gradient(const LocalModel& model, const Dataset& data,
                                    const WeightProfile& wp) {
    const Eigen::MatrixXd F = detail::design_matrix(model.basis, data.X);
    Eigen::MatrixXd G, H;
    detail::weighted_grad_hess(model.theta, F, data.Y, wp.weights, {}, G, H);
    return G;
}

inline Eigen::MatrixXd nll_hessian(const LocalModel& model, const Dataset& data,
                                   const WeightProfile& wp) {
    const Eigen::MatrixXd F = detail::design_matrix(model.basis, data.X);
    Eigen::MatrixXd G, H;
    detail::weighted_grad_hess(model.theta, F, data.Y, wp.weights, {}, G, H);
    return H;
}

inline LocalModel newton_fit(const Dataset& data, const WeightProfile& wp,
                             const LocalBasis& basis, const FitOptions& opts = {}) {
    const Eigen::MatrixXd F = detail::design_matrix(basis, data.X);
    return detail::newton_fit_engine(F, data.Y, wp.weights, basis, opts);
}

struct LocalFit {
    LocalModel model;
    WeightProfile wp;
};

inline LocalFit fit_local(const Dataset& data, const Eigen::VectorXd& x_o, int order,
                          double N, const FitOptions& opts = {}) {
    LocalBasis basis(order, x_o);
    WeightProfile wp = solve_weight_scale(data, x_o, N, opts);
    LocalModel model = newton_fit(data, wp, basis, opts);
    return {std::move(model), std::move(wp)};
}

/// Pointwise smoother: fitted natural parameter at the query point, i.e. the
/// first column of Theta-hat (the basis is centered).
inline VmfParam smooth_at(const Dataset& data, const Eigen::VectorXd& x_o, int order,
                          double N, const FitOptions& opts = {}) {
    const LocalFit fit = fit_local(data, x_o, order, N, opts);
    return VmfParam(fit.model.theta.col(0));
}

} // namespace dirsmooth
