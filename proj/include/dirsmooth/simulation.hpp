#pragma once

#include <cmath>
#include <cstdint>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dirsmooth/local_glm.hpp"
#include "dirsmooth/parallel.hpp"
#include "dirsmooth/rng.hpp"
#include "dirsmooth/vmf.hpp"

namespace dirsmooth {

/// Regression field of the error study: f*(x) = exp(-2 ||x||^2) (1, 3 x1).
inline Eigen::Vector2d true_field(const Eigen::Vector2d& x) {
    const double scale = std::exp(-2.0 * x.squaredNorm());
    return {scale, scale * 3.0 * x[0]};
}

struct StudyConfig {
    long n = 4000;
    int sims = 20;
    std::vector<double> N_list = {200, 400};
    std::vector<int> orders = {0, 1, 2};
    std::uint64_t seed = 20250801;
    int threads = 0;              // 0 = hardware concurrency
    double weight_floor = 1e-12;  // observations below this weight are skipped in fits
    double max_exclusion_rate = 0.01;
    FitOptions fit;

    /// Evaluation grid {k/10 : -10 <= k <= 10}^2 of 441 points.
    static std::vector<Eigen::Vector2d> grid() {
        std::vector<Eigen::Vector2d> g;
        g.reserve(441);
        for (int i = -10; i <= 10; ++i)
            for (int j = -10; j <= 10; ++j)
                g.emplace_back(i / 10.0, j / 10.0);
        return g;
    }

    void validate() const {
        if (n <= 0) throw std::invalid_argument("StudyConfig: n must be positive");
        for (double N : N_list)
            if (!(N > 0 && N < static_cast<double>(n)))
                throw std::invalid_argument("StudyConfig: every N must satisfy 0 < N < n");
        for (int o : orders)
            if (o < 0 || o > 2)
                throw std::invalid_argument("StudyConfig: orders must be in {0,1,2}");
        if (N_list.empty() || orders.empty())
            throw std::invalid_argument("StudyConfig: empty N list or order list");
    }
};

/// One simulated dataset: X_i uniform on [-1,1]^2, Y_i | X_i ~ vMF(f*(X_i)).
/// Observation i of replicate sim_index depends only on (seed, sim_index, i).
inline Dataset gen_dataset(const StudyConfig& cfg, int sim_index) {
    constexpr std::uint64_t kStudyStreamBase = 16;
    Eigen::MatrixXd X(2, cfg.n), Y(2, cfg.n);
    for (long i = 0; i < cfg.n; ++i) {
        CounterRng rng(cfg.seed, kStudyStreamBase + static_cast<std::uint64_t>(sim_index),
                       static_cast<std::uint64_t>(i));
        const Eigen::Vector2d x(2.0 * rng.uniform() - 1.0, 2.0 * rng.uniform() - 1.0);
        X.col(i) = x;
        Eigen::VectorXd z(2);
        z = true_field(x);
        Y.col(i) = detail::sample_vmf_one(VmfParam(z), rng);
    }
    return Dataset(std::move(X), std::move(Y));
}

struct ErrorRow {
    int order;
    double N;
    double bias;
    double sd;
    double rmse;
    long fits_attempted;
    long fits_excluded;
};

struct PointBias {
    Eigen::Vector2d x_o;
    Eigen::Vector2d bias;
};

struct StudyResult {
    std::vector<ErrorRow> rows;                     // (order-major, then N) cell order
    std::vector<std::vector<PointBias>> bias_fields;  // parallel to rows
};

namespace detail {

struct CellPointAcc {
    long count = 0;
    long excluded = 0;
    Eigen::Vector2d sum_m = Eigen::Vector2d::Zero();
    double sum_sq = 0;    // sum ||m||^2
    double sum_err2 = 0;  // sum ||m - mu*||^2
};

} // namespace detail

/// Monte Carlo error study: for every (order, N) cell, fit the local model at
/// each grid point in each replicate and aggregate
///   BIAS^2  = mean_p || avg_s m_s(p) - mu*(p) ||^2,
///   SD^2    = mean_p avg_s || m_s(p) - avg m ||^2,
///   RMSE^2  = mean_p avg_s || m_s(p) - mu*(p) ||^2,
/// where m_s(p) = mu(f-hat) from replicate s. Non-converged fits are excluded
/// with accounting; the run fails if a cell loses more than the allowed rate.
inline StudyResult run_study(const StudyConfig& cfg) {
    cfg.validate();
    if (cfg.sims < 2) throw std::invalid_argument("run_study: sims must be >= 2");

    const auto grid = StudyConfig::grid();
    const std::size_t n_pts = grid.size();
    const std::size_t n_cells = cfg.orders.size() * cfg.N_list.size();
    std::vector<std::vector<detail::CellPointAcc>> acc(
        n_cells, std::vector<detail::CellPointAcc>(n_pts));

    const Dimension d2(2);
    std::vector<Eigen::Vector2d> mu_star(n_pts);
    for (std::size_t p = 0; p < n_pts; ++p) {
        Eigen::VectorXd z(2);
        z = true_field(grid[p]);
        mu_star[p] = vmf_moments(VmfParam(z), cfg.fit.vmf).mu;
    }

    for (int sim = 0; sim < cfg.sims; ++sim) {
        const Dataset data = gen_dataset(cfg, sim);
        for (std::size_t jn = 0; jn < cfg.N_list.size(); ++jn) {
            const double N = cfg.N_list[jn];
            parallel_for(n_pts, [&](std::size_t p) {
                const Eigen::Vector2d& x_o = grid[p];
                const WeightProfile wp = solve_weight_scale(data, x_o, N, cfg.fit);

                // keep only observations with non-negligible weight
                std::vector<Eigen::Index> idx;
                idx.reserve(data.n());
                for (Eigen::Index i = 0; i < data.n(); ++i)
                    if (wp.weights[i] >= cfg.weight_floor) idx.push_back(i);
                Eigen::MatrixXd Xs(2, idx.size()), Ys(2, idx.size());
                Eigen::VectorXd ws(idx.size());
                for (std::size_t i = 0; i < idx.size(); ++i) {
                    Xs.col(i) = data.X.col(idx[i]);
                    Ys.col(i) = data.Y.col(idx[i]);
                    ws[i] = wp.weights[idx[i]];
                }

                for (std::size_t jo = 0; jo < cfg.orders.size(); ++jo) {
                    detail::CellPointAcc& a = acc[jo * cfg.N_list.size() + jn][p];
                    try {
                        const LocalBasis basis(cfg.orders[jo], x_o);
                        const Eigen::MatrixXd F = detail::design_matrix(basis, Xs);
                        const LocalModel model =
                            detail::newton_fit_engine(F, Ys, ws, basis, cfg.fit);
                        if (!model.converged) {
                            ++a.excluded;
                            continue;
                        }
                        const Eigen::Vector2d m =
                            vmf_moments(VmfParam(model.theta.col(0)), cfg.fit.vmf).mu;
                        ++a.count;
                        a.sum_m += m;
                        a.sum_sq += m.squaredNorm();
                        a.sum_err2 += (m - mu_star[p]).squaredNorm();
                    } catch (const FitError&) {
                        ++a.excluded;
                    }
                }
            }, cfg.threads);
        }
    }

    StudyResult result;
    for (std::size_t jo = 0; jo < cfg.orders.size(); ++jo) {
        for (std::size_t jn = 0; jn < cfg.N_list.size(); ++jn) {
            const auto& cell = acc[jo * cfg.N_list.size() + jn];
            ErrorRow row{};
            row.order = cfg.orders[jo];
            row.N = cfg.N_list[jn];
            row.fits_attempted = static_cast<long>(cfg.sims) * static_cast<long>(n_pts);
            double bias2 = 0, sd2 = 0, rmse2 = 0;
            std::vector<PointBias> field(n_pts);
            for (std::size_t p = 0; p < n_pts; ++p) {
                const auto& a = cell[p];
                row.fits_excluded += a.excluded;
                if (a.count == 0)
                    throw std::runtime_error("run_study: no converged fit at a grid point");
                const double c = static_cast<double>(a.count);
                const Eigen::Vector2d mbar = a.sum_m / c;
                bias2 += (mbar - mu_star[p]).squaredNorm();
                sd2 += a.sum_sq / c - mbar.squaredNorm();
                rmse2 += a.sum_err2 / c;
                field[p] = {grid[p], mbar - mu_star[p]};
            }
            const double np = static_cast<double>(n_pts);
            row.bias = std::sqrt(bias2 / np);
            row.sd = std::sqrt(sd2 / np);
            row.rmse = std::sqrt(rmse2 / np);
            if (static_cast<double>(row.fits_excluded) >
                cfg.max_exclusion_rate * static_cast<double>(row.fits_attempted))
                throw std::runtime_error(
                    "run_study: excluded fit rate exceeds " +
                    std::to_string(cfg.max_exclusion_rate) + " for order " +
                    std::to_string(row.order) + ", N " + std::to_string(row.N));
            result.rows.push_back(row);
            result.bias_fields.push_back(std::move(field));
        }
    }
    return result;
}

/// Per-grid-point estimated bias for a single (order, N) cell.
inline std::vector<PointBias> bias_field(const StudyConfig& cfg, int order, double N) {
    StudyConfig single = cfg;
    single.orders = {order};
    single.N_list = {N};
    return run_study(single).bias_fields.at(0);
}

} // namespace dirsmooth
