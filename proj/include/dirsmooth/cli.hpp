#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dirsmooth/bingham.hpp"
#include "dirsmooth/io.hpp"
#include "dirsmooth/local_glm.hpp"
#include "dirsmooth/parallel.hpp"
#include "dirsmooth/simulation.hpp"
#include "dirsmooth/sphere.hpp"
#include "dirsmooth/vmf.hpp"

namespace dirsmooth::cli {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kDataError = 3,
    kFitError = 4,
};

struct RunConfig {
    std::string input;
    std::string output;
    std::string segments_out;       // default: <output>.segments.csv
    std::uint64_t seed = 20250801;
    long n = 4000;                  // simulate: sample size
    int sims = 20;                  // table1: replicates (desk scale)
    int order = 1;
    double nn = 200;                // smooth nearest-neighbor mass N
    std::string grid;               // e.g. "21x21:-1,1,-1,1"
    std::string queries;            // CSV of query points (header x1,x2)
    long fit_points = 200;
    std::string fit_points_file;    // CSV of sphere fit points (header x1,x2,x3)
    bool full_scale = false;
    double eps = 1e-14;
    double t_switch = 0;            // 0 = default min(100 d, 300)
    double display_scale = -1;      // < 0: per-command default (0.18 / 0.1)
    int resolution = 720;
    std::string w = "1,1";          // bingham-plot parameter "w1,w2"
    int threads = 0;

    FitOptions fit_options() const {
        FitOptions o;
        if (!(eps > 0)) throw ConfigError("eps must be positive");
        if (t_switch < 0) throw ConfigError("t-switch must be nonnegative");
        o.vmf.eps = eps;
        o.vmf.t_switch_override = t_switch;
        return o;
    }
};

/// Merge settings from a JSON config file; unknown keys are rejected.
inline void apply_json_config(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config " + path + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "input") cfg.input = value.get<std::string>();
            else if (key == "output") cfg.output = value.get<std::string>();
            else if (key == "segments_out") cfg.segments_out = value.get<std::string>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else if (key == "n") cfg.n = value.get<long>();
            else if (key == "sims") cfg.sims = value.get<int>();
            else if (key == "order") cfg.order = value.get<int>();
            else if (key == "nn") cfg.nn = value.get<double>();
            else if (key == "grid") cfg.grid = value.get<std::string>();
            else if (key == "queries") cfg.queries = value.get<std::string>();
            else if (key == "fit_points") cfg.fit_points = value.get<long>();
            else if (key == "fit_points_file") cfg.fit_points_file = value.get<std::string>();
            else if (key == "full_scale") cfg.full_scale = value.get<bool>();
            else if (key == "eps") cfg.eps = value.get<double>();
            else if (key == "t_switch") cfg.t_switch = value.get<double>();
            else if (key == "display_scale") cfg.display_scale = value.get<double>();
            else if (key == "resolution") cfg.resolution = value.get<int>();
            else if (key == "w") cfg.w = value.get<std::string>();
            else if (key == "threads") cfg.threads = value.get<int>();
            else throw ConfigError("config " + path + ": unknown key '" + key + "'");
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config " + path + ": key '" + key + "': " + e.what());
        }
    }
}

namespace detail {

inline void require_output(const RunConfig& cfg) {
    if (cfg.output.empty()) throw ConfigError("an --output path is required");
}

inline std::string output_stem(const std::string& path) {
    const auto pos = path.rfind(".csv");
    if (pos != std::string::npos && pos == path.size() - 4) return path.substr(0, pos);
    return path;
}

inline std::string segments_path(const RunConfig& cfg) {
    return cfg.segments_out.empty() ? cfg.output + ".segments.csv" : cfg.segments_out;
}

/// Grid spec "NxM" or "NxM:xmin,xmax,ymin,ymax" (default square [-1,1]^2),
/// traversed x1-major.
inline std::vector<Eigen::Vector2d> parse_grid_spec(const std::string& spec) {
    int nx = 0, ny = 0;
    double x0 = -1, x1 = 1, y0 = -1, y1 = 1;
    const auto colon = spec.find(':');
    const std::string dims = spec.substr(0, colon);
    if (std::sscanf(dims.c_str(), "%dx%d", &nx, &ny) != 2 || nx < 1 || ny < 1)
        throw ConfigError("bad grid spec '" + spec + "' (want NxM[:xmin,xmax,ymin,ymax])");
    if (colon != std::string::npos) {
        if (std::sscanf(spec.c_str() + colon + 1, "%lf,%lf,%lf,%lf", &x0, &x1, &y0, &y1) != 4)
            throw ConfigError("bad grid range in '" + spec + "'");
    }
    std::vector<Eigen::Vector2d> pts;
    pts.reserve(static_cast<std::size_t>(nx) * ny);
    for (int i = 0; i < nx; ++i) {
        const double gx = nx == 1 ? x0 : x0 + (x1 - x0) * i / (nx - 1);
        for (int j = 0; j < ny; ++j) {
            const double gy = ny == 1 ? y0 : y0 + (y1 - y0) * j / (ny - 1);
            pts.emplace_back(gx, gy);
        }
    }
    return pts;
}

inline Eigen::Vector2d parse_pair(const std::string& s, const char* what) {
    double a = 0, b = 0;
    if (std::sscanf(s.c_str(), "%lf,%lf", &a, &b) != 2)
        throw ConfigError(std::string("bad ") + what + " '" + s + "' (want 'a,b')");
    return {a, b};
}

} // namespace detail

/// simulate: draw the study dataset and write it with a manifest.
inline void cmd_simulate(const RunConfig& cfg) {
    detail::require_output(cfg);
    if (cfg.n <= 0) throw ConfigError("n must be positive");
    StudyConfig sc;
    sc.n = cfg.n;
    sc.seed = cfg.seed;
    const Dataset data = gen_dataset(sc, 0);
    write_file_atomic(cfg.output, planar_dataset_csv(data));
    nlohmann::json manifest{{"command", "simulate"},
                            {"generator", kGeneratorName},
                            {"n", cfg.n},
                            {"seed", cfg.seed}};
    write_file_atomic(cfg.output + ".manifest.json", manifest.dump(2) + "\n");
}

/// smooth: local GLM fit of a planar dataset at query points.
inline void cmd_smooth(const RunConfig& cfg) {
    detail::require_output(cfg);
    if (cfg.input.empty()) throw ConfigError("an --input dataset is required");
    if (!(cfg.nn > 0)) throw ConfigError("nn must be positive");
    const FitOptions opts = cfg.fit_options();
    const Dataset data = read_planar_dataset(cfg.input);

    std::vector<Eigen::Vector2d> queries;
    if (!cfg.queries.empty()) {
        const CsvTable t = read_csv(cfg.queries, "x1,x2");
        for (const auto& r : t.rows) queries.emplace_back(r[0], r[1]);
    } else {
        queries = detail::parse_grid_spec(cfg.grid.empty() ? "21x21" : cfg.grid);
    }
    struct Row {
        Eigen::Vector2d q;
        Eigen::Vector2d z{std::nan(""), std::nan("")};
        Eigen::Vector2d mu{std::nan(""), std::nan("")};
        bool converged = false;
    };
    std::vector<Row> rows(queries.size());
    parallel_for(queries.size(), [&](std::size_t i) {
        rows[i].q = queries[i];
        try {
            const LocalFit fit = fit_local(data, queries[i], cfg.order, cfg.nn, opts);
            rows[i].z = fit.model.theta.col(0);
            rows[i].mu = vmf_moments(VmfParam(fit.model.theta.col(0)), opts.vmf).mu;
            rows[i].converged = fit.model.converged;
        } catch (const FitError&) {
            // recorded as a non-converged row
        }
    }, cfg.threads);

    std::string csv = "x1,x2,z1,z2,mu1,mu2,converged\n";
    const double scale = cfg.display_scale < 0 ? 0.18 : cfg.display_scale;
    std::string seg = "x1,x2,e1,e2\n";
    for (const auto& r : rows) {
        csv += format_double(r.q[0]) + "," + format_double(r.q[1]) + "," +
               format_double(r.z[0]) + "," + format_double(r.z[1]) + "," +
               format_double(r.mu[0]) + "," + format_double(r.mu[1]) + "," +
               (r.converged ? "1" : "0") + "\n";
        if (r.converged)
            seg += format_double(r.q[0]) + "," + format_double(r.q[1]) + "," +
                   format_double(r.q[0] + scale * r.mu[0]) + "," +
                   format_double(r.q[1] + scale * r.mu[1]) + "\n";
    }
    write_file_atomic(cfg.output, csv);
    write_file_atomic(detail::segments_path(cfg), seg);
}

namespace detail {

inline std::vector<Eigen::Vector3d> sphere_fit_points(const RunConfig& cfg,
                                                      const std::vector<AxialObservation>& obs) {
    std::vector<Eigen::Vector3d> pts;
    if (!cfg.fit_points_file.empty()) {
        const CsvTable t = read_csv(cfg.fit_points_file, "x1,x2,x3");
        for (std::size_t i = 0; i < t.rows.size(); ++i) {
            Eigen::Vector3d p(t.rows[i][0], t.rows[i][1], t.rows[i][2]);
            if (std::abs(p.norm() - 1.0) > 1e-6)
                throw DataError(cfg.fit_points_file + ": line " + std::to_string(i + 2) +
                                ": fit point is not unit-norm");
            pts.push_back(p / p.norm());
        }
    } else {
        if (cfg.fit_points <= 0) throw ConfigError("fit-points must be positive");
        for (std::size_t idx : farthest_point_subset(obs, static_cast<std::size_t>(cfg.fit_points)))
            pts.push_back(obs[idx].x);
    }
    return pts;
}

} // namespace detail

/// sphere-smooth: Bingham field fits on axial sphere data, plus display
/// segments x_o +/- scale * gamma_tilde_2'(kappa-hat) u-hat.
inline void cmd_sphere_smooth(const RunConfig& cfg) {
    detail::require_output(cfg);
    if (cfg.input.empty()) throw ConfigError("an --input observation file is required");
    if (!(cfg.nn > 0)) throw ConfigError("nn must be positive");
    const FitOptions opts = cfg.fit_options();
    const auto obs = read_axial_observations(cfg.input);
    const auto pts = detail::sphere_fit_points(cfg, obs);

    long antipodal = 0;
    for (const auto& p : pts)
        for (const auto& o : obs)
            if (1.0 + p.dot(o.x) < 1e-12) ++antipodal;
    if (antipodal > 0)
        std::cerr << "sphere-smooth: dropped " << antipodal
                  << " antipodal observation/fit-point pairs\n";

    struct Row {
        Eigen::Vector3d x;
        Eigen::Vector3d f{std::nan(""), std::nan(""), std::nan("")};
        double kappa = std::nan("");
        double gp = std::nan("");
        bool ok = false;
    };
    static const Dimension d2(2);
    std::vector<Row> rows(pts.size());
    long failures = 0;
    std::mutex fail_mutex;
    parallel_for(pts.size(), [&](std::size_t i) {
        rows[i].x = pts[i];
        try {
            const BinghamFieldFit fit = fit_axial(pts[i], obs, cfg.order, cfg.nn, opts);
            rows[i].f = fit.f_hat;
            rows[i].kappa = fit.kappa_hat;
            rows[i].gp = gamma_tilde_prime(d2, fit.kappa_hat, opts.vmf);
            rows[i].ok = true;
        } catch (const FitError&) {
            std::lock_guard<std::mutex> lock(fail_mutex);
            ++failures;
        }
    }, cfg.threads);
    if (failures > 0)
        std::cerr << "sphere-smooth: " << failures << " fit point(s) failed\n";

    std::string csv = std::string(kSphereFitHeader) + "\n";
    const double scale = cfg.display_scale < 0 ? 0.1 : cfg.display_scale;
    std::string seg = "a1,a2,a3,b1,b2,b3\n";
    for (const auto& r : rows) {
        csv += format_double(r.x[0]) + "," + format_double(r.x[1]) + "," +
               format_double(r.x[2]) + "," + format_double(r.f[0]) + "," +
               format_double(r.f[1]) + "," + format_double(r.f[2]) + "," +
               format_double(r.kappa) + "," + format_double(r.gp) + "\n";
        if (!r.ok) continue;
        Eigen::Vector3d tip = Eigen::Vector3d::Zero();
        if (r.kappa > 0) tip = scale * r.gp * (r.f / r.kappa);
        const Eigen::Vector3d a = r.x + tip, b = r.x - tip;
        seg += format_double(a[0]) + "," + format_double(a[1]) + "," +
               format_double(a[2]) + "," + format_double(b[0]) + "," +
               format_double(b[1]) + "," + format_double(b[2]) + "\n";
    }
    write_file_atomic(cfg.output, csv);
    write_file_atomic(detail::segments_path(cfg), seg);
}

/// diagnose: fit at an evenly spread subset of observation locations and
/// report the R^2-style diagnostics as JSON.
inline void cmd_diagnose(const RunConfig& cfg) {
    if (cfg.input.empty()) throw ConfigError("an --input observation file is required");
    if (!(cfg.nn > 0)) throw ConfigError("nn must be positive");
    if (cfg.fit_points <= 0) throw ConfigError("fit-points must be positive");
    const FitOptions opts = cfg.fit_options();
    const auto obs = read_axial_observations(cfg.input);
    const auto idx = farthest_point_subset(obs, static_cast<std::size_t>(cfg.fit_points));

    std::vector<BinghamFieldFit> fits(idx.size());
    std::vector<char> ok(idx.size(), 0);
    parallel_for(idx.size(), [&](std::size_t i) {
        try {
            fits[i] = fit_axial(obs[idx[i]].x, obs, cfg.order, cfg.nn, opts);
            ok[i] = 1;
        } catch (const FitError&) {
        }
    }, cfg.threads);

    std::vector<BinghamFieldFit> good;
    std::vector<AxialObservation> matched;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (!ok[i]) continue;
        good.push_back(fits[i]);
        matched.push_back(obs[idx[i]]);
    }
    if (good.empty()) throw FitError("diagnose: all fits failed");
    const DiagnosticsReport rep = diagnostics(good, matched, opts.vmf);

    nlohmann::json j{{"r2_model", rep.r2_model},
                     {"r2_residual", rep.r2_residual},
                     {"ratio", rep.ratio},
                     {"points_used", rep.points_used},
                     {"order", cfg.order},
                     {"nn", cfg.nn}};
    const std::string text = j.dump(2) + "\n";
    std::cout << text;
    if (!cfg.output.empty()) write_file_atomic(cfg.output, text);
}

namespace detail {

inline const char* order_name(int order) {
    switch (order) {
        case 0: return "constant";
        case 1: return "linear";
        default: return "quadratic";
    }
}

} // namespace detail

/// table1: run the Monte Carlo error study and write the error table (CSV,
/// aligned text) together with per-cell bias fields.
inline void cmd_table1(const RunConfig& cfg) {
    detail::require_output(cfg);
    StudyConfig sc;
    sc.n = cfg.n;
    sc.seed = cfg.seed;
    sc.threads = cfg.threads;
    sc.fit = cfg.fit_options();
    sc.sims = cfg.sims;
    if (cfg.full_scale) {
        sc.sims = 100;
        sc.N_list = {100, 200, 300, 400, 500, 600, 700, 800};
    }
    const StudyResult res = run_study(sc);

    std::string csv = "order,N,bias,sd,rmse\n";
    for (const auto& row : res.rows)
        csv += std::to_string(row.order) + "," + format_double(row.N) + "," +
               format_double(row.bias) + "," + format_double(row.sd) + "," +
               format_double(row.rmse) + "\n";
    write_file_atomic(cfg.output, csv);

    char buf[128];
    std::string txt = "order      N       BIAS     SD       RMSE\n";
    for (const auto& row : res.rows) {
        std::snprintf(buf, sizeof(buf), "%-9s %6.0f   %.4f   %.4f   %.4f\n",
                      detail::order_name(row.order), row.N, row.bias, row.sd, row.rmse);
        txt += buf;
    }
    write_file_atomic(detail::output_stem(cfg.output) + ".txt", txt);
    std::cout << txt;

    for (std::size_t i = 0; i < res.rows.size(); ++i) {
        std::string bias_csv = "x1,x2,b1,b2\n";
        for (const auto& pb : res.bias_fields[i])
            bias_csv += format_double(pb.x_o[0]) + "," + format_double(pb.x_o[1]) + "," +
                        format_double(pb.bias[0]) + "," + format_double(pb.bias[1]) + "\n";
        std::snprintf(buf, sizeof(buf), "_bias_order%d_N%.0f.csv", res.rows[i].order,
                      res.rows[i].N);
        write_file_atomic(detail::output_stem(cfg.output) + buf, bias_csv);
    }
}

/// bingham-plot: angular density, axial-histogram curve and preferred-axis
/// segment for Bh(w), as plot-ready point sets.
inline void cmd_bingham_plot(const RunConfig& cfg) {
    detail::require_output(cfg);
    if (cfg.resolution < 1) throw ConfigError("resolution must be >= 1");
    const BinghamAxisParam w(detail::parse_pair(cfg.w, "Bingham parameter w"));
    const FitOptions opts = cfg.fit_options();
    const std::string stem = detail::output_stem(cfg.output);

    std::string density = "theta,f\n";
    for (int i = 0; i < cfg.resolution; ++i) {
        const double theta = 2.0 * M_PI * i / cfg.resolution;
        density += format_double(theta) + "," +
                   format_double(bh_angular_density(w, theta, opts.vmf)) + "\n";
    }
    write_file_atomic(stem + "_density.csv", density);

    std::string axial = "x1,x2\n";
    for (const auto& p : bh_axial_histogram_curve(w, cfg.resolution, opts.vmf))
        axial += format_double(p[0]) + "," + format_double(p[1]) + "\n";
    write_file_atomic(stem + "_axial.csv", axial);

    const auto seg = bh_axis_segment(w, opts.vmf);
    std::string axis = "x1,x2\n";
    axis += format_double(seg.first[0]) + "," + format_double(seg.first[1]) + "\n";
    axis += format_double(seg.second[0]) + "," + format_double(seg.second[1]) + "\n";
    write_file_atomic(stem + "_axis.csv", axis);
}

/// Dispatch a command name; returns a process exit code.
inline int run_command(const std::string& command, const RunConfig& cfg) {
    try {
        if (command == "simulate") cmd_simulate(cfg);
        else if (command == "smooth") cmd_smooth(cfg);
        else if (command == "sphere-smooth") cmd_sphere_smooth(cfg);
        else if (command == "diagnose") cmd_diagnose(cfg);
        else if (command == "table1") cmd_table1(cfg);
        else if (command == "bingham-plot") cmd_bingham_plot(cfg);
        else throw ConfigError("unknown command '" + command + "'");
        return kOk;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kDataError;
    } catch (const FitError& e) {
        std::cerr << "fit error: " << e.what() << "\n";
        return kFitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFitError;
    }
}

} // namespace dirsmooth::cli
