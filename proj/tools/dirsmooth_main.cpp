#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dirsmooth/cli.hpp"

namespace {

void add_common_options(CLI::App* cmd, dirsmooth::cli::RunConfig& cfg,
                        std::string& config_path) {
    cmd->add_option("--config", config_path, "JSON config file (flags override it)");
    cmd->add_option("--seed", cfg.seed, "random seed");
    cmd->add_option("--eps", cfg.eps, "series truncation bound");
    cmd->add_option("--t-switch", cfg.t_switch, "series/asymptotic switch override");
    cmd->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");
}

} // namespace

int main(int argc, char** argv) {
    using dirsmooth::cli::RunConfig;
    RunConfig cfg;
    std::string config_path;

    // Load --config first so file values act as defaults and flags win.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    if (!config_path.empty()) {
        try {
            dirsmooth::cli::apply_json_config(cfg, config_path);
        } catch (const std::exception& e) {
            std::cerr << "config error: " << e.what() << "\n";
            return dirsmooth::cli::kConfigError;
        }
    }

    CLI::App app{"dirsmooth: nonparametric smoothing of directional and axial data"};
    app.require_subcommand(1);

    auto* simulate = app.add_subcommand("simulate", "draw a synthetic planar dataset");
    simulate->add_option("--output", cfg.output, "dataset CSV path");
    simulate->add_option("--n", cfg.n, "sample size");
    add_common_options(simulate, cfg, config_path);

    auto* smooth = app.add_subcommand("smooth", "local GLM smoothing of planar data");
    smooth->add_option("--input", cfg.input, "dataset CSV (x1,x2,y1,y2)");
    smooth->add_option("--output", cfg.output, "fit CSV path");
    smooth->add_option("--order", cfg.order, "local basis order (0, 1 or 2)");
    smooth->add_option("--nn", cfg.nn, "effective neighborhood size N");
    smooth->add_option("--grid", cfg.grid, "query grid spec NxM[:xmin,xmax,ymin,ymax]");
    smooth->add_option("--queries", cfg.queries, "query points CSV (x1,x2)");
    smooth->add_option("--display-scale", cfg.display_scale,
                       "segment display scale (default 0.18)");
    smooth->add_option("--segments-out", cfg.segments_out, "segments CSV path");
    add_common_options(smooth, cfg, config_path);

    auto* sphere = app.add_subcommand("sphere-smooth",
                                      "Bingham field smoothing of axial sphere data");
    sphere->add_option("--input", cfg.input, "observations CSV (x1,x2,x3,v1,v2,v3)");
    sphere->add_option("--output", cfg.output, "fit CSV path");
    sphere->add_option("--order", cfg.order, "local basis order (0, 1 or 2)");
    sphere->add_option("--nn", cfg.nn, "effective neighborhood size N");
    sphere->add_option("--fit-points", cfg.fit_points, "number of fit points");
    sphere->add_option("--fit-points-file", cfg.fit_points_file, "fit points CSV (x1,x2,x3)");
    sphere->add_option("--display-scale", cfg.display_scale,
                       "segment display scale (default 0.1)");
    sphere->add_option("--segments-out", cfg.segments_out, "segments CSV path");
    add_common_options(sphere, cfg, config_path);

    auto* diagnose = app.add_subcommand("diagnose", "R^2-style fit diagnostics (JSON)");
    diagnose->add_option("--input", cfg.input, "observations CSV (x1,x2,x3,v1,v2,v3)");
    diagnose->add_option("--output", cfg.output, "JSON output path (also printed)");
    diagnose->add_option("--order", cfg.order, "local basis order (0, 1 or 2)");
    diagnose->add_option("--nn", cfg.nn, "effective neighborhood size N");
    diagnose->add_option("--fit-points", cfg.fit_points, "number of fit points");
    add_common_options(diagnose, cfg, config_path);

    auto* table1 = app.add_subcommand("table1", "Monte Carlo error study table");
    table1->add_option("--output", cfg.output, "error table CSV path");
    table1->add_option("--n", cfg.n, "sample size per replicate");
    table1->add_option("--sims", cfg.sims, "number of replicates (desk scale)");
    table1->add_flag("--full-scale", cfg.full_scale,
                     "100 replicates over N = 100..800");
    add_common_options(table1, cfg, config_path);

    auto* bingham = app.add_subcommand("bingham-plot",
                                       "density / axial-histogram point sets for Bh(w)");
    bingham->add_option("--output", cfg.output, "output prefix");
    bingham->add_option("--w", cfg.w, "parameter 'w1,w2'");
    bingham->add_option("--resolution", cfg.resolution, "points on the angle grid");
    add_common_options(bingham, cfg, config_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : dirsmooth::cli::kConfigError;
    }

    return dirsmooth::cli::run_command(app.get_subcommands().front()->get_name(), cfg);
}
