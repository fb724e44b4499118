// Command line front end: inclusion detection in elastic plates from
// boundary measurements, plus the forward model and data tooling around it.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "elastoscan/app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"inclusion detection in elastic plates from boundary measurements"};
    app.require_subcommand(1);

    std::string config_path, out_dir, ml_text, report_in, sensors_path;
    std::vector<double> frequencies_hz;
    std::vector<double> alpha_flat;
    double delta = 0.0;
    std::uint64_t seed = 0;
    bool reproducible = false, force = false;
    std::vector<std::string> csv_paths;

    app.add_option("--config", config_path, "run configuration file");
    auto* omega_opt = app.add_option("--omega", frequencies_hz,
                                     "excitation frequencies in Hz (replaces the config list)");
    auto* alpha_opt = app.add_option(
        "--alpha", alpha_flat, "sweep member a_lambda a_mu a_rho; repeat for a longer sweep");
    auto* delta_opt =
        app.add_option("--delta", delta, "noise threshold for the eigenvalue count, absolute");
    auto* ml_opt = app.add_option("--ml", ml_text, "count threshold: 'auto' or an integer");
    auto* seed_opt = app.add_option("--seed", seed, "seed for synthetic noise");
    auto* out_opt = app.add_option("--out", out_dir, "output directory");
    app.add_flag("--reproducible", reproducible, "suppress timestamps in outputs");
    app.add_flag("--force", force, "run outside the supported measurement bands");

    auto* sub_mesh = app.add_subcommand("mesh", "build the plate mesh and report its shape");
    auto* sub_forward =
        app.add_subcommand("forward", "solve the phantom model and write sensor recordings");
    auto* sub_ntd = app.add_subcommand("ntd", "compute background and measured NtD matrices");
    auto* sub_reconstruct =
        app.add_subcommand("reconstruct", "run the inclusion test over the grid");
    auto* sub_ingest =
        app.add_subcommand("ingest", "turn sweep recordings into a measured NtD matrix");
    auto* sub_check = app.add_subcommand("check", "verify model bounds and assumptions");
    auto* sub_report = app.add_subcommand("report", "re-render figures from a report file");

    sub_ingest->add_option("--csv", csv_paths, "sweep recording files")->required();
    sub_ingest->add_option("--sensors", sensors_path,
                           "sensor sidecar (default: <out>/sensors.cfg)");
    sub_report->add_option("--in", report_in, "reconstruction report to render")->required();
    for (auto* sub : {sub_mesh, sub_forward, sub_ntd, sub_reconstruct, sub_ingest, sub_check,
                      sub_report})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    using namespace elastoscan;
    return run_guarded(std::cerr, [&] {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = load_run_config(config_path);
        } else if (!sub_report->parsed()) {
            throw ConfigError("--config is required");
        }

        if (omega_opt->count()) {
            cfg.frequencies.clear();
            for (double f : frequencies_hz)
                cfg.frequencies.push_back(FrequencyConfig::from_hz(f));
        }
        if (alpha_opt->count()) {
            if (alpha_flat.empty() || alpha_flat.size() % 3 != 0)
                throw ConfigError("--alpha takes groups of three values");
            cfg.alphas.clear();
            for (size_t i = 0; i < alpha_flat.size(); i += 3)
                cfg.alphas.push_back({alpha_flat[i], alpha_flat[i + 1], alpha_flat[i + 2]});
        }
        if (delta_opt->count()) {
            cfg.delta = delta;
            cfg.delta_scaled = false;
        }
        if (ml_opt->count()) {
            if (ml_text == "auto")
                cfg.m_tilde.reset();
            else
                cfg.m_tilde = static_cast<int>(ConfigLine::parse_number(ml_text, "--ml"));
        }
        if (seed_opt->count()) cfg.seed = seed;
        if (out_opt->count()) cfg.out_dir = out_dir;
        cfg.reproducible = reproducible;
        cfg.force = force;
        if (!config_path.empty()) cfg.validate();

        if (sub_mesh->parsed()) run_mesh(cfg, std::cout);
        if (sub_forward->parsed()) run_forward(cfg, std::cout);
        if (sub_ntd->parsed()) run_ntd(cfg, std::cout);
        if (sub_reconstruct->parsed()) run_reconstruct(cfg, std::cout);
        if (sub_ingest->parsed()) run_ingest(cfg, csv_paths, sensors_path, std::cout);
        if (sub_check->parsed()) run_check(cfg, std::cout);
        if (sub_report->parsed()) run_report(cfg, report_in, std::cout);
    });
}
