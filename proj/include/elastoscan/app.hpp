#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "elastoscan/config.hpp"
#include "elastoscan/errors.hpp"
#include "elastoscan/fem.hpp"
#include "elastoscan/geometry.hpp"
#include "elastoscan/io.hpp"
#include "elastoscan/mesh.hpp"
#include "elastoscan/monotonicity.hpp"
#include "elastoscan/ntd.hpp"
#include "elastoscan/pipeline.hpp"
#include "elastoscan/report.hpp"
#include "elastoscan/synthetic.hpp"

namespace elastoscan {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitSchema = 2;
constexpr int kExitResonance = 3;

// ---------------------------------------------------------------------------
// Run configuration. One file drives every subcommand so a study is fully
// described by its config plus a seed.

struct RunConfig {
    std::string geometry_path;
    std::string phantom_path;
    double mesh_size = 0.01;
    int grid_nx = 0, grid_ny = 0;           // 0: one box per mesh cell column
    std::vector<FrequencyConfig> frequencies;
    std::vector<std::array<double, 3>> alphas;   // empty: derived from the phantom
    double delta = 0.0;
    bool delta_scaled = false;              // multiply by ||L_measured||
    std::optional<int> m_tilde;             // unset: data-driven threshold
    std::uint64_t seed = 0;
    double noise = 0.0;                     // synthetic noise level for 'ntd'
    bool noise_scaled = true;
    double drive_amplitude = 1.0;           // traction amplitude, Pa
    double sweep_rate = 250.0;              // synthetic recording, Hz
    double sweep_duration = 5.0;            // seconds
    WindowKind window = WindowKind::hann;
    double assumption_lo = 57.0, assumption_hi = 1000.0;
    std::string out_dir = "out";
    bool force = false;
    bool reproducible = false;

    void validate() const {
        namespace fs = std::filesystem;
        if (!fs::exists(geometry_path))
            throw ConfigError("geometry file does not exist: " + geometry_path);
        if (!phantom_path.empty() && !fs::exists(phantom_path))
            throw ConfigError("phantom file does not exist: " + phantom_path);
        if (!(mesh_size > 0.0)) throw ConfigError("mesh_size must be > 0");
        if (grid_nx < 0 || grid_ny < 0) throw ConfigError("grid counts must be >= 0");
        if (frequencies.empty()) throw ConfigError("config lists no frequencies");
        for (const auto& f : frequencies)
            if (!(f.omega > 0.0)) throw ConfigError("frequencies must be > 0");
        if (!(sweep_rate > 0.0) || !(sweep_duration > 0.0))
            throw ConfigError("sweep rate and duration must be > 0");
        if (noise < 0.0) throw ConfigError("noise level must be >= 0");
        if (delta < 0.0) throw ConfigError("delta must be >= 0");
    }
};

inline RunConfig load_run_config(const std::string& path) {
    namespace fs = std::filesystem;
    ConfigDoc doc = load_config(path, "run");
    fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const std::string& p) { return (base / p).string(); };

    RunConfig cfg;
    cfg.geometry_path = resolve(doc.text("geometry"));
    if (doc.has("phantom")) cfg.phantom_path = resolve(doc.text("phantom"));
    cfg.mesh_size = doc.scalar_or("mesh_size", cfg.mesh_size);
    if (const ConfigLine* g = doc.find("grid")) {
        cfg.grid_nx = static_cast<int>(g->value_num(0));
        cfg.grid_ny = static_cast<int>(g->value_num(1));
    }
    for (const auto& l : doc.all("frequency")) {
        double v = l.value_num(0);
        bool rad = l.attrs.count("unit") && l.attr("unit") == "rad_s";
        cfg.frequencies.push_back(rad ? FrequencyConfig::from_rad_s(v)
                                      : FrequencyConfig::from_hz(v));
    }
    for (const auto& l : doc.all("alpha"))
        cfg.alphas.push_back({l.value_num(0), l.value_num(1), l.value_num(2)});
    if (const ConfigLine* d = doc.find("delta")) {
        cfg.delta = d->value_num(0);
        cfg.delta_scaled = d->attrs.count("scale") && d->attr("scale") == "measured";
    }
    if (doc.has("ml")) {
        std::string ml = doc.text("ml");
        if (ml != "auto") cfg.m_tilde = static_cast<int>(ConfigLine::parse_number(ml, "ml"));
    }
    cfg.seed = static_cast<std::uint64_t>(doc.scalar_or("seed", 0.0));
    if (const ConfigLine* n = doc.find("noise")) {
        cfg.noise = n->value_num(0);
        cfg.noise_scaled = !n->attrs.count("scale") || n->attr("scale") == "measured";
    }
    cfg.drive_amplitude = doc.scalar_or("drive_amplitude", cfg.drive_amplitude);
    if (const ConfigLine* s = doc.find("sweep")) {
        cfg.sweep_rate = s->attr_num("rate", cfg.sweep_rate);
        cfg.sweep_duration = s->attr_num("duration", cfg.sweep_duration);
    }
    if (doc.has("window")) {
        std::string w = doc.text("window");
        if (w == "hann")
            cfg.window = WindowKind::hann;
        else if (w == "rectangular")
            cfg.window = WindowKind::rectangular;
        else
            throw ConfigError(path + ": window must be 'hann' or 'rectangular'");
    }
    if (const ConfigLine* a = doc.find("assumption_window")) {
        cfg.assumption_lo = a->value_num(0);
        cfg.assumption_hi = a->value_num(1);
    }
    cfg.out_dir = doc.text_or("out", cfg.out_dir);
    cfg.validate();
    return cfg;
}

// ---------------------------------------------------------------------------
// Phantom configuration: homogeneous background plus disc or box inclusions
// given by their absolute material parameters.

inline Phantom phantom_from_config(const ConfigDoc& doc, const PlateGeometry& geometry) {
    Phantom phantom;
    const ConfigLine* bg = doc.find("background");
    if (!bg) throw ConfigError(doc.source + ": phantom needs a 'background' line");
    phantom.background = {bg->attr_num("lambda"), bg->attr_num("mu"), bg->attr_num("rho")};
    phantom.rho_sign = static_cast<int>(doc.scalar_or("rho_sign", 1.0));

    for (const auto& l : doc.all("inclusion")) {
        if (l.values.empty())
            throw ConfigError(doc.source + ":" + std::to_string(l.line_no) +
                              ": inclusion needs a shape");
        IsotropicMaterial mat{l.attr_num("lambda"), l.attr_num("mu"), l.attr_num("rho")};
        InclusionShape shape;
        shape.psi = detail::perturbation_from_pair(phantom.background, mat, phantom.rho_sign);
        if (l.values[0] == "disc") {
            shape.kind = InclusionShape::Kind::disc;
            shape.center = {l.attr_num("cx"), l.attr_num("cy")};
            shape.diameter = l.attr_num("d");
            detail::require_disc_contained(geometry, shape.center, shape.diameter);
        } else if (l.values[0] == "box") {
            shape.kind = InclusionShape::Kind::box;
            shape.box.min = {l.attr_num("x0"), l.attr_num("y0"), 0.0};
            shape.box.max = {l.attr_num("x1"), l.attr_num("y1"), geometry.thickness};
            if (shape.box.min.x() < kContainmentMargin ||
                shape.box.min.y() < kContainmentMargin ||
                shape.box.max.x() > geometry.length_x - kContainmentMargin ||
                shape.box.max.y() > geometry.length_y - kContainmentMargin)
                throw ContainmentError("inclusion box is not compactly contained in the plate");
        } else {
            throw ConfigError(doc.source + ":" + std::to_string(l.line_no) +
                              ": unknown inclusion shape '" + l.values[0] + "'");
        }
        phantom.inclusions.push_back(shape);
    }
    return phantom;
}

// ---------------------------------------------------------------------------

struct Workspace {
    PlateGeometry geometry;
    Mesh mesh;
    LoadBasis basis;
    TestInclusionGrid grid;
    Phantom phantom;
    MaterialField background;   // homogeneous background
    MaterialField object;       // phantom materialized on the mesh
};

inline Workspace build_workspace(const RunConfig& cfg) {
    Workspace ws;
    ws.geometry = geometry_from_config(load_config(cfg.geometry_path, "geometry"));
    ws.mesh = make_plate_mesh(ws.geometry, cfg.mesh_size);
    ws.basis = build_load_basis(ws.mesh, ws.geometry);
    int gx = cfg.grid_nx > 0 ? cfg.grid_nx : ws.mesh.nx;
    int gy = cfg.grid_ny > 0 ? cfg.grid_ny : ws.mesh.ny;
    ws.grid = test_inclusion_grid(ws.geometry, gx, gy);

    if (!cfg.phantom_path.empty()) {
        ws.phantom = phantom_from_config(load_config(cfg.phantom_path, "phantom"), ws.geometry);
    } else {
        ws.phantom.background = makrolon_material();
    }
    Phantom bare{ws.phantom.background, {}, ws.phantom.rho_sign};
    ws.background = materialize(bare, ws.mesh);
    ws.object = materialize(ws.phantom, ws.mesh);
    return ws;
}

namespace detail {

inline double frequency_hz(const FrequencyConfig& f) { return f.omega / (2.0 * M_PI); }

// File name fragment for one frequency, e.g. "21Hz" or "131.9rad".
inline std::string frequency_tag(const FrequencyConfig& f) {
    if (f.interpret_hz) return format_short(frequency_hz(f)) + "Hz";
    return format_short(f.omega) + "rad";
}

inline std::string band_list_text() {
    std::string text;
    for (const auto& b : default_analysis_bands()) {
        if (!text.empty()) text += ", ";
        text += format_short(b[0]) + "-" + format_short(b[1]);
    }
    return text;
}

inline void require_in_band(const RunConfig& cfg) {
    if (cfg.force) return;
    for (const auto& f : cfg.frequencies) {
        double hz = frequency_hz(f);
        bool ok = false;
        for (const auto& b : default_analysis_bands())
            if (hz >= b[0] && hz <= b[1]) ok = true;
        if (!ok)
            throw ConfigError("frequency " + format_short(hz) +
                              " Hz is outside the measurement bands " + band_list_text() +
                              " Hz (use --force to override)");
    }
}

// Corner nodes of every Neumann facet, one channel per coordinate axis.
// Covers exactly the nodes the measured-map quadrature needs.
inline std::pair<std::vector<SensorChannel>, std::vector<int>> drive_patch_sensors(
    const Mesh& mesh) {
    std::vector<int> node_ids;
    for (int fi : mesh.facets_with_tag(FacetTag::neumann))
        for (int n : mesh.facets[fi].nodes) node_ids.push_back(n);
    std::sort(node_ids.begin(), node_ids.end());
    node_ids.erase(std::unique(node_ids.begin(), node_ids.end()), node_ids.end());

    std::vector<SensorChannel> sensors;
    std::vector<int> sensor_nodes;
    for (int n : node_ids)
        for (int d = 0; d < 3; ++d) {
            SensorChannel s;
            s.name = "s" + std::to_string(sensors.size());
            s.position = mesh.nodes[n];
            s.axis = d;
            sensors.push_back(std::move(s));
            sensor_nodes.push_back(n);
        }
    return {sensors, sensor_nodes};
}

// Total driven area of each basis load, for converting a recorded force in
// newtons back to the traction amplitude the load basis is normalized to.
inline std::vector<double> load_patch_areas(const Mesh& mesh, const LoadBasis& basis) {
    auto neumann = mesh.facets_with_tag(FacetTag::neumann);
    std::vector<double> areas(basis.size(), 0.0);
    for (int i = 0; i < basis.size(); ++i)
        for (size_t fi = 0; fi < neumann.size(); ++fi)
            if (basis.loads[i].traction[fi].squaredNorm() > 0.0)
                areas[i] += mesh.facets[neumann[fi]].area;
    return areas;
}

inline std::string sanitize_label(std::string label) {
    for (char& c : label)
        if (c == ':') c = '-';
    return label;
}

inline int dominant_channel(const std::vector<std::complex<double>>& amps) {
    int best = -1;
    double mag = 0.0;
    for (size_t i = 0; i < amps.size(); ++i)
        if (std::abs(amps[i]) > mag) {
            mag = std::abs(amps[i]);
            best = static_cast<int>(i);
        }
    return best;
}

} // namespace detail

// ---------------------------------------------------------------------------
// forward: solve the phantom model for every basis load and write the
// steady-state response as sensor traces plus synthetic sweep recordings.

inline void run_forward(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    detail::require_in_band(cfg);
    Workspace ws = build_workspace(cfg);
    fs::create_directories(cfg.out_dir);
    fs::path out(cfg.out_dir);

    auto [sensors, sensor_nodes] = detail::drive_patch_sensors(ws.mesh);
    write_sensor_map((out / "sensors.cfg").string(), sensors);
    std::vector<double> areas = detail::load_patch_areas(ws.mesh, ws.basis);

    const int n_samples = static_cast<int>(std::llround(cfg.sweep_rate * cfg.sweep_duration));
    std::vector<double> time(n_samples);
    for (int n = 0; n < n_samples; ++n) time[n] = n / cfg.sweep_rate;

    for (const auto& freq : cfg.frequencies) {
        AssembledSystem sys = assemble(ws.mesh, ws.object, freq);
        std::vector<DisplacementField> u = solve_basis(sys, ws.mesh, ws.basis);
        double f_hz = detail::frequency_hz(freq);
        std::string tag = detail::frequency_tag(freq);

        Json loads = Json::array();
        for (int j = 0; j < ws.basis.size(); ++j) {
            Json values = Json::array();
            for (size_t s = 0; s < sensors.size(); ++s) {
                double v = cfg.drive_amplitude *
                           u[j].at_node(sensor_nodes[s])[sensors[s].axis];
                values.push_back(Json{{"sensor", sensors[s].name}, {"value", v}});
            }
            loads.push_back(Json{{"load", ws.basis.labels[j]}, {"values", values}});

            std::string force_name = "force_" + ws.basis.labels[j];
            force_name[force_name.rfind(':')] = '_';

            SweepCsv csv;
            csv.time = time;
            csv.force_names = {force_name};
            csv.force.emplace_back(n_samples);
            csv.sensor_names.reserve(sensors.size());
            for (const auto& s : sensors) csv.sensor_names.push_back(s.name);
            csv.displacement.assign(sensors.size(), std::vector<double>(n_samples));
            for (int n = 0; n < n_samples; ++n) {
                double carrier = std::cos(2.0 * M_PI * f_hz * time[n]);
                csv.force[0][n] = cfg.drive_amplitude * areas[j] * carrier;
                for (size_t s = 0; s < sensors.size(); ++s)
                    csv.displacement[s][n] = cfg.drive_amplitude * carrier *
                                             u[j].at_node(sensor_nodes[s])[sensors[s].axis];
            }
            std::string name =
                "sweep-" + detail::sanitize_label(ws.basis.labels[j]) + "-" + tag + ".csv";
            write_sweep_csv((out / name).string(), csv);
        }

        Json traces{{"schema", "elastoscan-traces v1"},
                    {"frequency_hz", f_hz},
                    {"omega_rad_s", freq.omega},
                    {"drive_amplitude", cfg.drive_amplitude},
                    {"loads", loads}};
        write_json_file((out / ("traces-" + tag + ".json")).string(), traces);
        log << "forward " << tag << ": " << ws.basis.size() << " loads, " << sensors.size()
            << " sensor channels\n";
    }
}

// ---------------------------------------------------------------------------
// ntd: background and phantom NtD matrices straight from the model, with
// optional synthetic noise on the phantom side.

inline void run_ntd(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    detail::require_in_band(cfg);
    Workspace ws = build_workspace(cfg);
    fs::create_directories(cfg.out_dir);
    fs::path out(cfg.out_dir);

    for (const auto& freq : cfg.frequencies) {
        NtDMatrix L0 = ntd_matrix(ws.mesh, ws.background, freq, ws.basis, "background");
        NtDMatrix Lm = ntd_matrix(ws.mesh, ws.object, freq, ws.basis, "measured");
        double noise_applied = 0.0;
        if (cfg.noise > 0.0) {
            noise_applied =
                cfg.noise_scaled ? cfg.noise * symmetric_spectral_norm(Lm.entries) : cfg.noise;
            Lm = add_noise(Lm, NoiseModel{noise_applied, cfg.seed});
        }
        std::string tag = detail::frequency_tag(freq);
        write_ntd_matrix((out / ("L0-" + tag + ".ntd")).string(), L0);
        write_ntd_matrix((out / ("measured-" + tag + ".ntd")).string(), Lm);
        log << "ntd " << tag << ": |L0| = " << symmetric_spectral_norm(L0.entries)
            << ", |Lm| = " << symmetric_spectral_norm(Lm.entries)
            << ", noise = " << noise_applied << "\n";
    }
}

// ---------------------------------------------------------------------------
// ingest: turn sweep recordings into a measured NtD matrix per frequency.
// Repeated recordings of the same drive give a noise level estimate.

inline void run_ingest(const RunConfig& cfg, const std::vector<std::string>& csv_paths,
                       const std::string& sensors_path, std::ostream& log) {
    namespace fs = std::filesystem;
    detail::require_in_band(cfg);
    if (csv_paths.empty()) throw ConfigError("ingest needs at least one sweep file");
    Workspace ws = build_workspace(cfg);
    fs::create_directories(cfg.out_dir);
    fs::path out(cfg.out_dir);

    std::string sidecar =
        sensors_path.empty() ? (out / "sensors.cfg").string() : sensors_path;
    std::map<std::string, SensorChannel> sensor_map;
    for (auto& s : read_sensor_map(sidecar)) sensor_map[s.name] = s;
    std::vector<double> areas = detail::load_patch_areas(ws.mesh, ws.basis);

    std::vector<SweepCsv> sweeps;
    for (const auto& p : csv_paths) sweeps.push_back(read_sweep_csv(p));

    for (const auto& freq : cfg.frequencies) {
        double f_hz = detail::frequency_hz(freq);
        std::string tag = detail::frequency_tag(freq);

        std::vector<std::vector<SpectralSample>> slots(ws.basis.size());
        for (size_t c = 0; c < sweeps.size(); ++c) {
            const SweepCsv& sc = sweeps[c];
            std::vector<RawSeries> force, disp;
            std::vector<SensorChannel> channels;
            for (size_t i = 0; i < sc.force.size(); ++i)
                force.push_back({sc.time, sc.force[i]});
            for (size_t i = 0; i < sc.displacement.size(); ++i) {
                auto it = sensor_map.find(sc.sensor_names[i]);
                if (it == sensor_map.end())
                    throw ConfigError(csv_paths[c] + ": sensor '" + sc.sensor_names[i] +
                                      "' is not in " + sidecar);
                disp.push_back({sc.time, sc.displacement[i]});
                channels.push_back(it->second);
            }
            SweepRecord record = trim_and_align(force, disp, channels);
            SpectralSample sample = fourier_extract(record, f_hz, cfg.window);

            int dom = detail::dominant_channel(sample.force_amp);
            if (dom < 0 || std::abs(sample.force_amp[dom]) == 0.0)
                throw ConfigError(csv_paths[c] + ": no drive signal at " +
                                  detail::format_short(f_hz) + " Hz");
            std::string label = force_channel_label(sc.force_names[dom]);
            auto it = std::find(ws.basis.labels.begin(), ws.basis.labels.end(), label);
            if (it == ws.basis.labels.end())
                throw ConfigError(csv_paths[c] + ": drive '" + label +
                                  "' does not match any load of the geometry");
            int slot = static_cast<int>(it - ws.basis.labels.begin());

            // Recorded forces are in newtons; the load basis is unit traction.
            double traction = std::abs(sample.force_amp[dom]) / areas[slot];
            for (auto& a : sample.disp_amp) a /= traction;
            slots[slot].push_back(std::move(sample));
        }

        size_t repeats = SIZE_MAX;
        for (int i = 0; i < ws.basis.size(); ++i) {
            if (slots[i].empty())
                throw ConfigError("no sweep file drives load '" + ws.basis.labels[i] + "'");
            repeats = std::min(repeats, slots[i].size());
        }

        std::vector<Eigen::MatrixXd> matrices;
        MeasuredNtD first;
        for (size_t r = 0; r < repeats; ++r) {
            std::vector<SpectralSample> samples;
            for (int i = 0; i < ws.basis.size(); ++i) samples.push_back(slots[i][r]);
            MeasuredNtD measured = assemble_measured_ntd(ws.mesh, ws.basis, samples);
            if (r == 0) first = measured;
            matrices.push_back(measured.matrix.entries);
        }
        NtDMatrix mean = first.matrix;
        mean.entries.setZero();
        for (const auto& M : matrices) mean.entries += M / static_cast<double>(matrices.size());
        write_ntd_matrix((out / ("measured-" + tag + ".ntd")).string(), mean);

        Json samples_json = Json::array();
        for (int i = 0; i < ws.basis.size(); ++i)
            samples_json.push_back(spectral_sample_json(ws.basis.labels[i], slots[i][0]));
        write_json_file((out / ("samples-" + tag + ".json")).string(),
                        Json{{"schema", "elastoscan-samples v1"},
                             {"frequency_hz", f_hz},
                             {"samples", samples_json}});

        log << "ingest " << tag << ": " << repeats << " repeat(s), interpolated values: "
            << first.interpolated_values << ", |Im| = " << first.imag_norm << "\n";
        if (repeats >= 2) {
            NoiseEstimate estimate = estimate_noise(matrices);
            write_json_file((out / ("noise-" + tag + ".json")).string(), noise_json(estimate));
            log << "ingest " << tag << ": noise delta = " << estimate.delta << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// reconstruct: run the eigenvalue-counting test over the inclusion grid using
// NtD matrices produced by 'ntd' or 'ingest'.

inline void run_reconstruct(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    detail::require_in_band(cfg);
    Workspace ws = build_workspace(cfg);
    fs::create_directories(cfg.out_dir);
    fs::path out(cfg.out_dir);

    for (const auto& freq : cfg.frequencies) {
        std::string tag = detail::frequency_tag(freq);
        fs::path l0_path = out / ("L0-" + tag + ".ntd");
        fs::path lm_path = out / ("measured-" + tag + ".ntd");
        if (!fs::exists(l0_path) || !fs::exists(lm_path))
            throw IoError("missing " + l0_path.filename().string() + " or " +
                          lm_path.filename().string() + " in " + cfg.out_dir +
                          "; run 'ntd' or 'ingest' first");
        NtDMatrix L0 = read_ntd_matrix(l0_path.string());
        NtDMatrix Lm = read_ntd_matrix(lm_path.string());
        for (const NtDMatrix* L : {&L0, &Lm})
            if (std::abs(L->omega - freq.omega) > 1e-9 * freq.omega)
                throw ConfigError("matrix frequency " + detail::format_short(L->omega) +
                                  " rad/s does not match the configured " +
                                  detail::format_short(freq.omega) + " rad/s");

        AssembledSystem sys = assemble(ws.mesh, ws.background, freq);
        std::vector<DisplacementField> u0 = solve_basis(sys, ws.mesh, ws.basis);

        ReconstructParameters params;
        if (!cfg.alphas.empty()) {
            params.alphas = cfg.alphas;
        } else if (!ws.phantom.inclusions.empty()) {
            const auto& psi = ws.phantom.inclusions.front().psi;
            params.alphas = default_alpha_sweep(psi[0], psi[2]);
        } else {
            throw ConfigError("no alpha sweep: add 'alpha' lines or a phantom with inclusions");
        }
        params.delta =
            cfg.delta_scaled ? cfg.delta * symmetric_spectral_norm(Lm.entries) : cfg.delta;
        params.m_tilde = cfg.m_tilde;
        params.rho_sign = -ws.phantom.rho_sign;

        ReconstructionResult result = reconstruct(ws.mesh, ws.grid, L0, Lm, u0, params, freq);

        std::vector<std::string> warnings;
        std::optional<AssumptionReport> assumption;
        if (!ws.phantom.inclusions.empty()) {
            assumption = check_assumption(ws.mesh, u0, ws.object, ws.background, freq);
            if (!assumption->holds)
                warnings.push_back("monotonicity assumption violated at " + tag +
                                   ": stiffness response " +
                                   detail::format_short(assumption->lhs) +
                                   " does not dominate inertia response " +
                                   detail::format_short(assumption->rhs));
        } else {
            warnings.push_back("no phantom inclusions configured; assumption not checked");
        }
        bool all_null = !result.outcomes.empty();
        for (const auto& o : result.outcomes) all_null = all_null && o.null_data;
        if (all_null)
            warnings.push_back("measured data equals the background prediction (null data)");

        Json report = reconstruction_report_json(ws.mesh, ws.grid, result,
                                                 detail::frequency_hz(freq), assumption,
                                                 warnings, cfg.reproducible);
        write_json_file((out / ("report-" + tag + ".json")).string(), report);
        write_text_file((out / ("grid-" + tag + ".svg")).string(),
                        render_grid_svg(ws.grid.nx, ws.grid.ny, result.accepted,
                                        detail::frequency_hz(freq), cfg.reproducible));
        log << "reconstruct " << tag << ": accepted " << result.accepted.size() << " of "
            << ws.grid.boxes.size() << " boxes (threshold " << result.m_tilde_used
            << (result.auto_threshold ? ", data-driven" : "") << ")\n";
        for (const auto& w : warnings) log << "warning: " << w << "\n";
    }
}

// ---------------------------------------------------------------------------
// check: model diagnostics. Verifies the monotonicity bounds and the
// linearization order on the configured phantom, checks the stiffness
// dominance assumption per frequency and locates where it breaks.

inline void run_check(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    Workspace ws = build_workspace(cfg);
    fs::create_directories(cfg.out_dir);
    fs::path out(cfg.out_dir);

    Json freq_reports = Json::array();
    for (const auto& freq : cfg.frequencies) {
        std::string tag = detail::frequency_tag(freq);
        AssembledSystem sys = assemble(ws.mesh, ws.background, freq);
        std::vector<DisplacementField> u0 = solve_basis(sys, ws.mesh, ws.basis);

        AssumptionReport assumption =
            check_assumption(ws.mesh, u0, ws.object, ws.background, freq);
        MonotonicityCheckReport lower =
            verify_monotonicity_lower(ws.mesh, ws.background, ws.object, freq, ws.basis);
        MonotonicityCheckReport upper =
            verify_monotonicity_upper(ws.mesh, ws.background, ws.object, freq, ws.basis);

        log << "check " << tag << ": assumption "
            << (assumption.holds ? "PASS" : "WARN") << " (stiffness "
            << detail::format_short(assumption.lhs) << " vs inertia "
            << detail::format_short(assumption.rhs) << ")\n";
        log << "check " << tag << ": lower bound "
            << (lower.violations() == 0 ? "PASS" : "WARN") << " (" << lower.violations()
            << " violations)\n";
        log << "check " << tag << ": upper bound "
            << (upper.violations() == 0 ? "PASS" : "WARN") << " (" << upper.violations()
            << " violations)\n";

        freq_reports.push_back(Json{{"frequency_hz", detail::frequency_hz(freq)},
                                    {"assumption", assumption_json(assumption)},
                                    {"lower_bound", monotonicity_check_json(lower)},
                                    {"upper_bound", monotonicity_check_json(upper)}});
    }

    // Linearization order on an interior perturbation: the phantom contrast
    // when there is one, a tenth of the background on a central box otherwise.
    const int ne = ws.mesh.element_count();
    PerturbationField h{std::vector<double>(ne, 0.0), std::vector<double>(ne, 0.0),
                        std::vector<double>(ne, 0.0)};
    if (!ws.phantom.inclusions.empty()) {
        for (int e = 0; e < ne; ++e) {
            h.lambda[e] = ws.object.lambda[e] - ws.background.lambda[e];
            h.mu[e] = ws.object.mu[e] - ws.background.mu[e];
            h.rho[e] = ws.object.rho[e] - ws.background.rho[e];
        }
    } else {
        const Box& central = ws.grid.boxes[(ws.grid.ny / 2) * ws.grid.nx + ws.grid.nx / 2];
        RegionMask in_box = box_elements(ws.mesh, central);
        for (int e = 0; e < ne; ++e)
            if (in_box.at(e)) {
                h.lambda[e] = 0.1 * ws.phantom.background.lambda;
                h.mu[e] = 0.1 * ws.phantom.background.mu;
                h.rho[e] = 0.1 * ws.phantom.background.rho;
            }
    }
    ConvergenceReport convergence = frechet_convergence_report(
        ws.mesh, ws.background, cfg.frequencies.front(), ws.basis, h, {1e-2, 1e-3, 1e-4});
    double slope = convergence.fitted_slope();
    log << "check: linearization remainder slope " << detail::format_short(slope) << " "
        << (slope > 1.8 && slope < 2.2 ? "PASS" : "WARN") << "\n";

    Json sweep_json(nullptr);
    if (!ws.phantom.inclusions.empty()) {
        AssumptionSweepResult sweep =
            assumption_failure_frequency(ws.mesh, ws.basis, ws.object, ws.background,
                                         cfg.assumption_lo, cfg.assumption_hi);
        sweep_json = Json{{"found", sweep.found},
                          {"f_star_hz", sweep.found ? Json(sweep.f_star_hz) : Json(nullptr)},
                          {"holds_at_hz", sweep.lo_hz},
                          {"fails_at_hz", sweep.hi_hz},
                          {"skipped_hz", sweep.skipped_hz}};
        if (sweep.found)
            log << "check: assumption fails near " << detail::format_short(sweep.f_star_hz)
                << " Hz\n";
        else
            log << "check: assumption holds on the whole window\n";
    }

    write_json_file((out / "check.json").string(),
                    Json{{"schema", "elastoscan-check v1"},
                         {"frequencies", freq_reports},
                         {"linearization", convergence_json(convergence)},
                         {"assumption_sweep", sweep_json}});
}

// ---------------------------------------------------------------------------

inline void run_mesh(const RunConfig& cfg, std::ostream& log) {
    namespace fs = std::filesystem;
    Workspace ws = build_workspace(cfg);
    fs::create_directories(cfg.out_dir);

    Json summary{{"schema", "elastoscan-mesh v1"},
                 {"nodes", ws.mesh.node_count()},
                 {"elements", ws.mesh.element_count()},
                 {"cells", Json{{"nx", ws.mesh.nx}, {"ny", ws.mesh.ny}, {"nz", ws.mesh.nz}}},
                 {"spacing", Json{{"hx", ws.mesh.hx}, {"hy", ws.mesh.hy}, {"hz", ws.mesh.hz}}},
                 {"dirichlet_facets", ws.mesh.facets_with_tag(FacetTag::dirichlet).size()},
                 {"neumann_facets", ws.mesh.facets_with_tag(FacetTag::neumann).size()},
                 {"loads", ws.basis.labels},
                 {"grid", Json{{"nx", ws.grid.nx}, {"ny", ws.grid.ny}}}};
    write_json_file((fs::path(cfg.out_dir) / "mesh-summary.json").string(), summary);
    log << "mesh: " << ws.mesh.element_count() << " elements, " << ws.basis.size()
        << " loads\n";
}

// report: re-render the grid figure from an existing reconstruction report.
inline void run_report(const RunConfig& cfg, const std::string& report_path, std::ostream& log) {
    namespace fs = std::filesystem;
    Json j = load_json_file(report_path);
    if (!j.contains("schema") || j["schema"] != "elastoscan-report v1")
        throw SchemaError(report_path + ": not an elastoscan-report v1 file");
    fs::create_directories(cfg.out_dir);

    double f_hz = j.at("frequency_hz").get<double>();
    std::vector<int> accepted = j.at("accepted").get<std::vector<int>>();
    int nx = j.at("grid").at("nx").get<int>();
    int ny = j.at("grid").at("ny").get<int>();
    FrequencyConfig freq = FrequencyConfig::from_hz(f_hz);
    std::string name = "grid-" + detail::frequency_tag(freq) + ".svg";
    write_text_file((fs::path(cfg.out_dir) / name).string(),
                    render_grid_svg(nx, ny, accepted, f_hz, cfg.reproducible));
    log << "report: wrote " << name << " (" << accepted.size() << " accepted)\n";
}

// ---------------------------------------------------------------------------

inline int run_guarded(std::ostream& err, const std::function<void()>& body) {
    try {
        body();
        return kExitOk;
    } catch (const SchemaError& e) {
        err << "schema error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const ResonanceError& e) {
        err << "resonance: " << e.what() << "\n";
        return kExitResonance;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitError;
    }
}

} // namespace elastoscan
