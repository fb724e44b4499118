#pragma once

#include <cstdio>
#include <ctime>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "elastoscan/errors.hpp"
#include "elastoscan/mesh.hpp"
#include "elastoscan/monotonicity.hpp"
#include "elastoscan/ntd.hpp"
#include "elastoscan/pipeline.hpp"

namespace elastoscan {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline std::string format_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

} // namespace detail

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << content;
    if (!out) throw IoError("write failed: " + path);
}

inline void write_json_file(const std::string& path, const Json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(path + ": " + e.what());
    }
    return j;
}

inline Json assumption_json(const AssumptionReport& report) {
    return Json{{"lhs", report.lhs}, {"rhs", report.rhs}, {"holds", report.holds}};
}

inline Json convergence_json(const ConvergenceReport& report) {
    Json rows = Json::array();
    for (const auto& r : report.rows)
        rows.push_back(Json{{"t", r.t}, {"remainder", r.remainder}});
    return Json{{"rows", rows}, {"fitted_slope", report.fitted_slope()}};
}

inline Json monotonicity_check_json(const MonotonicityCheckReport& report) {
    return Json{{"lhs", report.lhs},
                {"rhs", report.rhs},
                {"margin", report.margin},
                {"violations", report.violations()}};
}

inline Json spectral_sample_json(const std::string& load_label, const SpectralSample& sample) {
    Json forces = Json::array();
    for (const auto& a : sample.force_amp)
        forces.push_back(Json{{"re", a.real()}, {"im", a.imag()}});
    Json disps = Json::array();
    for (size_t i = 0; i < sample.disp_amp.size(); ++i)
        disps.push_back(Json{{"sensor", sample.channels[i].name},
                             {"re", sample.disp_amp[i].real()},
                             {"im", sample.disp_amp[i].imag()}});
    return Json{{"load", load_label},
                {"frequency_hz", sample.frequency},
                {"bin_width_hz", sample.bin_width_hz},
                {"in_band", sample.in_band},
                {"window", sample.window == WindowKind::hann ? "hann" : "rectangular"},
                {"force_amp", forces},
                {"disp_amp", disps}};
}

inline Json noise_json(const NoiseEstimate& estimate) {
    return Json{{"schema", "elastoscan-noise v1"},
                {"delta", estimate.delta},
                {"method", estimate.method},
                {"repeats_used", estimate.repeats_used}};
}

// Full record of one reconstruction: parameters, per-box spectra and
// decisions, the accepted set after outer completion, and any warnings.
inline Json reconstruction_report_json(const Mesh& mesh, const TestInclusionGrid& grid,
                                       const ReconstructionResult& result, double frequency_hz,
                                       const std::optional<AssumptionReport>& assumption,
                                       const std::vector<std::string>& warnings,
                                       bool reproducible) {
    Json params{{"alphas", result.parameters.alphas},
                {"delta", result.parameters.delta},
                {"m_tilde_used", result.m_tilde_used},
                {"auto_threshold", result.auto_threshold},
                {"rho_sign", result.parameters.rho_sign}};

    Json boxes = Json::array();
    for (size_t k = 0; k < result.outcomes.size(); ++k) {
        const TestOutcome& o = result.outcomes[k];
        RegionMask in_box = box_elements(mesh, grid.boxes[k]);
        bool completed = true;
        for (size_t e = 0; e < in_box.size(); ++e)
            if (in_box.at(e) && !result.completed_mask.at(e)) {
                completed = false;
                break;
            }
        boxes.push_back(Json{{"id", o.box_id},
                             {"negative_count", o.negative_count},
                             {"member_counts", result.member_counts[k]},
                             {"eigenvalues", o.eigenvalues},
                             {"accepted", o.inside},
                             {"null_data", o.null_data},
                             {"completed", completed}});
    }

    Json report{{"schema", "elastoscan-report v1"},
                {"frequency_hz", frequency_hz},
                {"omega_rad_s", result.omega},
                {"parameters", params},
                {"grid", Json{{"nx", grid.nx}, {"ny", grid.ny}}},
                {"boxes", boxes},
                {"accepted", result.accepted},
                {"assumption", assumption ? assumption_json(*assumption) : Json(nullptr)},
                {"warnings", warnings}};
    if (!reproducible) report["generated_at"] = detail::utc_timestamp();
    return report;
}

// Reconstruction grid as a standalone SVG: accepted boxes red, rejected
// green, row 0 at the bottom to match plate coordinates.
inline std::string render_grid_svg(int nx, int ny, const std::vector<int>& accepted,
                                   double frequency_hz, bool reproducible) {
    if (nx < 1 || ny < 1) throw ConfigError("grid dimensions must be >= 1");
    std::vector<char> is_accepted(static_cast<size_t>(nx) * ny, 0);
    for (int id : accepted) {
        if (id < 0 || id >= nx * ny) throw ConfigError("accepted box id out of range");
        is_accepted[id] = 1;
    }

    const int cell = 40, margin = 20, title_h = 34, legend_h = 46;
    const int width = 2 * margin + nx * cell;
    const int height = title_h + ny * cell + legend_h + margin;
    const char* red = "#c0392b";
    const char* green = "#27ae60";

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
           std::to_string(width) + " " + std::to_string(height) + "\">\n";
    if (!reproducible)
        svg += "<!-- generated " + detail::utc_timestamp() + " -->\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
    svg += "<text x=\"" + std::to_string(margin) + "\" y=\"22\" font-family=\"sans-serif\" "
           "font-size=\"15\">reconstruction, " +
           detail::format_short(frequency_hz) + " Hz</text>\n";
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            int id = i + nx * j;
            int x = margin + i * cell;
            int y = title_h + (ny - 1 - j) * cell;
            svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) +
                   "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
                   "\" fill=\"" + (is_accepted[id] ? red : green) +
                   "\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
        }
    int ly = title_h + ny * cell + 18;
    svg += "<rect x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(ly) +
           "\" width=\"14\" height=\"14\" fill=\"" + std::string(red) + "\"/>\n";
    svg += "<text x=\"" + std::to_string(margin + 20) + "\" y=\"" + std::to_string(ly + 12) +
           "\" font-family=\"sans-serif\" font-size=\"12\">accepted (in the inclusion set)"
           "</text>\n";
    int lx2 = margin + 240;
    svg += "<rect x=\"" + std::to_string(lx2) + "\" y=\"" + std::to_string(ly) +
           "\" width=\"14\" height=\"14\" fill=\"" + std::string(green) + "\"/>\n";
    svg += "<text x=\"" + std::to_string(lx2 + 20) + "\" y=\"" + std::to_string(ly + 12) +
           "\" font-family=\"sans-serif\" font-size=\"12\">rejected</text>\n";
    svg += "</svg>\n";
    return svg;
}

} // namespace elastoscan
