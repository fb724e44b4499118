#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/fem.hpp"
#include "elastoscan/material.hpp"
#include "elastoscan/mesh.hpp"
#include "elastoscan/ntd.hpp"

namespace elastoscan {

// Parameters of a single eigenvalue-count test: the linearization weights
// alpha = (alpha1 [Pa], alpha2 [Pa], alpha3 [kg/m^3]), the noise threshold
// delta in NtD spectral-norm units, the non-strict count bound M_l, and the
// sign of the density term (-1 tests denser inclusions, +1 lighter ones).
struct TestParameters {
    std::array<double, 3> alpha{0.0, 0.0, 0.0};
    double delta = 0.0;
    int m_l = 0;
    int rho_sign = -1;

    void validate() const {
        for (double a : alpha)
            if (!std::isfinite(a) || a < 0.0)
                throw ConfigError("alpha components must be finite and >= 0");
        if (!std::isfinite(delta) || delta < 0.0)
            throw ConfigError("delta must be finite and >= 0");
        if (m_l < 0)
            throw ConfigError("M_l must be >= 0");
        if (rho_sign != 1 && rho_sign != -1)
            throw ConfigError("rho_sign must be +1 or -1");
    }
};

struct TestOutcome {
    int box_id = -1;
    int negative_count = 0;
    std::vector<double> eigenvalues;   // ascending
    bool inside = false;
    bool null_data = false;            // test matrix was exactly zero
};

// Full symmetric eigendecomposition; counts eigenvalues strictly below
// -threshold. A symmetry defect below 1e-10 relative is tolerated, larger
// defects are symmetrized before decomposing.
inline std::pair<int, std::vector<double>> count_negative_eigenvalues(Eigen::MatrixXd matrix,
                                                                      double threshold) {
    if (matrix.rows() != matrix.cols() || matrix.rows() == 0)
        throw InvalidMatrixError("eigenvalue count requires a square non-empty matrix");
    if (!matrix.allFinite())
        throw InvalidMatrixError("matrix has non-finite entries");
    if (!std::isfinite(threshold) || threshold < 0.0)
        throw ConfigError("eigenvalue threshold must be finite and >= 0");

    double defect = (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
    if (defect > 0.0)
        matrix = 0.5 * (matrix + matrix.transpose()).eval();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(matrix, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw InvalidMatrixError("symmetric eigendecomposition failed");

    std::vector<double> eigs(es.eigenvalues().data(), es.eigenvalues().data() + matrix.rows());
    int count = 0;
    for (double s : eigs)
        if (s < -threshold) ++count;
    return {count, std::move(eigs)};
}

namespace detail {

inline void require_matching_ntd(const NtDMatrix& L0, const NtDMatrix& Lmeas, int basis_size,
                                 const FrequencyConfig& freq) {
    if (L0.entries.rows() != basis_size || L0.entries.cols() != basis_size ||
        Lmeas.entries.rows() != basis_size || Lmeas.entries.cols() != basis_size)
        throw DimensionError("NtD matrices do not match the load basis size");
    double wscale = std::max(1.0, std::abs(freq.omega));
    if (std::abs(L0.omega - freq.omega) > 1e-12 * wscale ||
        std::abs(Lmeas.omega - freq.omega) > 1e-12 * wscale)
        throw ConfigError("NtD matrices were computed at a different frequency");
}

} // namespace detail

// Single shape test for one element-aligned box: forms
// T = L0 + F[alpha1 chi_B, alpha2 chi_B, rho_sign alpha3 chi_B] - Lmeas
// and decides inside iff the count of eigenvalues below -delta is <= M_l.
inline TestOutcome monotonicity_test(const Mesh& mesh,
                                     const std::vector<DisplacementField>& background_solutions,
                                     const Box& box, const NtDMatrix& L0, const NtDMatrix& Lmeas,
                                     const TestParameters& params, const FrequencyConfig& freq,
                                     int box_id = 0) {
    params.validate();
    const int m = static_cast<int>(background_solutions.size());
    detail::require_matching_ntd(L0, Lmeas, m, freq);

    FrechetOperator F =
        frechet_matrix(mesh, background_solutions, box, params.alpha, params.rho_sign, freq);
    Eigen::MatrixXd T = L0.entries + F.entries - Lmeas.entries;

    TestOutcome out;
    out.box_id = box_id;
    out.null_data = T.cwiseAbs().maxCoeff() == 0.0;
    auto [count, eigs] = count_negative_eigenvalues(T, params.delta);
    out.negative_count = count;
    out.eigenvalues = std::move(eigs);
    out.inside = count <= params.m_l;
    return out;
}

// Gap heuristic for the count threshold: sorts the per-box counts and
// returns the value at the lower edge of the largest consecutive gap, ties
// going to the smaller threshold. Boxes inside the inclusion show markedly
// fewer negative eigenvalues, so the widest gap separates the two groups.
inline int select_threshold(std::vector<int> counts) {
    if (counts.size() < 2)
        throw InsufficientDataError("threshold selection needs counts from at least 2 boxes");
    std::sort(counts.begin(), counts.end());
    int best_gap = 0;
    int best_value = counts.front();
    for (size_t i = 1; i < counts.size(); ++i) {
        int gap = counts[i] - counts[i - 1];
        if (gap > best_gap) {
            best_gap = gap;
            best_value = counts[i - 1];
        }
    }
    if (best_gap == 0)
        throw NoGapError("all per-box counts are equal; supply M_l explicitly");
    return best_value;
}

// Frequency-validity check: the linearized tests assume the stiffness
// contrast dominates the inertial contrast,
//   sum_i int 2 (mu-mu0) |grad^s u0_i|^2 + (lambda-lambda0) (div u0_i)^2 dx
//     > sum_i int omega^2 (rho-rho0) |u0_i|^2 dx,
// summed over the basis loads with u0 solved on the background.
struct AssumptionReport {
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

inline AssumptionReport check_assumption(const Mesh& mesh,
                                         const std::vector<DisplacementField>& background_solutions,
                                         const MaterialField& true_materials,
                                         const MaterialField& background_materials,
                                         const FrequencyConfig& freq) {
    if (true_materials.element_count() != mesh.element_count() ||
        background_materials.element_count() != mesh.element_count())
        throw DimensionError("material fields do not match the mesh");

    const int ne = mesh.element_count();
    PerturbationField stiff{std::vector<double>(ne), std::vector<double>(ne),
                            std::vector<double>(ne, 0.0)};
    PerturbationField inert{std::vector<double>(ne, 0.0), std::vector<double>(ne, 0.0),
                            std::vector<double>(ne)};
    for (int e = 0; e < ne; ++e) {
        stiff.lambda[e] = true_materials.lambda[e] - background_materials.lambda[e];
        stiff.mu[e] = true_materials.mu[e] - background_materials.mu[e];
        inert.rho[e] = true_materials.rho[e] - background_materials.rho[e];
    }

    FrechetAssembler assembler(mesh, background_solutions, freq);
    AssumptionReport report;
    report.lhs = -assembler.field_matrix(stiff).trace();
    report.rhs = assembler.field_matrix(inert).trace();
    report.holds = report.lhs > report.rhs;
    return report;
}

// Locates the frequency where the assumption above stops holding by a
// geometric scan over [lo, hi] Hz followed by bisection. Frequencies that
// hit a resonance of the background model are skipped and recorded.
struct AssumptionSweepResult {
    bool found = false;
    double f_star_hz = std::numeric_limits<double>::quiet_NaN();
    double lo_hz = 0.0;            // assumption holds here
    double hi_hz = 0.0;            // assumption fails here
    std::vector<double> skipped_hz;
};

inline AssumptionSweepResult assumption_failure_frequency(const Mesh& mesh, const LoadBasis& basis,
                                                          const MaterialField& true_materials,
                                                          const MaterialField& background_materials,
                                                          double lo_hz, double hi_hz,
                                                          int scan_steps = 24,
                                                          double tol_hz = 0.5) {
    if (!(lo_hz > 0.0) || !(hi_hz > lo_hz))
        throw ConfigError("frequency sweep needs 0 < lo < hi");
    if (scan_steps < 2)
        throw ConfigError("frequency sweep needs at least 2 scan steps");
    if (!(tol_hz > 0.0))
        throw ConfigError("frequency sweep tolerance must be positive");

    AssumptionSweepResult result;
    auto holds_at = [&](double f_hz) -> std::optional<bool> {
        FrequencyConfig freq = FrequencyConfig::from_hz(f_hz);
        try {
            AssembledSystem sys = assemble(mesh, background_materials, freq);
            auto u0 = solve_basis(sys, mesh, basis);
            return check_assumption(mesh, u0, true_materials, background_materials, freq).holds;
        } catch (const ResonanceError&) {
            result.skipped_hz.push_back(f_hz);
            return std::nullopt;
        }
    };

    double prev_f = 0.0;
    bool have_prev = false;
    bool prev_holds = false;
    double ratio = std::pow(hi_hz / lo_hz, 1.0 / (scan_steps - 1));
    for (int s = 0; s < scan_steps; ++s) {
        double f = lo_hz * std::pow(ratio, s);
        std::optional<bool> h = holds_at(f);
        if (!h) continue;
        if (have_prev && prev_holds && !*h) {
            result.lo_hz = prev_f;
            result.hi_hz = f;
            result.found = true;
            break;
        }
        prev_f = f;
        prev_holds = *h;
        have_prev = true;
    }
    if (!result.found)
        return result;

    while (result.hi_hz - result.lo_hz > tol_hz) {
        double mid = 0.5 * (result.lo_hz + result.hi_hz);
        std::optional<bool> h = holds_at(mid);
        for (int nudge = 0; !h && nudge < 3; ++nudge) {
            mid += 0.01 * (result.hi_hz - result.lo_hz);
            if (mid >= result.hi_hz) break;
            h = holds_at(mid);
        }
        if (!h) break;
        (*h ? result.lo_hz : result.hi_hz) = mid;
    }
    result.f_star_hz = 0.5 * (result.lo_hz + result.hi_hz);
    return result;
}

// Parameters for the full grid reconstruction. The alpha sweep realizes the
// algorithm's "for every admissible parameter" loop; a box passes only when
// every sweep member accepts it, i.e. the decisive count is the maximum over
// the sweep. m_tilde is the strict accept bound (count < m_tilde); when
// unset it is chosen from the count gap, m_tilde = select_threshold + 1.
struct ReconstructParameters {
    std::vector<std::array<double, 3>> alphas;
    double delta = 0.0;
    std::optional<int> m_tilde;
    int rho_sign = -1;

    void validate() const {
        if (alphas.empty())
            throw ConfigError("reconstruction needs at least one alpha sweep member");
        for (const auto& a : alphas)
            for (double v : a)
                if (!std::isfinite(v) || v < 0.0)
                    throw ConfigError("alpha components must be finite and >= 0");
        if (!std::isfinite(delta) || delta < 0.0)
            throw ConfigError("delta must be finite and >= 0");
        if (m_tilde && *m_tilde < 0)
            throw ConfigError("m_tilde must be >= 0");
        if (rho_sign != 1 && rho_sign != -1)
            throw ConfigError("rho_sign must be +1 or -1");
    }
};

inline std::vector<std::array<double, 3>> default_alpha_sweep(double lambda_contrast,
                                                              double rho_contrast) {
    double psi_l = std::abs(lambda_contrast);
    double psi_r = std::abs(rho_contrast);
    std::vector<std::array<double, 3>> sweep;
    for (double g : {1e-3, 1e-2, 1e-1})
        sweep.push_back({g * psi_l, g * psi_l, psi_r});
    return sweep;
}

struct ReconstructionResult {
    std::vector<TestOutcome> outcomes;             // box-index order
    std::vector<std::vector<int>> member_counts;   // per box, per sweep member
    std::vector<int> accepted;
    RegionMask completed_mask;
    ReconstructParameters parameters;
    int m_tilde_used = 0;
    bool auto_threshold = false;
    double omega = 0.0;
};

// Grid reconstruction: every box is tested against the whole alpha sweep,
// its count is the maximum over the sweep, and boxes with count < m_tilde
// are accepted. The union of accepted boxes is closed under outer-support
// completion (enclosed cavities cannot be distinguished from the boundary).
inline ReconstructionResult reconstruct(const Mesh& mesh, const TestInclusionGrid& grid,
                                        const NtDMatrix& L0, const NtDMatrix& Lmeas,
                                        const std::vector<DisplacementField>& background_solutions,
                                        const ReconstructParameters& params,
                                        const FrequencyConfig& freq) {
    params.validate();
    const int m = static_cast<int>(background_solutions.size());
    detail::require_matching_ntd(L0, Lmeas, m, freq);

    ReconstructionResult result;
    result.parameters = params;
    result.omega = freq.omega;
    result.completed_mask = RegionMask(mesh.element_count());
    result.auto_threshold = !params.m_tilde.has_value();
    if (grid.boxes.empty()) {
        result.m_tilde_used = params.m_tilde.value_or(0);
        return result;
    }

    FrechetAssembler assembler(mesh, background_solutions, freq);
    for (size_t k = 0; k < grid.boxes.size(); ++k) {
        const Box& box = grid.boxes[k];
        if (!box_is_element_aligned(mesh, box))
            throw AlignmentError("test inclusion box is not a union of mesh elements");
        FrechetAssembler::Components comps = assembler.components(box_elements(mesh, box));

        TestOutcome outcome;
        outcome.box_id = static_cast<int>(k);
        outcome.negative_count = -1;
        outcome.null_data = true;
        std::vector<int> counts;
        counts.reserve(params.alphas.size());
        for (const auto& alpha : params.alphas) {
            Eigen::MatrixXd T =
                L0.entries + assembler.matrix(comps, alpha, params.rho_sign) - Lmeas.entries;
            if (T.cwiseAbs().maxCoeff() != 0.0) outcome.null_data = false;
            auto [count, eigs] = count_negative_eigenvalues(T, params.delta);
            counts.push_back(count);
            if (count > outcome.negative_count) {
                outcome.negative_count = count;
                outcome.eigenvalues = std::move(eigs);
            }
        }
        result.member_counts.push_back(std::move(counts));
        result.outcomes.push_back(std::move(outcome));
    }

    if (params.m_tilde) {
        result.m_tilde_used = *params.m_tilde;
    } else {
        std::vector<int> all_counts;
        all_counts.reserve(result.outcomes.size());
        for (const TestOutcome& o : result.outcomes) all_counts.push_back(o.negative_count);
        result.m_tilde_used = select_threshold(all_counts) + 1;
    }

    RegionMask accepted_union(mesh.element_count());
    for (TestOutcome& o : result.outcomes) {
        o.inside = o.negative_count < result.m_tilde_used;
        if (!o.inside) continue;
        result.accepted.push_back(o.box_id);
        RegionMask cell = box_elements(mesh, grid.boxes[o.box_id]);
        for (size_t e = 0; e < cell.size(); ++e)
            if (cell.at(e)) accepted_union.set(e);
    }
    result.completed_mask = outer_support_completion(accepted_union, mesh);
    return result;
}

// Direct numeric check of the monotonicity bounds underlying the tests.
// For the lower bound, per basis load g_i,
//   lhs_i = [L2 - L1]_ii,
//   rhs_i = int 2 (mu1-mu2) |grad^s u1_i|^2 + (lambda1-lambda2) (div u1_i)^2
//           + omega^2 (rho2-rho1) |u1_i|^2 dx,
// and margin_i = lhs_i - rhs_i must be >= 0 up to the finite test space.
struct MonotonicityCheckReport {
    std::vector<double> lhs;
    std::vector<double> rhs;
    std::vector<double> margin;

    int violations(double rel_tol = 1e-8) const {
        int n = 0;
        for (size_t i = 0; i < margin.size(); ++i) {
            double scale = std::max(std::abs(lhs[i]), std::abs(rhs[i]));
            if (margin[i] < -rel_tol * scale) ++n;
        }
        return n;
    }
};

namespace detail {

inline PerturbationField material_gap_field(const MaterialField& materials1,
                                            const MaterialField& materials2) {
    const size_t ne = materials1.lambda.size();
    if (materials2.lambda.size() != ne)
        throw DimensionError("material fields have different element counts");
    PerturbationField h{std::vector<double>(ne), std::vector<double>(ne),
                        std::vector<double>(ne)};
    for (size_t e = 0; e < ne; ++e) {
        h.lambda[e] = -(materials1.lambda[e] - materials2.lambda[e]);
        h.mu[e] = -(materials1.mu[e] - materials2.mu[e]);
        h.rho[e] = materials2.rho[e] - materials1.rho[e];
    }
    return h;
}

} // namespace detail

inline MonotonicityCheckReport verify_monotonicity_lower(const Mesh& mesh,
                                                         const MaterialField& materials1,
                                                         const MaterialField& materials2,
                                                         const FrequencyConfig& freq,
                                                         const LoadBasis& basis) {
    NtDMatrix L1 = ntd_matrix(mesh, materials1, freq, basis);
    NtDMatrix L2 = ntd_matrix(mesh, materials2, freq, basis);
    AssembledSystem sys1 = assemble(mesh, materials1, freq);
    std::vector<DisplacementField> u1 = solve_basis(sys1, mesh, basis);

    FrechetAssembler assembler(mesh, u1, freq);
    Eigen::MatrixXd R = assembler.field_matrix(detail::material_gap_field(materials1, materials2));

    MonotonicityCheckReport report;
    const int m = static_cast<int>(u1.size());
    for (int i = 0; i < m; ++i) {
        report.lhs.push_back(L2.entries(i, i) - L1.entries(i, i));
        report.rhs.push_back(R(i, i));
        report.margin.push_back(report.lhs.back() - report.rhs.back());
    }
    return report;
}

// Upper bound: the same integrand evaluated on u2 plus the correction
// omega^2 int rho1 |u1_i - u2_i|^2 dx; margin_i = rhs_i - lhs_i.
inline MonotonicityCheckReport verify_monotonicity_upper(const Mesh& mesh,
                                                         const MaterialField& materials1,
                                                         const MaterialField& materials2,
                                                         const FrequencyConfig& freq,
                                                         const LoadBasis& basis) {
    NtDMatrix L1 = ntd_matrix(mesh, materials1, freq, basis);
    NtDMatrix L2 = ntd_matrix(mesh, materials2, freq, basis);
    AssembledSystem sys1 = assemble(mesh, materials1, freq);
    AssembledSystem sys2 = assemble(mesh, materials2, freq);
    std::vector<DisplacementField> u1 = solve_basis(sys1, mesh, basis);
    std::vector<DisplacementField> u2 = solve_basis(sys2, mesh, basis);

    FrechetAssembler assembler2(mesh, u2, freq);
    Eigen::MatrixXd R = assembler2.field_matrix(detail::material_gap_field(materials1, materials2));

    std::vector<DisplacementField> w(u1.size());
    for (size_t i = 0; i < u1.size(); ++i) w[i].u = u1[i].u - u2[i].u;
    FrechetAssembler assembler_w(mesh, w, freq);
    PerturbationField mass_weight{std::vector<double>(mesh.element_count(), 0.0),
                                  std::vector<double>(mesh.element_count(), 0.0),
                                  materials1.rho};
    Eigen::MatrixXd C = assembler_w.field_matrix(mass_weight);

    MonotonicityCheckReport report;
    const int m = static_cast<int>(u1.size());
    for (int i = 0; i < m; ++i) {
        report.lhs.push_back(L2.entries(i, i) - L1.entries(i, i));
        report.rhs.push_back(R(i, i) + C(i, i));
        report.margin.push_back(report.rhs.back() - report.lhs.back());
    }
    return report;
}

} // namespace elastoscan
