#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/fem.hpp"
#include "elastoscan/material.hpp"
#include "elastoscan/mesh.hpp"

namespace elastoscan {

struct LoadBasis {
    std::vector<BoundaryLoad> loads;
    std::vector<std::string> labels;

    int size() const { return static_cast<int>(loads.size()); }
};

// Unit tractions in each coordinate direction per facet group. Groups index
// into the mesh's Neumann facet list; empty groups produce no loads.
inline LoadBasis build_load_basis(const Mesh& mesh, const std::vector<std::vector<int>>& groups,
                                  const std::vector<std::string>& group_names = {}) {
    auto neumann = mesh.facets_with_tag(FacetTag::neumann);
    if (neumann.empty()) throw EmptyPatchError("mesh has no Neumann facets");
    LoadBasis basis;
    const char* axis = "xyz";
    for (size_t g = 0; g < groups.size(); ++g) {
        for (int fi : groups[g])
            if (fi < 0 || fi >= static_cast<int>(neumann.size()))
                throw DimensionError("facet group index out of range");
        if (groups[g].empty()) continue;
        for (int d = 0; d < 3; ++d) {
            BoundaryLoad load;
            load.traction.assign(neumann.size(), Eigen::Vector3d::Zero());
            for (int fi : groups[g]) load.traction[fi][d] = 1.0;
            basis.loads.push_back(std::move(load));
            std::string name = g < group_names.size() ? group_names[g]
                                                      : "group" + std::to_string(g);
            basis.labels.push_back(name + ":" + axis[d]);
        }
    }
    if (basis.loads.empty()) throw EmptyPatchError("load basis is empty after pruning");
    return basis;
}

// Default partition: one group per Neumann patch.
inline LoadBasis build_load_basis(const Mesh& mesh, const PlateGeometry& geometry) {
    auto neumann = mesh.facets_with_tag(FacetTag::neumann);
    if (neumann.empty()) throw EmptyPatchError("mesh has no Neumann facets");
    int npatch = static_cast<int>(geometry.neumann_patches.size());
    std::vector<std::vector<int>> groups(npatch);
    for (size_t i = 0; i < neumann.size(); ++i) {
        int p = mesh.facets[neumann[i]].patch_id;
        if (p >= 0 && p < npatch) groups[p].push_back(static_cast<int>(i));
    }
    std::vector<std::string> names;
    for (const auto& p : geometry.neumann_patches) names.push_back(p.name);
    return build_load_basis(mesh, groups, names);
}

// L^2(Gamma_N) inner products of the basis loads.
inline Eigen::MatrixXd basis_gram(const Mesh& mesh, const LoadBasis& basis) {
    auto neumann = mesh.facets_with_tag(FacetTag::neumann);
    int m = basis.size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
            double s = 0.0;
            for (size_t f = 0; f < neumann.size(); ++f)
                s += mesh.facets[neumann[f]].area *
                     basis.loads[i].traction[f].dot(basis.loads[j].traction[f]);
            G(i, j) = G(j, i) = s;
        }
    return G;
}

inline std::vector<DisplacementField> solve_basis(const AssembledSystem& sys, const Mesh& mesh,
                                                  const LoadBasis& basis) {
    std::vector<DisplacementField> out;
    out.reserve(basis.loads.size());
    for (const auto& g : basis.loads) out.push_back(solve_forward(sys, mesh, g));
    return out;
}

struct NtDMatrix {
    Eigen::MatrixXd entries;
    double omega = 0.0;
    std::string material_tag;
};

// Largest eigenvalue magnitude of a symmetric matrix.
inline double symmetric_spectral_norm(const Eigen::MatrixXd& A) {
    if (A.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline NtDMatrix ntd_matrix(const Mesh& mesh, const MaterialField& materials,
                            const FrequencyConfig& freq, const LoadBasis& basis,
                            std::string material_tag = {}) {
    AssembledSystem sys = assemble(mesh, materials, freq);
    std::vector<DisplacementField> u = solve_basis(sys, mesh, basis);

    const int m = basis.size();
    Eigen::MatrixXd L(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) L(i, j) = boundary_pairing(mesh, basis.loads[i], u[j]);

    double scale = L.cwiseAbs().maxCoeff();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            double ef = energy_form(mesh, u[i], u[j], materials, freq);
            if (std::abs(L(i, j) - ef) > 1e-8 * scale)
                throw InvalidMatrixError("boundary pairing disagrees with the energy form at (" +
                                         std::to_string(i) + "," + std::to_string(j) + ")");
        }

    NtDMatrix out;
    out.entries = 0.5 * (L + L.transpose());
    out.omega = freq.omega;
    out.material_tag = std::move(material_tag);
    return out;
}

// Per-element coefficient perturbation (h_lambda, h_mu, h_rho); any sign.
struct PerturbationField {
    std::vector<double> lambda;
    std::vector<double> mu;
    std::vector<double> rho;
};

struct FrechetOperator {
    Eigen::MatrixXd entries;
    RegionMask region;
    std::array<double, 3> alpha{};   // (alpha1, alpha2, alpha3)
    int sign_rho = -1;
};

// Precomputes per-element pair integrals of the background solutions so that
// derivative matrices over many regions and coefficient choices reuse the
// same quadrature data.
class FrechetAssembler {
public:
    struct Components {
        Eigen::MatrixXd shear;   // \int_B grad^s u_i : grad^s u_j dx
        Eigen::MatrixXd div;     // \int_B (div u_i)(div u_j) dx
        Eigen::MatrixXd mass;    // \int_B u_i . u_j dx
    };

    FrechetAssembler(const Mesh& mesh, const std::vector<DisplacementField>& solutions,
                     const FrequencyConfig& freq)
        : mesh_(&mesh), omega_(freq.omega), m_(static_cast<int>(solutions.size())) {
        detail::HexQuadrature quad(mesh.hx, mesh.hy, mesh.hz);
        const int ne = mesh.element_count();
        shear_.assign(ne, Eigen::MatrixXd::Zero(m_, m_));
        div_.assign(ne, Eigen::MatrixXd::Zero(m_, m_));
        mass_.assign(ne, Eigen::MatrixXd::Zero(m_, m_));
        std::vector<Eigen::Matrix3d> eps(m_);
        std::vector<double> dv(m_);
        std::vector<Eigen::Vector3d> uval(m_);
        for (int e = 0; e < ne; ++e) {
            const auto& conn = mesh.elements[e];
            for (int q = 0; q < 8; ++q) {
                for (int i = 0; i < m_; ++i) {
                    Eigen::Matrix3d grad = Eigen::Matrix3d::Zero();
                    Eigen::Vector3d val = Eigen::Vector3d::Zero();
                    for (int a = 0; a < 8; ++a) {
                        Eigen::Vector3d ua = solutions[i].u.segment<3>(3 * conn[a]);
                        grad += ua * quad.dN[q][a].transpose();
                        val += quad.N[q][a] * ua;
                    }
                    eps[i] = 0.5 * (grad + grad.transpose());
                    dv[i] = grad.trace();
                    uval[i] = val;
                }
                for (int i = 0; i < m_; ++i)
                    for (int j = i; j < m_; ++j) {
                        double s = eps[i].cwiseProduct(eps[j]).sum() * quad.detJ;
                        double d = dv[i] * dv[j] * quad.detJ;
                        double u = uval[i].dot(uval[j]) * quad.detJ;
                        shear_[e](i, j) += s;
                        div_[e](i, j) += d;
                        mass_[e](i, j) += u;
                        if (j != i) {
                            shear_[e](j, i) = shear_[e](i, j);
                            div_[e](j, i) = div_[e](i, j);
                            mass_[e](j, i) = mass_[e](i, j);
                        }
                    }
            }
        }
    }

    int basis_size() const { return m_; }

    Components components(const RegionMask& region) const {
        if (static_cast<int>(region.size()) != mesh_->element_count())
            throw DimensionError("region mask does not match mesh");
        Components c{Eigen::MatrixXd::Zero(m_, m_), Eigen::MatrixXd::Zero(m_, m_),
                     Eigen::MatrixXd::Zero(m_, m_)};
        for (int e = 0; e < mesh_->element_count(); ++e)
            if (region.at(e)) {
                c.shear += shear_[e];
                c.div += div_[e];
                c.mass += mass_[e];
            }
        return c;
    }

    // F_ij = -\int_B 2 a2 grad^s u_i : grad^s u_j + a1 div u_i div u_j
    //        - w^2 (sign_rho a3) u_i . u_j dx
    Eigen::MatrixXd matrix(const Components& c, const std::array<double, 3>& alpha,
                           int sign_rho) const {
        return -2.0 * alpha[1] * c.shear - alpha[0] * c.div +
               omega_ * omega_ * (sign_rho * alpha[2]) * c.mass;
    }

    // General coefficient fields: F_ij = -\int 2 h_mu ... + h_lambda ...
    //                                    - w^2 h_rho u_i . u_j dx
    Eigen::MatrixXd field_matrix(const PerturbationField& h) const {
        if (static_cast<int>(h.lambda.size()) != mesh_->element_count() ||
            static_cast<int>(h.mu.size()) != mesh_->element_count() ||
            static_cast<int>(h.rho.size()) != mesh_->element_count())
            throw DimensionError("perturbation field does not match element count");
        Eigen::MatrixXd F = Eigen::MatrixXd::Zero(m_, m_);
        for (int e = 0; e < mesh_->element_count(); ++e)
            F += -2.0 * h.mu[e] * shear_[e] - h.lambda[e] * div_[e] +
                 omega_ * omega_ * h.rho[e] * mass_[e];
        return F;
    }

private:
    const Mesh* mesh_;
    double omega_;
    int m_;
    std::vector<Eigen::MatrixXd> shear_, div_, mass_;
};

inline FrechetOperator frechet_matrix(const Mesh& mesh,
                                      const std::vector<DisplacementField>& background_solutions,
                                      const RegionMask& region,
                                      const std::array<double, 3>& alpha, int sign_rho,
                                      const FrequencyConfig& freq) {
    FrechetAssembler assembler(mesh, background_solutions, freq);
    FrechetOperator op;
    op.entries = assembler.matrix(assembler.components(region), alpha, sign_rho);
    op.region = region;
    op.alpha = alpha;
    op.sign_rho = sign_rho;
    return op;
}

inline FrechetOperator frechet_matrix(const Mesh& mesh,
                                      const std::vector<DisplacementField>& background_solutions,
                                      const Box& box, const std::array<double, 3>& alpha,
                                      int sign_rho, const FrequencyConfig& freq) {
    if (!box_is_element_aligned(mesh, box))
        throw AlignmentError("test inclusion box is not a union of mesh elements");
    return frechet_matrix(mesh, background_solutions, box_elements(mesh, box), alpha, sign_rho,
                          freq);
}

inline Eigen::MatrixXd frechet_field_matrix(const Mesh& mesh,
                                            const std::vector<DisplacementField>& solutions,
                                            const PerturbationField& h,
                                            const FrequencyConfig& freq) {
    return FrechetAssembler(mesh, solutions, freq).field_matrix(h);
}

struct ConvergenceRow {
    double t = 0.0;
    double remainder = 0.0;   // spectral norm of L(p + t h) - L(p) - t L'(p)[h]
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;

    // Least-squares slope of log(remainder) against log(t), skipping rows
    // with zero remainder.
    double fitted_slope() const {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (const auto& r : rows) {
            if (!(r.remainder > 0.0) || !(r.t > 0.0)) continue;
            double x = std::log(r.t), y = std::log(r.remainder);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
            ++n;
        }
        if (n < 2) return 0.0;
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }
};

inline ConvergenceReport frechet_convergence_report(const Mesh& mesh,
                                                    const MaterialField& materials,
                                                    const FrequencyConfig& freq,
                                                    const LoadBasis& basis,
                                                    const PerturbationField& h,
                                                    const std::vector<double>& t_values) {
    for (size_t i = 0; i < t_values.size(); ++i) {
        if (!(t_values[i] > 0.0)) throw ConfigError("perturbation steps must be positive");
        if (i > 0 && !(t_values[i] < t_values[i - 1]))
            throw ConfigError("perturbation steps must decrease");
    }

    NtDMatrix L0 = ntd_matrix(mesh, materials, freq, basis, "base");
    AssembledSystem sys = assemble(mesh, materials, freq);
    Eigen::MatrixXd F =
        frechet_field_matrix(mesh, solve_basis(sys, mesh, basis), h, freq);

    ConvergenceReport report;
    for (double t : t_values) {
        MaterialField stepped = materials;
        for (int e = 0; e < mesh.element_count(); ++e) {
            stepped.lambda[e] += t * h.lambda[e];
            stepped.mu[e] += t * h.mu[e];
            stepped.rho[e] += t * h.rho[e];
        }
        NtDMatrix Lt = ntd_matrix(mesh, stepped, freq, basis, "stepped");
        Eigen::MatrixXd R = Lt.entries - L0.entries - t * F;
        report.rows.push_back({t, symmetric_spectral_norm(R)});
    }
    return report;
}

} // namespace elastoscan
