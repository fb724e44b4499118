#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "elastoscan/errors.hpp"
#include "elastoscan/material.hpp"
#include "elastoscan/mesh.hpp"

namespace elastoscan {

inline Eigen::Matrix3d apply_hooke(const Eigen::Matrix3d& strain, double lambda, double mu) {
    return 2.0 * mu * strain + lambda * strain.trace() * Eigen::Matrix3d::Identity();
}

// Piecewise-constant traction, one 3-vector per Neumann facet in mesh facet
// order (see Mesh::facets_with_tag).
struct BoundaryLoad {
    std::vector<Eigen::Vector3d> traction;
};

struct DisplacementField {
    Eigen::VectorXd u;   // 3 entries per node, node-major

    Eigen::Vector3d at_node(int n) const { return u.segment<3>(3 * n); }
};

struct SourceData {
    std::vector<Eigen::Vector3d> body_force;        // per element, N/m^3
    std::vector<Eigen::Matrix3d> stress_source;     // per element, Pa
};

namespace detail {

// Quadrature data for the constant-Jacobian trilinear hexahedron: shape
// values and physical gradients at the 2x2x2 Gauss points.
struct HexQuadrature {
    std::array<std::array<double, 8>, 8> N{};        // [qp][node]
    std::array<std::array<Eigen::Vector3d, 8>, 8> dN{};
    double detJ = 0.0;

    HexQuadrature(double hx, double hy, double hz) {
        const double gp = 1.0 / std::sqrt(3.0);
        detJ = hx * hy * hz / 8.0;
        for (int q = 0; q < 8; ++q) {
            double xi = (q & 1) ? gp : -gp;
            double eta = ((q >> 1) & 1) ? gp : -gp;
            double zeta = ((q >> 2) & 1) ? gp : -gp;
            for (int a = 0; a < 8; ++a) {
                double sx = (a & 1) ? 1.0 : -1.0;
                double sy = ((a >> 1) & 1) ? 1.0 : -1.0;
                double sz = ((a >> 2) & 1) ? 1.0 : -1.0;
                double fx = 1.0 + sx * xi, fy = 1.0 + sy * eta, fz = 1.0 + sz * zeta;
                N[q][a] = 0.125 * fx * fy * fz;
                dN[q][a] = {0.125 * sx * fy * fz * 2.0 / hx,
                            0.125 * fx * sy * fz * 2.0 / hy,
                            0.125 * fx * fy * sz * 2.0 / hz};
            }
        }
    }
};

inline Eigen::Matrix<double, 6, 6> isotropic_stress_strain(double lambda, double mu) {
    Eigen::Matrix<double, 6, 6> D = Eigen::Matrix<double, 6, 6>::Zero();
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) D(i, j) = lambda;
        D(i, i) += 2.0 * mu;
        D(3 + i, 3 + i) = mu;
    }
    return D;
}

// Engineering-strain B matrix (exx, eyy, ezz, gxy, gyz, gzx) at one
// quadrature point.
inline Eigen::Matrix<double, 6, 24> strain_matrix(const HexQuadrature& quad, int q) {
    Eigen::Matrix<double, 6, 24> B = Eigen::Matrix<double, 6, 24>::Zero();
    for (int a = 0; a < 8; ++a) {
        const Eigen::Vector3d& g = quad.dN[q][a];
        B(0, 3 * a + 0) = g.x();
        B(1, 3 * a + 1) = g.y();
        B(2, 3 * a + 2) = g.z();
        B(3, 3 * a + 0) = g.y();
        B(3, 3 * a + 1) = g.x();
        B(4, 3 * a + 1) = g.z();
        B(4, 3 * a + 2) = g.y();
        B(5, 3 * a + 0) = g.z();
        B(5, 3 * a + 2) = g.x();
    }
    return B;
}

struct FactorCache {
    Eigen::SparseMatrix<double> A_free;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    double condition_estimate = 0.0;
};

} // namespace detail

struct AssembledSystem {
    Eigen::SparseMatrix<double> K;        // raw Galerkin stiffness, no constraints
    Eigen::SparseMatrix<double> M;        // raw Galerkin mass
    std::vector<int> constrained_dofs;    // sorted, unique
    double omega = 0.0;
    std::vector<int> free_dofs;           // full dof ids of the free subset
    std::vector<int> free_index;          // full -> free (-1 when constrained)

    mutable std::shared_ptr<detail::FactorCache> cache;

    int dof_count() const { return static_cast<int>(K.rows()); }
    int free_count() const { return static_cast<int>(free_dofs.size()); }
};

inline AssembledSystem assemble(const Mesh& mesh, const MaterialField& materials,
                                const FrequencyConfig& freq) {
    materials.validate();
    freq.validate();
    if (materials.element_count() != mesh.element_count())
        throw InvalidMaterialError("material field length does not match element count");

    const int ndof = mesh.dof_count();
    detail::HexQuadrature quad(mesh.hx, mesh.hy, mesh.hz);

    std::vector<Eigen::Triplet<double>> kt, mt;
    kt.reserve(static_cast<size_t>(mesh.element_count()) * 24 * 24);
    mt.reserve(static_cast<size_t>(mesh.element_count()) * 24 * 24);

    for (int e = 0; e < mesh.element_count(); ++e) {
        Eigen::Matrix<double, 6, 6> D =
            detail::isotropic_stress_strain(materials.lambda[e], materials.mu[e]);
        Eigen::Matrix<double, 24, 24> Ke = Eigen::Matrix<double, 24, 24>::Zero();
        Eigen::Matrix<double, 24, 24> Me = Eigen::Matrix<double, 24, 24>::Zero();
        for (int q = 0; q < 8; ++q) {
            Eigen::Matrix<double, 6, 24> B = detail::strain_matrix(quad, q);
            Ke.noalias() += B.transpose() * D * B * quad.detJ;
            Eigen::Matrix<double, 3, 24> Nq = Eigen::Matrix<double, 3, 24>::Zero();
            for (int a = 0; a < 8; ++a)
                for (int d = 0; d < 3; ++d) Nq(d, 3 * a + d) = quad.N[q][a];
            Me.noalias() += materials.rho[e] * Nq.transpose() * Nq * quad.detJ;
        }
        const auto& conn = mesh.elements[e];
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
                for (int da = 0; da < 3; ++da)
                    for (int db = 0; db < 3; ++db) {
                        int gi = 3 * conn[a] + da, gj = 3 * conn[b] + db;
                        kt.emplace_back(gi, gj, Ke(3 * a + da, 3 * b + db));
                        mt.emplace_back(gi, gj, Me(3 * a + da, 3 * b + db));
                    }
    }

    AssembledSystem sys;
    sys.K.resize(ndof, ndof);
    sys.M.resize(ndof, ndof);
    sys.K.setFromTriplets(kt.begin(), kt.end());
    sys.M.setFromTriplets(mt.begin(), mt.end());
    sys.omega = freq.omega;

    std::vector<char> constrained(ndof, 0);
    for (const auto& f : mesh.facets)
        if (f.tag == FacetTag::dirichlet)
            for (int n : f.nodes)
                for (int d = 0; d < 3; ++d) constrained[3 * n + d] = 1;
    sys.free_index.assign(ndof, -1);
    for (int i = 0; i < ndof; ++i) {
        if (constrained[i]) sys.constrained_dofs.push_back(i);
        else {
            sys.free_index[i] = static_cast<int>(sys.free_dofs.size());
            sys.free_dofs.push_back(i);
        }
    }
    return sys;
}

namespace detail {

inline const FactorCache& factorization(const AssembledSystem& sys) {
    if (sys.cache) return *sys.cache;
    auto cache = std::make_shared<FactorCache>();

    const int nf = sys.free_count();
    std::vector<Eigen::Triplet<double>> at;
    at.reserve(static_cast<size_t>(sys.K.nonZeros()));
    for (int col = 0; col < sys.K.outerSize(); ++col) {
        int fc = sys.free_index[col];
        if (fc < 0) continue;
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.K, col); it; ++it) {
            int fr = sys.free_index[it.row()];
            if (fr >= 0) at.emplace_back(fr, fc, it.value());
        }
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.M, col); it; ++it) {
            int fr = sys.free_index[it.row()];
            if (fr >= 0) at.emplace_back(fr, fc, -sys.omega * sys.omega * it.value());
        }
    }
    cache->A_free.resize(nf, nf);
    cache->A_free.setFromTriplets(at.begin(), at.end());

    cache->lu.compute(cache->A_free);
    if (cache->lu.info() != Eigen::Success)
        throw ResonanceError("system matrix singular at omega = " + std::to_string(sys.omega) +
                             " rad/s");

    // Condition estimate: exact 1-norm of A times a power-iteration estimate
    // of the largest eigenvalue magnitude of A^{-1}.
    double norm_a = 0.0;
    for (int col = 0; col < cache->A_free.outerSize(); ++col) {
        double s = 0.0;
        for (Eigen::SparseMatrix<double>::InnerIterator it(cache->A_free, col); it; ++it)
            s += std::abs(it.value());
        norm_a = std::max(norm_a, s);
    }
    Eigen::VectorXd x = Eigen::VectorXd::Ones(nf).normalized();
    double inv_norm = 0.0;
    for (int it = 0; it < 8; ++it) {
        x = cache->lu.solve(x);
        inv_norm = x.norm();
        if (!std::isfinite(inv_norm) || inv_norm == 0.0) break;
        x /= inv_norm;
    }
    cache->condition_estimate = std::isfinite(inv_norm) ? norm_a * inv_norm
                                                        : std::numeric_limits<double>::infinity();
    if (cache->condition_estimate > 1e12)
        throw ResonanceError("near-resonant system at omega = " + std::to_string(sys.omega) +
                             " rad/s (condition estimate " +
                             std::to_string(cache->condition_estimate) + ")");
    sys.cache = cache;
    return *sys.cache;
}

inline DisplacementField solve_reduced(const AssembledSystem& sys, const Eigen::VectorXd& b) {
    const FactorCache& fac = factorization(sys);
    Eigen::VectorXd bf(sys.free_count());
    for (int i = 0; i < sys.free_count(); ++i) bf[i] = b[sys.free_dofs[i]];

    Eigen::VectorXd uf = fac.lu.solve(bf);
    double bnorm = bf.norm();
    if (bnorm > 0.0) {
        Eigen::VectorXd r = bf - fac.A_free * uf;
        if (r.norm() > 1e-9 * bnorm) {
            uf += fac.lu.solve(r);
            r = bf - fac.A_free * uf;
            if (r.norm() > 1e-9 * bnorm)
                throw ResonanceError("solver residual " + std::to_string(r.norm() / bnorm) +
                                     " exceeds tolerance at omega = " + std::to_string(sys.omega));
        }
    }

    DisplacementField field;
    field.u = Eigen::VectorXd::Zero(sys.dof_count());
    for (int i = 0; i < sys.free_count(); ++i) field.u[sys.free_dofs[i]] = uf[i];
    return field;
}

} // namespace detail

inline double condition_estimate(const AssembledSystem& sys) {
    return detail::factorization(sys).condition_estimate;
}

// Consistent load vector of a piecewise-constant Neumann traction.
inline Eigen::VectorXd load_vector(const Mesh& mesh, const BoundaryLoad& g) {
    auto neumann = mesh.facets_with_tag(FacetTag::neumann);
    if (g.traction.size() != neumann.size())
        throw DimensionError("boundary load has " + std::to_string(g.traction.size()) +
                             " tractions for " + std::to_string(neumann.size()) +
                             " Neumann facets");
    Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dof_count());
    for (size_t i = 0; i < neumann.size(); ++i) {
        const BoundaryFacet& f = mesh.facets[neumann[i]];
        Eigen::Vector3d w = 0.25 * f.area * g.traction[i];
        for (int n : f.nodes) b.segment<3>(3 * n) += w;
    }
    return b;
}

// \int_{Gamma_N} g . u dS for a piecewise-constant g and an FE field u.
inline double boundary_pairing(const Mesh& mesh, const BoundaryLoad& g,
                               const DisplacementField& field) {
    return load_vector(mesh, g).dot(field.u);
}

inline DisplacementField solve_forward(const AssembledSystem& sys, const Mesh& mesh,
                                       const BoundaryLoad& g) {
    return detail::solve_reduced(sys, load_vector(mesh, g));
}

// Load functional of volume sources: body force F and stress source A enter
// as -\int F.v dx + \int A : grad^s v dx, matching the convention
// div(C grad^s u) + w^2 rho u = F + div A, (C grad^s u) nu = A nu.
inline Eigen::VectorXd source_load_vector(const Mesh& mesh, const SourceData& src) {
    if (static_cast<int>(src.body_force.size()) != mesh.element_count() ||
        static_cast<int>(src.stress_source.size()) != mesh.element_count())
        throw DimensionError("source data length does not match element count");

    detail::HexQuadrature quad(mesh.hx, mesh.hy, mesh.hz);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.dof_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& conn = mesh.elements[e];
        Eigen::Matrix3d As = 0.5 * (src.stress_source[e] + src.stress_source[e].transpose());
        const Eigen::Vector3d& F = src.body_force[e];
        for (int q = 0; q < 8; ++q)
            for (int a = 0; a < 8; ++a) {
                Eigen::Vector3d contrib = (-quad.N[q][a]) * F + As * quad.dN[q][a];
                b.segment<3>(3 * conn[a]) += contrib * quad.detJ;
            }
    }
    return b;
}

inline DisplacementField solve_source(const AssembledSystem& sys, const Mesh& mesh,
                                      const SourceData& src) {
    return detail::solve_reduced(sys, source_load_vector(mesh, src));
}

struct ElementStrain {
    std::array<Eigen::Matrix3d, 8> strain;   // symmetrized gradient per Gauss point
    std::array<double, 8> div;               // trace per Gauss point
};

inline ElementStrain element_strain_div(const Mesh& mesh, const DisplacementField& field, int e) {
    if (e < 0 || e >= mesh.element_count())
        throw DimensionError("element index out of range");
    if (field.u.size() != mesh.dof_count())
        throw DimensionError("displacement length does not match mesh");
    detail::HexQuadrature quad(mesh.hx, mesh.hy, mesh.hz);
    const auto& conn = mesh.elements[e];
    ElementStrain out;
    for (int q = 0; q < 8; ++q) {
        Eigen::Matrix3d grad = Eigen::Matrix3d::Zero();
        for (int a = 0; a < 8; ++a)
            grad += field.u.segment<3>(3 * conn[a]) * quad.dN[q][a].transpose();
        out.strain[q] = 0.5 * (grad + grad.transpose());
        out.div[q] = grad.trace();
    }
    return out;
}

// -B(u,v) = \int 2 mu grad^s u : grad^s v + lambda div u div v
//           - w^2 rho u.v dx, same quadrature as assemble.
inline double energy_form(const Mesh& mesh, const DisplacementField& u,
                          const DisplacementField& v, const MaterialField& materials,
                          const FrequencyConfig& freq) {
    if (u.u.size() != mesh.dof_count() || v.u.size() != mesh.dof_count())
        throw DimensionError("displacement length does not match mesh");
    if (materials.element_count() != mesh.element_count())
        throw DimensionError("material field length does not match element count");
    detail::HexQuadrature quad(mesh.hx, mesh.hy, mesh.hz);
    double w2 = freq.omega * freq.omega;
    double total = 0.0;
    for (int e = 0; e < mesh.element_count(); ++e) {
        const auto& conn = mesh.elements[e];
        double acc = 0.0;
        for (int q = 0; q < 8; ++q) {
            Eigen::Matrix3d gu = Eigen::Matrix3d::Zero(), gv = Eigen::Matrix3d::Zero();
            Eigen::Vector3d uu = Eigen::Vector3d::Zero(), vv = Eigen::Vector3d::Zero();
            for (int a = 0; a < 8; ++a) {
                Eigen::Vector3d ua = u.u.segment<3>(3 * conn[a]);
                Eigen::Vector3d va = v.u.segment<3>(3 * conn[a]);
                gu += ua * quad.dN[q][a].transpose();
                gv += va * quad.dN[q][a].transpose();
                uu += quad.N[q][a] * ua;
                vv += quad.N[q][a] * va;
            }
            Eigen::Matrix3d eu = 0.5 * (gu + gu.transpose());
            Eigen::Matrix3d ev = 0.5 * (gv + gv.transpose());
            acc += 2.0 * materials.mu[e] * eu.cwiseProduct(ev).sum() +
                   materials.lambda[e] * gu.trace() * gv.trace() -
                   w2 * materials.rho[e] * uu.dot(vv);
        }
        total += acc * quad.detJ;
    }
    return total;
}

// Trilinear interpolation of the displacement at a point inside the plate.
inline Eigen::Vector3d interpolate_displacement(const Mesh& mesh, const DisplacementField& field,
                                                const Eigen::Vector3d& p) {
    auto locate = [](double x, double h, int n) {
        int i = static_cast<int>(std::floor(x / h));
        return std::clamp(i, 0, n - 1);
    };
    int i = locate(p.x(), mesh.hx, mesh.nx);
    int j = locate(p.y(), mesh.hy, mesh.ny);
    int k = locate(p.z(), mesh.hz, mesh.nz);
    double fx = std::clamp(p.x() / mesh.hx - i, 0.0, 1.0);
    double fy = std::clamp(p.y() / mesh.hy - j, 0.0, 1.0);
    double fz = std::clamp(p.z() / mesh.hz - k, 0.0, 1.0);
    const auto& conn = mesh.elements[mesh.element_id(i, j, k)];
    Eigen::Vector3d out = Eigen::Vector3d::Zero();
    for (int a = 0; a < 8; ++a) {
        double w = ((a & 1) ? fx : 1.0 - fx) * (((a >> 1) & 1) ? fy : 1.0 - fy) *
                   (((a >> 2) & 1) ? fz : 1.0 - fz);
        out += w * field.u.segment<3>(3 * conn[a]);
    }
    return out;
}

} // namespace elastoscan
