#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/material.hpp"
#include "elastoscan/mesh.hpp"
#include "elastoscan/ntd.hpp"

namespace elastoscan {

// Lab materials: Makrolon plate, aluminum inserts (Lame constants, density).
inline IsotropicMaterial makrolon_material() { return {2.8910e9, 1.1808e9, 1171.0}; }
inline IsotropicMaterial aluminum_material() { return {5.1084e10, 2.6316e10, 2700.0}; }

// Inclusions must stay one default mesh cell away from the plate boundary so
// that the dilated shape is still compactly contained.
constexpr double kContainmentMargin = 0.01;

struct InclusionShape {
    enum class Kind { disc, box };

    Kind kind = Kind::disc;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();   // disc centre in the plate plane
    double diameter = 0.0;                              // disc only; full plate thickness
    Box box;                                            // box only
    std::array<double, 3> psi{0.0, 0.0, 0.0};           // (psi_lambda, psi_mu, psi_rho) >= 0

    bool contains(const Eigen::Vector3d& p) const {
        if (kind == Kind::disc) {
            double dx = p.x() - center.x();
            double dy = p.y() - center.y();
            return dx * dx + dy * dy <= 0.25 * diameter * diameter;
        }
        return box.contains_half_open(p);
    }
};

// Homogeneous background with additive inclusion perturbations. rho_sign +1
// adds the density perturbation (denser inserts), -1 subtracts it (the
// lighter-inclusion variant); stiffness perturbations are always additive.
struct Phantom {
    IsotropicMaterial background;
    std::vector<InclusionShape> inclusions;
    int rho_sign = 1;
};

namespace detail {

inline void require_disc_contained(const PlateGeometry& geometry, const Eigen::Vector2d& center,
                                   double diameter) {
    double r = 0.5 * diameter;
    if (center.x() - r < kContainmentMargin || center.y() - r < kContainmentMargin ||
        center.x() + r > geometry.length_x - kContainmentMargin ||
        center.y() + r > geometry.length_y - kContainmentMargin)
        throw ContainmentError("inclusion disc is not compactly contained in the plate");
}

inline std::array<double, 3> perturbation_from_pair(const IsotropicMaterial& background,
                                                    const IsotropicMaterial& inclusion,
                                                    int rho_sign) {
    if (rho_sign != 1 && rho_sign != -1)
        throw InvalidMaterialError("phantom rho_sign must be +1 or -1");
    double dl = inclusion.lambda - background.lambda;
    double dm = inclusion.mu - background.mu;
    double dr = inclusion.rho - background.rho;
    if (dl < 0.0 || dm < 0.0)
        throw InvalidMaterialError("inclusion material must not be softer than the background");
    if (rho_sign == 1 && dr < 0.0)
        throw InvalidMaterialError(
            "inclusion lighter than the background; use rho_sign = -1 for that variant");
    if (rho_sign == -1 && dr > 0.0)
        throw InvalidMaterialError(
            "inclusion denser than the background; use rho_sign = +1 for that variant");
    if (rho_sign == -1 && background.rho - std::abs(dr) <= 0.0)
        throw InvalidMaterialError("subtractive density perturbation would reach zero density");
    return {dl, dm, std::abs(dr)};
}

} // namespace detail

inline Phantom phantom_center_disc(const PlateGeometry& geometry, double diameter,
                                   const IsotropicMaterial& background,
                                   const IsotropicMaterial& inclusion, int rho_sign = 1) {
    if (diameter < 0.0)
        throw ContainmentError("disc diameter must be >= 0");
    Phantom phantom;
    phantom.background = background;
    phantom.rho_sign = rho_sign;
    if (diameter == 0.0) return phantom;

    InclusionShape disc;
    disc.kind = InclusionShape::Kind::disc;
    disc.center = {0.5 * geometry.length_x, 0.5 * geometry.length_y};
    disc.diameter = diameter;
    disc.psi = detail::perturbation_from_pair(background, inclusion, rho_sign);
    detail::require_disc_contained(geometry, disc.center, diameter);
    phantom.inclusions.push_back(disc);
    return phantom;
}

// Two discs of equal diameter on the plate diagonal, centred corner_offset
// from opposite corners.
inline Phantom phantom_two_discs(const PlateGeometry& geometry, double diameter,
                                 const IsotropicMaterial& background,
                                 const IsotropicMaterial& inclusion, double corner_offset = 0.09,
                                 int rho_sign = 1) {
    if (diameter <= 0.0)
        throw ContainmentError("disc diameter must be > 0");
    Phantom phantom;
    phantom.background = background;
    phantom.rho_sign = rho_sign;

    std::array<Eigen::Vector2d, 2> centers = {
        Eigen::Vector2d{corner_offset, corner_offset},
        Eigen::Vector2d{geometry.length_x - corner_offset, geometry.length_y - corner_offset}};
    double gap = (centers[1] - centers[0]).norm();
    if (gap <= diameter)
        throw OverlapError("inclusion discs overlap");
    for (const auto& c : centers) {
        InclusionShape disc;
        disc.kind = InclusionShape::Kind::disc;
        disc.center = c;
        disc.diameter = diameter;
        disc.psi = detail::perturbation_from_pair(background, inclusion, rho_sign);
        detail::require_disc_contained(geometry, c, diameter);
        phantom.inclusions.push_back(disc);
    }
    return phantom;
}

// Element-wise rasterization: an element receives the perturbation iff its
// centroid lies in the shape. First-order geometry error, but keeps box
// alignment with the test-inclusion grid exact.
inline MaterialField materialize(const Phantom& phantom, const Mesh& mesh) {
    MaterialField field = uniform_material(mesh, phantom.background);
    for (int e = 0; e < mesh.element_count(); ++e) {
        Eigen::Vector3d c = mesh.element_centroid(e);
        for (const InclusionShape& shape : phantom.inclusions)
            if (shape.contains(c)) {
                field.lambda[e] += shape.psi[0];
                field.mu[e] += shape.psi[1];
                field.rho[e] += phantom.rho_sign * shape.psi[2];
            }
    }
    field.validate();
    return field;
}

// Union mask of all inclusion shapes, for containment oracles and reports.
inline RegionMask phantom_support(const Phantom& phantom, const Mesh& mesh) {
    RegionMask mask(mesh.element_count());
    for (int e = 0; e < mesh.element_count(); ++e) {
        Eigen::Vector3d c = mesh.element_centroid(e);
        for (const InclusionShape& shape : phantom.inclusions)
            if (shape.contains(c)) {
                mask.set(e);
                break;
            }
    }
    return mask;
}

struct NoiseModel {
    double delta_target = 0.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!std::isfinite(delta_target) || delta_target < 0.0)
            throw ConfigError("noise delta_target must be finite and >= 0");
    }
};

// Adds a symmetric random matrix rescaled to spectral norm
// 0.99 * delta_target, so the perturbed matrix stays strictly within the
// advertised noise level. The raw engine stream is mapped to doubles
// directly, keeping the draw identical across standard libraries.
inline NtDMatrix add_noise(const NtDMatrix& L, const NoiseModel& model) {
    model.validate();
    if (model.delta_target == 0.0) return L;

    const int n = static_cast<int>(L.entries.rows());
    std::mt19937_64 rng(model.seed);
    auto draw = [&rng]() {
        return static_cast<double>(rng() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    };
    Eigen::MatrixXd E(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            double v = draw();
            E(i, j) = v;
            E(j, i) = v;
        }
    double nrm = symmetric_spectral_norm(E);
    if (nrm == 0.0) return L;
    E *= 0.99 * model.delta_target / nrm;

    NtDMatrix out = L;
    out.entries += E;
    return out;
}

} // namespace elastoscan
