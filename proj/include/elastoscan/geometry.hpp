#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/config.hpp"
#include "elastoscan/errors.hpp"

namespace elastoscan {

enum class Side { xmin, xmax, ymin, ymax, zmin, zmax };

inline std::string side_name(Side s) {
    switch (s) {
        case Side::xmin: return "xmin";
        case Side::xmax: return "xmax";
        case Side::ymin: return "ymin";
        case Side::ymax: return "ymax";
        case Side::zmin: return "zmin";
        case Side::zmax: return "zmax";
    }
    return "?";
}

inline Side side_from_name(const std::string& name) {
    if (name == "xmin") return Side::xmin;
    if (name == "xmax") return Side::xmax;
    if (name == "ymin") return Side::ymin;
    if (name == "ymax") return Side::ymax;
    if (name == "zmin") return Side::zmin;
    if (name == "zmax") return Side::zmax;
    throw ConfigError("unknown side '" + name + "'");
}

// A lateral side is one of the four thin edge faces of the plate.
inline bool is_lateral(Side s) { return s != Side::zmin && s != Side::zmax; }

enum class PatchShape { disc, rect };
enum class BcKind { dirichlet, neumann };

// A boundary patch lives on one face of the plate box and is described in
// that face's 2D (s,t) frame: on lateral faces s runs along the edge and
// t through the thickness; on zmin/zmax, (s,t) = (x,y).
struct BoundaryPatch {
    BcKind bc = BcKind::neumann;
    PatchShape shape = PatchShape::disc;
    Side side = Side::ymin;
    double s0 = 0.0;       // patch center, s coordinate
    double t0 = 0.0;       // patch center, t coordinate
    double radius = 0.0;   // disc only
    double extent_s = 0.0; // rect only: full width along s
    double extent_t = 0.0; // rect only: full width along t
    std::string name;      // e.g. "D0", "N1"

    bool contains(double s, double t) const {
        if (shape == PatchShape::disc) {
            double ds = s - s0, dt = t - t0;
            return ds * ds + dt * dt <= radius * radius;
        }
        return std::abs(s - s0) <= 0.5 * extent_s && std::abs(t - t0) <= 0.5 * extent_t;
    }
};

struct PlateGeometry {
    double length_x = 0.0;
    double length_y = 0.0;
    double thickness = 0.0;
    std::vector<BoundaryPatch> dirichlet_patches;
    std::vector<BoundaryPatch> neumann_patches;
    std::vector<Eigen::Vector3d> sensor_points;

    // (s,t) extents of a side's parameter rectangle.
    std::array<double, 2> side_extent(Side s) const {
        switch (s) {
            case Side::xmin:
            case Side::xmax: return {length_y, thickness};
            case Side::ymin:
            case Side::ymax: return {length_x, thickness};
            case Side::zmin:
            case Side::zmax: return {length_x, length_y};
        }
        return {0, 0};
    }

    Eigen::Vector3d side_point(Side side, double s, double t) const {
        switch (side) {
            case Side::xmin: return {0.0, s, t};
            case Side::xmax: return {length_x, s, t};
            case Side::ymin: return {s, 0.0, t};
            case Side::ymax: return {s, length_y, t};
            case Side::zmin: return {s, t, 0.0};
            case Side::zmax: return {s, t, thickness};
        }
        return Eigen::Vector3d::Zero();
    }

    // Inverse of side_point for a point lying on the given side.
    std::array<double, 2> side_param(Side side, const Eigen::Vector3d& p) const {
        switch (side) {
            case Side::xmin:
            case Side::xmax: return {p.y(), p.z()};
            case Side::ymin:
            case Side::ymax: return {p.x(), p.z()};
            case Side::zmin:
            case Side::zmax: return {p.x(), p.y()};
        }
        return {0, 0};
    }

    void validate() const {
        if (!(length_x > 0.0) || !(length_y > 0.0) || !(thickness > 0.0))
            throw InvalidGeometryError("plate dimensions must be positive");
        if (neumann_patches.empty())
            throw EmptyPatchError("at least one Neumann patch is required");
        auto check_on_side = [&](const BoundaryPatch& p) {
            auto ext = side_extent(p.side);
            if (p.s0 < 0.0 || p.s0 > ext[0] || p.t0 < 0.0 || p.t0 > ext[1])
                throw InvalidGeometryError("patch '" + p.name + "' center off its side");
            if (p.shape == PatchShape::disc && !(p.radius > 0.0))
                throw InvalidGeometryError("patch '" + p.name + "' needs a positive radius");
            if (p.shape == PatchShape::rect && (!(p.extent_s > 0.0) || !(p.extent_t > 0.0)))
                throw InvalidGeometryError("patch '" + p.name + "' needs positive extents");
        };
        for (const auto& p : dirichlet_patches) check_on_side(p);
        for (const auto& p : neumann_patches) check_on_side(p);
        // Dirichlet and Neumann patches must not overlap.
        for (const auto& d : dirichlet_patches)
            for (const auto& n : neumann_patches)
                if (d.side == n.side && patches_overlap(d, n))
                    throw InvalidGeometryError("patches '" + d.name + "' and '" + n.name + "' overlap");
    }

    static bool patches_overlap(const BoundaryPatch& a, const BoundaryPatch& b) {
        // Conservative bounding-box test in the shared (s,t) frame.
        auto box = [](const BoundaryPatch& p) {
            double hs = p.shape == PatchShape::disc ? p.radius : 0.5 * p.extent_s;
            double ht = p.shape == PatchShape::disc ? p.radius : 0.5 * p.extent_t;
            return std::array<double, 4>{p.s0 - hs, p.s0 + hs, p.t0 - ht, p.t0 + ht};
        };
        auto ba = box(a), bb = box(b);
        return ba[0] < bb[1] && bb[0] < ba[1] && ba[2] < bb[3] && bb[2] < ba[3];
    }
};

// Experiment default: 0.30 x 0.30 x 0.01 m plate, mounted (Dirichlet) at
// discs in the middle of the ymin/ymax edges, driven (Neumann) at two
// small rectangles in the middle of the xmin/xmax edges.
inline PlateGeometry default_plate_geometry() {
    PlateGeometry g;
    g.length_x = 0.30;
    g.length_y = 0.30;
    g.thickness = 0.01;

    BoundaryPatch d0;
    d0.bc = BcKind::dirichlet;
    d0.shape = PatchShape::disc;
    d0.side = Side::ymin;
    d0.s0 = 0.15;
    d0.t0 = 0.005;
    d0.radius = 0.01;
    d0.name = "D0";
    BoundaryPatch d1 = d0;
    d1.side = Side::ymax;
    d1.name = "D1";
    g.dirichlet_patches = {d0, d1};

    BoundaryPatch n0;
    n0.bc = BcKind::neumann;
    n0.shape = PatchShape::rect;
    n0.side = Side::xmin;
    n0.s0 = 0.15;
    n0.t0 = 0.005;
    n0.extent_s = 0.02;
    n0.extent_t = 0.01;
    n0.name = "N0";
    BoundaryPatch n1 = n0;
    n1.side = Side::xmax;
    n1.name = "N1";
    g.neumann_patches = {n0, n1};

    g.validate();
    return g;
}

inline PlateGeometry geometry_from_config(const ConfigDoc& doc) {
    PlateGeometry g;
    g.length_x = doc.scalar("length_x");
    g.length_y = doc.scalar("length_y");
    g.thickness = doc.scalar("thickness");

    int n_dirichlet = 0, n_neumann = 0;
    for (const auto& line : doc.lines) {
        if (line.key != "dirichlet" && line.key != "neumann") continue;
        BoundaryPatch p;
        p.bc = line.key == "dirichlet" ? BcKind::dirichlet : BcKind::neumann;
        if (line.values.empty())
            throw ConfigError(doc.source + ": patch line needs a shape (disc|rect)");
        const std::string& shape = line.values[0];
        p.side = side_from_name(line.attr("side"));
        auto ext = g.side_extent(p.side);
        p.s0 = line.attr_num("s");
        p.t0 = line.attr_num("t", 0.5 * ext[1]);
        if (shape == "disc") {
            p.shape = PatchShape::disc;
            p.radius = line.attr_num("r");
        } else if (shape == "rect") {
            p.shape = PatchShape::rect;
            p.extent_s = line.attr_num("ws");
            p.extent_t = line.attr_num("wt", ext[1]);
        } else {
            throw ConfigError(doc.source + ": unknown patch shape '" + shape + "'");
        }
        if (p.bc == BcKind::dirichlet) {
            p.name = line.has("name") ? line.attr("name") : "D" + std::to_string(n_dirichlet++);
            g.dirichlet_patches.push_back(p);
        } else {
            p.name = line.has("name") ? line.attr("name") : "N" + std::to_string(n_neumann++);
            g.neumann_patches.push_back(p);
        }
    }
    for (const auto& line : doc.all("sensor"))
        g.sensor_points.emplace_back(line.value_num(0), line.value_num(1), line.value_num(2));

    g.validate();
    return g;
}

} // namespace elastoscan
