#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <vector>

#include <Eigen/Dense>

#include "elastoscan/errors.hpp"
#include "elastoscan/geometry.hpp"

namespace elastoscan {

enum class FacetTag { free, dirichlet, neumann };

struct BoundaryFacet {
    std::array<int, 4> nodes{};     // corner node ids, counter-clockwise seen from outside
    int element = -1;               // owning element
    Side side = Side::zmin;
    FacetTag tag = FacetTag::free;
    int patch_id = -1;              // index into the geometry's patch list for its kind
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    double area = 0.0;
};

// Structured hexahedral plate mesh. Element (i,j,k) has index
// i + nx*(j + ny*k); nodes are numbered x-fastest.
struct Mesh {
    int nx = 0, ny = 0, nz = 0;       // element counts per axis
    double hx = 0.0, hy = 0.0, hz = 0.0;
    double length_x = 0.0, length_y = 0.0, thickness = 0.0;

    std::vector<Eigen::Vector3d> nodes;
    std::vector<std::array<int, 8>> elements;
    std::vector<BoundaryFacet> facets;

    int node_count() const { return static_cast<int>(nodes.size()); }
    int element_count() const { return static_cast<int>(elements.size()); }
    int dof_count() const { return 3 * node_count(); }
    double element_volume() const { return hx * hy * hz; }

    int node_id(int ix, int iy, int iz) const {
        return ix + (nx + 1) * (iy + (ny + 1) * iz);
    }
    int element_id(int i, int j, int k) const { return i + nx * (j + ny * k); }

    std::array<int, 3> element_ijk(int e) const {
        int i = e % nx;
        int j = (e / nx) % ny;
        int k = e / (nx * ny);
        return {i, j, k};
    }

    Eigen::Vector3d element_centroid(int e) const {
        auto [i, j, k] = element_ijk(e);
        return {(i + 0.5) * hx, (j + 0.5) * hy, (k + 0.5) * hz};
    }

    // Face-adjacent neighbor elements (up to 6).
    std::vector<int> element_neighbors(int e) const {
        auto [i, j, k] = element_ijk(e);
        std::vector<int> out;
        out.reserve(6);
        if (i > 0) out.push_back(element_id(i - 1, j, k));
        if (i + 1 < nx) out.push_back(element_id(i + 1, j, k));
        if (j > 0) out.push_back(element_id(i, j - 1, k));
        if (j + 1 < ny) out.push_back(element_id(i, j + 1, k));
        if (k > 0) out.push_back(element_id(i, j, k - 1));
        if (k + 1 < nz) out.push_back(element_id(i, j, k + 1));
        return out;
    }

    bool element_touches_lateral_boundary(int e) const {
        auto [i, j, k] = element_ijk(e);
        return i == 0 || i + 1 == nx || j == 0 || j + 1 == ny;
    }

    std::vector<int> facets_with_tag(FacetTag tag) const {
        std::vector<int> out;
        for (int f = 0; f < static_cast<int>(facets.size()); ++f)
            if (facets[f].tag == tag) out.push_back(f);
        return out;
    }
};

namespace detail {

inline int snap_count(double length, double cell, const char* axis) {
    double exact = length / cell;
    int n = std::max(1, static_cast<int>(std::llround(exact)));
    if (std::abs(n * cell - length) > 0.01 * length + 1e-12) {
        // cell does not divide the dimension within 1%; snap to the rounded
        // count and let the caller see the adjusted spacing
        (void)axis;
    }
    return n;
}

inline void append_side_facets(Mesh& mesh, Side side) {
    // Local corner numbering of a hexahedron: bit 0 -> +x, bit 1 -> +y,
    // bit 2 -> +z relative to the element's min corner.
    auto corner = [&](int e, int dx, int dy, int dz) {
        auto [i, j, k] = mesh.element_ijk(e);
        return mesh.node_id(i + dx, j + dy, k + dz);
    };
    Eigen::Vector3d normal = Eigen::Vector3d::Zero();
    double area = 0.0;
    switch (side) {
        case Side::xmin: normal = {-1, 0, 0}; area = mesh.hy * mesh.hz; break;
        case Side::xmax: normal = {+1, 0, 0}; area = mesh.hy * mesh.hz; break;
        case Side::ymin: normal = {0, -1, 0}; area = mesh.hx * mesh.hz; break;
        case Side::ymax: normal = {0, +1, 0}; area = mesh.hx * mesh.hz; break;
        case Side::zmin: normal = {0, 0, -1}; area = mesh.hx * mesh.hy; break;
        case Side::zmax: normal = {0, 0, +1}; area = mesh.hx * mesh.hy; break;
    }

    auto add = [&](int e, std::array<int, 4> nodes) {
        BoundaryFacet f;
        f.nodes = nodes;
        f.element = e;
        f.side = side;
        f.normal = normal;
        f.area = area;
        f.centroid = Eigen::Vector3d::Zero();
        for (int n : nodes) f.centroid += mesh.nodes[n];
        f.centroid *= 0.25;
        mesh.facets.push_back(f);
    };

    switch (side) {
        case Side::xmin:
            for (int k = 0; k < mesh.nz; ++k)
                for (int j = 0; j < mesh.ny; ++j) {
                    int e = mesh.element_id(0, j, k);
                    add(e, {corner(e, 0, 0, 0), corner(e, 0, 0, 1), corner(e, 0, 1, 1), corner(e, 0, 1, 0)});
                }
            break;
        case Side::xmax:
            for (int k = 0; k < mesh.nz; ++k)
                for (int j = 0; j < mesh.ny; ++j) {
                    int e = mesh.element_id(mesh.nx - 1, j, k);
                    add(e, {corner(e, 1, 0, 0), corner(e, 1, 1, 0), corner(e, 1, 1, 1), corner(e, 1, 0, 1)});
                }
            break;
        case Side::ymin:
            for (int k = 0; k < mesh.nz; ++k)
                for (int i = 0; i < mesh.nx; ++i) {
                    int e = mesh.element_id(i, 0, k);
                    add(e, {corner(e, 0, 0, 0), corner(e, 1, 0, 0), corner(e, 1, 0, 1), corner(e, 0, 0, 1)});
                }
            break;
        case Side::ymax:
            for (int k = 0; k < mesh.nz; ++k)
                for (int i = 0; i < mesh.nx; ++i) {
                    int e = mesh.element_id(i, mesh.ny - 1, k);
                    add(e, {corner(e, 0, 1, 0), corner(e, 0, 1, 1), corner(e, 1, 1, 1), corner(e, 1, 1, 0)});
                }
            break;
        case Side::zmin:
            for (int j = 0; j < mesh.ny; ++j)
                for (int i = 0; i < mesh.nx; ++i) {
                    int e = mesh.element_id(i, j, 0);
                    add(e, {corner(e, 0, 0, 0), corner(e, 0, 1, 0), corner(e, 1, 1, 0), corner(e, 1, 0, 0)});
                }
            break;
        case Side::zmax:
            for (int j = 0; j < mesh.ny; ++j)
                for (int i = 0; i < mesh.nx; ++i) {
                    int e = mesh.element_id(i, j, mesh.nz - 1);
                    add(e, {corner(e, 0, 0, 1), corner(e, 1, 0, 1), corner(e, 1, 1, 1), corner(e, 0, 1, 1)});
                }
            break;
    }
}

} // namespace detail

inline Mesh build_plate_mesh(const PlateGeometry& geometry, double cell_size) {
    if (!(cell_size > 0.0))
        throw InvalidGeometryError("cell_size must be positive");
    if (!(geometry.length_x > 0.0) || !(geometry.length_y > 0.0) || !(geometry.thickness > 0.0))
        throw InvalidGeometryError("plate dimensions must be positive");

    Mesh mesh;
    mesh.length_x = geometry.length_x;
    mesh.length_y = geometry.length_y;
    mesh.thickness = geometry.thickness;
    mesh.nx = detail::snap_count(geometry.length_x, cell_size, "x");
    mesh.ny = detail::snap_count(geometry.length_y, cell_size, "y");
    mesh.nz = detail::snap_count(geometry.thickness, cell_size, "z");
    mesh.hx = geometry.length_x / mesh.nx;
    mesh.hy = geometry.length_y / mesh.ny;
    mesh.hz = geometry.thickness / mesh.nz;

    mesh.nodes.reserve(static_cast<size_t>(mesh.nx + 1) * (mesh.ny + 1) * (mesh.nz + 1));
    for (int k = 0; k <= mesh.nz; ++k)
        for (int j = 0; j <= mesh.ny; ++j)
            for (int i = 0; i <= mesh.nx; ++i)
                mesh.nodes.emplace_back(i * mesh.hx, j * mesh.hy, k * mesh.hz);

    mesh.elements.reserve(static_cast<size_t>(mesh.nx) * mesh.ny * mesh.nz);
    for (int k = 0; k < mesh.nz; ++k)
        for (int j = 0; j < mesh.ny; ++j)
            for (int i = 0; i < mesh.nx; ++i) {
                std::array<int, 8> conn{};
                for (int c = 0; c < 8; ++c)
                    conn[c] = mesh.node_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                mesh.elements.push_back(conn);
            }

    for (Side s : {Side::xmin, Side::xmax, Side::ymin, Side::ymax, Side::zmin, Side::zmax})
        detail::append_side_facets(mesh, s);
    return mesh;
}

// Tags every boundary facet by patch membership of its centroid. Facets
// outside all declared patches stay free (traction 0).
inline Mesh tag_boundaries(Mesh mesh, const PlateGeometry& geometry) {
    geometry.validate();
    std::vector<int> dirichlet_hits(geometry.dirichlet_patches.size(), 0);
    std::vector<int> neumann_hits(geometry.neumann_patches.size(), 0);

    for (auto& f : mesh.facets) {
        f.tag = FacetTag::free;
        f.patch_id = -1;
        auto [s, t] = geometry.side_param(f.side, f.centroid);
        for (size_t p = 0; p < geometry.dirichlet_patches.size(); ++p) {
            const auto& patch = geometry.dirichlet_patches[p];
            if (patch.side == f.side && patch.contains(s, t)) {
                f.tag = FacetTag::dirichlet;
                f.patch_id = static_cast<int>(p);
                ++dirichlet_hits[p];
                break;
            }
        }
        if (f.tag != FacetTag::free) continue;
        for (size_t p = 0; p < geometry.neumann_patches.size(); ++p) {
            const auto& patch = geometry.neumann_patches[p];
            if (patch.side == f.side && patch.contains(s, t)) {
                f.tag = FacetTag::neumann;
                f.patch_id = static_cast<int>(p);
                ++neumann_hits[p];
                break;
            }
        }
    }

    for (size_t p = 0; p < dirichlet_hits.size(); ++p)
        if (dirichlet_hits[p] == 0)
            throw EmptyPatchError("Dirichlet patch '" + geometry.dirichlet_patches[p].name +
                                  "' captures no facet (mesh too coarse?)");
    for (size_t p = 0; p < neumann_hits.size(); ++p)
        if (neumann_hits[p] == 0)
            throw EmptyPatchError("Neumann patch '" + geometry.neumann_patches[p].name +
                                  "' captures no facet (mesh too coarse?)");
    return mesh;
}

inline Mesh make_plate_mesh(const PlateGeometry& geometry, double cell_size) {
    return tag_boundaries(build_plate_mesh(geometry, cell_size), geometry);
}

struct Box {
    Eigen::Vector3d min = Eigen::Vector3d::Zero();
    Eigen::Vector3d max = Eigen::Vector3d::Zero();

    // Half-open membership [min, max); the closed upper face is kept only
    // where max touches the domain boundary, handled by the caller.
    bool contains_half_open(const Eigen::Vector3d& p) const {
        for (int d = 0; d < 3; ++d)
            if (p[d] < min[d] || p[d] >= max[d]) return false;
        return true;
    }
};

struct TestInclusionGrid {
    std::vector<Box> boxes;
    int nx = 0, ny = 0;
};

inline TestInclusionGrid test_inclusion_grid(const PlateGeometry& geometry, int nx, int ny) {
    if (nx < 1 || ny < 1)
        throw InvalidGeometryError("test inclusion grid counts must be >= 1");
    TestInclusionGrid grid;
    grid.nx = nx;
    grid.ny = ny;
    double wx = geometry.length_x / nx;
    double wy = geometry.length_y / ny;
    grid.boxes.reserve(static_cast<size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            Box b;
            b.min = {i * wx, j * wy, 0.0};
            b.max = {(i + 1) * wx, (j + 1) * wy, geometry.thickness};
            grid.boxes.push_back(b);
        }
    return grid;
}

struct RegionMask {
    std::vector<std::uint8_t> flags;

    explicit RegionMask(size_t n = 0, bool value = false)
        : flags(n, value ? 1 : 0) {}

    size_t size() const { return flags.size(); }
    bool at(size_t e) const { return flags[e] != 0; }
    void set(size_t e, bool v = true) { flags[e] = v ? 1 : 0; }

    size_t count() const {
        return static_cast<size_t>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
    }

    bool subset_of(const RegionMask& other) const {
        if (flags.size() != other.flags.size()) return false;
        for (size_t i = 0; i < flags.size(); ++i)
            if (flags[i] && !other.flags[i]) return false;
        return true;
    }
};

// Elements whose centroid lies in the box (half-open convention on shared
// faces; the domain's outer max faces are treated as closed).
inline RegionMask box_elements(const Mesh& mesh, const Box& box) {
    RegionMask mask(mesh.element_count());
    Eigen::Vector3d domain_max(mesh.length_x, mesh.length_y, mesh.thickness);
    for (int e = 0; e < mesh.element_count(); ++e) {
        Eigen::Vector3d c = mesh.element_centroid(e);
        bool inside = true;
        for (int d = 0; d < 3 && inside; ++d) {
            bool closed_top = std::abs(box.max[d] - domain_max[d]) < 1e-12;
            if (c[d] < box.min[d]) inside = false;
            else if (closed_top ? c[d] > box.max[d] : c[d] >= box.max[d]) inside = false;
        }
        if (inside) mask.set(e);
    }
    return mask;
}

// True when the box faces coincide with mesh grid planes, so the box is
// exactly a union of elements.
inline bool box_is_element_aligned(const Mesh& mesh, const Box& box, double tol = 1e-9) {
    auto aligned = [&](double x, double h) {
        double r = x / h;
        return std::abs(r - std::llround(r)) * h < tol;
    };
    return aligned(box.min.x(), mesh.hx) && aligned(box.max.x(), mesh.hx) &&
           aligned(box.min.y(), mesh.hy) && aligned(box.max.y(), mesh.hy) &&
           aligned(box.min.z(), mesh.hz) && aligned(box.max.z(), mesh.hz);
}

// Adds to the mask every connected component of the complement that cannot
// reach the lateral boundary of the plate through face adjacency. Through
// the plate's flat z faces all through-thickness regions would trivially
// touch the boundary, so connectivity to the boundary is taken through the
// four edge faces; enclosed cavities are filled.
inline RegionMask outer_support_completion(const RegionMask& mask, const Mesh& mesh) {
    if (static_cast<int>(mask.size()) != mesh.element_count())
        throw DimensionError("mask size does not match mesh element count");

    std::vector<std::uint8_t> reached(mask.size(), 0);
    std::deque<int> frontier;
    for (int e = 0; e < mesh.element_count(); ++e)
        if (!mask.at(e) && mesh.element_touches_lateral_boundary(e)) {
            reached[e] = 1;
            frontier.push_back(e);
        }
    while (!frontier.empty()) {
        int e = frontier.front();
        frontier.pop_front();
        for (int n : mesh.element_neighbors(e))
            if (!mask.at(n) && !reached[n]) {
                reached[n] = 1;
                frontier.push_back(n);
            }
    }

    RegionMask out = mask;
    for (size_t e = 0; e < mask.size(); ++e)
        if (!mask.at(e) && !reached[e]) out.set(e);
    return out;
}

} // namespace elastoscan
