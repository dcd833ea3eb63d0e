#pragma once

#include "convlat/common.hpp"
#include "convlat/lattice.hpp"

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

namespace convlat {

struct Tet
{
    std::array<std::uint32_t, 4> v{};
    int          depth  = 0;   // subdivision depth below the root tet
    std::int32_t parent = -1;
    bool         leaf   = true;
    double       target  = 0.; // desired density
    double       density = 0.; // last measured density
};

// Local vertex pairs of the six tet edges, in a fixed order.
inline constexpr std::array<std::array<int, 2>, 6> kTetEdges = {{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

inline std::uint64_t undirected_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

double signed_volume(const Vec3d &a, const Vec3d &b, const Vec3d &c, const Vec3d &d);

// Tetrahedral mesh. Subdivided tets stay in `tets` with leaf == false; only
// leaves describe the current geometry. `midpoints` maps a split edge to its
// midpoint node so that neighbouring tets share it.
struct TetMesh
{
    std::vector<Vec3d> nodes;
    std::vector<Tet>   tets;
    std::unordered_map<std::uint64_t, std::uint32_t> midpoints;
    BoundingBox extent; // grown by add_node(), used for the degeneracy threshold

    std::uint32_t add_node(const Vec3d &p);
    // Appends a tet, reordering vertices so its signed volume is positive.
    // Throws on a degenerate tet.
    std::uint32_t add_tet(std::array<std::uint32_t, 4> v, int depth = 0, std::int32_t parent = -1);

    double signed_volume(std::size_t tet) const;
    // 1e-12 * (bounding box diagonal)^3
    double volume_epsilon() const;
    BoundingBox bounding_box() const;
    Vec3d centroid(std::size_t tet) const;
    std::vector<std::uint32_t> leaf_tets() const;
    std::size_t leaf_count() const;

    std::optional<std::uint32_t> find_midpoint(std::uint32_t a, std::uint32_t b) const;
    std::uint32_t midpoint(std::uint32_t a, std::uint32_t b);

    // Unique undirected edges of the leaf tets, split at existing midpoints,
    // in first-seen order.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> lattice_edges() const;
    // Unique undirected tet edges of the leaves, without midpoint splitting.
    std::vector<std::pair<std::uint32_t, std::uint32_t>> tet_edges() const;

    // Nodes lying on a boundary face (a leaf face used by one leaf tet only),
    // plus every midpoint node.
    std::vector<bool> pinned_nodes() const;
};

// TetGen ASCII .node/.ele import. The index base (0 or 1) is taken from the
// first node index; attributes and boundary markers are ignored.
TetMesh import_tetgen(const std::filesystem::path &node_path, const std::filesystem::path &ele_path);
void export_tetgen(const TetMesh &mesh, const std::filesystem::path &node_path,
                   const std::filesystem::path &ele_path);

LatticeGraph lattice_from_tetmesh(const TetMesh &mesh, double initial_weight);
LatticeGraph lattice_from_tetmesh(const TetMesh &mesh,
                                  const std::function<double(std::uint32_t, std::uint32_t)> &weight_of);

} // namespace convlat
