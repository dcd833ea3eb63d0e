#pragma once

#include "convlat/edge_grid.hpp"
#include "convlat/tetmesh.hpp"

#include <array>
#include <filesystem>
#include <unordered_map>
#include <vector>

namespace convlat {

// Target densities on an axis-aligned voxel grid, x fastest.
struct DensityGrid
{
    int    nx = 0, ny = 0, nz = 0;
    Vec3d  origin = Vec3d::Zero();  // min corner of voxel (0, 0, 0)
    double spacing = 1.;
    std::vector<double> values;

    std::size_t size() const { return std::size_t(nx) * ny * nz; }
    std::size_t index(int i, int j, int k) const { return (std::size_t(k) * ny + j) * nx + i; }
    double at(int i, int j, int k) const { return values[index(i, j, k)]; }
    Vec3d voxel_center(int i, int j, int k) const { return origin + spacing * Vec3d(i + 0.5, j + 0.5, k + 0.5); }
    BoundingBox voxel_box(int i, int j, int k) const;
    BoundingBox bounds() const;
    std::array<int, 3> voxel_of(std::size_t index) const;

    // Trilinear interpolation between voxel centers, clamped at the border.
    double interpolate(const Vec3d &p) const;
    void validate() const;
};

// `DENSGRID nx ny nz ox oy oz spacing` followed by nx*ny*nz values.
DensityGrid load_density_grid(const std::filesystem::path &path);
void save_density_grid(const DensityGrid &grid, const std::filesystem::path &path);

struct MaterialSpec
{
    double tau = 1.;     // density of the bulk material
    double r_min = 0.1;  // smallest printable strut radius (mm)
    double r = 0.2;      // initial strut radius (mm), 2 r_min by convention

    void validate() const;
};

// Edge length of a regular-tet lattice with struts of radius r reaching
// density rho: roots of L^3 + pL + q = 0, the one closest to L_cur, floored
// at 4r.
struct EdgeLengthEstimate
{
    double p = 0., q = 0.;
    double discriminant = 0.;     // (q/2)^2 + (p/3)^3, negative for valid inputs
    std::array<double, 3> roots{};  // descending
    double selected = 0.;         // root closest to L_cur
    double length = 0.;           // max(4r, selected)
    bool   floored = false;
};
EdgeLengthEstimate target_edge_length(double rho, double tau, double r, double L_cur);

// Density the estimate assumes: 6 cylinders of radius r and 4 corner spheres
// of radius 2r, overlaps counted twice.
double estimated_tet_density(double L, double tau, double r);

struct StructuredMeshOptions
{
    double cell_size = 1.;
    double k = 1.;                       // compression along the print direction
    Vec3d  direction = Vec3d::UnitZ();
    double jitter = 0.;                  // interior node perturbation, fraction of a cell per axis
    std::uint64_t seed = 42;
};

// Six tets per cube (all cubes split along the same main diagonal) over the
// box, built in the frame compressed by 1/k along the print direction and
// mapped back. The cell count per axis is rounded so cells fill the
// compressed box exactly. Interior nodes may be jittered by a seeded uniform
// offset of up to `jitter` cells per axis; a perfectly regular grid has
// centrally symmetric vertex stars, on which the position optimization has
// no gradient to follow.
TetMesh generate_structured_tets(const BoundingBox &box, const StructuredMeshOptions &opts);
// Same, keeping only cubes whose center lies in a voxel with positive density.
TetMesh generate_structured_tets(const DensityGrid &occupancy, const StructuredMeshOptions &opts);

// Node positions of the 8 children of a tet: 4 corner tets and the central
// octahedron cut by its shortest diagonal. `index` breaks length ties.
std::array<std::array<Vec3d, 4>, 8> child_tets(const std::array<Vec3d, 4> &v,
                                               const std::array<std::uint32_t, 4> &index = {0, 1, 2, 3});

// Per-edge weights keyed by undirected_key.
using EdgeWeights = std::unordered_map<std::uint64_t, double>;

// Splits a leaf tet into 8 children that share midpoint nodes with any
// already split neighbour. When `weights` is given, new lattice edges get:
// halves the weight of the edge they split, face midsegments the weight of
// the parallel parent edge, the interior diagonal the mean of the parent's
// six. Existing entries are kept.
std::array<std::uint32_t, 8> subdivide_tet(TetMesh &mesh, std::uint32_t tet, EdgeWeights *weights = nullptr);

// Lattice segments (node pairs) covering tet edge (a, b), following midpoints.
std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_pieces(const TetMesh &mesh, std::uint32_t a, std::uint32_t b);

struct SamplingOptions
{
    std::size_t   samples = 4096;
    std::uint64_t seed = 42;
    unsigned      threads = 1;
};

// Fraction of uniform samples inside the solid, stratified into 8
// equal-volume parts (tet children or box octants). `region` selects an
// independent random stream so regions do not share samples.
double measure_density(const std::array<Vec3d, 4> &tet, const FieldEvaluator &field, const SamplingOptions &opts,
                       std::uint64_t region = 0);
double measure_density(const BoundingBox &box, const FieldEvaluator &field, const SamplingOptions &opts,
                       std::uint64_t region = 0);

struct MatchOptions
{
    SamplingOptions sampling;
    int    max_depth = 4;
    int    search_iterations = 30;
};

struct VoxelResult
{
    std::size_t index = 0;
    double      target = 0.;
    double      measured = 0.;
    double      before_final = 0.;  // density with the step-3 weights
    std::string flag;                // ok, floor, unreachable
};

struct TetResult
{
    std::uint32_t tet = 0;
    int    depth = 0;
    double target = 0.;
    double rho = 0.;        // base weights
    double rho_star = 0.;   // own edges at doubled weight
    double factor = 1.;     // step-3 scaling of the tet's own edges
    double bracket = 0.;    // final bisection bracket width
    double matched = 0.;    // density at the chosen factor
    bool   unreachable = false;
};

struct MatchReport
{
    std::vector<VoxelResult> voxels;
    std::vector<TetResult>   tets;  // leaves after subdivision
    std::size_t subdivisions = 0;
    std::size_t unreachable_tets = 0;
    std::size_t floored_edges = 0;
    std::size_t ratio_decreases = 0;  // edges lowered by the per-voxel pass
    double      weight_floor = 0.;
    double      mean_abs_error = 0.;  // over voxels with a positive target
    double      max_abs_error = 0.;
    std::uint64_t seed = 0;
    std::size_t samples = 0;

    void write_csv(const std::filesystem::path &path) const;
};

struct MatchResult
{
    LatticeGraph graph;
    std::vector<double> ratios;  // final per-edge ratio to the base weight, graph edge order
    MatchReport  report;
};

// The four-step density matching. `mesh` is refined in place. `cfg` must be
// calibrated so that weight 1 gives radius material.r; the weight floor is
// the weight of radius material.r_min.
MatchResult match_density(TetMesh &mesh, const DensityGrid &density, const MaterialSpec &material,
                          const FieldConfig &cfg, const MatchOptions &opts = {});

} // namespace convlat
