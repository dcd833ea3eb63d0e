#pragma once

#include "convlat/lattice.hpp"
#include "convlat/tetmesh.hpp"

#include <array>
#include <unordered_map>
#include <vector>

namespace convlat {

struct PrintSetup
{
    Vec3d  direction = Vec3d::UnitZ();  // unit print direction
    double alpha = kPi / 4.;            // self-supporting angle

    void validate() const;
};

// Edges with theta <= alpha + kAngleSlack count as self-supported, so that
// edges at exactly alpha do not flip on the last bit of acos.
inline constexpr double kAngleSlack = 1e-9;

enum class GMode
{
    Exact,          // risky arc [phi0, pi/2]
    PrintedBounds,  // arc [0, phi0] as printed; decreasing in theta, for comparison only
    PaperPoly,      // published degree-5 polynomial in theta, alpha = pi/4 only
    Bivariate,      // published 6x6 table in (theta, alpha)
};

GMode parse_g_mode(const std::string &name);
const char *g_mode_name(GMode mode);

// arccos |unit(b - a) . t|, in [0, pi/2]. Throws on a zero-length edge.
double edge_angle(const Vec3d &a, const Vec3d &b, const PrintSetup &setup);

// Fraction of the bottom ellipse of a tilted unit cylinder whose normal points
// down by more than alpha, as an arc-length ratio. With k = cos(theta) the arc
// length element is sqrt(1 - k^2 sin^2 psi), so both arcs are Legendre
// elliptic integrals of the second kind.
double g_exact(double theta, double alpha, bool printed_bounds = false);
double g_poly_raw(double theta);  // unclamped polynomial value
double g_poly(double theta);      // 0 for theta <= pi/4, else clamped to [0, 1]
double g_bivariate_raw(double theta, double alpha);
double g_bivariate(double theta, double alpha);
double g_value(double theta, const PrintSetup &setup, GMode mode);

// Least-squares degree-5 polynomial in theta fitted to g_exact on (alpha, pi/2].
struct GFit
{
    std::array<double, 6> coeffs{};
    double max_error = 0.;  // on the fit samples
    double operator()(double theta) const;
};
GFit fit_g_polynomial(double alpha, int samples = 400);

// Eq. 12 over the lattice; throws on an empty graph or zero total r L.
double gamma_metric(const LatticeGraph &graph, const PrintSetup &setup, GMode mode = GMode::Exact);
// Percentage of edge length with theta <= alpha.
double psi_metric(const LatticeGraph &graph, const PrintSetup &setup);

struct SupportReport
{
    double gamma = 0.;
    double psi = 0.;
    double risky_length_percent = 0.;    // 100 - psi
    std::vector<double> angles;          // per edge, radians
    std::vector<double> angle_percent;   // length-weighted, 5 degree bins over [0, 90]
};
SupportReport support_report(const LatticeGraph &graph, const PrintSetup &setup, GMode mode = GMode::Exact);

// Compression by 1/k along the print direction and its inverse.
Vec3d scale_compress(const Vec3d &p, double k, const Vec3d &direction);
Vec3d scale_restore(const Vec3d &p, double k, const Vec3d &direction);
LatticeGraph scale_compress(const LatticeGraph &graph, double k, const Vec3d &direction);
LatticeGraph scale_restore(const LatticeGraph &graph, double k, const Vec3d &direction);
TetMesh scale_compress(const TetMesh &mesh, double k, const Vec3d &direction);
TetMesh scale_restore(const TetMesh &mesh, double k, const Vec3d &direction);

// h_max / h_min over the four vertex-to-opposite-face distances.
double aspect_ratio(const Vec3d &a, const Vec3d &b, const Vec3d &c, const Vec3d &d);

struct TetQuality
{
    std::vector<double> ratios;          // per leaf tet
    std::vector<double> bin_upper;       // histogram bin upper bounds, last is +inf
    std::vector<double> percent;
    double fraction_above_5 = 0.;
    double worst = 0.;
};
TetQuality tet_quality(const TetMesh &mesh);

struct PositionOptions
{
    int           max_iters = 100;   // sweeps over the interior vertices
    std::uint64_t seed = 42;
    GMode         mode = GMode::Exact;
    double        safety = 0.5;      // tau = safety * distance to the nearest opposite face
    double        fd_step = 1e-4;    // relative to the mean incident edge length
    // Weight per undirected lattice edge (undirected_key); missing edges weigh 1.
    const std::unordered_map<std::uint64_t, double> *weights = nullptr;
};

struct VertexMove
{
    std::uint32_t vertex = 0;
    double j_before = 0., j_after = 0.;
    double distance = 0.;  // |v - o|
    double tau = 0.;
};

struct PositionReport
{
    int         sweeps = 0;
    std::size_t interior = 0;
    std::vector<VertexMove> moves;
    double      gamma_before = 0., gamma_after = 0.;
    double      psi_before = 0., psi_after = 0.;
    std::size_t inversions = 0;  // leaf tets with nonpositive volume afterwards
};

// Position Optimization. Interior vertices are visited in a seeded random
// order each sweep and moved down the finite-difference gradient of
// J(v) = sum r L g / sum r L over their incident lattice edges, within the
// ball |v - o| <= tau about the current position. A step is halved from tau
// until J strictly decreases and the global Gamma does not increase.
// Stops after a sweep without moves or after max_iters sweeps.
PositionReport optimize_vertex_positions(TetMesh &mesh, const PrintSetup &setup, const PositionOptions &opts = {});

} // namespace convlat
