#pragma once

#include "convlat/field.hpp"

#include <filesystem>
#include <vector>

namespace convlat {

// Reference solid for shape comparisons: union of capped cylinders and spheres.
struct IdealSolid
{
    struct Cylinder { Vec3d a, b; double radius; };
    struct Sphere   { Vec3d center; double radius; };

    std::vector<Cylinder> cylinders;
    std::vector<Sphere>   spheres;

    // Signed distance (negative inside) to the union; exact outside the union.
    double signed_distance(const Vec3d &p) const;
};

// Cylinders of `radius` on every edge plus a sphere of the same radius on
// every node that has an incident edge.
IdealSolid ideal_from_graph(const LatticeGraph &graph, double radius);

struct Histogram
{
    std::vector<double> low, high, percent;
    std::size_t samples = 0;
    double      max_value = 0.;

    void write_csv(const std::filesystem::path &path) const;
};

struct DeviationRequest
{
    Vec3d       center = Vec3d::Zero();
    double      radius = 1.;        // spherical sampling region
    std::size_t sample_count = 2000;
    double      bin_width = 0.01;   // mm; the last bin is open-ended
    std::size_t bin_count = 20;
    std::uint64_t seed = 42;
};

// Samples the isosurface F = 0 inside the region by bisection along rays cast
// from random skeleton points perpendicular to their edge, and histograms the
// unsigned distance of each sample to the ideal solid's boundary. Throws when
// no surface point is found in the region.
Histogram surface_deviation_histogram(const LatticeGraph &graph, const FieldConfig &cfg, const IdealSolid &ideal,
                                      const DeviationRequest &req);

} // namespace convlat
