#pragma once

#include "convlat/common.hpp"
#include "convlat/lattice.hpp"

#include <span>
#include <vector>

namespace convlat {

enum class KernelKind { CompactQuartic, Gaussian, DistanceField };

// Parameters of the implicit solid F(p) <= 0.
//
// For the compact kernel, F(p) = C - sum_i w_i * int f(p - x) ds over each
// edge clipped to the support sphere, with s the chord parameter in [0, 1].
// The sum is written with the sign that keeps F <= 0 inside for every
// kernel, the distance-field one included; empty space evaluates to C > 0.
// Along an isolated long strut the summed term has the radial profile
//     w * 8/15 * (1 - d^2/R^2)^2,
// so a weight w yields the geometric radius R * sqrt(1 - sqrt(15 C / (8 w))).
// For the distance-field baseline the weight is read as a radius in mm.
struct FieldConfig
{
    double     support_radius = 1.;   // R (mm)
    double     isovalue = 0.25;       // C
    KernelKind kernel = KernelKind::CompactQuartic;
    double     sigma = 0.5;           // Gaussian width (mm), Gaussian kernel only

    void validate() const;
};

// Skeleton segment with its endpoints resolved; the unit the evaluators work on.
struct Segment
{
    Vec3d  a;
    Vec3d  b;
    double weight = 0.;
};

double kernel_value(double distance, double R);

// r_i times the integral of the quartic kernel over the part of segment ab
// inside the sphere of radius R about p. The result does not depend on the
// segment orientation.
double edge_contribution(const Vec3d &p, const Vec3d &a, const Vec3d &b, double weight, double R);
inline double edge_contribution(const Vec3d &p, const Segment &s, double R)
{
    return edge_contribution(p, s.a, s.b, s.weight, R);
}

// w * int_0^L exp(-|p - x(u)|^2 / sigma^2) du (arc length), adaptive Simpson.
double gaussian_edge_contribution(const Vec3d &p, const Segment &s, double sigma);

double point_segment_distance(const Vec3d &p, const Vec3d &a, const Vec3d &b);

// F(p) over the given segments. Distance-field mode resolves equidistant
// closest edges in favour of the lowest index; it is a comparison baseline
// only, its value is ill-defined where closest edges carry different weights.
double field_value(const Vec3d &p, std::span<const Segment> segments, const FieldConfig &cfg);
double field_value(const Vec3d &p, const LatticeGraph &graph, const FieldConfig &cfg);

std::vector<Segment> segments_of(const LatticeGraph &graph);

// Value of the summed kernel term (without -C) at distance d from the middle
// of an infinitely long edge of the given weight.
double long_edge_profile(double distance, double weight, const FieldConfig &cfg);

// Isovalue for which an isolated long strut of `reference_weight` has the
// geometric radius `target_radius`. Throws when target_radius is not below
// 0.99 R: the isovalue there is too close to zero to control the surface.
double calibrate_isovalue(double target_radius, double reference_weight, const FieldConfig &cfg);
inline double calibrate_isovalue(double target_radius, double reference_weight, double R)
{
    FieldConfig cfg;
    cfg.support_radius = R;
    return calibrate_isovalue(target_radius, reference_weight, cfg);
}

// Geometric radius of an isolated long strut of the given weight under cfg,
// by bisection on long_edge_profile. Returns 0 when the strut vanishes.
double strut_radius(double weight, const FieldConfig &cfg);
// Weight whose isolated long strut has the given radius (compact kernel).
double weight_for_radius(double radius, const FieldConfig &cfg);

} // namespace convlat
