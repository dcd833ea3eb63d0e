#include "convlat/field.hpp"
#include "convlat/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace convlat {

void FieldConfig::validate() const
{
    if (!(support_radius > 0.) || !std::isfinite(support_radius)) throw Error("support radius R must be positive");
    if (!(isovalue > 0.) || !std::isfinite(isovalue)) throw Error("isovalue C must be positive");
    if (kernel == KernelKind::Gaussian && !(sigma > 0.)) throw Error("Gaussian sigma must be positive");
}

double kernel_value(double distance, double R)
{
    if (distance >= R) return 0.;
    const double t = 1. - distance * distance / (R * R);
    return t * t;
}

namespace {

// Lexicographic (z, y, x) order; fixes the evaluation orientation of a segment.
bool lex_less(const Vec3d &u, const Vec3d &v)
{
    if (u.z() != v.z()) return u.z() < v.z();
    if (u.y() != v.y()) return u.y() < v.y();
    return u.x() < v.x();
}

} // namespace

double edge_contribution(const Vec3d &p, const Vec3d &a_in, const Vec3d &b_in, double weight, double R)
{
    if (weight == 0.) return 0.;
    const bool swap = lex_less(b_in, a_in);
    const Vec3d &vs = swap ? b_in : a_in;
    const Vec3d &ve = swap ? a_in : b_in;

    const Vec3d  dir = ve - vs;
    const double len2 = dir.squaredNorm();
    if (len2 == 0.) return 0.;
    const double len = std::sqrt(len2);
    const Vec3d  u = dir / len;

    // Chord of the supporting line inside the sphere of radius R about p.
    const Vec3d  ps = p - vs;
    const double t0 = ps.dot(u);
    const double h2 = ps.cross(u).squaredNorm();
    const double R2 = R * R;
    if (h2 >= R2) return 0.;
    const double half = std::sqrt(R2 - h2);
    if (half == 0.) return 0.;

    const Vec3d  p1 = vs + (t0 - half) * u;
    const Vec3d  p2 = vs + (t0 + half) * u;
    const Vec3d  chord = p2 - p1;
    const double l2 = chord.squaredNorm();
    const double a = (p - p1).dot(chord);

    const double s1 = std::max(0., (vs - p1).dot(chord) / l2);
    const double s2 = std::min(1., (ve - p1).dot(chord) / l2);
    if (!(s2 > s1)) return 0.;

    auto antiderivative = [&](double s) {
        const double s3 = s * s * s;
        return 3. * l2 * l2 * s3 * s * s - 15. * a * l2 * s3 * s + 20. * a * a * s3;
    };
    return weight / (15. * R2 * R2) * (antiderivative(s2) - antiderivative(s1));
}

double gaussian_edge_contribution(const Vec3d &p, const Segment &s, double sigma)
{
    if (s.weight == 0.) return 0.;
    const Vec3d  dir = s.b - s.a;
    const double len = dir.norm();
    if (len == 0.) return 0.;
    const Vec3d  u = dir / len;
    const double t0 = (p - s.a).dot(u);
    const double inv = 1. / (sigma * sigma);
    auto f = [&](double t) { return std::exp(-(p - (s.a + t * u)).squaredNorm() * inv); };

    // exp(-64) is far below the quadrature tolerance; integrate only around
    // the foot point and split there so the peak is never skipped.
    const double lo = std::clamp(t0 - 8. * sigma, 0., len);
    const double hi = std::clamp(t0 + 8. * sigma, 0., len);
    const double mid = std::clamp(t0, lo, hi);
    const double tol = 1e-8;
    return s.weight * (adaptive_simpson(f, lo, mid, 0.5 * tol) + adaptive_simpson(f, mid, hi, 0.5 * tol));
}

double point_segment_distance(const Vec3d &p, const Vec3d &a, const Vec3d &b)
{
    const Vec3d  d = b - a;
    const double l2 = d.squaredNorm();
    if (l2 == 0.) return (p - a).norm();
    const double t = std::clamp((p - a).dot(d) / l2, 0., 1.);
    return (p - (a + t * d)).norm();
}

double field_value(const Vec3d &p, std::span<const Segment> segments, const FieldConfig &cfg)
{
    switch (cfg.kernel) {
    case KernelKind::CompactQuartic: {
        double sum = 0.;
        for (const Segment &s : segments) sum += edge_contribution(p, s.a, s.b, s.weight, cfg.support_radius);
        return cfg.isovalue - sum;
    }
    case KernelKind::Gaussian: {
        double sum = 0.;
        for (const Segment &s : segments) sum += gaussian_edge_contribution(p, s, cfg.sigma);
        return cfg.isovalue - sum;
    }
    case KernelKind::DistanceField: {
        double best = std::numeric_limits<double>::infinity();
        double radius = 0.;
        for (const Segment &s : segments) {
            const double d = point_segment_distance(p, s.a, s.b);
            if (d < best) {
                best = d;
                radius = s.weight;
            }
        }
        if (segments.empty()) return std::numeric_limits<double>::max();
        return best - radius;
    }
    }
    return 0.;
}

std::vector<Segment> segments_of(const LatticeGraph &graph)
{
    std::vector<Segment> out;
    out.reserve(graph.edge_count());
    for (std::size_t i = 0; i < graph.edge_count(); ++i)
        out.push_back({graph.edge_start(i), graph.edge_end(i), graph.edge(i).weight});
    return out;
}

double field_value(const Vec3d &p, const LatticeGraph &graph, const FieldConfig &cfg)
{
    const auto segs = segments_of(graph);
    return field_value(p, segs, cfg);
}

double long_edge_profile(double distance, double weight, const FieldConfig &cfg)
{
    switch (cfg.kernel) {
    case KernelKind::CompactQuartic: return weight * 8. / 15. * kernel_value(distance, cfg.support_radius);
    case KernelKind::Gaussian:
        return weight * cfg.sigma * std::sqrt(kPi) * std::exp(-distance * distance / (cfg.sigma * cfg.sigma));
    case KernelKind::DistanceField: break;
    }
    throw Error("the distance-field baseline has no isovalue profile");
}

double calibrate_isovalue(double target_radius, double reference_weight, const FieldConfig &cfg)
{
    if (!(reference_weight > 0.)) throw Error("reference weight must be positive");
    if (!(target_radius > 0.)) throw Error("target radius must be positive");
    if (cfg.kernel == KernelKind::CompactQuartic && !(target_radius < 0.99 * cfg.support_radius))
        throw Error("target radius " + std::to_string(target_radius) + " is unreachable with support radius " +
                    std::to_string(cfg.support_radius) + " (needs radius < 0.99 R)");
    // The profile is strictly decreasing in the distance, so the isovalue is
    // its value at the target radius.
    return long_edge_profile(target_radius, reference_weight, cfg);
}

double strut_radius(double weight, const FieldConfig &cfg)
{
    const double C = cfg.isovalue;
    if (long_edge_profile(0., weight, cfg) <= C) return 0.;
    double hi = cfg.support_radius;
    if (cfg.kernel == KernelKind::Gaussian) {
        hi = cfg.sigma;
        while (long_edge_profile(hi, weight, cfg) > C) hi *= 2.;
    }
    return bisect([&](double d) { return long_edge_profile(d, weight, cfg) - C; }, 0., hi);
}

double weight_for_radius(double radius, const FieldConfig &cfg)
{
    const double unit = long_edge_profile(radius, 1., cfg);
    if (!(unit > 0.)) throw Error("radius " + std::to_string(radius) + " is outside the kernel support");
    return cfg.isovalue / unit;
}

} // namespace convlat
