#include "convlat/deviation.hpp"
#include "convlat/edge_grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace convlat {

namespace {

double capped_cylinder_sdf(const Vec3d &p, const Vec3d &a, const Vec3d &b, double r)
{
    const Vec3d  ba = b - a;
    const double len = ba.norm();
    if (len == 0.) return (p - a).norm() - r;
    const Vec3d  u = ba / len;
    const double t = (p - a).dot(u);
    const double radial = (p - a - t * u).norm();
    const double dx = radial - r;
    const double dy = std::abs(t - 0.5 * len) - 0.5 * len;
    const double outside = std::hypot(std::max(dx, 0.), std::max(dy, 0.));
    return outside + std::min(std::max(dx, dy), 0.);
}

} // namespace

double IdealSolid::signed_distance(const Vec3d &p) const
{
    double d = std::numeric_limits<double>::infinity();
    for (const Cylinder &c : cylinders) d = std::min(d, capped_cylinder_sdf(p, c.a, c.b, c.radius));
    for (const Sphere &s : spheres) d = std::min(d, (p - s.center).norm() - s.radius);
    return d;
}

IdealSolid ideal_from_graph(const LatticeGraph &graph, double radius)
{
    IdealSolid ideal;
    std::vector<bool> used(graph.node_count(), false);
    for (std::size_t i = 0; i < graph.edge_count(); ++i) {
        ideal.cylinders.push_back({graph.edge_start(i), graph.edge_end(i), radius});
        used[graph.edge(i).start] = used[graph.edge(i).end] = true;
    }
    for (std::size_t i = 0; i < graph.node_count(); ++i)
        if (used[i]) ideal.spheres.push_back({graph.node(i), radius});
    return ideal;
}

void Histogram::write_csv(const std::filesystem::path &path) const
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(10);
    out << "bin_low,bin_high,percent\n";
    for (std::size_t i = 0; i < percent.size(); ++i) {
        out << low[i] << ',';
        if (std::isinf(high[i])) out << "inf";
        else out << high[i];
        out << ',' << percent[i] << '\n';
    }
    if (!out.flush()) throw Error("I/O failure writing " + path.string());
}

Histogram surface_deviation_histogram(const LatticeGraph &graph, const FieldConfig &cfg, const IdealSolid &ideal,
                                      const DeviationRequest &req)
{
    if (req.bin_count == 0 || !(req.bin_width > 0.)) throw Error("histogram needs positive bins");
    const auto segs = segments_of(graph);
    std::vector<std::uint32_t> nearby;
    for (std::size_t i = 0; i < segs.size(); ++i)
        if (point_segment_distance(req.center, segs[i].a, segs[i].b) < req.radius) nearby.push_back(std::uint32_t(i));
    if (nearby.empty()) throw Error("no surface found in the sampling region");

    const FieldEvaluator field(segs, cfg);
    std::mt19937_64 rng(req.seed);
    std::uniform_real_distribution<double> unit(0., 1.);

    // Rays stop after this distance from the skeleton.
    const double reach = cfg.kernel == KernelKind::Gaussian ? 6. * cfg.sigma
                         : cfg.kernel == KernelKind::DistanceField
                             ? 2. * std::max_element(segs.begin(), segs.end(), [](auto &x, auto &y) {
                                        return x.weight < y.weight;
                                    })->weight
                             : cfg.support_radius;
    const double step = reach / 128.;

    std::vector<double> values;
    values.reserve(req.sample_count);
    const std::size_t max_attempts = 50 * req.sample_count + 100;
    for (std::size_t attempt = 0; attempt < max_attempts && values.size() < req.sample_count; ++attempt) {
        const Segment &s = segs[nearby[std::size_t(unit(rng) * nearby.size()) % nearby.size()]];
        const Vec3d origin = s.a + unit(rng) * (s.b - s.a);
        // Random direction perpendicular to the edge.
        const Vec3d axis = (s.b - s.a).normalized();
        Vec3d helper = std::abs(axis.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitY();
        const Vec3d e1 = axis.cross(helper).normalized();
        const Vec3d e2 = axis.cross(e1);
        const double phi = 2. * kPi * unit(rng);
        const Vec3d dir = std::cos(phi) * e1 + std::sin(phi) * e2;

        if (field(origin) > 0.) continue;
        double inside_t = 0., outside_t = -1.;
        for (double t = step; t <= reach + step; t += step) {
            if (field(origin + t * dir) > 0.) {
                outside_t = t;
                break;
            }
            inside_t = t;
        }
        if (outside_t < 0.) continue;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (inside_t + outside_t);
            (field(origin + mid * dir) > 0. ? outside_t : inside_t) = mid;
        }
        const Vec3d q = origin + 0.5 * (inside_t + outside_t) * dir;
        if ((q - req.center).norm() > req.radius) continue;
        values.push_back(std::abs(ideal.signed_distance(q)));
    }
    if (values.empty()) throw Error("no surface found in the sampling region");

    Histogram h;
    h.samples = values.size();
    std::vector<std::size_t> counts(req.bin_count, 0);
    for (double v : values) {
        h.max_value = std::max(h.max_value, v);
        counts[std::min(req.bin_count - 1, std::size_t(v / req.bin_width))]++;
    }
    for (std::size_t i = 0; i < req.bin_count; ++i) {
        h.low.push_back(double(i) * req.bin_width);
        h.high.push_back(i + 1 == req.bin_count ? std::numeric_limits<double>::infinity() : double(i + 1) * req.bin_width);
        h.percent.push_back(100. * double(counts[i]) / double(values.size()));
    }
    return h;
}

} // namespace convlat
