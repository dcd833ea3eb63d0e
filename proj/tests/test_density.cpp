#include "oracles.hpp"

#include "convlat/density.hpp"
#include "convlat/support.hpp"

#include <doctest.h>

#include <fstream>
#include <map>
#include <random>

using namespace convlat;

namespace {

const std::array<Vec3d, 4> kRegular = {Vec3d(0, 0, 0), Vec3d(1, 0, 0), Vec3d(0.5, std::sqrt(3.) / 2, 0),
                                       Vec3d(0.5, std::sqrt(3.) / 6, std::sqrt(2. / 3.))};

double tet_volume(const std::array<Vec3d, 4> &v)
{
    return (v[1] - v[0]).cross(v[2] - v[0]).dot(v[3] - v[0]) / 6.;
}

BoundingBox box_of(const Vec3d &lo, const Vec3d &hi)
{
    BoundingBox b;
    b.merge(lo);
    b.merge(hi);
    return b;
}

TetMesh single_tet()
{
    TetMesh m;
    for (const Vec3d &p : kRegular) m.add_node(p);
    m.add_tet({0, 1, 2, 3});
    return m;
}

FieldConfig calibrated(double R, double r)
{
    FieldConfig cfg;
    cfg.support_radius = R;
    cfg.isovalue = calibrate_isovalue(r, 1., cfg);
    return cfg;
}

DensityGrid uniform_grid(int n, double spacing, const Vec3d &origin, double value)
{
    DensityGrid g;
    g.nx = g.ny = g.nz = n;
    g.spacing = spacing;
    g.origin = origin;
    g.values.assign(g.size(), value);
    return g;
}

} // namespace

TEST_CASE("edge-length cubic")
{
    const EdgeLengthEstimate e = target_edge_length(0.2, 1., 0.5, 10.);
    CHECK(e.p == doctest::Approx(-39.17).epsilon(1e-3));
    CHECK(e.p == doctest::Approx(-18. * std::sqrt(2.) * std::acos(1. / 3.) * 0.25 / 0.2).epsilon(1e-14));
    CHECK(e.discriminant < 0.);
    CHECK(e.roots[0] >= e.roots[1]);
    CHECK(e.roots[1] >= e.roots[2]);

    for (double tau : {0.5, 1., 2.})
        for (double r : {0.01, 0.1, 0.5})
            for (double rho : {0.01, 0.05, 0.1, 0.3, 0.6, 1.})
                for (double lc : {0.01, 1., 100.}) {
                    if (tau / rho < 0.75) {
                        // Three real roots need tau / rho > 0.756.
                        CHECK_THROWS_AS(target_edge_length(rho, tau, r, lc), Error);
                        continue;
                    }
                    const EdgeLengthEstimate x = target_edge_length(rho, tau, r, lc);
                    const double L = x.selected;
                    CHECK(std::abs(L * L * L + x.p * L + x.q) < 1e-9 * std::abs(x.q));
                    CHECK(x.length == std::max(4. * r, L));
                    CHECK(x.floored == (L < 4. * r));
                    for (double root : x.roots) CHECK(std::abs(root - lc) >= std::abs(L - lc));
                }
}

TEST_CASE("cubic floor and errors")
{
    // With tau / rho in (0.756, 0.96) the cubic has three real roots, all below 4 r.
    const EdgeLengthEstimate x = target_edge_length(1., 0.85, 0.5, 0.1);
    CHECK(x.discriminant < 0.);
    CHECK(x.roots[0] < 2.);
    CHECK(x.length == 2.);
    CHECK(x.floored);
    CHECK_THROWS_AS(target_edge_length(0., 1., 0.5, 1.), Error);
    CHECK_THROWS_AS(target_edge_length(0.2, 1., -1., 1.), Error);
}

TEST_CASE("estimated density inverts the cubic")
{
    for (double rho : {0.02, 0.1, 0.3}) {
        const EdgeLengthEstimate x = target_edge_length(rho, 1., 0.05, 1.);
        CHECK(estimated_tet_density(x.selected, 1., 0.05) == doctest::Approx(rho).epsilon(1e-9));
    }
}

TEST_CASE("Monte Carlo strut fraction of a regular tet near the estimate")
{
    // The estimate double counts overlaps, so agreement is only expected for thin struts.
    for (double rho : {0.02, 0.05, 0.1}) {
        const double r = 0.05;
        const EdgeLengthEstimate x = target_edge_length(rho, 1., r, 10.);
        REQUIRE(r / x.length <= 0.1);
        const double mc = oracle::regular_tet_strut_fraction(x.length, r, 400000, 11);
        CHECK(std::abs(mc - rho) <= 0.05 * rho);
    }
}

TEST_CASE("density grid file round trip and interpolation")
{
    const auto dir = oracle::temp_dir("dens");
    DensityGrid g;
    g.nx = 3;
    g.ny = 2;
    g.nz = 2;
    g.origin = Vec3d(1, 2, 3);
    g.spacing = 0.5;
    for (std::size_t i = 0; i < g.size(); ++i) g.values.push_back(0.05 * double(i));
    save_density_grid(g, dir / "g.txt");
    const DensityGrid h = load_density_grid(dir / "g.txt");
    CHECK(h.nx == 3);
    CHECK(h.nz == 2);
    CHECK(h.origin == g.origin);
    CHECK(h.values == g.values);
    CHECK(h.at(2, 1, 1) == g.values[g.index(2, 1, 1)]);
    CHECK(g.voxel_of(g.index(2, 0, 1)) == std::array<int, 3>{2, 0, 1});
    // Value at a voxel center, halfway between centers, and clamped outside.
    CHECK(g.interpolate(g.voxel_center(1, 1, 0)) == doctest::Approx(g.at(1, 1, 0)));
    CHECK(g.interpolate(0.5 * (g.voxel_center(0, 0, 0) + g.voxel_center(1, 0, 0))) ==
          doctest::Approx(0.5 * (g.at(0, 0, 0) + g.at(1, 0, 0))));
    CHECK(g.interpolate(Vec3d(-100, -100, -100)) == doctest::Approx(g.at(0, 0, 0)));

    std::ofstream(dir / "bad.txt") << "DENSGRID 2 1 1 0 0 0 1\n0.5\n";
    CHECK_THROWS_AS(load_density_grid(dir / "bad.txt"), Error);
    std::ofstream(dir / "neg.txt") << "DENSGRID 1 1 1 0 0 0 1\n-0.5\n";
    CHECK_THROWS_AS(load_density_grid(dir / "neg.txt"), Error);
}

TEST_CASE("structured generator on the unit cube")
{
    const TetMesh m = generate_structured_tets(box_of(Vec3d::Zero(), Vec3d::Ones()), {});
    CHECK(m.nodes.size() == 8);
    CHECK(m.tets.size() == 6);
    double vol = 0.;
    for (std::size_t t = 0; t < m.tets.size(); ++t) {
        CHECK(m.signed_volume(t) > 0.);
        vol += m.signed_volume(t);
    }
    CHECK(vol == doctest::Approx(1.).epsilon(1e-14));
    CHECK(lattice_from_tetmesh(m, 1.).edge_count() == 19);
    CHECK_THROWS_AS(generate_structured_tets(BoundingBox{}, {}), Error);
}

TEST_CASE("structured generator is conforming")
{
    for (double jitter : {0., 0.1}) {
        StructuredMeshOptions o;
        o.jitter = jitter;
        const TetMesh m = generate_structured_tets(box_of(Vec3d::Zero(), Vec3d(2, 2, 2)), o);
        CHECK(m.tets.size() == 48);
        std::map<std::array<std::uint32_t, 3>, int> faces;
        for (const Tet &t : m.tets)
            for (int skip = 0; skip < 4; ++skip) {
                std::array<std::uint32_t, 3> f;
                int n = 0;
                for (int i = 0; i < 4; ++i)
                    if (i != skip) f[std::size_t(n++)] = t.v[std::size_t(i)];
                std::sort(f.begin(), f.end());
                ++faces[f];
            }
        std::size_t boundary = 0;
        for (const auto &[f, n] : faces) {
            CHECK(n <= 2);
            if (n == 1) {
                ++boundary;
                // A face used once must lie on the box surface.
                bool on_side = false;
                for (int ax = 0; ax < 3; ++ax) {
                    const double c = m.nodes[f[0]][ax];
                    on_side |= (c == 0. || c == 2.) && m.nodes[f[1]][ax] == c && m.nodes[f[2]][ax] == c;
                }
                CHECK(on_side);
            }
        }
        // 6 sides x 4 squares x 2 triangles.
        CHECK(boundary == 48);
    }
}

TEST_CASE("compression during generation raises Psi")
{
    const BoundingBox box = box_of(Vec3d::Zero(), Vec3d(4, 4, 4));
    StructuredMeshOptions o;
    const double psi1 = psi_metric(lattice_from_tetmesh(generate_structured_tets(box, o), 1.), PrintSetup{});
    o.k = 1.6;
    const TetMesh m = generate_structured_tets(box, o);
    const double psi16 = psi_metric(lattice_from_tetmesh(m, 1.), PrintSetup{});
    CHECK(psi16 > psi1);
    const BoundingBox b = m.bounding_box();
    CHECK((b.min - box.min).norm() < 1e-12);
    CHECK((b.max - box.max).norm() < 1e-12);
}

TEST_CASE("occupancy generator keeps positive voxels only")
{
    DensityGrid g = uniform_grid(2, 1., Vec3d::Zero(), 0.);
    g.values[g.index(0, 0, 0)] = 0.3;
    g.values[g.index(1, 1, 1)] = 0.2;
    const TetMesh m = generate_structured_tets(g, {});
    CHECK(m.tets.size() == 12);
    DensityGrid empty = uniform_grid(2, 1., Vec3d::Zero(), 0.);
    CHECK_THROWS_AS(generate_structured_tets(empty, {}), Error);
}

TEST_CASE("Monte Carlo density basics")
{
    const FieldConfig cfg = calibrated(1., 0.4);
    const FieldEvaluator none({}, cfg);
    SamplingOptions so;
    so.samples = 1000;
    CHECK(measure_density(kRegular, none, so) == 0.);

    const std::vector<Segment> fat = {{Vec3d(-10, 0, 0), Vec3d(10, 0, 0), 1.}};
    const FieldEvaluator strut(fat, cfg);
    CHECK(measure_density(box_of(Vec3d(-1, -0.1, -0.1), Vec3d(1, 0.1, 0.1)), strut, so) == 1.);

    CHECK_THROWS_AS(measure_density(box_of(Vec3d::Zero(), Vec3d(1, 1, 0)), strut, so), Error);
    CHECK_THROWS_AS(measure_density({Vec3d::Zero(), Vec3d::UnitX(), Vec3d::UnitY(), Vec3d(1, 1, 0)}, strut, so), Error);
}

TEST_CASE("Monte Carlo recovers a cylinder volume")
{
    const double r = 0.4;
    const FieldConfig cfg = calibrated(1., r);
    const FieldEvaluator strut({{Vec3d(-10, 0, 0), Vec3d(14, 0, 0), 1.}}, cfg);
    const BoundingBox box = box_of(Vec3d(0, -1, -1), Vec3d(4, 1, 1));
    const double expect = M_PI * r * r * 4. / 16.;
    for (std::size_t n : {std::size_t(10000), std::size_t(100000)}) {
        SamplingOptions so;
        so.samples = n;
        const double sigma = std::sqrt(expect * (1. - expect) / double(n));
        CHECK(std::abs(measure_density(box, strut, so) - expect) <= 3. * sigma);
    }
}

TEST_CASE("Monte Carlo is deterministic and its error shrinks like 1/sqrt(n)")
{
    const FieldConfig cfg = calibrated(1., 0.4);
    const FieldEvaluator strut({{Vec3d(-10, 0.2, 0), Vec3d(14, 0.2, 0.3), 1.}}, cfg);
    const BoundingBox box = box_of(Vec3d(0, -1, -1), Vec3d(4, 1, 1));
    SamplingOptions so;
    so.samples = 5000;
    const double a = measure_density(box, strut, so);
    CHECK(measure_density(box, strut, so) == a);
    so.threads = 3;
    CHECK(measure_density(box, strut, so) == a);
    CHECK(measure_density(box, strut, so, 1) != a);

    for (std::size_t n : {std::size_t(1000), std::size_t(10000), std::size_t(100000)}) {
        std::vector<double> xs;
        for (std::uint64_t seed = 1; seed <= 30; ++seed) {
            SamplingOptions s;
            s.samples = n;
            s.seed = seed;
            xs.push_back(measure_density(box, strut, s));
        }
        double mean = 0., var = 0.;
        for (double x : xs) mean += x / double(xs.size());
        for (double x : xs) var += (x - mean) * (x - mean) / double(xs.size() - 1);
        CHECK(std::sqrt(var) <= 0.5 / std::sqrt(double(n)));
    }
}

TEST_CASE("subdividing a regular tet")
{
    const auto kids = child_tets(kRegular);
    double vol = 0.;
    for (const auto &c : kids) {
        CHECK(tet_volume(c) != 0.);
        vol += std::abs(tet_volume(c));
    }
    CHECK(vol == doctest::Approx(tet_volume(kRegular)).epsilon(1e-9));

    TetMesh m = single_tet();
    EdgeWeights w;
    const double parent_w[6] = {1., 2., 3., 4., 5., 6.};
    for (std::size_t e = 0; e < 6; ++e)
        w[undirected_key(std::uint32_t(kTetEdges[e][0]), std::uint32_t(kTetEdges[e][1]))] = parent_w[e];
    const auto ids = subdivide_tet(m, 0, &w);
    CHECK_THROWS_AS(subdivide_tet(m, 0), Error);
    CHECK(!m.tets[0].leaf);
    CHECK(m.leaf_count() == 8);
    double leaf_vol = 0.;
    for (auto id : ids) {
        CHECK(m.tets[id].depth == 1);
        CHECK(m.signed_volume(id) > 0.);
        leaf_vol += m.signed_volume(id);
    }
    CHECK(leaf_vol == doctest::Approx(tet_volume(kRegular)).epsilon(1e-9));

    const auto edges = m.lattice_edges();
    CHECK(edges.size() == 25);
    double total = 0.;
    for (auto [a, b] : edges) total += (m.nodes[a] - m.nodes[b]).norm();
    CHECK(std::abs(total - (12. + 1. / std::sqrt(2.))) < 1e-9 * total);

    // Classify every child edge against the parent's edges.
    int halves = 0, mids = 0, diag = 0;
    for (auto [a, b] : edges) {
        const Vec3d d = (m.nodes[b] - m.nodes[a]).normalized();
        const double wt = w.at(undirected_key(a, b));
        const bool a_orig = a < 4, b_orig = b < 4;
        if (a_orig || b_orig) {
            ++halves;
            const std::uint32_t o = a_orig ? a : b, mid = a_orig ? b : a;
            bool found = false;
            for (std::size_t e = 0; e < 6; ++e) {
                const auto pa = std::uint32_t(kTetEdges[e][0]), pb = std::uint32_t(kTetEdges[e][1]);
                if ((o == pa || o == pb) && m.find_midpoint(pa, pb) == mid) {
                    CHECK(wt == parent_w[e]);
                    found = true;
                }
            }
            CHECK(found);
            continue;
        }
        // Both ends are midpoints: a midsegment or the interior diagonal.
        int parallel = -1;
        for (std::size_t e = 0; e < 6; ++e) {
            const Vec3d p = (kRegular[std::size_t(kTetEdges[e][1])] - kRegular[std::size_t(kTetEdges[e][0])]).normalized();
            if (d.cross(p).norm() < 1e-12) parallel = int(e);
        }
        if (parallel >= 0) {
            ++mids;
            CHECK(wt == parent_w[parallel]);
        } else {
            ++diag;
            CHECK(wt == doctest::Approx(3.5));
            CHECK((m.nodes[a] - m.nodes[b]).norm() == doctest::Approx(1. / std::sqrt(2.)));
        }
    }
    CHECK(halves == 12);
    CHECK(mids == 12);
    CHECK(diag == 1);
    CHECK(edge_pieces(m, 0, 1).size() == 2);
}

TEST_CASE("diagonal choice prefers the shortest one")
{
    // Stretching along x makes the diagonal joining the two x-spanning
    // edges' midpoints... the one between edges (0,1)-(2,3) the shortest.
    std::array<Vec3d, 4> v = {Vec3d(0, 0, 0), Vec3d(3, 0, 0), Vec3d(0, 1, 0), Vec3d(0, 0, 1)};
    TetMesh m;
    for (const Vec3d &p : v) m.add_node(p);
    m.add_tet({0, 1, 2, 3});
    subdivide_tet(m, 0);
    const Vec3d mids[3][2] = {{0.5 * (v[0] + v[1]), 0.5 * (v[2] + v[3])},
                              {0.5 * (v[0] + v[2]), 0.5 * (v[1] + v[3])},
                              {0.5 * (v[0] + v[3]), 0.5 * (v[1] + v[2])}};
    double shortest = INFINITY;
    for (const auto &p : mids) shortest = std::min(shortest, (p[0] - p[1]).norm());
    // The interior edge is the only one joining midpoints of opposite edges.
    int found = 0;
    for (auto [a, b] : m.lattice_edges()) {
        const double len = (m.nodes[a] - m.nodes[b]).norm();
        for (const auto &p : mids)
            if (((m.nodes[a] - p[0]).norm() < 1e-12 && (m.nodes[b] - p[1]).norm() < 1e-12) ||
                ((m.nodes[b] - p[0]).norm() < 1e-12 && (m.nodes[a] - p[1]).norm() < 1e-12)) {
                ++found;
                CHECK(len == doctest::Approx(shortest));
            }
    }
    CHECK(found == 1);
}

TEST_CASE("neighbouring subdivisions share midpoints")
{
    TetMesh m = generate_structured_tets(box_of(Vec3d::Zero(), Vec3d::Ones()), {});
    subdivide_tet(m, 0);
    const std::size_t after_one = m.nodes.size();
    subdivide_tet(m, 1);
    // Tets 0 and 1 share a face, so 3 of tet 1's 6 midpoints already exist.
    CHECK(m.nodes.size() == after_one + 3);
}

TEST_CASE("density more than doubles after subdivision")
{
    const double r = 0.04;
    const FieldConfig cfg = calibrated(0.1, r);
    TetMesh m = single_tet();
    const LatticeGraph before = lattice_from_tetmesh(m, 1.);
    EdgeWeights w;
    for (auto [a, b] : m.tet_edges()) w[undirected_key(a, b)] = 1.;
    subdivide_tet(m, 0, &w);
    const LatticeGraph after = lattice_from_tetmesh(m, [&](std::uint32_t a, std::uint32_t b) { return w.at(undirected_key(a, b)); });
    SamplingOptions so;
    so.samples = 200000;
    const double rho0 = measure_density(kRegular, FieldEvaluator(segments_of(before), cfg), so);
    const double rho1 = measure_density(kRegular, FieldEvaluator(segments_of(after), cfg), so);
    const double noise = 3. * std::sqrt(rho1 * (1. - rho1) / double(so.samples));
    CHECK(rho1 - noise > 2. * rho0);
}

TEST_CASE("density matching fixed point")
{
    const MaterialSpec mat{1., 0.03, 0.06};
    const FieldConfig cfg = calibrated(0.15, mat.r);
    TetMesh m = single_tet();
    MatchOptions opts;
    opts.sampling.samples = 2048;
    const LatticeGraph g = lattice_from_tetmesh(m, 1.);
    const double rho = measure_density(kRegular, FieldEvaluator(segments_of(g), cfg), opts.sampling, 0);
    REQUIRE(rho > 0.);
    DensityGrid grid = uniform_grid(1, 1., Vec3d(0, 0, 0), rho);
    const MatchResult res = match_density(m, grid, mat, cfg, opts);
    CHECK(res.report.subdivisions == 0);
    REQUIRE(res.report.tets.size() == 1);
    CHECK(res.report.tets[0].rho == rho);
    CHECK(res.report.tets[0].factor == 1.);
    CHECK(res.report.tets[0].matched == rho);
    for (double x : res.ratios) CHECK(x <= 1.);
    CHECK(res.graph.edge_count() == 6);
}

TEST_CASE("zero target floors every strut")
{
    const MaterialSpec mat{1., 0.03, 0.06};
    const FieldConfig cfg = calibrated(0.15, mat.r);
    TetMesh m = generate_structured_tets(box_of(Vec3d::Zero(), Vec3d::Ones()), {});
    MatchOptions opts;
    opts.sampling.samples = 512;
    const MatchResult res = match_density(m, uniform_grid(1, 1., Vec3d::Zero(), 0.), mat, cfg, opts);
    CHECK(res.report.subdivisions == 0);
    CHECK(res.report.floored_edges == res.graph.edge_count());
    for (const Edge &e : res.graph.edges()) CHECK(e.weight == res.report.weight_floor);
    CHECK(strut_radius(res.report.weight_floor, cfg) == doctest::Approx(mat.r_min).epsilon(1e-6));
    REQUIRE(res.report.voxels.size() == 1);
    CHECK(res.report.voxels[0].flag == "floor");
    CHECK(res.report.mean_abs_error == 0.);
}

TEST_CASE("higher targets give thicker struts and tight brackets")
{
    const MaterialSpec mat{1., 0.03, 0.06};
    const FieldConfig cfg = calibrated(0.15, mat.r);
    MatchOptions opts;
    opts.sampling.samples = 1024;
    double prev = 0.;
    for (double target : {0.03, 0.06, 0.09}) {
        TetMesh m = generate_structured_tets(box_of(Vec3d::Zero(), Vec3d::Ones()), {});
        const MatchResult res = match_density(m, uniform_grid(1, 1., Vec3d::Zero(), target), mat, cfg, opts);
        CHECK(res.report.subdivisions == 0);
        double mean = 0.;
        for (const Edge &e : res.graph.edges()) {
            CHECK(e.weight >= res.report.weight_floor);
            mean += e.weight / double(res.graph.edge_count());
        }
        CHECK(mean > prev);
        prev = mean;
        for (const TetResult &t : res.report.tets)
            if (t.factor != 1. && t.factor != 2.) CHECK(t.bracket < 1e-6);
        CHECK(res.report.voxels[0].measured == doctest::Approx(target).epsilon(0.1));
    }
}

TEST_CASE("matching subdivides where the target is out of reach")
{
    const MaterialSpec mat{1., 0.03, 0.06};
    const FieldConfig cfg = calibrated(0.15, mat.r);
    MatchOptions opts;
    opts.sampling.samples = 512;
    opts.max_depth = 1;
    TetMesh m = generate_structured_tets(box_of(Vec3d::Zero(), Vec3d::Ones()), {});
    const MatchResult res = match_density(m, uniform_grid(1, 1., Vec3d::Zero(), 0.95), mat, cfg, opts);
    CHECK(res.report.subdivisions > 0);
    CHECK(res.report.unreachable_tets > 0);
    CHECK(res.report.voxels[0].flag == "unreachable");
    for (const TetResult &t : res.report.tets) CHECK(t.depth <= 1);
}
