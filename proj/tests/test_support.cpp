#include "oracles.hpp"

#include "convlat/density.hpp"
#include "convlat/support.hpp"

#include <doctest.h>

#include <random>

using namespace convlat;

namespace {

const PrintSetup kUp{};

LatticeGraph single_edge(const Vec3d &a, const Vec3d &b, double w = 1.)
{
    LatticeGraph g;
    g.add_node(a);
    g.add_node(b);
    g.add_edge(0, 1, w);
    return g;
}

// Interior vertex v joined to a square ring in its horizontal plane and to
// apexes above and below: four horizontal and two vertical incident edges.
TetMesh bipyramid(const Vec3d &v)
{
    TetMesh m;
    m.add_node(v);
    const Vec3d ring[4] = {Vec3d(1, 0, 0), Vec3d(0, 1, 0), Vec3d(-1, 0, 0), Vec3d(0, -1, 0)};
    for (const Vec3d &p : ring) m.add_node(p);
    m.add_node(Vec3d(0, 0, 1));
    m.add_node(Vec3d(0, 0, -1));
    for (std::uint32_t i = 0; i < 4; ++i)
        for (std::uint32_t apex : {5u, 6u}) m.add_tet({0, 1 + i, 1 + (i + 1) % 4, apex});
    return m;
}

TetMesh jittered_block(std::uint64_t seed, double k = 1.)
{
    BoundingBox box;
    box.merge(Vec3d(0, 0, 0));
    box.merge(Vec3d(3, 3, 3));
    StructuredMeshOptions o;
    o.cell_size = 1.;
    o.k = k;
    o.jitter = 0.1;
    o.seed = seed;
    return generate_structured_tets(box, o);
}

} // namespace

TEST_CASE("edge angles")
{
    CHECK(edge_angle(Vec3d(0, 0, 0), Vec3d(0, 0, 2), kUp) == doctest::Approx(0.));
    CHECK(edge_angle(Vec3d(0, 0, 0), Vec3d(3, 0, 0), kUp) == doctest::Approx(M_PI / 2));
    CHECK(edge_angle(Vec3d(0, 0, 0), Vec3d(1, 0, 1), kUp) == doctest::Approx(M_PI / 4).epsilon(1e-14));
    CHECK_THROWS_AS(edge_angle(Vec3d(1, 1, 1), Vec3d(1, 1, 1), kUp), Error);

    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1., 1.), s(0.1, 10.);
    for (int i = 0; i < 200; ++i) {
        const Vec3d a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
        const double t = edge_angle(a, b, kUp);
        CHECK(edge_angle(b, a, kUp) == doctest::Approx(t).epsilon(1e-14));
        const double scale = s(rng);
        CHECK(edge_angle(scale * a, scale * b, kUp) == doctest::Approx(t).epsilon(1e-12));
        CHECK(t >= 0.);
        CHECK(t <= M_PI / 2);
    }
}

TEST_CASE("exact g against quadrature")
{
    CHECK(g_exact(M_PI / 4, M_PI / 4) == 0.);
    CHECK(g_exact(0.3, M_PI / 4) == 0.);
    CHECK(g_exact(M_PI / 2, M_PI / 4) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(oracle::g_quadrature(M_PI / 2, M_PI / 4) == doctest::Approx(0.5).epsilon(1e-10));
    const double mid = g_exact(M_PI / 3, M_PI / 4);
    CHECK(mid == doctest::Approx(oracle::g_quadrature(M_PI / 3, M_PI / 4)).epsilon(1e-8));
    CHECK(mid > 0.);
    CHECK(mid < 0.5);
    for (double alpha : {0.3, M_PI / 4, 1.0})
        for (int i = 1; i <= 20; ++i) {
            const double t = alpha + (M_PI / 2 - alpha) * i / 20.;
            CHECK(std::abs(g_exact(t, alpha) - oracle::g_quadrature(t, alpha)) < 1e-8);
        }
}

TEST_CASE("exact g is continuous and nondecreasing")
{
    double prev = 0.;
    for (int i = 0; i <= 1000; ++i) {
        const double t = M_PI / 2 * i / 1000.;
        const double g = g_exact(t, M_PI / 4);
        CHECK(g >= prev);
        CHECK(g <= 1.);
        prev = g;
    }
    CHECK(g_exact(M_PI / 4 + 1e-10, M_PI / 4) < 1e-4);
}

TEST_CASE("published polynomial")
{
    CHECK(g_poly(M_PI / 4) == 0.);
    CHECK(g_poly(0.2) == 0.);
    // -0.02 - 0.31 + 1.44 - 1.11 + 0.58 - 0.16
    CHECK(std::abs(g_poly_raw(1.) - 0.42) < 1e-12);
    CHECK(g_poly(1.) == doctest::Approx(0.42).epsilon(1e-12));
    const double t = M_PI / 2;
    const double expect = -0.02 - 0.31 * t + 1.44 * t * t - 1.11 * t * t * t + 0.58 * std::pow(t, 4) - 0.16 * std::pow(t, 5);
    CHECK(g_poly_raw(t) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(g_poly_raw(t) == doctest::Approx(0.745).epsilon(0.01));
}

TEST_CASE("g mode parsing and bivariate bounds")
{
    for (GMode m : {GMode::Exact, GMode::PrintedBounds, GMode::PaperPoly, GMode::Bivariate})
        CHECK(parse_g_mode(g_mode_name(m)) == m);
    CHECK_THROWS_AS(parse_g_mode("nope"), Error);
    for (int i = 0; i <= 50; ++i) {
        const double t = M_PI / 2 * i / 50.;
        const double v = g_bivariate(t, M_PI / 4);
        CHECK(v >= 0.);
        CHECK(v <= 1.);
        if (t <= M_PI / 4) CHECK(v == 0.);
    }
}

TEST_CASE("least-squares fit is no worse than the published polynomial in RMS")
{
    const int n = 400;
    const GFit fit = fit_g_polynomial(M_PI / 4, n);
    double fit_sq = 0., paper_sq = 0., worst = 0.;
    for (int s = 0; s < n; ++s) {
        const double t = M_PI / 4 + M_PI / 4 * (s + 1) / n;
        const double g = oracle::g_quadrature(t, M_PI / 4);
        fit_sq += (fit(t) - g) * (fit(t) - g);
        paper_sq += (g_poly_raw(t) - g) * (g_poly_raw(t) - g);
        worst = std::max(worst, std::abs(fit(t) - g));
    }
    CHECK(fit_sq <= paper_sq);
    CHECK(fit.max_error == doctest::Approx(worst).epsilon(1e-6));
}

TEST_CASE("Gamma and Psi")
{
    const LatticeGraph vertical = single_edge(Vec3d(0, 0, 0), Vec3d(0, 0, 1));
    const LatticeGraph horizontal = single_edge(Vec3d(0, 0, 0), Vec3d(1, 0, 0));
    CHECK(gamma_metric(vertical, kUp) == 0.);
    CHECK(gamma_metric(horizontal, kUp) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(psi_metric(vertical, kUp) == 100.);
    CHECK(psi_metric(horizontal, kUp) == 0.);

    LatticeGraph half;
    half.add_node(Vec3d(0, 0, 0));
    half.add_node(Vec3d(0, 0, 2));
    half.add_node(Vec3d(2, 0, 2));
    half.add_edge(0, 1, 1.);
    half.add_edge(1, 2, 1.);
    CHECK(psi_metric(half, kUp) == doctest::Approx(50.));
    CHECK(gamma_metric(half, kUp) == doctest::Approx(0.25).epsilon(1e-12));

    LatticeGraph scaled = half;
    scaled.set_weight(0, 7.);
    scaled.set_weight(1, 7.);
    CHECK(gamma_metric(scaled, kUp) == doctest::Approx(gamma_metric(half, kUp)).epsilon(1e-14));
    CHECK_THROWS_AS(gamma_metric(LatticeGraph{}, kUp), Error);
    CHECK_THROWS_AS(psi_metric(LatticeGraph{}, kUp), Error);

    const SupportReport rep = support_report(half, kUp);
    CHECK(rep.risky_length_percent == doctest::Approx(50.));
    REQUIRE(rep.angles.size() == 2);
    double total = 0.;
    for (double p : rep.angle_percent) total += p;
    CHECK(total == doctest::Approx(100.));
}

TEST_CASE("compression raises strut angles")
{
    const Vec3d a(0, 0, 0), b(1, 0, 1);
    const Vec3d ca = scale_compress(a, 2., Vec3d::UnitZ()), cb = scale_compress(b, 2., Vec3d::UnitZ());
    CHECK(edge_angle(ca, cb, kUp) == doctest::Approx(M_PI / 2 - std::atan(0.5)).epsilon(1e-14));
    CHECK(edge_angle(ca, cb, kUp) == doctest::Approx(1.1071).epsilon(1e-4));
    CHECK(scale_compress(b, 1., Vec3d::UnitZ()) == b);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1., 1.), kk(1.0001, 3.);
    for (int i = 0; i < 500; ++i) {
        const Vec3d t = Vec3d(u(rng), u(rng), u(rng)).normalized();
        const PrintSetup s{t, M_PI / 4};
        const Vec3d p(u(rng), u(rng), u(rng)), q(u(rng), u(rng), u(rng));
        const double k = kk(rng);
        const Vec3d cp = scale_compress(p, k, t), cq = scale_compress(q, k, t);
        CHECK(edge_angle(cp, cq, s) > edge_angle(p, q, s));
        CHECK((scale_restore(cp, k, t) - p).norm() < 1e-12);
    }
}

TEST_CASE("aspect ratio")
{
    const Vec3d a(0, 0, 0), b(1, 0, 0), c(0.5, std::sqrt(3.) / 2, 0), d(0.5, std::sqrt(3.) / 6, std::sqrt(2. / 3.));
    CHECK(aspect_ratio(a, b, c, d) == doctest::Approx(1.).epsilon(1e-12));
    // Independent altitude computation: h = 3 V / opposite face area.
    auto oracle_ratio = [](const Vec3d v[4]) {
        const double vol = std::abs((v[1] - v[0]).cross(v[2] - v[0]).dot(v[3] - v[0])) / 6.;
        double hmin = INFINITY, hmax = 0.;
        for (int i = 0; i < 4; ++i) {
            const Vec3d &p = v[(i + 1) % 4], &q = v[(i + 2) % 4], &r = v[(i + 3) % 4];
            const double h = 3. * vol / (0.5 * (q - p).cross(r - p).norm());
            hmin = std::min(hmin, h);
            hmax = std::max(hmax, h);
        }
        return hmax / hmin;
    };
    const Vec3d squashed[4] = {a, b, c, Vec3d(d.x(), d.y(), d.z() / 10.)};
    CHECK(aspect_ratio(a, b, c, squashed[3]) == doctest::Approx(oracle_ratio(squashed)).epsilon(1e-12));
    // Squashing the apex altitude 10x leaves the base face intact, so the
    // apex altitude is the short one and the ratio grows.
    CHECK(aspect_ratio(a, b, c, squashed[3]) > 2.);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1., 1.);
    for (int i = 0; i < 100; ++i) {
        const Vec3d v[4] = {Vec3d(u(rng), u(rng), u(rng)), Vec3d(u(rng), u(rng), u(rng)), Vec3d(u(rng), u(rng), u(rng)),
                            Vec3d(u(rng), u(rng), u(rng))};
        CHECK(aspect_ratio(v[0], v[1], v[2], v[3]) == doctest::Approx(oracle_ratio(v)).epsilon(1e-9));
    }
    CHECK_THROWS_AS(aspect_ratio(a, b, c, Vec3d(0.3, 0.3, 0)), Error);

    const TetMesh m = jittered_block(1);
    const TetQuality q = tet_quality(m);
    CHECK(q.ratios.size() == m.leaf_count());
    double total = 0.;
    for (double p : q.percent) total += p;
    CHECK(total == doctest::Approx(100.));
    CHECK(q.fraction_above_5 >= 0.);
    CHECK(q.worst >= 1.);
}

TEST_CASE("position optimization leaves a self-supported star alone")
{
    // Apexes far above and below: every incident edge is steep.
    TetMesh m;
    m.add_node(Vec3d(0, 0, 0));
    const Vec3d ring[3] = {Vec3d(0.1, 0, 0), Vec3d(-0.05, 0.09, 0), Vec3d(-0.05, -0.09, 0)};
    for (const Vec3d &p : ring) m.add_node(p + Vec3d(0, 0, 2));
    m.add_node(Vec3d(0, 0, -2));
    m.add_node(Vec3d(0, 0, 4));
    // Not a closed star; the vertex is pinned so nothing moves.
    m.add_tet({0, 1, 2, 4});
    const PositionReport rep = optimize_vertex_positions(m, kUp);
    CHECK(rep.moves.empty());
}

TEST_CASE("position optimization decreases J on a horizontal star")
{
    TetMesh m = bipyramid(Vec3d(0.05, 0.03, 0.02));
    const LatticeGraph before = lattice_from_tetmesh(m, 1.);
    const PositionReport rep = optimize_vertex_positions(m, kUp);
    CHECK(rep.interior == 1);
    REQUIRE(!rep.moves.empty());
    for (const VertexMove &mv : rep.moves) {
        CHECK(mv.vertex == 0);
        CHECK(mv.j_after < mv.j_before);
        CHECK(mv.distance <= mv.tau);
    }
    CHECK(rep.inversions == 0);
    CHECK(rep.gamma_after < rep.gamma_before);
    CHECK(gamma_metric(lattice_from_tetmesh(m, 1.), kUp) < gamma_metric(before, kUp));
    for (std::size_t t = 0; t < m.tets.size(); ++t) CHECK(m.signed_volume(t) > 0.);
}

TEST_CASE("position optimization on random meshes")
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1., 1.), k(1., 2.);
    for (std::uint64_t seed = 1; seed <= 24; ++seed) {
        TetMesh m = jittered_block(seed, k(rng));
        PrintSetup setup;
        setup.direction = Vec3d(0.3 * u(rng), 0.3 * u(rng), 1.).normalized();
        PositionOptions opts;
        opts.max_iters = 5;
        opts.seed = seed;
        const PositionReport rep = optimize_vertex_positions(m, setup, opts);
        CHECK(rep.inversions == 0);
        CHECK(rep.gamma_after <= rep.gamma_before);
        for (const VertexMove &mv : rep.moves) {
            CHECK(mv.distance <= mv.tau);
            CHECK(mv.j_after < mv.j_before);
        }
        for (std::size_t t = 0; t < m.tets.size(); ++t) CHECK(m.signed_volume(t) > 0.);
        CHECK(gamma_metric(lattice_from_tetmesh(m, 1.), setup) == doctest::Approx(rep.gamma_after).epsilon(1e-12));
    }
}
