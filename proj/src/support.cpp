#include "convlat/support.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace convlat {

void PrintSetup::validate() const
{
    if (std::abs(direction.norm() - 1.) > 1e-12) throw Error("print direction must be a unit vector");
    if (!(alpha > 0. && alpha < kPi / 2)) throw Error("self-supporting angle must lie in (0, pi/2)");
}

GMode parse_g_mode(const std::string &name)
{
    if (name == "exact") return GMode::Exact;
    if (name == "printed") return GMode::PrintedBounds;
    if (name == "paper-poly") return GMode::PaperPoly;
    if (name == "bivariate") return GMode::Bivariate;
    throw Error("unknown g mode '" + name + "' (exact, printed, paper-poly, bivariate)");
}

const char *g_mode_name(GMode mode)
{
    switch (mode) {
    case GMode::Exact: return "exact";
    case GMode::PrintedBounds: return "printed";
    case GMode::PaperPoly: return "paper-poly";
    case GMode::Bivariate: return "bivariate";
    }
    return "?";
}

double edge_angle(const Vec3d &a, const Vec3d &b, const PrintSetup &setup)
{
    const Vec3d d = b - a;
    const double len = d.norm();
    if (len == 0.) throw Error("zero-length edge has no angle");
    return std::acos(std::min(1., std::abs(d.dot(setup.direction)) / len));
}

double g_exact(double theta, double alpha, bool printed_bounds)
{
    const double st = std::sin(theta), sa = std::sin(alpha);
    if (st <= sa) return 0.;
    const double phi0 = std::asin(sa / st);
    const double k = std::cos(theta);
    const double total = std::comp_ellint_2(k);
    // int_{phi0}^{pi/2} sqrt(sin^2 + sin^2(theta) cos^2) = E(pi/2 - phi0 | k).
    const double risky = std::ellint_2(k, kPi / 2 - phi0) / total;
    return std::clamp(printed_bounds ? 1. - risky : risky, 0., 1.);
}

namespace {

constexpr std::array<double, 6> kPaperPoly = {-0.02, -0.31, 1.44, -1.11, 0.58, -0.16};

// Row i is the power of theta, column j the power of alpha (times 0.1).
constexpr double kBivariate[6][6] = {
    {-5.15, 31.71, -56.03, 34.12, -5.45, 0.43},
    {26.36, -127.20, 164.41, -67.87, 4.99, 0},
    {-38.00, 134.20, -106.20, 25.86, 0, 0},
    {17.79, -49.65, 1.64, 0, 0, 0},
    {0.60, 6.60, 0, 0, 0, 0},
    {-1.66, 0, 0, 0, 0, 0},
};

double horner(const std::array<double, 6> &c, double x)
{
    double v = 0.;
    for (int i = 5; i >= 0; --i) v = v * x + c[std::size_t(i)];
    return v;
}

} // namespace

double g_poly_raw(double theta) { return horner(kPaperPoly, theta); }

double g_poly(double theta)
{
    if (theta <= kPi / 4) return 0.;
    return std::clamp(g_poly_raw(theta), 0., 1.);
}

double g_bivariate_raw(double theta, double alpha)
{
    double v = 0., ti = 1.;
    for (int i = 0; i < 6; ++i, ti *= theta) {
        double aj = 1.;
        for (int j = 0; j < 6; ++j, aj *= alpha) v += 0.1 * kBivariate[i][j] * ti * aj;
    }
    return v;
}

double g_bivariate(double theta, double alpha)
{
    if (std::sin(theta) <= std::sin(alpha)) return 0.;
    return std::clamp(g_bivariate_raw(theta, alpha), 0., 1.);
}

double g_value(double theta, const PrintSetup &setup, GMode mode)
{
    if (theta <= setup.alpha + kAngleSlack) return 0.;
    switch (mode) {
    case GMode::Exact: return g_exact(theta, setup.alpha);
    case GMode::PrintedBounds: return g_exact(theta, setup.alpha, true);
    case GMode::PaperPoly: return g_poly(theta);
    case GMode::Bivariate: return g_bivariate(theta, setup.alpha);
    }
    return 0.;
}

double GFit::operator()(double theta) const { return horner(coeffs, theta); }

GFit fit_g_polynomial(double alpha, int samples)
{
    if (samples < 6) throw Error("the fit needs at least 6 samples");
    Eigen::MatrixXd A(samples, 6);
    Eigen::VectorXd y(samples);
    std::vector<double> thetas;
    for (int s = 0; s < samples; ++s) {
        const double t = alpha + (kPi / 2 - alpha) * (s + 1) / samples;
        thetas.push_back(t);
        double p = 1.;
        for (int i = 0; i < 6; ++i, p *= t) A(s, i) = p;
        y(s) = g_exact(t, alpha);
    }
    const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
    GFit fit;
    for (int i = 0; i < 6; ++i) fit.coeffs[std::size_t(i)] = c(i);
    for (int s = 0; s < samples; ++s) fit.max_error = std::max(fit.max_error, std::abs(fit(thetas[std::size_t(s)]) - y(s)));
    return fit;
}

double gamma_metric(const LatticeGraph &graph, const PrintSetup &setup, GMode mode)
{
    return support_report(graph, setup, mode).gamma;
}

double psi_metric(const LatticeGraph &graph, const PrintSetup &setup)
{
    return support_report(graph, setup, GMode::Exact).psi;
}

SupportReport support_report(const LatticeGraph &graph, const PrintSetup &setup, GMode mode)
{
    setup.validate();
    if (graph.edge_count() == 0) throw Error("support metrics need at least one edge");
    SupportReport rep;
    rep.angle_percent.assign(18, 0.);
    double num = 0., den = 0., len_all = 0., len_ok = 0.;
    for (std::size_t i = 0; i < graph.edge_count(); ++i) {
        const double L = graph.edge_length(i);
        const double r = graph.edge(i).weight;
        const double theta = edge_angle(graph.edge_start(i), graph.edge_end(i), setup);
        rep.angles.push_back(theta);
        den += r * L;
        len_all += L;
        if (theta <= setup.alpha + kAngleSlack) len_ok += L;
        else num += r * L * g_value(theta, setup, mode);
        const std::size_t bin = std::min<std::size_t>(17, std::size_t(theta / (kPi / 36)));
        rep.angle_percent[bin] += L;
    }
    if (!(den > 0.)) throw Error("support metrics need a positive total weighted length");
    rep.gamma = num / den;
    rep.psi = 100. * len_ok / len_all;
    rep.risky_length_percent = 100. * (len_all - len_ok) / len_all;
    for (double &p : rep.angle_percent) p *= 100. / len_all;
    return rep;
}

Vec3d scale_compress(const Vec3d &p, double k, const Vec3d &t)
{
    if (!(k >= 1.)) throw Error("scaling factor k must be at least 1");
    return p + (1. / k - 1.) * p.dot(t) * t;
}

Vec3d scale_restore(const Vec3d &p, double k, const Vec3d &t)
{
    if (!(k >= 1.)) throw Error("scaling factor k must be at least 1");
    return p + (k - 1.) * p.dot(t) * t;
}

LatticeGraph scale_compress(const LatticeGraph &graph, double k, const Vec3d &t)
{
    LatticeGraph g = graph;
    for (std::size_t i = 0; i < g.node_count(); ++i) g.set_node(i, scale_compress(g.node(i), k, t));
    return g;
}

LatticeGraph scale_restore(const LatticeGraph &graph, double k, const Vec3d &t)
{
    LatticeGraph g = graph;
    for (std::size_t i = 0; i < g.node_count(); ++i) g.set_node(i, scale_restore(g.node(i), k, t));
    return g;
}

TetMesh scale_compress(const TetMesh &mesh, double k, const Vec3d &t)
{
    TetMesh m = mesh;
    for (Vec3d &p : m.nodes) p = scale_compress(p, k, t);
    m.extent = m.bounding_box();
    return m;
}

TetMesh scale_restore(const TetMesh &mesh, double k, const Vec3d &t)
{
    TetMesh m = mesh;
    for (Vec3d &p : m.nodes) p = scale_restore(p, k, t);
    m.extent = m.bounding_box();
    return m;
}

namespace {

double face_area(const Vec3d &a, const Vec3d &b, const Vec3d &c) { return 0.5 * (b - a).cross(c - a).norm(); }

// Distance from p to the plane through a, b, c.
double plane_distance(const Vec3d &p, const Vec3d &a, const Vec3d &b, const Vec3d &c)
{
    const Vec3d n = (b - a).cross(c - a);
    const double len = n.norm();
    return len == 0. ? 0. : std::abs((p - a).dot(n)) / len;
}

} // namespace

double aspect_ratio(const Vec3d &a, const Vec3d &b, const Vec3d &c, const Vec3d &d)
{
    const double V = std::abs(signed_volume(a, b, c, d));
    const double areas[4] = {face_area(b, c, d), face_area(a, c, d), face_area(a, b, d), face_area(a, b, c)};
    double hmin = std::numeric_limits<double>::infinity(), hmax = 0.;
    for (double A : areas) {
        if (A == 0.) throw Error("degenerate tet has no aspect ratio");
        const double h = 3. * V / A;
        hmin = std::min(hmin, h);
        hmax = std::max(hmax, h);
    }
    if (!(hmin > 0.)) throw Error("degenerate tet has no aspect ratio");
    return hmax / hmin;
}

TetQuality tet_quality(const TetMesh &mesh)
{
    TetQuality q;
    for (double u = 1.5; u <= 5.; u += 0.5) q.bin_upper.push_back(u);
    q.bin_upper.push_back(std::numeric_limits<double>::infinity());
    q.percent.assign(q.bin_upper.size(), 0.);
    std::size_t above = 0;
    for (std::uint32_t t : mesh.leaf_tets()) {
        const auto &v = mesh.tets[t].v;
        const double r = aspect_ratio(mesh.nodes[v[0]], mesh.nodes[v[1]], mesh.nodes[v[2]], mesh.nodes[v[3]]);
        q.ratios.push_back(r);
        q.worst = std::max(q.worst, r);
        above += r > 5.;
        const auto bin = std::size_t(std::lower_bound(q.bin_upper.begin(), q.bin_upper.end(), r) - q.bin_upper.begin());
        q.percent[std::min(bin, q.percent.size() - 1)] += 1.;
    }
    if (!q.ratios.empty()) {
        for (double &p : q.percent) p *= 100. / double(q.ratios.size());
        q.fraction_above_5 = double(above) / double(q.ratios.size());
    }
    return q;
}

// ---------------------------------------------------------------------------
// Position Optimization

PositionReport optimize_vertex_positions(TetMesh &mesh, const PrintSetup &setup, const PositionOptions &opts)
{
    setup.validate();
    const auto edges = mesh.lattice_edges();
    const std::size_t n = mesh.nodes.size();
    std::vector<double> weight(edges.size(), 1.);
    if (opts.weights)
        for (std::size_t e = 0; e < edges.size(); ++e)
            if (auto it = opts.weights->find(undirected_key(edges[e].first, edges[e].second)); it != opts.weights->end())
                weight[e] = it->second;

    std::vector<std::vector<std::uint32_t>> node_edges(n), node_tets(n);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        node_edges[edges[e].first].push_back(std::uint32_t(e));
        node_edges[edges[e].second].push_back(std::uint32_t(e));
    }
    for (std::uint32_t t : mesh.leaf_tets())
        for (auto v : mesh.tets[t].v) node_tets[v].push_back(t);

    auto graph_now = [&] {
        LatticeGraph g;
        for (const Vec3d &p : mesh.nodes) g.add_node(p);
        for (std::size_t e = 0; e < edges.size(); ++e) g.add_edge(edges[e].first, edges[e].second, weight[e]);
        return g;
    };

    PositionReport rep;
    {
        const LatticeGraph g = graph_now();
        if (g.edge_count() == 0) return rep;
        const auto s = support_report(g, setup, opts.mode);
        rep.gamma_before = s.gamma;
        rep.psi_before = s.psi;
    }

    // r L g and r L of edge e with node v placed at p.
    auto edge_terms = [&](std::uint32_t e, std::uint32_t v, const Vec3d &p) {
        const Vec3d a = edges[e].first == v ? p : mesh.nodes[edges[e].first];
        const Vec3d b = edges[e].second == v ? p : mesh.nodes[edges[e].second];
        const double L = (b - a).norm();
        const double g = L > 0. ? g_value(edge_angle(a, b, setup), setup, opts.mode) : 0.;
        return std::pair{weight[e] * L * g, weight[e] * L};
    };
    auto star = [&](std::uint32_t v, const Vec3d &p) {
        double num = 0., den = 0.;
        for (std::uint32_t e : node_edges[v]) {
            const auto [a, b] = edge_terms(e, v, p);
            num += a;
            den += b;
        }
        return std::pair{num, den};
    };
    auto J = [&](std::uint32_t v, const Vec3d &p) {
        const auto [num, den] = star(v, p);
        return den > 0. ? num / den : 0.;
    };
    auto star_valid = [&](std::uint32_t v, const Vec3d &p) {
        for (std::uint32_t t : node_tets[v]) {
            std::array<Vec3d, 4> c;
            for (int k = 0; k < 4; ++k) c[std::size_t(k)] = mesh.tets[t].v[std::size_t(k)] == v ? p : mesh.nodes[mesh.tets[t].v[std::size_t(k)]];
            if (!(signed_volume(c[0], c[1], c[2], c[3]) > mesh.volume_epsilon())) return false;
        }
        return true;
    };

    double N = 0., D = 0.;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const auto [a, b] = edge_terms(std::uint32_t(e), std::uint32_t(n), Vec3d::Zero());
        N += a;
        D += b;
    }

    const auto pinned = mesh.pinned_nodes();
    std::vector<std::uint32_t> interior;
    for (std::uint32_t v = 0; v < n; ++v)
        if (!pinned[v] && !node_tets[v].empty() && !node_edges[v].empty()) interior.push_back(v);
    rep.interior = interior.size();

    std::mt19937_64 rng(opts.seed);
    for (rep.sweeps = 0; rep.sweeps < opts.max_iters;) {
        ++rep.sweeps;
        std::shuffle(interior.begin(), interior.end(), rng);
        std::size_t moved = 0;
        for (std::uint32_t v : interior) {
            const Vec3d o = mesh.nodes[v];
            const double J0 = J(v, o);
            if (!(J0 > 0.)) continue;

            double tau = std::numeric_limits<double>::infinity();
            for (std::uint32_t t : node_tets[v]) {
                std::array<Vec3d, 3> f;
                int m = 0;
                for (auto u : mesh.tets[t].v)
                    if (u != v) f[std::size_t(m++)] = mesh.nodes[u];
                tau = std::min(tau, plane_distance(o, f[0], f[1], f[2]));
            }
            tau *= opts.safety;
            double mean_len = 0.;
            for (std::uint32_t e : node_edges[v])
                mean_len += (mesh.nodes[edges[e].first] - mesh.nodes[edges[e].second]).norm();
            mean_len /= double(node_edges[v].size());
            const double h = opts.fd_step * mean_len;
            if (!(tau > 0.) || !(h > 0.)) continue;

            Vec3d grad;
            for (int k = 0; k < 3; ++k) {
                Vec3d dp = Vec3d::Zero();
                dp[k] = h;
                grad[k] = (J(v, o + dp) - J(v, o - dp)) / (2. * h);
            }
            const double gn = grad.norm();
            if (!(gn > 0.)) continue;
            const Vec3d dir = -grad / gn;

            const auto [num0, den0] = star(v, o);
            for (double step = tau; step > 1e-12 * tau; step *= 0.5) {
                const Vec3d p = o + step * dir;
                if ((p - o).norm() > tau) continue;  // rounding at tiny tau
                const auto [num1, den1] = star(v, p);
                const double J1 = den1 > 0. ? num1 / den1 : 0.;
                if (!(J1 < J0)) continue;
                const double N1 = N - num0 + num1, D1 = D - den0 + den1;
                if (N1 * D > N * D1) continue;  // global Gamma would grow
                if (!star_valid(v, p)) continue;
                mesh.nodes[v] = p;
                N = N1;
                D = D1;
                rep.moves.push_back({v, J0, J1, (p - o).norm(), tau});
                ++moved;
                break;
            }
        }
        if (moved == 0) break;
    }

    for (std::uint32_t t : mesh.leaf_tets())
        if (!(mesh.signed_volume(t) > 0.)) ++rep.inversions;
    const auto s = support_report(graph_now(), setup, opts.mode);
    rep.gamma_after = s.gamma;
    rep.psi_after = s.psi;
    return rep;
}

} // namespace convlat
