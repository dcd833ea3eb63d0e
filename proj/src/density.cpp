#include "convlat/density.hpp"
#include "convlat/support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace convlat {

BoundingBox DensityGrid::voxel_box(int i, int j, int k) const
{
    BoundingBox b;
    b.min = origin + spacing * Vec3d(i, j, k);
    b.max = origin + spacing * Vec3d(i + 1, j + 1, k + 1);
    return b;
}

BoundingBox DensityGrid::bounds() const
{
    BoundingBox b;
    b.min = origin;
    b.max = origin + spacing * Vec3d(nx, ny, nz);
    return b;
}

std::array<int, 3> DensityGrid::voxel_of(std::size_t index) const
{
    const int i = int(index % nx);
    const int j = int(index / nx % ny);
    const int k = int(index / (std::size_t(nx) * ny));
    return {i, j, k};
}

double DensityGrid::interpolate(const Vec3d &p) const
{
    const Vec3d u = (p - origin) / spacing - Vec3d::Constant(0.5);
    int lo[3];
    double f[3];
    const int n[3] = {nx, ny, nz};
    for (int a = 0; a < 3; ++a) {
        const double c = std::clamp(u[a], 0., double(n[a] - 1));
        lo[a] = std::min(int(std::floor(c)), std::max(0, n[a] - 2));
        f[a] = n[a] == 1 ? 0. : c - lo[a];
    }
    double v = 0.;
    for (int c = 0; c < 8; ++c) {
        const int di = c & 1, dj = (c >> 1) & 1, dk = (c >> 2) & 1;
        const double w = (di ? f[0] : 1. - f[0]) * (dj ? f[1] : 1. - f[1]) * (dk ? f[2] : 1. - f[2]);
        if (w == 0.) continue;
        v += w * at(std::min(lo[0] + di, nx - 1), std::min(lo[1] + dj, ny - 1), std::min(lo[2] + dk, nz - 1));
    }
    return v;
}

void DensityGrid::validate() const
{
    if (nx < 1 || ny < 1 || nz < 1) throw Error("density grid dimensions must be at least 1");
    if (!(spacing > 0.) || !std::isfinite(spacing)) throw Error("density grid spacing must be positive");
    if (values.size() != size()) throw Error("density grid has " + std::to_string(values.size()) +
                                             " values, expected " + std::to_string(size()));
    for (double v : values)
        if (!(v >= 0. && v <= 1.)) throw Error("density value outside [0, 1]: " + std::to_string(v));
}

DensityGrid load_density_grid(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open density grid " + path.string());
    const std::string file = path.string();
    std::string line, tag;
    std::size_t line_no = 0;
    DensityGrid g;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") != std::string::npos) break;
    }
    std::istringstream hs(line);
    if (!(hs >> tag) || tag != "DENSGRID") throw ParseError(file, "line " + std::to_string(line_no), "expected DENSGRID header");
    double ox, oy, oz;
    if (!(hs >> g.nx >> g.ny >> g.nz >> ox >> oy >> oz >> g.spacing))
        throw ParseError(file, "line " + std::to_string(line_no), "malformed DENSGRID header");
    g.origin = Vec3d(ox, oy, oz);
    if (g.nx < 1 || g.ny < 1 || g.nz < 1 || !(g.spacing > 0.))
        throw ParseError(file, "line " + std::to_string(line_no), "dimensions and spacing must be positive");
    g.values.reserve(g.size());
    while (g.values.size() < g.size() && std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tok;
        while (ls >> tok) {
            if (tok[0] == '#') break;
            double v;
            try {
                std::size_t used = 0;
                v = std::stod(tok, &used);
                if (used != tok.size()) throw std::invalid_argument(tok);
            } catch (const std::exception &) {
                throw ParseError(file, "line " + std::to_string(line_no), "bad density value '" + tok + "'");
            }
            if (!(v >= 0. && v <= 1.))
                throw ParseError(file, "line " + std::to_string(line_no), "density value outside [0, 1]");
            if (g.values.size() == g.size())
                throw ParseError(file, "line " + std::to_string(line_no), "too many density values");
            g.values.push_back(v);
        }
    }
    if (g.values.size() != g.size())
        throw ParseError(file, "line " + std::to_string(line_no),
                         "expected " + std::to_string(g.size()) + " values, got " + std::to_string(g.values.size()));
    return g;
}

void save_density_grid(const DensityGrid &grid, const std::filesystem::path &path)
{
    grid.validate();
    std::ofstream out(path);
    if (!out) throw Error("cannot write density grid " + path.string());
    out.precision(17);
    out << "DENSGRID " << grid.nx << ' ' << grid.ny << ' ' << grid.nz << ' ' << grid.origin.x() << ' '
        << grid.origin.y() << ' ' << grid.origin.z() << ' ' << grid.spacing << '\n';
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        out << grid.values[i] << ((i + 1) % std::size_t(grid.nx) == 0 ? '\n' : ' ');
    if (!out) throw Error("failed writing " + path.string());
}

void MaterialSpec::validate() const
{
    if (!(tau > 0.)) throw Error("material density must be positive");
    if (!(r_min > 0.)) throw Error("minimum radius must be positive");
    if (!(r >= r_min)) throw Error("initial radius must be at least the minimum radius");
}

// ---------------------------------------------------------------------------

EdgeLengthEstimate target_edge_length(double rho, double tau, double r, double L_cur)
{
    if (!(rho > 0. && rho <= 1.)) throw Error("target density must lie in (0, 1]");
    if (!(tau > 0.) || !(r > 0.)) throw Error("material density and radius must be positive");
    const double ac = std::acos(1. / 3.);
    const double s2 = std::sqrt(2.), s6 = std::sqrt(6.);
    EdgeLengthEstimate e;
    e.p = -18. * s2 * ac * tau * r * r / rho;
    e.q = -((192. * s2 - 36. * s6) * ac - 64. * s2 * kPi) * tau * r * r * r / rho;
    e.discriminant = (e.q / 2.) * (e.q / 2.) + std::pow(e.p / 3., 3);
    if (!(e.discriminant < 0.)) {
        std::ostringstream msg;
        msg << "edge-length cubic has no three real roots (rho=" << rho << ", tau=" << tau << ", r=" << r
            << ", discriminant=" << e.discriminant << ")";
        throw Error(msg.str());
    }
    const double m = 2. * std::sqrt(-e.p / 3.);
    const double phi = std::acos(std::clamp(3. * e.q / (e.p * m), -1., 1.)) / 3.;
    for (int k = 0; k < 3; ++k) {
        double L = m * std::cos(phi - 2. * kPi * k / 3.);
        for (int it = 0; it < 4; ++it) {
            const double f = L * L * L + e.p * L + e.q, df = 3. * L * L + e.p;
            if (df == 0.) break;
            L -= f / df;
        }
        e.roots[std::size_t(k)] = L;
    }
    std::sort(e.roots.begin(), e.roots.end(), std::greater<>());
    e.selected = e.roots[0];
    for (double L : e.roots)
        if (std::abs(L - L_cur) < std::abs(e.selected - L_cur)) e.selected = L;
    e.floored = e.selected < 4. * r;
    e.length = std::max(4. * r, e.selected);
    return e;
}

double estimated_tet_density(double L, double tau, double r)
{
    // The cubic is rho L^3 = -(p1 L + q1) with p1, q1 its coefficients at rho = 1.
    const double ac = std::acos(1. / 3.);
    const double s2 = std::sqrt(2.), s6 = std::sqrt(6.);
    const double p1 = -18. * s2 * ac * tau * r * r;
    const double q1 = -((192. * s2 - 36. * s6) * ac - 64. * s2 * kPi) * tau * r * r * r;
    return -(p1 * L + q1) / (L * L * L);
}

// ---------------------------------------------------------------------------

namespace {

struct GridFill
{
    Eigen::Matrix3d to_frame;  // world -> frame with the print direction on z
    double k;
    Vec3d origin;              // min corner in the compressed frame
    int n[3];
    Vec3d cell;

    Vec3d world(const Vec3d &q) const
    {
        Vec3d f = q;
        f.z() *= k;
        return to_frame.transpose() * f;
    }
    Vec3d frame(const Vec3d &p) const
    {
        Vec3d f = to_frame * p;
        f.z() /= k;
        return f;
    }
};

GridFill make_fill(const BoundingBox &box, const StructuredMeshOptions &opts)
{
    if (box.empty() || !(box.size().array() > 0.).all()) throw Error("empty tet mesh domain");
    if (!(opts.cell_size > 0.)) throw Error("cell size must be positive");
    if (!(opts.k >= 1.)) throw Error("compression factor must be at least 1");
    if (!(opts.jitter >= 0. && opts.jitter < 0.25)) throw Error("jitter must lie in [0, 0.25)");
    const double len = opts.direction.norm();
    if (!(len > 0.)) throw Error("print direction must be nonzero");

    GridFill g;
    g.k = opts.k;
    g.to_frame = Eigen::Quaterniond::FromTwoVectors(opts.direction / len, Vec3d::UnitZ()).toRotationMatrix();
    BoundingBox fb;
    for (int c = 0; c < 8; ++c)
        fb.merge(g.frame(Vec3d(c & 1 ? box.max.x() : box.min.x(), c & 2 ? box.max.y() : box.min.y(),
                               c & 4 ? box.max.z() : box.min.z())));
    g.origin = fb.min;
    for (int a = 0; a < 3; ++a) {
        const double ext = fb.max[a] - fb.min[a];
        g.n[a] = std::max(1, int(std::lround(ext / opts.cell_size)));
        g.cell[a] = ext / g.n[a];
    }
    return g;
}

TetMesh fill_cubes(const GridFill &g, const StructuredMeshOptions &opts, const std::function<bool(const Vec3d &)> &keep)
{
    const int nx = g.n[0], ny = g.n[1], nz = g.n[2];
    auto cube_index = [&](int i, int j, int k) { return (std::size_t(k) * ny + j) * nx + i; };
    std::vector<char> kept(std::size_t(nx) * ny * nz, 0);
    std::size_t count = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const Vec3d c = g.origin + Vec3d((i + 0.5) * g.cell[0], (j + 0.5) * g.cell[1], (k + 0.5) * g.cell[2]);
                if (!keep || keep(g.world(c))) {
                    kept[cube_index(i, j, k)] = 1;
                    ++count;
                }
            }
    if (count == 0) throw Error("empty tet mesh domain");

    auto node_key = [&](int i, int j, int k) { return (std::size_t(k) * (ny + 1) + j) * (nx + 1) + i; };
    auto cube_kept = [&](int i, int j, int k) {
        return i >= 0 && j >= 0 && k >= 0 && i < nx && j < ny && k < nz && kept[cube_index(i, j, k)];
    };

    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uni(-1., 1.);
    std::vector<std::uint32_t> id(std::size_t(nx + 1) * (ny + 1) * (nz + 1), UINT32_MAX);
    TetMesh mesh;
    auto node = [&](int i, int j, int k) {
        std::uint32_t &slot = id[node_key(i, j, k)];
        if (slot != UINT32_MAX) return slot;
        Vec3d q = g.origin + Vec3d(i * g.cell[0], j * g.cell[1], k * g.cell[2]);
        if (opts.jitter > 0.) {
            bool interior = true;
            for (int c = 0; c < 8 && interior; ++c)
                interior = cube_kept(i - 1 + (c & 1), j - 1 + ((c >> 1) & 1), k - 1 + ((c >> 2) & 1));
            // Draw even for boundary nodes so offsets do not depend on clipping.
            const Vec3d d(uni(rng), uni(rng), uni(rng));
            if (interior) q += opts.jitter * d.cwiseProduct(g.cell);
        }
        slot = mesh.add_node(g.world(q));
        return slot;
    };

    // Kuhn split: one tet per axis permutation, all sharing the (0,0,0)-(1,1,1) diagonal.
    static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                if (!kept[cube_index(i, j, k)]) continue;
                for (auto &perm : perms) {
                    int c[3] = {i, j, k};
                    std::array<std::uint32_t, 4> v{};
                    v[0] = node(c[0], c[1], c[2]);
                    for (int s = 0; s < 3; ++s) {
                        ++c[perm[s]];
                        v[std::size_t(s + 1)] = node(c[0], c[1], c[2]);
                    }
                    mesh.add_tet(v);
                }
            }
    return mesh;
}

} // namespace

TetMesh generate_structured_tets(const BoundingBox &box, const StructuredMeshOptions &opts)
{
    const GridFill g = make_fill(box, opts);
    // Only an axis-aligned frame fills the box exactly; otherwise clip to it.
    const bool aligned = (g.to_frame - Eigen::Matrix3d::Identity()).norm() < 1e-12;
    if (aligned) return fill_cubes(g, opts, {});
    return fill_cubes(g, opts, [&](const Vec3d &p) { return box.contains(p); });
}

TetMesh generate_structured_tets(const DensityGrid &occupancy, const StructuredMeshOptions &opts)
{
    occupancy.validate();
    BoundingBox box;
    for (std::size_t v = 0; v < occupancy.size(); ++v) {
        if (!(occupancy.values[v] > 0.)) continue;
        const auto [i, j, k] = occupancy.voxel_of(v);
        const BoundingBox b = occupancy.voxel_box(i, j, k);
        box.merge(b.min);
        box.merge(b.max);
    }
    if (box.empty()) throw Error("empty tet mesh domain: no voxel with positive density");
    const GridFill g = make_fill(box, opts);
    const BoundingBox all = occupancy.bounds();
    return fill_cubes(g, opts, [&](const Vec3d &p) {
        if (!all.contains(p)) return false;
        const Vec3d u = (p - occupancy.origin) / occupancy.spacing;
        const int i = std::min(int(u.x()), occupancy.nx - 1);
        const int j = std::min(int(u.y()), occupancy.ny - 1);
        const int k = std::min(int(u.z()), occupancy.nz - 1);
        return occupancy.at(i, j, k) > 0.;
    });
}

// ---------------------------------------------------------------------------

namespace {

// Midpoint slot of tet edge (a, b) in the order of kTetEdges.
constexpr int edge_slot(int a, int b)
{
    if (a > b) std::swap(a, b);
    for (int e = 0; e < 6; ++e)
        if (kTetEdges[std::size_t(e)][0] == a && kTetEdges[std::size_t(e)][1] == b) return e;
    return -1;
}

// Children as local indices: 0..3 the parent vertices, 4..9 the edge
// midpoints in kTetEdges order.
std::array<std::array<int, 4>, 8> child_pattern(const std::array<Vec3d, 4> &v, const std::array<std::uint32_t, 4> &index)
{
    std::array<std::array<int, 4>, 8> out{};
    for (int c = 0; c < 4; ++c) {
        std::array<int, 4> t{};
        t[0] = c;
        int s = 1;
        for (int o = 0; o < 4; ++o)
            if (o != c) t[std::size_t(s++)] = 4 + edge_slot(c, o);
        out[std::size_t(c)] = t;
    }
    // Octahedron diagonals join midpoints of opposite edges.
    static constexpr int opposite[3][4] = {{0, 1, 2, 3}, {0, 2, 1, 3}, {0, 3, 1, 2}};
    int best = 0;
    double best_len = 0.;
    std::pair<std::uint32_t, std::uint32_t> best_tie{};
    for (int d = 0; d < 3; ++d) {
        const auto &o = opposite[d];
        const Vec3d m0 = 0.5 * (v[std::size_t(o[0])] + v[std::size_t(o[1])]);
        const Vec3d m1 = 0.5 * (v[std::size_t(o[2])] + v[std::size_t(o[3])]);
        const double len = (m1 - m0).squaredNorm();
        // Ties go to the diagonal whose endpoint edges have the lowest node indices.
        const auto e0 = std::minmax(index[std::size_t(o[0])], index[std::size_t(o[1])]);
        const auto e1 = std::minmax(index[std::size_t(o[2])], index[std::size_t(o[3])]);
        const auto tie = std::min(std::pair(e0.first, e0.second), std::pair(e1.first, e1.second));
        if (d == 0 || len < best_len || (len == best_len && tie < best_tie)) {
            best = d;
            best_len = len;
            best_tie = tie;
        }
    }
    const int a = opposite[best][0], b = opposite[best][1], c = opposite[best][2], d = opposite[best][3];
    const int top = 4 + edge_slot(a, b), bottom = 4 + edge_slot(c, d);
    const int ring[4] = {4 + edge_slot(a, c), 4 + edge_slot(a, d), 4 + edge_slot(b, d), 4 + edge_slot(b, c)};
    for (int s = 0; s < 4; ++s) out[std::size_t(4 + s)] = {top, bottom, ring[s], ring[(s + 1) % 4]};
    return out;
}

} // namespace

std::array<std::array<Vec3d, 4>, 8> child_tets(const std::array<Vec3d, 4> &v, const std::array<std::uint32_t, 4> &index)
{
    Vec3d pts[10];
    for (int i = 0; i < 4; ++i) pts[i] = v[std::size_t(i)];
    for (int e = 0; e < 6; ++e)
        pts[4 + e] = 0.5 * (v[std::size_t(kTetEdges[std::size_t(e)][0])] + v[std::size_t(kTetEdges[std::size_t(e)][1])]);
    std::array<std::array<Vec3d, 4>, 8> out;
    const auto pattern = child_pattern(v, index);
    for (int c = 0; c < 8; ++c)
        for (int i = 0; i < 4; ++i) out[std::size_t(c)][std::size_t(i)] = pts[pattern[std::size_t(c)][std::size_t(i)]];
    return out;
}

std::array<std::uint32_t, 8> subdivide_tet(TetMesh &mesh, std::uint32_t tet, EdgeWeights *weights)
{
    if (tet >= mesh.tets.size()) throw Error("no tet " + std::to_string(tet));
    if (!mesh.tets[tet].leaf) throw Error("tet " + std::to_string(tet) + " is already subdivided");
    const std::array<std::uint32_t, 4> pv = mesh.tets[tet].v;
    const int depth = mesh.tets[tet].depth;
    std::array<Vec3d, 4> pos;
    for (int i = 0; i < 4; ++i) pos[std::size_t(i)] = mesh.nodes[pv[std::size_t(i)]];

    std::uint32_t ids[10];
    for (int i = 0; i < 4; ++i) ids[i] = pv[std::size_t(i)];
    for (int e = 0; e < 6; ++e)
        ids[4 + e] = mesh.midpoint(pv[std::size_t(kTetEdges[std::size_t(e)][0])], pv[std::size_t(kTetEdges[std::size_t(e)][1])]);

    const auto pattern = child_pattern(pos, pv);
    if (weights) {
        auto parent_w = [&](int a, int b) {
            auto it = weights->find(undirected_key(pv[std::size_t(a)], pv[std::size_t(b)]));
            if (it == weights->end()) throw Error("missing weight for parent edge of tet " + std::to_string(tet));
            return it->second;
        };
        double sum = 0.;
        for (auto [a, b] : kTetEdges) {
            const double w = parent_w(a, b);
            sum += w;
            const std::uint32_t m = ids[4 + edge_slot(a, b)];
            weights->emplace(undirected_key(pv[std::size_t(a)], m), w);
            weights->emplace(undirected_key(m, pv[std::size_t(b)]), w);
        }
        // Midsegment between the midpoints of (c, a) and (c, b) runs parallel to (a, b).
        for (int c = 0; c < 4; ++c)
            for (int a = 0; a < 4; ++a)
                for (int b = a + 1; b < 4; ++b) {
                    if (a == c || b == c) continue;
                    weights->emplace(undirected_key(ids[4 + edge_slot(c, a)], ids[4 + edge_slot(c, b)]), parent_w(a, b));
                }
        weights->emplace(undirected_key(ids[pattern[4][0]], ids[pattern[4][1]]), sum / 6.);
    }

    std::array<std::uint32_t, 8> children{};
    for (int c = 0; c < 8; ++c) {
        std::array<std::uint32_t, 4> v{};
        for (int i = 0; i < 4; ++i) v[std::size_t(i)] = ids[pattern[std::size_t(c)][std::size_t(i)]];
        children[std::size_t(c)] = mesh.add_tet(v, depth + 1, std::int32_t(tet));
    }
    Tet &parent = mesh.tets[tet];
    parent.leaf = false;
    for (auto c : children) mesh.tets[c].target = parent.target;
    return children;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_pieces(const TetMesh &mesh, std::uint32_t a, std::uint32_t b)
{
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out, stack{{a, b}};
    while (!stack.empty()) {
        auto [p, q] = stack.back();
        stack.pop_back();
        if (auto m = mesh.find_midpoint(p, q)) {
            stack.emplace_back(*m, q);
            stack.emplace_back(p, *m);
        } else {
            out.emplace_back(p, q);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counts hits over 8 strata; stratum s draws n/8 samples (the first n % 8
// strata one more) from its own stream, so the result does not depend on
// the thread count.
template <class Sample>
double stratified(const FieldEvaluator &field, const SamplingOptions &opts, std::uint64_t region, Sample &&sample)
{
    if (opts.samples < 1) throw Error("need at least one sample");
    std::array<std::size_t, 8> hits{};
    auto run = [&](int s) {
        const std::size_t n = opts.samples / 8 + (std::size_t(s) < opts.samples % 8);
        std::mt19937_64 rng(splitmix(splitmix(opts.seed) ^ splitmix(region * 8 + std::uint64_t(s) + 1)));
        std::uniform_real_distribution<double> uni(0., 1.);
        std::size_t h = 0;
        for (std::size_t i = 0; i < n; ++i) h += field.inside(sample(s, rng, uni));
        hits[std::size_t(s)] = h;
    };
    const unsigned workers = std::clamp(opts.threads, 1u, 8u);
    if (workers == 1 || field.segments().empty()) {
        for (int s = 0; s < 8; ++s) run(s);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (int s = int(w); s < 8; s += int(workers)) run(s);
            });
        for (auto &t : pool) t.join();
    }
    std::size_t total = 0;
    for (auto h : hits) total += h;
    return double(total) / double(opts.samples);
}

} // namespace

double measure_density(const std::array<Vec3d, 4> &tet, const FieldEvaluator &field, const SamplingOptions &opts,
                       std::uint64_t region)
{
    const double vol = std::abs(signed_volume(tet[0], tet[1], tet[2], tet[3]));
    const double scale = std::max({(tet[1] - tet[0]).norm(), (tet[2] - tet[0]).norm(), (tet[3] - tet[0]).norm()});
    if (!(vol > 1e-12 * scale * scale * scale)) throw Error("degenerate sampling tet");
    const auto kids = child_tets(tet);
    return stratified(field, opts, region, [&](int s, std::mt19937_64 &rng, std::uniform_real_distribution<double> &uni) {
        // Uniform barycentric coordinates from sorted uniforms.
        double u[3] = {uni(rng), uni(rng), uni(rng)};
        std::sort(u, u + 3);
        const auto &c = kids[std::size_t(s)];
        return Vec3d(u[0] * c[0] + (u[1] - u[0]) * c[1] + (u[2] - u[1]) * c[2] + (1. - u[2]) * c[3]);
    });
}

double measure_density(const BoundingBox &box, const FieldEvaluator &field, const SamplingOptions &opts,
                       std::uint64_t region)
{
    if (box.empty() || !(box.size().array() > 0.).all()) throw Error("degenerate sampling box");
    const Vec3d half = 0.5 * box.size();
    return stratified(field, opts, region, [&](int s, std::mt19937_64 &rng, std::uniform_real_distribution<double> &uni) {
        const Vec3d lo = box.min + Vec3d(s & 1 ? half.x() : 0., s & 2 ? half.y() : 0., s & 4 ? half.z() : 0.);
        const double x = uni(rng), y = uni(rng), z = uni(rng);
        return Vec3d(lo + Vec3d(x * half.x(), y * half.y(), z * half.z()));
    });
}

} // namespace convlat
