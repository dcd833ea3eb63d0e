#include "convlat/density.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>

namespace convlat {

namespace {

constexpr std::uint64_t kVoxelRegion = std::uint64_t(1) << 40;

bool tet_contains(const std::array<Vec3d, 4> &t, const Vec3d &p)
{
    const double vol = signed_volume(t[0], t[1], t[2], t[3]);
    const double eps = 1e-12 * std::abs(vol);
    for (int f = 0; f < 4; ++f) {
        std::array<Vec3d, 4> q = t;
        q[std::size_t(f)] = p;
        if (signed_volume(q[0], q[1], q[2], q[3]) * (vol > 0. ? 1. : -1.) < -eps) return false;
    }
    return true;
}

bool segment_meets_box(const Vec3d &a, const Vec3d &b, const BoundingBox &box)
{
    double t0 = 0., t1 = 1.;
    const Vec3d d = b - a;
    for (int ax = 0; ax < 3; ++ax) {
        if (d[ax] == 0.) {
            if (a[ax] < box.min[ax] || a[ax] > box.max[ax]) return false;
            continue;
        }
        double u0 = (box.min[ax] - a[ax]) / d[ax], u1 = (box.max[ax] - a[ax]) / d[ax];
        if (u0 > u1) std::swap(u0, u1);
        t0 = std::max(t0, u0);
        t1 = std::min(t1, u1);
        if (t0 > t1) return false;
    }
    return true;
}

// Lattice of the current leaves with an evaluator over it.
struct State
{
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    std::unordered_map<std::uint64_t, std::uint32_t> index;
    std::vector<double> base;
    std::unique_ptr<FieldEvaluator> field;

    State(const TetMesh &mesh, const EdgeWeights &weights, const FieldConfig &cfg)
    {
        edges = mesh.lattice_edges();
        std::vector<Segment> segs;
        segs.reserve(edges.size());
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const auto [a, b] = edges[i];
            index.emplace(undirected_key(a, b), std::uint32_t(i));
            const double w = weights.at(undirected_key(a, b));
            base.push_back(w);
            segs.push_back({mesh.nodes[a], mesh.nodes[b], w});
        }
        field = std::make_unique<FieldEvaluator>(std::move(segs), cfg);
    }

    // Lattice edges lying on the six edges of a tet.
    std::vector<std::uint32_t> own_edges(const TetMesh &mesh, const Tet &t) const
    {
        std::vector<std::uint32_t> out;
        for (auto [i, j] : kTetEdges)
            for (auto [a, b] : edge_pieces(mesh, t.v[std::size_t(i)], t.v[std::size_t(j)]))
                out.push_back(index.at(undirected_key(a, b)));
        return out;
    }
};

std::array<Vec3d, 4> corners(const TetMesh &mesh, const Tet &t)
{
    return {mesh.nodes[t.v[0]], mesh.nodes[t.v[1]], mesh.nodes[t.v[2]], mesh.nodes[t.v[3]]};
}

// Step 1 target: the largest density among the voxel centers in the tet,
// else the grid interpolated at its centroid. `claimed` marks voxel centers
// already taken by a lower tet.
double tet_target(const TetMesh &mesh, std::uint32_t tet, const DensityGrid &grid, std::vector<char> *claimed)
{
    const auto c = corners(mesh, mesh.tets[tet]);
    BoundingBox box;
    for (const Vec3d &p : c) box.merge(p);
    int lo[3], hi[3];
    const int n[3] = {grid.nx, grid.ny, grid.nz};
    for (int a = 0; a < 3; ++a) {
        lo[a] = std::max(0, int(std::ceil((box.min[a] - grid.origin[a]) / grid.spacing - 0.5)) - 1);
        hi[a] = std::min(n[a] - 1, int(std::floor((box.max[a] - grid.origin[a]) / grid.spacing - 0.5)) + 1);
    }
    double best = -1.;
    for (int k = lo[2]; k <= hi[2]; ++k)
        for (int j = lo[1]; j <= hi[1]; ++j)
            for (int i = lo[0]; i <= hi[0]; ++i) {
                const std::size_t v = grid.index(i, j, k);
                if (claimed && (*claimed)[v]) continue;
                if (!tet_contains(c, grid.voxel_center(i, j, k))) continue;
                if (claimed) (*claimed)[v] = 1;
                best = std::max(best, grid.values[v]);
            }
    if (best >= 0.) return best;
    return grid.interpolate(0.25 * (c[0] + c[1] + c[2] + c[3]));
}

// Monotone bisection of `density(x)` toward `target` on [lo, hi].
template <class F>
double bisect(double lo, double hi, double target, int iterations, F &&density, double *width)
{
    for (int it = 0; it < iterations; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (density(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    if (width) *width = hi - lo;
    return 0.5 * (lo + hi);
}

} // namespace

void MatchReport::write_csv(const std::filesystem::path &path) const
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(10);
    out << "voxel,target,measured,flag\n";
    for (const VoxelResult &v : voxels) out << v.index << ',' << v.target << ',' << v.measured << ',' << v.flag << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

MatchResult match_density(TetMesh &mesh, const DensityGrid &density, const MaterialSpec &material,
                          const FieldConfig &cfg, const MatchOptions &opts)
{
    density.validate();
    material.validate();
    cfg.validate();
    if (cfg.kernel != KernelKind::CompactQuartic) throw Error("density matching needs the compact kernel");
    if (opts.max_depth < 0 || opts.search_iterations < 1) throw Error("bad density matching options");
    if (mesh.leaf_count() == 0) throw Error("density matching needs a tet mesh");

    const SamplingOptions &so = opts.sampling;
    const double w0 = weight_for_radius(material.r, cfg);
    const double w_min = weight_for_radius(material.r_min, cfg);
    MatchReport report;
    report.weight_floor = w_min;
    report.seed = so.seed;
    report.samples = so.samples;

    EdgeWeights weights;
    for (auto [a, b] : mesh.tet_edges()) weights.emplace(undirected_key(a, b), w0);
    for (auto [a, b] : mesh.lattice_edges()) weights.emplace(undirected_key(a, b), w0);

    // Step 1: targets of the current leaves.
    {
        std::vector<char> claimed(density.size(), 0);
        for (std::uint32_t t : mesh.leaf_tets()) mesh.tets[t].target = tet_target(mesh, t, density, &claimed);
    }

    auto doubled_density = [&](State &st, std::uint32_t t) {
        const auto own = st.own_edges(mesh, mesh.tets[t]);
        for (auto e : own) st.field->set_weight(e, 2. * st.base[e]);
        const double rho = measure_density(corners(mesh, mesh.tets[t]), *st.field, so, t);
        for (auto e : own) st.field->set_weight(e, st.base[e]);
        return rho;
    };

    // Step 2: split leaves that cannot reach their target even at doubled
    // weight, level by level. New edges only add material, so leaves that
    // passed once are not revisited.
    std::vector<char> unreachable(mesh.tets.size(), 0);
    std::vector<std::uint32_t> work = mesh.leaf_tets();
    while (!work.empty()) {
        State st(mesh, weights, cfg);
        std::vector<std::uint32_t> split;
        for (std::uint32_t t : work) {
            const double rho_star = doubled_density(st, t);
            mesh.tets[t].density = rho_star;
            if (!(rho_star < mesh.tets[t].target)) continue;
            if (mesh.tets[t].depth >= opts.max_depth)
                unreachable[t] = 1;
            else
                split.push_back(t);
        }
        work.clear();
        for (std::uint32_t t : split) {
            const auto kids = subdivide_tet(mesh, t, &weights);
            ++report.subdivisions;
            std::vector<char> claimed(density.size(), 0);
            for (auto c : kids) mesh.tets[c].target = tet_target(mesh, c, density, &claimed);
            work.insert(work.end(), kids.begin(), kids.end());
        }
        unreachable.resize(mesh.tets.size(), 0);
    }

    // Step 3: per-tet factor on the tet's own edges, all else at base.
    State st(mesh, weights, cfg);
    const std::size_t m = st.edges.size();
    std::vector<double> ratio(m, 0.);
    auto floored = [&](std::uint32_t e, double r) { return std::max(w_min, r * st.base[e]); };
    for (std::uint32_t t : mesh.leaf_tets()) {
        TetResult tr;
        tr.tet = t;
        tr.depth = mesh.tets[t].depth;
        tr.target = mesh.tets[t].target;
        tr.unreachable = unreachable[t];
        const auto c = corners(mesh, mesh.tets[t]);
        const auto own = st.own_edges(mesh, mesh.tets[t]);
        auto at_factor = [&](double f) {
            for (auto e : own) st.field->set_weight(e, floored(e, f));
            const double rho = measure_density(c, *st.field, so, t);
            for (auto e : own) st.field->set_weight(e, st.base[e]);
            return rho;
        };
        tr.rho = measure_density(c, *st.field, so, t);
        tr.rho_star = at_factor(2.);
        if (tr.target >= tr.rho_star) {
            tr.factor = 2.;
        } else if (tr.target > tr.rho) {
            tr.factor = bisect(1., 2., tr.target, opts.search_iterations, at_factor, &tr.bracket);
        } else if (tr.target < tr.rho) {
            tr.factor = bisect(0., 1., tr.target, opts.search_iterations, at_factor, &tr.bracket);
        }
        tr.matched = at_factor(tr.factor);
        mesh.tets[t].density = tr.matched;
        report.unreachable_tets += tr.unreachable;
        for (auto e : own) ratio[e] = std::max(ratio[e], tr.factor);
        report.tets.push_back(tr);
    }
    for (std::uint32_t e = 0; e < m; ++e) st.field->set_weight(e, floored(e, ratio[e]));

    // Step 4: one common multiplier per voxel on the step-3 ratios of the
    // edges meeting it, searched against the step-3 weights; each edge keeps
    // the smallest ratio offered.
    std::vector<std::vector<std::uint32_t>> voxel_edges(density.size());
    for (std::uint32_t e = 0; e < m; ++e) {
        const Vec3d &a = mesh.nodes[st.edges[e].first], &b = mesh.nodes[st.edges[e].second];
        BoundingBox eb;
        eb.merge(a);
        eb.merge(b);
        const int n[3] = {density.nx, density.ny, density.nz};
        int lo[3], hi[3];
        for (int ax = 0; ax < 3; ++ax) {
            lo[ax] = std::max(0, int(std::floor((eb.min[ax] - density.origin[ax]) / density.spacing)) - 1);
            hi[ax] = std::min(n[ax] - 1, int(std::floor((eb.max[ax] - density.origin[ax]) / density.spacing)) + 1);
        }
        for (int k = lo[2]; k <= hi[2]; ++k)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int i = lo[0]; i <= hi[0]; ++i)
                    if (segment_meets_box(a, b, density.voxel_box(i, j, k))) voxel_edges[density.index(i, j, k)].push_back(e);
    }

    std::vector<double> before(density.size(), 0.);
    std::vector<double> offer(density.size(), -1.);
    for (std::size_t v = 0; v < density.size(); ++v) {
        const auto [i, j, k] = density.voxel_of(v);
        const BoundingBox box = density.voxel_box(i, j, k);
        before[v] = measure_density(box, *st.field, so, kVoxelRegion + v);
        const auto &ev = voxel_edges[v];
        if (ev.empty()) continue;
        auto at_scale = [&](double s) {
            for (auto e : ev) st.field->set_weight(e, floored(e, s * ratio[e]));
            const double rho = measure_density(box, *st.field, so, kVoxelRegion + v);
            for (auto e : ev) st.field->set_weight(e, floored(e, ratio[e]));
            return rho;
        };
        offer[v] = bisect(0., 2., density.values[v], opts.search_iterations, at_scale, nullptr);
    }
    std::vector<double> final_ratio = ratio;
    for (std::size_t v = 0; v < density.size(); ++v) {
        if (offer[v] < 0.) continue;
        for (auto e : voxel_edges[v]) final_ratio[e] = std::min(final_ratio[e], offer[v] * ratio[e]);
    }
    std::vector<char> at_floor(m, 0);
    for (std::uint32_t e = 0; e < m; ++e) {
        report.ratio_decreases += final_ratio[e] < ratio[e];
        at_floor[e] = final_ratio[e] * st.base[e] <= w_min;
        report.floored_edges += at_floor[e];
        st.field->set_weight(e, floored(e, final_ratio[e]));
    }

    // Report against the final weights.
    std::vector<std::uint32_t> owner(density.size(), UINT32_MAX);
    for (std::uint32_t t : mesh.leaf_tets()) {
        const auto c = corners(mesh, mesh.tets[t]);
        BoundingBox box;
        for (const Vec3d &p : c) box.merge(p);
        for (std::size_t v = 0; v < density.size(); ++v) {
            if (owner[v] != UINT32_MAX) continue;
            const auto [i, j, k] = density.voxel_of(v);
            const Vec3d p = density.voxel_center(i, j, k);
            if (box.contains(p) && tet_contains(c, p)) owner[v] = t;
        }
    }
    std::size_t counted = 0;
    double err_sum = 0.;
    for (std::size_t v = 0; v < density.size(); ++v) {
        const auto [i, j, k] = density.voxel_of(v);
        VoxelResult vr;
        vr.index = v;
        vr.target = density.values[v];
        vr.before_final = before[v];
        vr.measured = measure_density(density.voxel_box(i, j, k), *st.field, so, kVoxelRegion + v);
        bool floor_binds = false;
        for (auto e : voxel_edges[v]) floor_binds |= bool(at_floor[e]);
        if (owner[v] != UINT32_MAX && unreachable[owner[v]] && vr.measured < vr.target)
            vr.flag = "unreachable";
        else if (floor_binds && vr.measured > vr.target)
            vr.flag = "floor";
        else
            vr.flag = "ok";
        if (vr.target > 0.) {
            const double err = std::abs(vr.measured - vr.target);
            err_sum += err;
            report.max_abs_error = std::max(report.max_abs_error, err);
            ++counted;
        }
        report.voxels.push_back(vr);
    }
    report.mean_abs_error = counted ? err_sum / double(counted) : 0.;

    MatchResult result;
    for (std::uint32_t e = 0; e < m; ++e) weights[undirected_key(st.edges[e].first, st.edges[e].second)] = floored(e, final_ratio[e]);
    result.graph = lattice_from_tetmesh(mesh, [&](std::uint32_t a, std::uint32_t b) { return weights.at(undirected_key(a, b)); });
    result.ratios.reserve(result.graph.edge_count());
    for (const Edge &e : result.graph.edges()) result.ratios.push_back(final_ratio[st.index.at(undirected_key(e.start, e.end))]);
    result.report = std::move(report);
    return result;
}

} // namespace convlat
