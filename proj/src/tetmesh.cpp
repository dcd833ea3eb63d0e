#include "convlat/tetmesh.hpp"

#include <cmath>
#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace convlat {

double signed_volume(const Vec3d &a, const Vec3d &b, const Vec3d &c, const Vec3d &d)
{
    return (b - a).dot((c - a).cross(d - a)) / 6.;
}

std::uint32_t TetMesh::add_node(const Vec3d &p)
{
    if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !std::isfinite(p.z()))
        throw Error("non-finite tet mesh node");
    nodes.push_back(p);
    extent.merge(p);
    return std::uint32_t(nodes.size() - 1);
}

std::uint32_t TetMesh::add_tet(std::array<std::uint32_t, 4> v, int depth, std::int32_t parent)
{
    for (auto i : v)
        if (i >= nodes.size()) throw Error("tet references missing node " + std::to_string(i));
    double vol = convlat::signed_volume(nodes[v[0]], nodes[v[1]], nodes[v[2]], nodes[v[3]]);
    if (vol < 0) {
        std::swap(v[2], v[3]);
        vol = -vol;
    }
    if (vol <= volume_epsilon())
        throw Error("degenerate tet " + std::to_string(tets.size()) + " (volume " + std::to_string(vol) + ")");
    Tet t;
    t.v = v;
    t.depth = depth;
    t.parent = parent;
    tets.push_back(t);
    return std::uint32_t(tets.size() - 1);
}

double TetMesh::signed_volume(std::size_t tet) const
{
    const auto &v = tets[tet].v;
    return convlat::signed_volume(nodes[v[0]], nodes[v[1]], nodes[v[2]], nodes[v[3]]);
}

double TetMesh::volume_epsilon() const
{
    const double d = extent.empty() ? bounding_box().diagonal() : extent.diagonal();
    return 1e-12 * d * d * d;
}

BoundingBox TetMesh::bounding_box() const
{
    BoundingBox b;
    for (const Vec3d &p : nodes) b.merge(p);
    return b;
}

Vec3d TetMesh::centroid(std::size_t tet) const
{
    const auto &v = tets[tet].v;
    return 0.25 * (nodes[v[0]] + nodes[v[1]] + nodes[v[2]] + nodes[v[3]]);
}

std::vector<std::uint32_t> TetMesh::leaf_tets() const
{
    std::vector<std::uint32_t> out;
    for (std::size_t i = 0; i < tets.size(); ++i)
        if (tets[i].leaf) out.push_back(std::uint32_t(i));
    return out;
}

std::size_t TetMesh::leaf_count() const
{
    std::size_t n = 0;
    for (const Tet &t : tets) n += t.leaf;
    return n;
}

std::optional<std::uint32_t> TetMesh::find_midpoint(std::uint32_t a, std::uint32_t b) const
{
    auto it = midpoints.find(undirected_key(a, b));
    if (it == midpoints.end()) return std::nullopt;
    return it->second;
}

std::uint32_t TetMesh::midpoint(std::uint32_t a, std::uint32_t b)
{
    const auto key = undirected_key(a, b);
    if (auto it = midpoints.find(key); it != midpoints.end()) return it->second;
    const std::uint32_t m = add_node(0.5 * (nodes[a] + nodes[b]));
    midpoints.emplace(key, m);
    return m;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> TetMesh::tet_edges() const
{
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    std::unordered_set<std::uint64_t> seen;
    for (const Tet &t : tets) {
        if (!t.leaf) continue;
        for (auto [i, j] : kTetEdges) {
            const auto a = t.v[i], b = t.v[j];
            if (seen.insert(undirected_key(a, b)).second) out.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> TetMesh::lattice_edges() const
{
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    std::unordered_set<std::uint64_t> seen;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;
    for (auto [a, b] : tet_edges()) {
        stack.assign(1, {a, b});
        while (!stack.empty()) {
            auto [p, q] = stack.back();
            stack.pop_back();
            if (auto m = find_midpoint(p, q)) {
                // Push in reverse so the half at p is emitted first.
                stack.emplace_back(*m, q);
                stack.emplace_back(p, *m);
            } else if (seen.insert(undirected_key(p, q)).second) {
                out.emplace_back(std::min(p, q), std::max(p, q));
            }
        }
    }
    return out;
}

std::vector<bool> TetMesh::pinned_nodes() const
{
    std::unordered_map<std::string, int> face_use;
    auto face_key = [](std::array<std::uint32_t, 3> f) {
        std::sort(f.begin(), f.end());
        return std::to_string(f[0]) + "," + std::to_string(f[1]) + "," + std::to_string(f[2]);
    };
    static constexpr int faces[4][3] = {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}};
    for (const Tet &t : tets) {
        if (!t.leaf) continue;
        for (auto &f : faces) ++face_use[face_key({t.v[f[0]], t.v[f[1]], t.v[f[2]]})];
    }
    std::vector<bool> pinned(nodes.size(), false);
    for (const Tet &t : tets) {
        if (!t.leaf) continue;
        for (auto &f : faces)
            if (face_use[face_key({t.v[f[0]], t.v[f[1]], t.v[f[2]]})] == 1)
                for (int k : f) pinned[t.v[k]] = true;
    }
    for (auto &kv : midpoints) pinned[kv.second] = true;
    return pinned;
}

// ---------------------------------------------------------------------------
// TetGen I/O

namespace {

struct LineReader
{
    std::ifstream in;
    std::string   file;
    std::size_t   line = 0;

    explicit LineReader(const std::filesystem::path &p) : in(p), file(p.string())
    {
        if (!in) throw Error("cannot open " + file);
    }

    bool next(std::istringstream &rec)
    {
        std::string s;
        while (std::getline(in, s)) {
            ++line;
            if (auto h = s.find('#'); h != std::string::npos) s.resize(h);
            if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
            rec.clear();
            rec.str(s);
            return true;
        }
        return false;
    }

    [[noreturn]] void fail(const std::string &msg) const { throw ParseError(file, "line " + std::to_string(line), msg); }
};

} // namespace

TetMesh import_tetgen(const std::filesystem::path &node_path, const std::filesystem::path &ele_path)
{
    TetMesh mesh;
    long long base = 0;

    {
        LineReader r(node_path);
        std::istringstream rec;
        if (!r.next(rec)) r.fail("missing header");
        long long n = -1, dim = -1;
        rec >> n >> dim;
        if (rec.fail() || n < 0) r.fail("malformed .node header");
        if (dim != 3) r.fail("only 3-D node files are supported");
        mesh.nodes.reserve(std::size_t(n));
        for (long long i = 0; i < n; ++i) {
            if (!r.next(rec)) r.fail("expected " + std::to_string(n) + " nodes, found " + std::to_string(i));
            long long idx;
            Vec3d p;
            rec >> idx >> p.x() >> p.y() >> p.z();
            if (rec.fail()) r.fail("malformed node record");
            if (i == 0) {
                if (idx != 0 && idx != 1) r.fail("first node index must be 0 or 1");
                base = idx;
            }
            if (idx != i + base) r.fail("node index " + std::to_string(idx) + " out of sequence");
            if (!std::isfinite(p.x()) || !std::isfinite(p.y()) || !std::isfinite(p.z()))
                r.fail("non-finite coordinate");
            mesh.add_node(p);
        }
    }

    LineReader r(ele_path);
    std::istringstream rec;
    if (!r.next(rec)) r.fail("missing header");
    long long n = -1, per = -1;
    rec >> n >> per;
    if (rec.fail() || n < 0) r.fail("malformed .ele header");
    if (per != 4 && per != 10) r.fail("nodes per tet must be 4 or 10");
    mesh.tets.reserve(std::size_t(n));
    for (long long i = 0; i < n; ++i) {
        if (!r.next(rec)) r.fail("expected " + std::to_string(n) + " tets, found " + std::to_string(i));
        long long idx, v[4];
        rec >> idx >> v[0] >> v[1] >> v[2] >> v[3];
        if (rec.fail()) r.fail("malformed tet record");
        std::array<std::uint32_t, 4> t;
        for (int k = 0; k < 4; ++k) {
            const long long j = v[k] - base;
            if (j < 0 || j >= (long long)mesh.nodes.size()) r.fail("tet references missing node " + std::to_string(v[k]));
            t[k] = std::uint32_t(j);
        }
        try {
            mesh.add_tet(t);
        } catch (const Error &e) {
            r.fail(e.what());
        }
    }
    return mesh;
}

void export_tetgen(const TetMesh &mesh, const std::filesystem::path &node_path, const std::filesystem::path &ele_path)
{
    std::ofstream nf(node_path);
    if (!nf) throw Error("cannot write " + node_path.string());
    nf.precision(17);
    nf << mesh.nodes.size() << " 3 0 0\n";
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i)
        nf << i << ' ' << mesh.nodes[i].x() << ' ' << mesh.nodes[i].y() << ' ' << mesh.nodes[i].z() << '\n';

    std::ofstream ef(ele_path);
    if (!ef) throw Error("cannot write " + ele_path.string());
    const auto leaves = mesh.leaf_tets();
    ef << leaves.size() << " 4 0\n";
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const auto &v = mesh.tets[leaves[i]].v;
        ef << i << ' ' << v[0] << ' ' << v[1] << ' ' << v[2] << ' ' << v[3] << '\n';
    }
    if (!nf.flush() || !ef.flush()) throw Error("I/O failure writing tetgen files");
}

LatticeGraph lattice_from_tetmesh(const TetMesh &mesh, double initial_weight)
{
    return lattice_from_tetmesh(mesh, [initial_weight](std::uint32_t, std::uint32_t) { return initial_weight; });
}

LatticeGraph lattice_from_tetmesh(const TetMesh &mesh,
                                  const std::function<double(std::uint32_t, std::uint32_t)> &weight_of)
{
    LatticeGraph g;
    for (const Vec3d &p : mesh.nodes) g.add_node(p);
    for (auto [a, b] : mesh.lattice_edges()) g.add_edge(a, b, weight_of(a, b));
    return g;
}

} // namespace convlat
