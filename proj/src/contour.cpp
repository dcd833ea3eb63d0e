#include "convlat/contour.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace convlat {

namespace {

constexpr std::uint32_t kNone = ~std::uint32_t(0);

// Crossing vertices: H(i, j) between pixel centers (i, j) and (i+1, j) for
// i in [-1, W-1]; V(i, j) between (i, j) and (i, j+1) for j in [-1, H-1].
struct VertexIndex
{
    int w, h;
    std::uint32_t horizontal(int i, int j) const { return std::uint32_t((i + 1) + (w + 1) * j); }
    std::uint32_t vertical(int i, int j) const { return std::uint32_t((w + 1) * h + i + w * (j + 1)); }
    std::size_t size() const { return std::size_t(w + 1) * h + std::size_t(w) * (h + 1); }

    Vec2d position(std::uint32_t id, const SliceJob &g) const
    {
        const std::uint32_t nh = std::uint32_t(w + 1) * h;
        const double s = g.pixel_size;
        if (id < nh) {
            const int i = int(id % (w + 1)) - 1, j = int(id / (w + 1));
            return {g.x_min + (i + 1) * s, g.y_min + (j + 0.5) * s};
        }
        id -= nh;
        const int i = int(id % w), j = int(id / w) - 1;
        return {g.x_min + (i + 0.5) * s, g.y_min + (j + 1) * s};
    }
};

} // namespace

ContourSet extract_contours(const SliceImage &img, const SliceJob &geometry)
{
    ContourSet out;
    out.z = img.z;
    const int W = img.width, H = img.height;
    if (W == 0 || H == 0) return out;
    auto sample = [&](int i, int j) { return i >= 0 && j >= 0 && i < W && j < H && img.at(i, j); };

    const VertexIndex vx{W, H};
    std::vector<std::uint32_t> next(vx.size(), kNone);
    std::vector<std::uint32_t> starts;

    for (int j = -1; j < H; ++j)
        for (int i = -1; i < W; ++i) {
            // Corners and edges in counter-clockwise order from bottom-left;
            // edge k runs from corner k to corner k+1.
            const bool c[4] = {sample(i, j), sample(i + 1, j), sample(i + 1, j + 1), sample(i, j + 1)};
            const int n = c[0] + c[1] + c[2] + c[3];
            if (n == 0 || n == 4) continue;
            const std::uint32_t e[4] = {vx.horizontal(i, j), vx.vertical(i + 1, j), vx.horizontal(i, j + 1),
                                        vx.vertical(i, j)};
            // One segment per run of filled corners: it enters through the
            // edge ending the run and leaves through the edge before it, so
            // filled pixels stay on the left.
            for (int k = 0; k < 4; ++k) {
                if (!c[k] || c[(k + 1) % 4]) continue;
                int m = k;
                while (c[(m + 3) % 4]) m = (m + 3) % 4;
                const std::uint32_t from = e[k], to = e[(m + 3) % 4];
                next[from] = to;
                starts.push_back(from);
            }
        }

    for (std::uint32_t s : starts) {
        if (next[s] == kNone) continue;
        Loop loop;
        std::uint32_t v = s;
        while (next[v] != kNone) {
            loop.push_back(vx.position(v, geometry));
            const std::uint32_t n = next[v];
            next[v] = kNone;
            v = n;
        }
        loop.push_back(loop.front());
        out.loops.push_back(std::move(loop));
    }
    return out;
}

double signed_area(const Loop &loop)
{
    double a = 0.;
    for (std::size_t i = 0; i + 1 < loop.size(); ++i)
        a += loop[i].x() * loop[i + 1].y() - loop[i + 1].x() * loop[i].y();
    return 0.5 * a;
}

double point_segment_distance_2d(const Vec2d &p, const Vec2d &a, const Vec2d &b)
{
    const Vec2d  d = b - a;
    const double l2 = d.squaredNorm();
    if (l2 == 0.) return (p - a).norm();
    const double t = std::clamp((p - a).dot(d) / l2, 0., 1.);
    return (p - (a + t * d)).norm();
}

double max_vertex_deviation(const Loop &from, const Loop &to)
{
    double worst = 0.;
    for (const Vec2d &p : from) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < to.size(); ++i) best = std::min(best, point_segment_distance_2d(p, to[i], to[i + 1]));
        if (to.size() == 1) best = (p - to[0]).norm();
        worst = std::max(worst, best);
    }
    return worst;
}

namespace {

// Marks the vertices of pts[first..last] to keep (endpoints are kept by the caller).
void douglas_peucker(const std::vector<Vec2d> &pts, std::size_t first, std::size_t last, double tol,
                     std::vector<bool> &keep)
{
    std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
    while (!stack.empty()) {
        auto [a, b] = stack.back();
        stack.pop_back();
        if (b <= a + 1) continue;
        double worst = -1.;
        std::size_t at = a;
        for (std::size_t i = a + 1; i < b; ++i) {
            const double d = point_segment_distance_2d(pts[i], pts[a], pts[b]);
            if (d > worst) {
                worst = d;
                at = i;
            }
        }
        if (worst > tol) {
            keep[at] = true;
            stack.emplace_back(a, at);
            stack.emplace_back(at, b);
        }
    }
}

Loop simplify_loop(const Loop &closed, double tol)
{
    const std::size_t n = closed.size() - 1;  // distinct vertices
    if (n < 3) return closed;
    // Anchor at the lexicographically smallest vertex and the vertex farthest
    // from it; both always survive.
    std::size_t a = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (closed[i].x() < closed[a].x() || (closed[i].x() == closed[a].x() && closed[i].y() < closed[a].y())) a = i;
    std::vector<Vec2d> pts;
    pts.reserve(n + 1);
    for (std::size_t i = 0; i <= n; ++i) pts.push_back(closed[(a + i) % n]);
    std::size_t far = 0;
    double best = -1.;
    for (std::size_t i = 1; i < n; ++i)
        if (const double d = (pts[i] - pts[0]).norm(); d > best) {
            best = d;
            far = i;
        }

    std::vector<bool> keep(n + 1, false);
    keep[0] = keep[far] = keep[n] = true;
    douglas_peucker(pts, 0, far, tol, keep);
    douglas_peucker(pts, far, n, tol, keep);
    Loop out;
    for (std::size_t i = 0; i <= n; ++i)
        if (keep[i]) out.push_back(pts[i]);
    return out;
}

} // namespace

ContourSet simplify_contours(const ContourSet &set, double tolerance, double min_area)
{
    if (!(tolerance >= 0.)) throw Error("simplification tolerance must be nonnegative");
    ContourSet out;
    out.z = set.z;
    out.dropped = set.dropped;
    for (const Loop &loop : set.loops) {
        Loop s = tolerance > 0. ? simplify_loop(loop, tolerance) : loop;
        if (s.size() < 4 || std::abs(signed_area(s)) < min_area) {
            ++out.dropped;
            continue;
        }
        out.loops.push_back(std::move(s));
    }
    return out;
}

void write_contours_csv(const ContourSet &set, const std::filesystem::path &path)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out.precision(10);
    out << "loop_id,x,y\n";
    for (std::size_t i = 0; i < set.loops.size(); ++i)
        for (const Vec2d &p : set.loops[i]) out << i << ',' << p.x() << ',' << p.y() << '\n';
    if (!out.flush()) throw Error("I/O failure writing " + path.string());
}

} // namespace convlat
