#include "convlat/slicer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <thread>

namespace convlat {

void SliceJob::validate() const
{
    field.validate();
    if (!(layer_thickness > 0.)) throw Error("layer thickness must be positive");
    if (!(pixel_size > 0.)) throw Error("pixel size must be positive");
    if (!(z_max >= z_min)) throw Error("empty z range");
    if (width < 0 || height < 0) throw Error("negative image size");
}

std::size_t SliceJob::layer_count() const
{
    const double n = (z_max - z_min) / layer_thickness;
    if (!(n > 0.)) return 0;
    // Absorb rounding such as 0.3 / 0.1 = 2.9999999999999996.
    return std::size_t(std::ceil(n - 1e-9 * std::max(1., n)));
}

SliceJob make_slice_job(const BoundingBox &box, const FieldConfig &cfg, double layer_thickness, double pixel_size)
{
    SliceJob job;
    job.field = cfg;
    job.layer_thickness = layer_thickness;
    job.pixel_size = pixel_size;
    job.validate();
    if (box.empty()) return job;
    const BoundingBox padded = box.inflated(cfg.support_radius);
    job.z_min = padded.min.z();
    job.z_max = padded.max.z();
    job.x_min = padded.min.x();
    job.y_min = padded.min.y();
    job.width = std::max(1, int(std::ceil(padded.size().x() / pixel_size)));
    job.height = std::max(1, int(std::ceil(padded.size().y() / pixel_size)));
    return job;
}

BoundingBox lattice_file_bounds(const std::filesystem::path &path)
{
    LatticeReader reader(path);
    BoundingBox box;
    for (std::uint64_t i = 0; i < reader.node_count(); ++i) box.merge(reader.next_node());
    return box;
}

std::size_t SliceImage::filled() const
{
    return std::size_t(std::count(pixels.begin(), pixels.end(), std::uint8_t(1)));
}

// ---------------------------------------------------------------------------

void ActiveEdgeList::advance(EdgeSource &source, double z)
{
    if (!(z > m_z)) throw Error("slicing planes must ascend");
    m_z = z;
    const double R = m_R;
    std::erase_if(m_edges, [&](const EdgeRecord &e) { return e.hi_z + R < z; });
    while (const EdgeRecord *e = source.peek()) {
        if (e->lo_z - R > z) break;
        if (e->hi_z + R >= z) m_edges.push_back(*e);
        source.pop();
    }
    m_peak = std::max(m_peak, m_edges.size());
}

// ---------------------------------------------------------------------------

LayerRasterizer::LayerRasterizer(const SliceJob &job) : m_job(job), m_cell(job.field.support_radius)
{
    job.validate();
    m_bins_x = std::max(1, int(std::ceil(job.width * job.pixel_size / m_cell)));
    m_bins_y = std::max(1, int(std::ceil(job.height * job.pixel_size / m_cell)));
    m_offsets.resize(std::size_t(m_bins_x) * m_bins_y + 1);
    m_fill.resize(m_offsets.size());
}

std::size_t LayerRasterizer::memory_bytes() const
{
    return m_segments.capacity() * sizeof(Segment) +
           (m_offsets.capacity() + m_items.capacity() + m_fill.capacity()) * sizeof(std::uint32_t) +
           m_order.capacity() * sizeof(std::size_t);
}

void LayerRasterizer::rasterize(std::span<const EdgeRecord> active, double z, SliceImage &out)
{
    out.z = z;
    out.width = m_job.width;
    out.height = m_job.height;
    out.pixels.assign(std::size_t(m_job.width) * m_job.height, 0);

    m_order.resize(active.size());
    std::iota(m_order.begin(), m_order.end(), std::size_t(0));
    std::sort(m_order.begin(), m_order.end(), [&](std::size_t a, std::size_t b) { return active[a].seq < active[b].seq; });
    m_segments.clear();
    for (std::size_t i : m_order) {
        const EdgeRecord &e = active[i];
        m_segments.push_back({Vec3d(e.lower[0], e.lower[1], e.lower[2]), Vec3d(e.upper[0], e.upper[1], e.upper[2]),
                              e.weight});
    }

    const double R = m_job.field.support_radius;
    const double reach = R + m_cell * std::sqrt(0.5);
    const int nx = m_bins_x, ny = m_bins_y;
    auto visit = [&](const Segment &s, auto &&fn) {
        // Part of the segment within R of the plane; lower endpoint first.
        const Vec3d d = s.b - s.a;
        double t0 = 0., t1 = 1.;
        if (d.z() > 0.) {
            t0 = std::clamp((z - R - s.a.z()) / d.z(), 0., 1.);
            t1 = std::clamp((z + R - s.a.z()) / d.z(), 0., 1.);
        }
        const Vec3d p0 = s.a + t0 * d, p1 = s.a + t1 * d;
        const int x0 = std::clamp(int(std::floor((std::min(p0.x(), p1.x()) - R - m_job.x_min) / m_cell)), 0, nx - 1);
        const int x1 = std::clamp(int(std::floor((std::max(p0.x(), p1.x()) + R - m_job.x_min) / m_cell)), 0, nx - 1);
        const int y0 = std::clamp(int(std::floor((std::min(p0.y(), p1.y()) - R - m_job.y_min) / m_cell)), 0, ny - 1);
        const int y1 = std::clamp(int(std::floor((std::max(p0.y(), p1.y()) + R - m_job.y_min) / m_cell)), 0, ny - 1);
        for (int by = y0; by <= y1; ++by)
            for (int bx = x0; bx <= x1; ++bx) {
                const Vec3d c(m_job.x_min + (bx + 0.5) * m_cell, m_job.y_min + (by + 0.5) * m_cell, z);
                if (point_segment_distance(c, s.a, s.b) > reach) continue;
                fn(std::size_t(by) * nx + bx);
            }
    };

    std::fill(m_fill.begin(), m_fill.end(), 0);
    for (const Segment &s : m_segments) visit(s, [&](std::size_t b) { ++m_fill[b]; });
    m_offsets[0] = 0;
    for (std::size_t b = 0; b + 1 < m_offsets.size(); ++b) m_offsets[b + 1] = m_offsets[b] + m_fill[b];
    m_items.resize(m_offsets.back());
    std::fill(m_fill.begin(), m_fill.end(), 0);
    for (std::size_t i = 0; i < m_segments.size(); ++i)
        visit(m_segments[i], [&](std::size_t b) { m_items[m_offsets[b] + m_fill[b]++] = std::uint32_t(i); });

    const unsigned workers = std::max(1u, std::min<unsigned>(m_job.threads, unsigned(std::max(1, m_job.height))));
    if (workers == 1 || m_segments.empty()) {
        if (!m_segments.empty()) rasterize_rows(z, 0, m_job.height, out);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        const int begin = int(std::int64_t(m_job.height) * w / workers);
        const int end = int(std::int64_t(m_job.height) * (w + 1) / workers);
        pool.emplace_back([=, this, &out] { rasterize_rows(z, begin, end, out); });
    }
    for (auto &t : pool) t.join();
}

void LayerRasterizer::rasterize_rows(double z, int row_begin, int row_end, SliceImage &out) const
{
    const double R = m_job.field.support_radius;
    const double C = m_job.field.isovalue;
    for (int j = row_begin; j < row_end; ++j) {
        const double y = m_job.pixel_y(j);
        const int by = std::min(int((y - m_job.y_min) / m_cell), m_bins_y - 1);
        std::uint8_t *row = out.pixels.data() + std::size_t(j) * m_job.width;
        for (int i = 0; i < m_job.width; ++i) {
            const double x = m_job.pixel_x(i);
            const int bx = std::min(int((x - m_job.x_min) / m_cell), m_bins_x - 1);
            const std::size_t b = std::size_t(by) * m_bins_x + bx;
            const std::uint32_t first = m_offsets[b], last = m_offsets[b + 1];
            if (first == last) continue;
            const Vec3d p(x, y, z);
            double sum = 0.;
            for (std::uint32_t k = first; k < last; ++k) {
                const Segment &s = m_segments[m_items[k]];
                sum += edge_contribution(p, s.a, s.b, s.weight, R);
            }
            row[i] = C - sum <= 0.;
        }
    }
}

// ---------------------------------------------------------------------------

SliceSummary slice_all(EdgeSource &source, const SliceJob &job, const LayerSink &sink)
{
    using clock = std::chrono::steady_clock;
    job.validate();
    if (job.field.kernel != KernelKind::CompactQuartic) throw Error("streaming slicing needs the compact kernel");

    const auto start = clock::now();
    SliceSummary sum;
    sum.layers = job.layer_count();
    sum.width = job.width;
    sum.height = job.height;
    sum.layer_thickness = job.layer_thickness;
    sum.pixel_size = job.pixel_size;

    ActiveEdgeList active(job.field.support_radius);
    LayerRasterizer raster(job);
    SliceImage img;
    for (std::size_t k = 0; k < sum.layers; ++k) {
        const auto t0 = clock::now();
        const double z = job.layer_z(k);
        active.advance(source, z);
        img.layer = k;
        raster.rasterize(active.edges(), z, img);

        LayerStats st;
        st.layer = k;
        st.z = z;
        st.active = active.size();
        st.filled = img.filled();
        st.seconds = std::chrono::duration<double>(clock::now() - t0).count();
        sum.max_active = std::max(sum.max_active, st.active);
        sum.peak_bytes = std::max(sum.peak_bytes, active.memory_bytes() + raster.memory_bytes() +
                                                      img.pixels.capacity() + source.buffer_bytes());
        if (sink) sink(img, st);
        sum.per_layer.push_back(st);
    }
    // Drain so every edge counts as read even when the stack ends below the top.
    while (source.peek()) source.pop();
    sum.struts = source.consumed();
    sum.peak_resident = active.peak();
    sum.seconds = std::chrono::duration<double>(clock::now() - start).count();
    return sum;
}

SliceSummary slice_file(const std::filesystem::path &lattice, const SliceJob &job, const StreamOptions &opts,
                        const LayerSink &sink)
{
    SortStats sort;
    SortedEdgeFile sorted = sort_edges_external(lattice, opts.scratch_dir, opts.memory_budget, &sort);
    FileEdgeSource source(sorted.path());
    SliceSummary sum = slice_all(source, job, sink);
    sum.sort = sort;
    return sum;
}

} // namespace convlat
