#include "convlat/edge_grid.hpp"

#include <algorithm>
#include <cmath>

namespace convlat {

EdgeGrid::EdgeGrid(std::span<const Segment> segments, double reach, std::size_t max_cells)
{
    BoundingBox box;
    for (const Segment &s : segments) {
        box.merge(s.a);
        box.merge(s.b);
    }
    if (box.empty()) return;
    box = box.inflated(reach);
    m_origin = box.min;
    m_cell = reach;
    const Vec3d size = box.size();
    for (;;) {
        std::size_t total = 1;
        for (int k = 0; k < 3; ++k) {
            m_dims[k] = std::max(1, int(std::ceil(size[k] / m_cell)));
            total *= std::size_t(m_dims[k]);
        }
        if (total <= max_cells) break;
        m_cell *= 1.25;
    }

    const double half_diag = 0.5 * std::sqrt(3.) * m_cell;
    const std::size_t ncells = std::size_t(m_dims[0]) * m_dims[1] * m_dims[2];
    auto cell_range = [&](const Segment &s, int lo[3], int hi[3]) {
        for (int k = 0; k < 3; ++k) {
            const double mn = std::min(s.a[k], s.b[k]) - reach, mx = std::max(s.a[k], s.b[k]) + reach;
            lo[k] = std::clamp(int(std::floor((mn - m_origin[k]) / m_cell)), 0, m_dims[k] - 1);
            hi[k] = std::clamp(int(std::floor((mx - m_origin[k]) / m_cell)), 0, m_dims[k] - 1);
        }
    };
    // Two passes: count, then fill (CSR).
    std::vector<std::uint32_t> counts(ncells + 1, 0);
    for (int pass = 0; pass < 2; ++pass) {
        if (pass == 1) {
            m_offsets.assign(ncells + 1, 0);
            for (std::size_t c = 0; c < ncells; ++c) m_offsets[c + 1] = m_offsets[c] + counts[c];
            m_items.resize(m_offsets.back());
            std::fill(counts.begin(), counts.end(), 0);
        }
        for (std::size_t i = 0; i < segments.size(); ++i) {
            int lo[3], hi[3];
            cell_range(segments[i], lo, hi);
            for (int z = lo[2]; z <= hi[2]; ++z)
                for (int y = lo[1]; y <= hi[1]; ++y)
                    for (int x = lo[0]; x <= hi[0]; ++x) {
                        const Vec3d c = m_origin + m_cell * Vec3d(x + 0.5, y + 0.5, z + 0.5);
                        if (point_segment_distance(c, segments[i].a, segments[i].b) > reach + half_diag) continue;
                        const std::size_t id = (std::size_t(z) * m_dims[1] + y) * m_dims[0] + x;
                        if (pass == 1) m_items[m_offsets[id] + counts[id]] = std::uint32_t(i);
                        ++counts[id];
                    }
        }
    }
}

std::span<const std::uint32_t> EdgeGrid::candidates(const Vec3d &p) const
{
    if (m_offsets.empty()) return {};
    int idx[3];
    for (int k = 0; k < 3; ++k) {
        const int c = int(std::floor((p[k] - m_origin[k]) / m_cell));
        if (c < 0 || c >= m_dims[k]) return {};
        idx[k] = c;
    }
    const std::size_t id = (std::size_t(idx[2]) * m_dims[1] + idx[1]) * m_dims[0] + idx[0];
    return {m_items.data() + m_offsets[id], m_offsets[id + 1] - m_offsets[id]};
}

std::size_t EdgeGrid::memory_bytes() const
{
    return (m_offsets.capacity() + m_items.capacity()) * sizeof(std::uint32_t);
}

FieldEvaluator::FieldEvaluator(std::vector<Segment> segments, const FieldConfig &cfg)
    : m_segments(std::move(segments)), m_cfg(cfg)
{
    if (cfg.kernel == KernelKind::CompactQuartic) m_grid = EdgeGrid(m_segments, cfg.support_radius);
}

double FieldEvaluator::operator()(const Vec3d &p) const
{
    if (m_cfg.kernel != KernelKind::CompactQuartic) return field_value(p, m_segments, m_cfg);
    double sum = 0.;
    const double R = m_cfg.support_radius;
    for (std::uint32_t i : m_grid.candidates(p)) {
        const Segment &s = m_segments[i];
        sum += edge_contribution(p, s.a, s.b, s.weight, R);
    }
    return m_cfg.isovalue - sum;
}

} // namespace convlat
