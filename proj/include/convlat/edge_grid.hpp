#pragma once

#include "convlat/field.hpp"

#include <span>
#include <vector>

namespace convlat {

// Uniform 3-D grid over segments for point queries. A cell lists every
// segment that can come within `reach` of any point in the cell, in
// ascending segment order, so summing over a cell reproduces the full sum
// term for term.
class EdgeGrid
{
public:
    EdgeGrid() = default;
    // Cell size defaults to `reach`; it grows when the grid would exceed
    // max_cells.
    EdgeGrid(std::span<const Segment> segments, double reach, std::size_t max_cells = std::size_t(1) << 23);

    std::span<const std::uint32_t> candidates(const Vec3d &p) const;
    double cell_size() const { return m_cell; }
    std::size_t memory_bytes() const;

private:
    Vec3d m_origin = Vec3d::Zero();
    double m_cell = 1.;
    int m_dims[3] = {0, 0, 0};
    std::vector<std::uint32_t> m_offsets;
    std::vector<std::uint32_t> m_items;
};

// Point evaluation of F against a fixed segment set through an EdgeGrid.
// Bit-identical to field_value() over all segments for the compact kernel.
class FieldEvaluator
{
public:
    FieldEvaluator(std::vector<Segment> segments, const FieldConfig &cfg);

    double operator()(const Vec3d &p) const;
    bool inside(const Vec3d &p) const { return (*this)(p) <= 0.; }

    // Weights do not enter the grid, so they can change freely.
    void set_weight(std::size_t i, double w) { m_segments[i].weight = w; }
    double weight(std::size_t i) const { return m_segments[i].weight; }

    const FieldConfig &config() const { return m_cfg; }
    const std::vector<Segment> &segments() const { return m_segments; }

private:
    std::vector<Segment> m_segments;
    FieldConfig m_cfg;
    EdgeGrid m_grid;
};

} // namespace convlat
