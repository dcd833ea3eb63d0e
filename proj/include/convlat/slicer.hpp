#pragma once

#include "convlat/external_sort.hpp"
#include "convlat/field.hpp"

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace convlat {

// Layer geometry. Layer k sits at z_min + (k + 1/2) t; pixel (i, j) samples
// (x_min + (i + 1/2) s, y_min + (j + 1/2) s) with s the pixel size.
struct SliceJob
{
    FieldConfig field;
    double layer_thickness = 0.1;
    double pixel_size = 0.05;
    double z_min = 0., z_max = 0.;
    double x_min = 0., y_min = 0.;
    int    width = 0, height = 0;
    unsigned threads = 1;  // rows of one layer are split across this many workers

    void validate() const;
    std::size_t layer_count() const;
    double layer_z(std::size_t k) const { return z_min + (double(k) + 0.5) * layer_thickness; }
    double pixel_x(int i) const { return x_min + (i + 0.5) * pixel_size; }
    double pixel_y(int j) const { return y_min + (j + 0.5) * pixel_size; }
};

// Job covering `box` padded by R on every side.
SliceJob make_slice_job(const BoundingBox &box, const FieldConfig &cfg, double layer_thickness, double pixel_size);

// Bounding box of the nodes of a lattice file, read without loading edges.
BoundingBox lattice_file_bounds(const std::filesystem::path &path);

// Binary layer raster; row 0 is the lowest y.
struct SliceImage
{
    std::size_t layer = 0;
    double      z = 0.;
    int         width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // 1 = inside

    bool at(int i, int j) const { return pixels[std::size_t(j) * width + i] != 0; }
    std::size_t filled() const;
    friend bool operator==(const SliceImage &, const SliceImage &) = default;
};

// Edges whose R-swept volume meets the current plane:
//     lower z - R <= z <= upper z + R.
// Each advance first evicts edges that fell below the plane, then pulls from
// the sorted stream until the next edge starts above it. Streamed edges that
// are already entirely below the plane are consumed without being stored, so
// the list never holds more than the edges the plane actually needs.
class ActiveEdgeList
{
public:
    explicit ActiveEdgeList(double R) : m_R(R) {}

    // z must increase strictly between calls.
    void advance(EdgeSource &source, double z);

    std::span<const EdgeRecord> edges() const { return m_edges; }
    std::size_t size() const { return m_edges.size(); }
    std::size_t peak() const { return m_peak; }
    std::size_t memory_bytes() const { return m_edges.capacity() * sizeof(EdgeRecord); }

private:
    double m_R;
    double m_z = -std::numeric_limits<double>::infinity();
    std::vector<EdgeRecord> m_edges;
    std::size_t m_peak = 0;
};

// Rasterizes one plane against an active set. Active edges are binned in XY
// (cell size R) in ascending source order, so each pixel sums the same terms
// in the same order as a pass over the whole edge list would.
class LayerRasterizer
{
public:
    explicit LayerRasterizer(const SliceJob &job);

    void rasterize(std::span<const EdgeRecord> active, double z, SliceImage &out);
    std::size_t memory_bytes() const;

private:
    void rasterize_rows(double z, int row_begin, int row_end, SliceImage &out) const;

    SliceJob m_job;
    double   m_cell;
    int      m_bins_x, m_bins_y;
    std::vector<Segment>       m_segments;
    std::vector<std::uint32_t> m_offsets, m_items, m_fill;
    std::vector<std::size_t>   m_order;
};

inline SliceImage rasterize_layer(std::span<const EdgeRecord> active, const SliceJob &job, std::size_t layer)
{
    SliceImage img;
    img.layer = layer;
    LayerRasterizer(job).rasterize(active, job.layer_z(layer), img);
    return img;
}

struct LayerStats
{
    std::size_t layer = 0;
    double      z = 0.;
    std::size_t active = 0;
    std::size_t filled = 0;
    double      seconds = 0.;
};

struct SliceSummary
{
    std::uint64_t struts = 0;         // edges read from the stream
    std::size_t   layers = 0;
    std::size_t   max_active = 0;     // max over layers of |E_act|
    std::size_t   peak_resident = 0;  // most edges held at once
    std::size_t   peak_bytes = 0;     // active edges + bins + image + stream buffer
    int           width = 0, height = 0;
    double        layer_thickness = 0., pixel_size = 0.;
    double        seconds = 0.;
    std::vector<LayerStats> per_layer;
    SortStats     sort;
};

using LayerSink = std::function<void(const SliceImage &, const LayerStats &)>;

// Slices every layer bottom-up from an already sorted stream.
SliceSummary slice_all(EdgeSource &source, const SliceJob &job, const LayerSink &sink);

struct StreamOptions
{
    std::filesystem::path scratch_dir = std::filesystem::temp_directory_path();
    std::size_t memory_budget = std::size_t(256) << 20;
};

// Sorts the lattice file out of core, then streams it through slice_all.
SliceSummary slice_file(const std::filesystem::path &lattice, const SliceJob &job, const StreamOptions &opts,
                        const LayerSink &sink);

} // namespace convlat
