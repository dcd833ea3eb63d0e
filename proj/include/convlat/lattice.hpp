#pragma once

#include "convlat/common.hpp"

#include <filesystem>
#include <memory>
#include <vector>

namespace convlat {

// One strut skeleton. `weight` is the dimensionless convolution weight; the
// geometric strut radius emerges from weight, support size and isovalue (see
// field.hpp). A zero weight contributes nothing to the field.
struct Edge
{
    std::uint32_t start = 0;
    std::uint32_t end   = 0;
    double        weight = 0.;

    friend bool operator==(const Edge &, const Edge &) = default;
};

// Weighted skeleton graph of a lattice structure.
class LatticeGraph
{
public:
    LatticeGraph() = default;
    LatticeGraph(std::vector<Vec3d> nodes, std::vector<Edge> edges);

    const std::vector<Vec3d> &nodes() const { return m_nodes; }
    const std::vector<Edge>  &edges() const { return m_edges; }
    std::size_t node_count() const { return m_nodes.size(); }
    std::size_t edge_count() const { return m_edges.size(); }
    bool empty() const { return m_edges.empty(); }

    const Vec3d &node(std::size_t i) const { return m_nodes[i]; }
    const Edge  &edge(std::size_t i) const { return m_edges[i]; }
    const Vec3d &edge_start(std::size_t i) const { return m_nodes[m_edges[i].start]; }
    const Vec3d &edge_end(std::size_t i) const { return m_nodes[m_edges[i].end]; }
    double edge_length(std::size_t i) const { return (edge_end(i) - edge_start(i)).norm(); }

    BoundingBox bounding_box() const;

    std::uint32_t add_node(const Vec3d &p);
    // Appends without the duplicate check; call validate() once after bulk construction.
    void add_edge(std::uint32_t a, std::uint32_t b, double weight);

    void set_weight(std::size_t edge, double w) { m_edges[edge].weight = w; }
    void set_node(std::size_t i, const Vec3d &p) { m_nodes[i] = p; }

    // Throws Error describing the first violated invariant.
    void validate() const;

    friend bool operator==(const LatticeGraph &a, const LatticeGraph &b)
    {
        return a.m_nodes == b.m_nodes && a.m_edges == b.m_edges;
    }

private:
    std::vector<Vec3d> m_nodes;
    std::vector<Edge>  m_edges;
};

enum class LatticeFormat { Auto, Text, Binary };

// Native .lat formats.
//
// Text: `#` starts a comment; first record `lattice <nodes> <edges>`, then
// `v x y z` lines followed by `e i j w` lines (0-based indices).
// Binary: magic "LAT1", u64 node count, u64 edge count (little endian), then
// nodes as 3 x f64 and edges as u32 start, u32 end, f64 weight.
LatticeGraph load_lattice(const std::filesystem::path &path,
                          LatticeFormat format = LatticeFormat::Auto);
void save_lattice(const LatticeGraph &graph, const std::filesystem::path &path,
                  LatticeFormat format = LatticeFormat::Binary);

LatticeFormat detect_lattice_format(const std::filesystem::path &path);

inline constexpr char kLatticeMagic[4] = {'L', 'A', 'T', '1'};
inline constexpr std::size_t kBinaryHeaderBytes = 4 + 8 + 8;
inline constexpr std::size_t kBinaryNodeBytes = 24;
inline constexpr std::size_t kBinaryEdgeBytes = 16;

// Streaming reader over a native lattice file. Nodes are read first and
// edges are then delivered one at a time, so a caller can keep only what it
// needs resident.
class LatticeReader
{
public:
    explicit LatticeReader(const std::filesystem::path &path,
                           LatticeFormat format = LatticeFormat::Auto);
    ~LatticeReader();
    LatticeReader(const LatticeReader &) = delete;
    LatticeReader &operator=(const LatticeReader &) = delete;

    std::uint64_t node_count() const { return m_node_count; }
    std::uint64_t edge_count() const { return m_edge_count; }

    // Must be called node_count() times before any next_edge().
    Vec3d next_node();
    // Returns false once all edges were consumed. Edges are checked for
    // index range and weight sign.
    bool next_edge(Edge &out);

private:
    struct Impl;
    std::unique_ptr<Impl> m_impl;
    std::uint64_t m_node_count = 0;
    std::uint64_t m_edge_count = 0;
};

} // namespace convlat
