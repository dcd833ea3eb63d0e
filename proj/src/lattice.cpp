#include "convlat/lattice.hpp"
#include "convlat/binary_io.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_set>

namespace convlat {

namespace {

std::uint64_t edge_key(std::uint32_t a, std::uint32_t b)
{
    if (a > b) std::swap(a, b);
    return (std::uint64_t(a) << 32) | b;
}

bool finite(const Vec3d &p) { return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z()); }

} // namespace

LatticeGraph::LatticeGraph(std::vector<Vec3d> nodes, std::vector<Edge> edges)
    : m_nodes(std::move(nodes)), m_edges(std::move(edges))
{
    validate();
}

BoundingBox LatticeGraph::bounding_box() const
{
    BoundingBox box;
    for (const Vec3d &p : m_nodes) box.merge(p);
    return box;
}

std::uint32_t LatticeGraph::add_node(const Vec3d &p)
{
    if (!finite(p)) throw Error("non-finite node coordinate");
    m_nodes.push_back(p);
    return std::uint32_t(m_nodes.size() - 1);
}

void LatticeGraph::add_edge(std::uint32_t a, std::uint32_t b, double weight)
{
    m_edges.push_back({a, b, weight});
}

void LatticeGraph::validate() const
{
    for (std::size_t i = 0; i < m_nodes.size(); ++i)
        if (!finite(m_nodes[i]))
            throw Error("node " + std::to_string(i) + " has a non-finite coordinate");

    std::unordered_set<std::uint64_t> seen;
    seen.reserve(m_edges.size() * 2);
    for (std::size_t i = 0; i < m_edges.size(); ++i) {
        const Edge &e = m_edges[i];
        const std::string tag = "edge " + std::to_string(i);
        if (e.start >= m_nodes.size() || e.end >= m_nodes.size())
            throw Error(tag + " references a missing node");
        if (e.start == e.end) throw Error(tag + " is a self loop");
        if (!(e.weight >= 0.) || !std::isfinite(e.weight))
            throw Error(tag + " has an invalid weight");
        if (!seen.insert(edge_key(e.start, e.end)).second)
            throw Error(tag + " duplicates an earlier edge");
    }
}

LatticeFormat detect_lattice_format(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[4] = {};
    in.read(magic, 4);
    if (in.gcount() == 4 && std::memcmp(magic, kLatticeMagic, 4) == 0) return LatticeFormat::Binary;
    return LatticeFormat::Text;
}

// ---------------------------------------------------------------------------
// Reader

struct LatticeReader::Impl
{
    std::string   file;
    LatticeFormat format;
    std::ifstream in;
    std::size_t   line = 0;         // text: current line number
    std::uint64_t nodes_read = 0;
    std::uint64_t edges_read = 0;
    std::uint64_t node_count = 0;

    std::string where() const
    {
        if (format == LatticeFormat::Text) return "line " + std::to_string(line);
        return "offset " + std::to_string(std::uint64_t(const_cast<std::ifstream &>(in).tellg()));
    }

    [[noreturn]] void fail(const std::string &msg) const { throw ParseError(file, where(), msg); }

    // Next non-empty, non-comment line, split into a stream.
    bool next_record(std::istringstream &rec)
    {
        std::string s;
        while (std::getline(in, s)) {
            ++line;
            if (auto hash = s.find('#'); hash != std::string::npos) s.resize(hash);
            if (s.find_first_not_of(" \t\r") == std::string::npos) continue;
            rec.clear();
            rec.str(s);
            return true;
        }
        return false;
    }
};

LatticeReader::LatticeReader(const std::filesystem::path &path, LatticeFormat format)
    : m_impl(std::make_unique<Impl>())
{
    if (format == LatticeFormat::Auto) format = detect_lattice_format(path);
    m_impl->file = path.string();
    m_impl->format = format;
    m_impl->in.open(path, std::ios::binary);
    if (!m_impl->in) throw Error("cannot open " + path.string());

    if (format == LatticeFormat::Binary) {
        unsigned char header[kBinaryHeaderBytes];
        m_impl->in.read(reinterpret_cast<char *>(header), sizeof header);
        if (m_impl->in.gcount() != std::streamsize(sizeof header)) m_impl->fail("truncated header");
        if (std::memcmp(header, kLatticeMagic, 4) != 0) m_impl->fail("bad magic");
        m_node_count = le::load<std::uint64_t>(header + 4);
        m_edge_count = le::load<std::uint64_t>(header + 12);
        if (m_node_count > std::numeric_limits<std::uint32_t>::max())
            m_impl->fail("node count exceeds 32-bit index range");
    } else {
        std::istringstream rec;
        if (!m_impl->next_record(rec)) m_impl->fail("missing header");
        std::string tag;
        long long n = -1, m = -1;
        rec >> tag >> n >> m;
        if (tag != "lattice" || rec.fail() || n < 0 || m < 0)
            m_impl->fail("malformed header, expected `lattice <nodes> <edges>`");
        m_node_count = std::uint64_t(n);
        m_edge_count = std::uint64_t(m);
    }
    m_impl->node_count = m_node_count;
}

LatticeReader::~LatticeReader() = default;

Vec3d LatticeReader::next_node()
{
    Impl &im = *m_impl;
    if (im.nodes_read >= m_node_count) throw Error("next_node() past node count");
    Vec3d p;
    if (im.format == LatticeFormat::Binary) {
        unsigned char buf[kBinaryNodeBytes];
        im.in.read(reinterpret_cast<char *>(buf), sizeof buf);
        if (im.in.gcount() != std::streamsize(sizeof buf)) im.fail("truncated node block");
        p = {le::load<double>(buf), le::load<double>(buf + 8), le::load<double>(buf + 16)};
    } else {
        std::istringstream rec;
        if (!im.next_record(rec)) im.fail("expected " + std::to_string(m_node_count) + " nodes");
        std::string tag;
        rec >> tag >> p.x() >> p.y() >> p.z();
        if (tag != "v" || rec.fail()) im.fail("malformed node record");
    }
    if (!finite(p)) im.fail("non-finite coordinate for node " + std::to_string(im.nodes_read));
    ++im.nodes_read;
    return p;
}

bool LatticeReader::next_edge(Edge &out)
{
    Impl &im = *m_impl;
    if (im.nodes_read != m_node_count) throw Error("next_edge() before all nodes were read");
    if (im.edges_read >= m_edge_count) {
        if (im.format == LatticeFormat::Text) {
            std::istringstream rec;
            if (im.next_record(rec)) im.fail("trailing records after declared edge count");
        }
        return false;
    }
    if (im.format == LatticeFormat::Binary) {
        unsigned char buf[kBinaryEdgeBytes];
        im.in.read(reinterpret_cast<char *>(buf), sizeof buf);
        if (im.in.gcount() != std::streamsize(sizeof buf)) im.fail("truncated edge block");
        out.start = le::load<std::uint32_t>(buf);
        out.end = le::load<std::uint32_t>(buf + 4);
        out.weight = le::load<double>(buf + 8);
    } else {
        std::istringstream rec;
        if (!im.next_record(rec)) im.fail("expected " + std::to_string(m_edge_count) + " edges");
        std::string tag;
        long long a = -1, b = -1;
        rec >> tag >> a >> b >> out.weight;
        if (tag != "e" || rec.fail()) im.fail("malformed edge record");
        if (a < 0 || b < 0) im.fail("negative node index");
        if (a >= (long long)m_node_count || b >= (long long)m_node_count)
            im.fail("dangling node index in edge " + std::to_string(im.edges_read));
        out.start = std::uint32_t(a);
        out.end = std::uint32_t(b);
    }
    if (out.start >= m_node_count || out.end >= m_node_count)
        im.fail("dangling node index in edge " + std::to_string(im.edges_read));
    if (out.start == out.end) im.fail("self loop in edge " + std::to_string(im.edges_read));
    if (!(out.weight >= 0.) || !std::isfinite(out.weight))
        im.fail("invalid weight in edge " + std::to_string(im.edges_read));
    ++im.edges_read;
    return true;
}

// ---------------------------------------------------------------------------

LatticeGraph load_lattice(const std::filesystem::path &path, LatticeFormat format)
{
    LatticeReader reader(path, format);
    std::vector<Vec3d> nodes;
    nodes.reserve(reader.node_count());
    for (std::uint64_t i = 0; i < reader.node_count(); ++i) nodes.push_back(reader.next_node());

    std::vector<Edge> edges;
    edges.reserve(reader.edge_count());
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(reader.edge_count() * 2);
    Edge e;
    while (reader.next_edge(e)) {
        if (!seen.insert(edge_key(e.start, e.end)).second)
            throw ParseError(path.string(), "edge " + std::to_string(edges.size()),
                             "duplicate edge " + std::to_string(e.start) + "-" + std::to_string(e.end));
        edges.push_back(e);
    }
    LatticeGraph g;
    // Already checked record by record; skip the second validation pass.
    for (const Vec3d &p : nodes) g.add_node(p);
    for (const Edge &ed : edges) g.add_edge(ed.start, ed.end, ed.weight);
    return g;
}

void save_lattice(const LatticeGraph &graph, const std::filesystem::path &path, LatticeFormat format)
{
    if (format == LatticeFormat::Auto) format = LatticeFormat::Binary;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());

    if (format == LatticeFormat::Binary) {
        le::Writer w(out);
        w.bytes(kLatticeMagic, 4);
        w.put<std::uint64_t>(graph.node_count());
        w.put<std::uint64_t>(graph.edge_count());
        for (const Vec3d &p : graph.nodes()) {
            w.put(p.x());
            w.put(p.y());
            w.put(p.z());
        }
        for (const Edge &e : graph.edges()) {
            w.put(e.start);
            w.put(e.end);
            w.put(e.weight);
        }
        w.flush();
    } else {
        // 17 significant digits round-trip doubles exactly.
        out << "lattice " << graph.node_count() << ' ' << graph.edge_count() << '\n';
        out << std::setprecision(17);
        for (const Vec3d &p : graph.nodes()) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
        for (const Edge &e : graph.edges()) out << "e " << e.start << ' ' << e.end << ' ' << e.weight << '\n';
    }
    if (!out.flush()) throw Error("I/O failure writing " + path.string());
}

} // namespace convlat
