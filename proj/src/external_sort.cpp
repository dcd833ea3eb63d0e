#include "convlat/external_sort.hpp"

#include <algorithm>
#include <atomic>
#include <queue>

#include <unistd.h>

namespace convlat {

EdgeRecord make_edge_record(const Vec3d &a, const Vec3d &b, double weight, std::uint64_t seq)
{
    EdgeRecord r;
    const bool a_low = a.z() <= b.z();
    const Vec3d &lo = a_low ? a : b;
    const Vec3d &hi = a_low ? b : a;
    r.lo_z = lo.z();
    r.hi_z = hi.z();
    r.seq = seq;
    for (int k = 0; k < 3; ++k) {
        r.lower[k] = lo[k];
        r.upper[k] = hi[k];
    }
    r.weight = weight;
    return r;
}

std::vector<EdgeRecord> sorted_records(const LatticeGraph &graph)
{
    std::vector<EdgeRecord> out;
    out.reserve(graph.edge_count());
    for (std::size_t i = 0; i < graph.edge_count(); ++i)
        out.push_back(make_edge_record(graph.edge_start(i), graph.edge_end(i), graph.edge(i).weight, i));
    std::sort(out.begin(), out.end(), record_before);
    return out;
}

SortedEdgeFile::~SortedEdgeFile()
{
    if (m_owned && !m_path.empty()) {
        std::error_code ec;
        std::filesystem::remove(m_path, ec);
    }
}

SortedEdgeFile::SortedEdgeFile(SortedEdgeFile &&other) noexcept
    : m_path(std::move(other.m_path)), m_count(other.m_count), m_owned(other.m_owned)
{
    other.m_path.clear();
    other.m_owned = false;
}

// ---------------------------------------------------------------------------

FileEdgeSource::FileEdgeSource(const std::filesystem::path &path, std::size_t buffer_records)
    : m_file(std::fopen(path.c_str(), "rb"), &std::fclose)
{
    if (!m_file) throw Error("cannot open sorted edge file " + path.string());
    m_buffer.reserve(std::max<std::size_t>(1, buffer_records));
}

bool FileEdgeSource::refill()
{
    if (m_eof) return false;
    m_buffer.resize(m_buffer.capacity());
    const std::size_t n = std::fread(m_buffer.data(), sizeof(EdgeRecord), m_buffer.size(), m_file.get());
    if (n < m_buffer.size()) {
        if (std::ferror(m_file.get())) throw Error("read failure in sorted edge file");
        m_eof = true;
    }
    m_buffer.resize(n);
    m_pos = 0;
    return n > 0;
}

const EdgeRecord *FileEdgeSource::peek()
{
    if (m_pos >= m_buffer.size() && !refill()) return nullptr;
    return &m_buffer[m_pos];
}

void FileEdgeSource::pop()
{
    ++m_pos;
    ++m_consumed;
}

// ---------------------------------------------------------------------------

namespace {

std::filesystem::path scratch_name(const std::filesystem::path &dir, const char *suffix)
{
    static std::atomic<unsigned> counter{0};
    return dir / ("convlat-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + suffix);
}

class ScratchFile
{
public:
    explicit ScratchFile(std::filesystem::path p) : path(std::move(p)) {}
    ~ScratchFile()
    {
        if (!path.empty()) {
            std::error_code ec;
            std::filesystem::remove(path, ec);
        }
    }
    ScratchFile(ScratchFile &&o) noexcept : path(std::move(o.path)) { o.path.clear(); }
    ScratchFile(const ScratchFile &) = delete;
    std::filesystem::path release()
    {
        auto p = std::move(path);
        path.clear();
        return p;
    }

    std::filesystem::path path;
};

class RecordWriter
{
public:
    RecordWriter(const std::filesystem::path &path, std::size_t buffer_records)
        : m_file(std::fopen(path.c_str(), "wb"), &std::fclose), m_path(path)
    {
        if (!m_file) throw Error("cannot create scratch file " + path.string());
        m_buffer.reserve(std::max<std::size_t>(1, buffer_records));
    }

    void put(const EdgeRecord &r)
    {
        m_buffer.push_back(r);
        if (m_buffer.size() == m_buffer.capacity()) flush();
    }

    void write_all(const std::vector<EdgeRecord> &records)
    {
        if (std::fwrite(records.data(), sizeof(EdgeRecord), records.size(), m_file.get()) != records.size())
            throw Error("write failure on " + m_path.string());
    }

    void close()
    {
        flush();
        if (std::fflush(m_file.get()) != 0) throw Error("write failure on " + m_path.string());
        m_file.reset();
    }

    std::size_t buffer_bytes() const { return m_buffer.capacity() * sizeof(EdgeRecord); }

private:
    void flush()
    {
        if (m_buffer.empty()) return;
        if (std::fwrite(m_buffer.data(), sizeof(EdgeRecord), m_buffer.size(), m_file.get()) != m_buffer.size())
            throw Error("write failure on " + m_path.string());
        m_buffer.clear();
    }

    std::unique_ptr<std::FILE, int (*)(std::FILE *)> m_file;
    std::filesystem::path m_path;
    std::vector<EdgeRecord> m_buffer;
};

// Node coordinates for endpoint resolution; in memory when they fit in a
// quarter of the budget, otherwise paged from a scratch file.
class NodeTable
{
public:
    NodeTable(LatticeReader &reader, std::size_t budget, const std::filesystem::path &scratch)
        : m_file(nullptr, &std::fclose)
    {
        const std::uint64_t n = reader.node_count();
        if (n * sizeof(Vec3d) <= budget / 4) {
            m_nodes.reserve(n);
            for (std::uint64_t i = 0; i < n; ++i) m_nodes.push_back(reader.next_node());
            return;
        }
        m_backing = std::make_unique<ScratchFile>(scratch_name(scratch, ".nodes"));
        {
            std::unique_ptr<std::FILE, int (*)(std::FILE *)> out(std::fopen(m_backing->path.c_str(), "wb"),
                                                                  &std::fclose);
            if (!out) throw Error("cannot create scratch file " + m_backing->path.string());
            for (std::uint64_t i = 0; i < n; ++i) {
                const Vec3d p = reader.next_node();
                const double xyz[3] = {p.x(), p.y(), p.z()};
                if (std::fwrite(xyz, sizeof xyz, 1, out.get()) != 1) throw Error("write failure on node scratch");
            }
        }
        m_file.reset(std::fopen(m_backing->path.c_str(), "rb"));
        if (!m_file) throw Error("cannot reopen node scratch file");
        m_pages.assign(kCachePages, Page{});
    }

    std::size_t resident_bytes() const
    {
        return m_nodes.capacity() * sizeof(Vec3d) + m_pages.size() * sizeof(Page);
    }

    Vec3d operator[](std::uint32_t i)
    {
        if (!m_file) return m_nodes[i];
        const std::uint64_t page = i / kPageNodes;
        Page &slot = m_pages[page % kCachePages];
        if (slot.id != page) {
            if (std::fseek(m_file.get(), long(page * kPageNodes * 24), SEEK_SET) != 0)
                throw Error("seek failure on node scratch");
            const std::size_t got = std::fread(slot.xyz, 24, kPageNodes, m_file.get());
            if (got == 0) throw Error("read failure on node scratch");
            slot.id = page;
        }
        const double *c = slot.xyz + 3 * (i % kPageNodes);
        return {c[0], c[1], c[2]};
    }

private:
    static constexpr std::size_t kPageNodes = 512;
    static constexpr std::size_t kCachePages = 64;
    struct Page
    {
        std::uint64_t id = ~std::uint64_t(0);
        double xyz[3 * kPageNodes];
    };

    std::vector<Vec3d> m_nodes;
    std::unique_ptr<ScratchFile> m_backing;
    std::unique_ptr<std::FILE, int (*)(std::FILE *)> m_file;
    std::vector<Page> m_pages;
};

void merge_runs(const std::vector<std::filesystem::path> &inputs, const std::filesystem::path &output,
                std::size_t buffer_records)
{
    std::vector<std::unique_ptr<FileEdgeSource>> sources;
    for (const auto &p : inputs) sources.push_back(std::make_unique<FileEdgeSource>(p, buffer_records));
    auto later = [&](std::size_t x, std::size_t y) { return record_before(*sources[y]->peek(), *sources[x]->peek()); };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> heap(later);
    for (std::size_t i = 0; i < sources.size(); ++i)
        if (sources[i]->peek()) heap.push(i);

    RecordWriter out(output, buffer_records);
    while (!heap.empty()) {
        const std::size_t i = heap.top();
        heap.pop();
        out.put(*sources[i]->peek());
        sources[i]->pop();
        if (sources[i]->peek()) heap.push(i);
    }
    out.close();
}

} // namespace

SortedEdgeFile sort_edges_external(const std::filesystem::path &lattice, const std::filesystem::path &scratch_dir,
                                   std::size_t memory_budget, SortStats *stats_out, const std::filesystem::path &output)
{
    const std::size_t rec = sizeof(EdgeRecord);
    const std::size_t buffer_records = std::clamp<std::size_t>(memory_budget / (rec * 64), 256, 4096);
    if (memory_budget < kMinSortBudget)
        throw Error("memory budget of " + std::to_string(memory_budget) + " bytes is below the minimum of " +
                    std::to_string(kMinSortBudget));
    std::filesystem::create_directories(scratch_dir);

    SortStats stats;
    std::vector<ScratchFile> runs;
    std::vector<EdgeRecord> chunk;
    {
        LatticeReader reader(lattice);
        NodeTable nodes(reader, memory_budget, scratch_dir);
        stats.node_bytes = nodes.resident_bytes();
        stats.run_capacity = (memory_budget - stats.node_bytes) / rec;
        chunk.reserve(stats.run_capacity);
        stats.peak_bytes = stats.node_bytes + chunk.capacity() * rec;

        auto spill = [&] {
            std::sort(chunk.begin(), chunk.end(), record_before);
            runs.emplace_back(scratch_name(scratch_dir, ".run"));
            RecordWriter w(runs.back().path, 1);
            w.write_all(chunk);
            w.close();
            chunk.clear();
        };

        Edge e;
        std::uint64_t seq = 0;
        while (reader.next_edge(e)) {
            chunk.push_back(make_edge_record(nodes[e.start], nodes[e.end], e.weight, seq++));
            if (chunk.size() == stats.run_capacity) spill();
        }
        stats.edges = seq;
        if (!runs.empty() && !chunk.empty()) spill();
    }

    const bool owned = output.empty();
    const std::filesystem::path target = owned ? scratch_name(scratch_dir, ".sorted") : output;

    if (runs.empty()) {
        // Everything fit in one run.
        std::sort(chunk.begin(), chunk.end(), record_before);
        RecordWriter w(target, 1);
        w.write_all(chunk);
        w.close();
        stats.runs = 1;
    } else {
        std::vector<EdgeRecord>().swap(chunk);
        stats.runs = runs.size();

        const std::size_t fan_in = std::max<std::size_t>(2, memory_budget / (buffer_records * rec) - 1);
        while (runs.size() > 1) {
            ++stats.merge_passes;
            const bool last = runs.size() <= fan_in;
            std::vector<ScratchFile> next;
            for (std::size_t i = 0; i < runs.size(); i += fan_in) {
                std::vector<std::filesystem::path> group;
                for (std::size_t j = i; j < std::min(runs.size(), i + fan_in); ++j) group.push_back(runs[j].path);
                const auto dst = last ? target : scratch_name(scratch_dir, ".run");
                merge_runs(group, dst, buffer_records);
                stats.peak_bytes = std::max(stats.peak_bytes, (group.size() + 1) * buffer_records * rec);
                if (!last) next.emplace_back(dst);
            }
            runs = std::move(next);
            if (last) break;
        }
        if (runs.size() == 1) std::filesystem::rename(runs.front().release(), target);
    }

    if (stats_out) *stats_out = stats;
    return SortedEdgeFile(target, stats.edges, owned);
}

} // namespace convlat
