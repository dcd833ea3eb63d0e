#pragma once

#include "convlat/lattice.hpp"

#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

namespace convlat {

// Self-contained edge as it travels through the slicer: endpoints resolved,
// lower endpoint (by z) first. `seq` is the edge index in the source file.
struct EdgeRecord
{
    double        lo_z = 0.;
    double        hi_z = 0.;
    std::uint64_t seq = 0;
    double        lower[3] = {0., 0., 0.};
    double        upper[3] = {0., 0., 0.};
    double        weight = 0.;
};

EdgeRecord make_edge_record(const Vec3d &a, const Vec3d &b, double weight, std::uint64_t seq);

// Ascending lower z, ties by source order.
inline bool record_before(const EdgeRecord &x, const EdgeRecord &y)
{
    return x.lo_z < y.lo_z || (x.lo_z == y.lo_z && x.seq < y.seq);
}

// Pull interface over edges in record_before order.
class EdgeSource
{
public:
    virtual ~EdgeSource() = default;
    // nullptr when exhausted. The pointer stays valid until the next pop().
    virtual const EdgeRecord *peek() = 0;
    virtual void pop() = 0;
    // Bytes held for read-ahead, excluding the records already handed out.
    virtual std::size_t buffer_bytes() const { return 0; }
    std::uint64_t consumed() const { return m_consumed; }

protected:
    std::uint64_t m_consumed = 0;
};

class VectorEdgeSource : public EdgeSource
{
public:
    explicit VectorEdgeSource(std::vector<EdgeRecord> sorted) : m_records(std::move(sorted)) {}
    const EdgeRecord *peek() override { return m_pos < m_records.size() ? &m_records[m_pos] : nullptr; }
    void pop() override { ++m_pos, ++m_consumed; }

private:
    std::vector<EdgeRecord> m_records;
    std::size_t m_pos = 0;
};

std::vector<EdgeRecord> sorted_records(const LatticeGraph &graph);

// Binary file of EdgeRecords in sorted order. Removes the file on
// destruction when it owns it.
class SortedEdgeFile
{
public:
    SortedEdgeFile(std::filesystem::path path, std::uint64_t count, bool owned)
        : m_path(std::move(path)), m_count(count), m_owned(owned) {}
    ~SortedEdgeFile();
    SortedEdgeFile(SortedEdgeFile &&other) noexcept;
    SortedEdgeFile &operator=(SortedEdgeFile &&) = delete;
    SortedEdgeFile(const SortedEdgeFile &) = delete;

    const std::filesystem::path &path() const { return m_path; }
    std::uint64_t count() const { return m_count; }

private:
    std::filesystem::path m_path;
    std::uint64_t m_count;
    bool m_owned;
};

// Sequential buffered reader over a SortedEdgeFile.
class FileEdgeSource : public EdgeSource
{
public:
    explicit FileEdgeSource(const std::filesystem::path &path, std::size_t buffer_records = 4096);
    const EdgeRecord *peek() override;
    void pop() override;
    std::size_t buffer_bytes() const override { return m_buffer.capacity() * sizeof(EdgeRecord); }

private:
    bool refill();

    std::unique_ptr<std::FILE, int (*)(std::FILE *)> m_file;
    std::vector<EdgeRecord> m_buffer;
    std::size_t m_pos = 0;
    bool m_eof = false;
};

struct SortStats
{
    std::uint64_t edges = 0;
    std::size_t   runs = 0;
    std::size_t   merge_passes = 0;
    std::size_t   run_capacity = 0;  // records per in-memory run
    std::size_t   node_bytes = 0;    // resident node table, 0 when file backed
    std::size_t   peak_bytes = 0;    // accounted buffers, always <= budget
};

inline constexpr std::size_t kMinSortBudget = std::size_t(2) << 20;

// Sorts the edges of a native lattice file by ascending lower-endpoint z
// (equivalently by lower z - R for any fixed R), stable in file order, with
// at most `memory_budget` bytes of buffers. Runs go to `scratch_dir`; the
// result goes to `output` or, when empty, to a scratch file the returned
// handle owns.
SortedEdgeFile sort_edges_external(const std::filesystem::path &lattice, const std::filesystem::path &scratch_dir,
                                   std::size_t memory_budget, SortStats *stats = nullptr,
                                   const std::filesystem::path &output = {});

} // namespace convlat
