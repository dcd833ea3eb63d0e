#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <ostream>
#include <type_traits>
#include <vector>

// Little-endian encoding helpers for the binary file formats.
namespace convlat::le {

template<class T> T load(const unsigned char *p)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

template<class T> void store(unsigned char *p, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::memcpy(p, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(p, p + sizeof(T));
}

class Writer
{
public:
    explicit Writer(std::ostream &out, std::size_t buffer = 1 << 16) : m_out(out), m_limit(buffer)
    {
        m_buf.reserve(buffer);
    }
    ~Writer() { flush(); }

    template<class T> void put(T v)
    {
        unsigned char tmp[sizeof(T)];
        store(tmp, v);
        bytes(tmp, sizeof(T));
    }

    void bytes(const void *p, std::size_t n)
    {
        const auto *c = static_cast<const unsigned char *>(p);
        m_buf.insert(m_buf.end(), c, c + n);
        if (m_buf.size() >= m_limit) flush();
    }

    void flush()
    {
        if (!m_buf.empty()) m_out.write(reinterpret_cast<const char *>(m_buf.data()), std::streamsize(m_buf.size()));
        m_buf.clear();
    }

private:
    std::ostream              &m_out;
    std::size_t                m_limit;
    std::vector<unsigned char> m_buf;
};

} // namespace convlat::le
