#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace convlat {

using Vec3d = Eigen::Vector3d;
using Vec2d = Eigen::Vector2d;

inline constexpr double kPi = 3.14159265358979323846;

// Base for every error raised by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. `where` is "line N" for text or "offset N" for
// binary input; both are folded into what().
class ParseError : public Error
{
public:
    ParseError(const std::string &file, const std::string &where, const std::string &msg)
        : Error(file + " (" + where + "): " + msg), m_where(where)
    {}

    const std::string &where() const { return m_where; }

private:
    std::string m_where;
};

struct BoundingBox
{
    Vec3d min = Vec3d::Constant(std::numeric_limits<double>::infinity());
    Vec3d max = Vec3d::Constant(-std::numeric_limits<double>::infinity());

    bool empty() const { return min.x() > max.x(); }

    void merge(const Vec3d &p)
    {
        min = min.cwiseMin(p);
        max = max.cwiseMax(p);
    }

    Vec3d size() const { return empty() ? Vec3d::Zero() : Vec3d(max - min); }
    Vec3d center() const { return 0.5 * (min + max); }
    double diagonal() const { return size().norm(); }

    bool contains(const Vec3d &p) const
    {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }

    BoundingBox inflated(double d) const
    {
        BoundingBox b = *this;
        if (!b.empty()) {
            b.min.array() -= d;
            b.max.array() += d;
        }
        return b;
    }
};

} // namespace convlat
