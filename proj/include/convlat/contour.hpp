#pragma once

#include "convlat/slicer.hpp"

#include <filesystem>
#include <vector>

namespace convlat {

// Closed polyline in mm: front() == back(), at least 3 distinct vertices.
using Loop = std::vector<Vec2d>;

struct ContourSet
{
    double z = 0.;
    std::vector<Loop> loops;
    std::size_t dropped = 0;  // loops removed by simplification or the area filter
};

// Marching squares over pixel centers with the image surrounded by empty
// pixels. Vertices sit at the midpoints between a filled and an empty pixel
// center. Outer boundaries run counter-clockwise, holes clockwise. In a
// checkerboard 2x2 cell the cell center counts as empty, so diagonal
// neighbours give separate loops.
ContourSet extract_contours(const SliceImage &img, const SliceJob &geometry);

// Signed area (positive for counter-clockwise).
double signed_area(const Loop &loop);

// Douglas-Peucker on each closed loop. Every removed vertex lies within
// `tolerance` of the simplified loop. tolerance = 0 returns the input
// unchanged. Loops left with fewer than 3 vertices, or with |area| below
// min_area, are dropped and counted.
ContourSet simplify_contours(const ContourSet &set, double tolerance, double min_area = 0.);

double point_segment_distance_2d(const Vec2d &p, const Vec2d &a, const Vec2d &b);
// Largest distance from a vertex of `from` to the polyline `to`.
double max_vertex_deviation(const Loop &from, const Loop &to);

// `loop_id,x,y` rows, each loop closed by repeating its first vertex.
void write_contours_csv(const ContourSet &set, const std::filesystem::path &path);

} // namespace convlat
