#pragma once

#include <span>
#include <vector>

#include "csgd/geometry.hpp"

// Small planar helpers used to measure projected shadows on the detector.
namespace csgd::polygon {

struct Point2 {
    double u = 0.0;
    double v = 0.0;
};

/// Counter-clockwise convex hull (monotone chain). Collinear points are dropped.
std::vector<Point2> convex_hull(std::vector<Point2> points);

/// Sutherland-Hodgman clip of a convex polygon against an axis-aligned rectangle.
std::vector<Point2> clip_to_rect(std::span<const Point2> polygon, const DetectorRect& rect);

/// Shoelace area (absolute value).
double area(std::span<const Point2> polygon);

}  // namespace csgd::polygon
