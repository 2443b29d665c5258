#include "csgd/polygon.hpp"

#include <algorithm>
#include <cmath>

namespace csgd::polygon {
namespace {

double turn(const Point2& o, const Point2& a, const Point2& b) {
    return (a.u - o.u) * (b.v - o.v) - (a.v - o.v) * (b.u - o.u);
}

// Clip against the half-plane sign * (coord(p) - limit) >= 0 on one axis.
std::vector<Point2> clip_half_plane(const std::vector<Point2>& in, bool on_u, double limit, double sign) {
    std::vector<Point2> out;
    if (in.empty()) {
        return out;
    }
    auto dist = [&](const Point2& p) { return sign * ((on_u ? p.u : p.v) - limit); };
    out.reserve(in.size() + 2);
    for (std::size_t k = 0; k < in.size(); ++k) {
        const Point2& a = in[k];
        const Point2& b = in[(k + 1) % in.size()];
        const double da = dist(a);
        const double db = dist(b);
        if (da >= 0.0) {
            out.push_back(a);
        }
        if ((da >= 0.0) != (db >= 0.0)) {
            const double t = da / (da - db);
            Point2 p{a.u + t * (b.u - a.u), a.v + t * (b.v - a.v)};
            // snap the clipped coordinate exactly onto the boundary
            (on_u ? p.u : p.v) = limit;
            out.push_back(p);
        }
    }
    return out;
}

}  // namespace

std::vector<Point2> convex_hull(std::vector<Point2> points) {
    std::sort(points.begin(), points.end(),
              [](const Point2& a, const Point2& b) { return a.u < b.u || (a.u == b.u && a.v < b.v); });
    points.erase(std::unique(points.begin(), points.end(),
                             [](const Point2& a, const Point2& b) { return a.u == b.u && a.v == b.v; }),
                 points.end());
    if (points.size() < 3) {
        return points;
    }
    std::vector<Point2> hull(2 * points.size());
    std::size_t k = 0;
    for (const auto& p : points) {
        while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0.0) {
            --k;
        }
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = points.rbegin() + 1; it != points.rend(); ++it) {
        while (k >= lower && turn(hull[k - 2], hull[k - 1], *it) <= 0.0) {
            --k;
        }
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

std::vector<Point2> clip_to_rect(std::span<const Point2> polygon, const DetectorRect& rect) {
    std::vector<Point2> poly(polygon.begin(), polygon.end());
    poly = clip_half_plane(poly, true, rect.u0, 1.0);
    poly = clip_half_plane(poly, true, rect.u1, -1.0);
    poly = clip_half_plane(poly, false, rect.v0, 1.0);
    poly = clip_half_plane(poly, false, rect.v1, -1.0);
    return poly;
}

double area(std::span<const Point2> polygon) {
    if (polygon.size() < 3) {
        return 0.0;
    }
    double twice = 0.0;
    for (std::size_t k = 0; k < polygon.size(); ++k) {
        const Point2& a = polygon[k];
        const Point2& b = polygon[(k + 1) % polygon.size()];
        twice += a.u * b.v - b.u * a.v;
    }
    return 0.5 * std::abs(twice);
}

}  // namespace csgd::polygon
