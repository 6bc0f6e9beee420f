#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "sedm/error.hpp"

namespace sedm {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

/// Closed polygon; the last vertex implicitly connects back to the first.
struct Polygon {
    std::vector<Vec2> vertices;

    std::size_t size() const { return vertices.size(); }
};

/// Ordered sequence of contour points traversed counterclockwise.
/// Produced by resample_uniform; N is a power of two by construction.
struct ContourSequence {
    std::vector<Vec2> points;

    std::size_t size() const { return points.size(); }
};

/// Similarity transform applied as scale, then (optional) reflection,
/// then rotation, then translation.
struct SimilarityTransform {
    double theta = 0.0;
    double t_x = 0.0;
    double t_y = 0.0;
    double a = 1.0;
    bool reflect = false;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

/// Signed area of a closed point loop (shoelace). Positive = counterclockwise.
template <typename PointRange>
double signed_area(const PointRange& pts) {
    const std::size_t n = pts.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = pts[i];
        const auto& q = pts[(i + 1) % n];
        acc += p.x * q.y - q.x * p.y;
    }
    return 0.5 * acc;
}

template <typename PointRange>
double perimeter_of(const PointRange& pts) {
    const std::size_t n = pts.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += distance(pts[i], pts[(i + 1) % n]);
    return acc;
}

template <typename PointRange>
Vec2 centroid_of(const PointRange& pts) {
    Vec2 c;
    for (const auto& p : pts) {
        c.x += p.x;
        c.y += p.y;
    }
    const double n = static_cast<double>(pts.size());
    return {c.x / n, c.y / n};
}

/// Largest pairwise point distance. Quadratic; fine at contour sizes.
template <typename PointRange>
double diameter_of(const PointRange& pts) {
    double best = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best = std::max(best, distance(pts[i], pts[j]));
    return best;
}

/// Applies a similarity transform to a contour. Reflection negates y before
/// rotation and reverses the point order so the result stays counterclockwise.
inline ContourSequence transform_contour(const ContourSequence& contour, const SimilarityTransform& t) {
    if (!(t.a > 0.0)) throw InvalidTransform("similarity scale factor must be > 0");
    const double c = std::cos(t.theta);
    const double s = std::sin(t.theta);
    ContourSequence out;
    out.points.reserve(contour.points.size());
    for (const auto& p : contour.points) {
        double x = t.a * p.x;
        double y = t.a * p.y;
        if (t.reflect) y = -y;
        out.points.push_back({x * c - y * s + t.t_x, x * s + y * c + t.t_y});
    }
    if (t.reflect) {
        // keep point 0 in place, reverse the rest
        std::vector<Vec2> rev;
        rev.reserve(out.points.size());
        rev.push_back(out.points.front());
        for (std::size_t i = out.points.size(); i-- > 1;) rev.push_back(out.points[i]);
        out.points = std::move(rev);
    }
    return out;
}

inline Polygon transform_polygon(const Polygon& poly, const SimilarityTransform& t) {
    ContourSequence tmp{poly.vertices};
    return Polygon{transform_contour(tmp, t).points};
}

/// Cyclically reorders a contour: new point i = old point (i*direction + origin) mod N.
/// This is the point-level counterpart of distance-matrix reindexing.
inline ContourSequence roll_contour(const ContourSequence& contour, std::size_t origin, int direction) {
    const std::size_t n = contour.points.size();
    ContourSequence out;
    out.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const long long idx = static_cast<long long>(i) * direction + static_cast<long long>(origin);
        const long long m = ((idx % static_cast<long long>(n)) + static_cast<long long>(n)) % static_cast<long long>(n);
        out.points[i] = contour.points[static_cast<std::size_t>(m)];
    }
    return out;
}

} // namespace sedm
