#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "sedm/error.hpp"
#include "sedm/geometry.hpp"
#include "sedm/image.hpp"

namespace sedm {

namespace detail {

// An iso-crossing lives on a lattice edge; keying crossings by edge identity
// makes loop stitching exact (no floating-point point keys).
struct EdgeKey {
    std::size_t r, c;
    bool vertical;
    bool operator<(const EdgeKey& o) const {
        if (r != o.r) return r < o.r;
        if (c != o.c) return c < o.c;
        return vertical < o.vertical;
    }
};

struct MarchSegment {
    EdgeKey a, b;
};

} // namespace detail

/// Marching squares at the given level on a mask zero-padded by one pixel.
/// Crossings are linearly interpolated on cell edges; the saddle ambiguity is
/// resolved by the cell-average rule. When several closed contours exist the
/// one with the greatest perimeter is returned. Vertices are (x=col, y=row)
/// in the original (unpadded) pixel frame.
inline Polygon extract_outline(const BinaryMask& mask, double level = 0.5) {
    if (mask.foreground_count() == 0) throw ContourError("mask has no foreground pixels");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("iso level must lie in (0, 1)");

    const std::size_t H = mask.height + 2, W = mask.width + 2;
    auto value = [&](std::size_t r, std::size_t c) -> double {
        if (r == 0 || c == 0 || r + 1 == H || c + 1 == W) return 0.0;
        return mask.at(r - 1, c - 1) ? 1.0 : 0.0;
    };
    auto above = [&](std::size_t r, std::size_t c) { return value(r, c) > level; };

    auto crossing_point = [&](const detail::EdgeKey& e) -> Vec2 {
        const double va = value(e.r, e.c);
        const double vb = e.vertical ? value(e.r + 1, e.c) : value(e.r, e.c + 1);
        const double t = (level - va) / (vb - va);
        // (x=col, y=row)
        if (e.vertical) return {static_cast<double>(e.c), static_cast<double>(e.r) + t};
        return {static_cast<double>(e.c) + t, static_cast<double>(e.r)};
    };

    std::vector<detail::MarchSegment> segments;
    for (std::size_t r = 0; r + 1 < H; ++r) {
        for (std::size_t c = 0; c + 1 < W; ++c) {
            const bool ul = above(r, c), ur = above(r, c + 1);
            const bool ll = above(r + 1, c), lr = above(r + 1, c + 1);
            const detail::EdgeKey top{r, c, false}, bottom{r + 1, c, false};
            const detail::EdgeKey left{r, c, true}, right{r, c + 1, true};
            std::vector<detail::EdgeKey> crossed;
            if (ul != ur) crossed.push_back(top);
            if (ur != lr) crossed.push_back(right);
            if (ll != lr) crossed.push_back(bottom);
            if (ul != ll) crossed.push_back(left);
            if (crossed.size() == 2) {
                segments.push_back({crossed[0], crossed[1]});
            } else if (crossed.size() == 4) {
                const double center = 0.25 * (value(r, c) + value(r, c + 1) + value(r + 1, c) + value(r + 1, c + 1));
                const bool center_above = center > level;
                // Pair the edges around each corner that disagrees with the center.
                auto add_corner = [&](bool corner_above, const detail::EdgeKey& e1, const detail::EdgeKey& e2) {
                    if (corner_above != center_above) segments.push_back({e1, e2});
                };
                add_corner(ul, top, left);
                add_corner(ur, top, right);
                add_corner(lr, right, bottom);
                add_corner(ll, bottom, left);
            }
        }
    }
    if (segments.empty()) throw ContourError("no iso-contour found");

    // Each crossing touches exactly two segments, so segments stitch into
    // disjoint closed loops.
    std::map<detail::EdgeKey, std::vector<std::size_t>> incident;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        incident[segments[i].a].push_back(i);
        incident[segments[i].b].push_back(i);
    }
    for (const auto& [key, segs] : incident)
        if (segs.size() != 2) throw ContourError("open iso-contour encountered");

    std::vector<bool> used(segments.size(), false);
    Polygon best;
    double best_perimeter = -1.0;
    for (std::size_t start = 0; start < segments.size(); ++start) {
        if (used[start]) continue;
        std::vector<detail::EdgeKey> loop;
        detail::EdgeKey cur = segments[start].a;
        std::size_t seg = start;
        while (true) {
            used[seg] = true;
            loop.push_back(cur);
            const detail::EdgeKey next = (segments[seg].a < cur || cur < segments[seg].a) ? segments[seg].a : segments[seg].b;
            const auto& cands = incident[next];
            const std::size_t other = cands[0] == seg ? cands[1] : cands[0];
            cur = next;
            if (used[other]) break;
            seg = other;
        }
        Polygon poly;
        poly.vertices.reserve(loop.size());
        for (const auto& e : loop) {
            Vec2 p = crossing_point(e);
            poly.vertices.push_back({p.x - 1.0, p.y - 1.0}); // undo padding offset
        }
        const double per = perimeter_of(poly.vertices);
        if (per > best_perimeter) {
            best_perimeter = per;
            best = std::move(poly);
        }
    }
    if (best.vertices.size() < 3) throw ContourError("degenerate iso-contour");
    return best;
}

/// Returns the polygon with positive signed area, reversing if needed.
inline Polygon ensure_ccw(const Polygon& poly) {
    if (poly.vertices.size() < 3) throw ContourError("polygon needs at least 3 vertices");
    const double area = signed_area(poly.vertices);
    if (std::abs(area) < 1e-12) throw ContourError("polygon has zero area");
    if (area > 0.0) return poly;
    Polygon out;
    out.vertices.assign(poly.vertices.rbegin(), poly.vertices.rend());
    return out;
}

/// N points at equal arc-length spacing along the closed piecewise-linear
/// curve, starting `origin` arc-length units after vertex 0.
inline ContourSequence resample_uniform(const Polygon& poly, std::size_t n, double origin = 0.0) {
    if (!is_power_of_two(n) || n < 4) throw ConfigError("contour point count must be a power of two >= 4");
    const std::size_t m = poly.vertices.size();
    if (m < 3) throw ContourError("polygon needs at least 3 vertices");

    std::vector<double> cumulative(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        cumulative[i + 1] = cumulative[i] + distance(poly.vertices[i], poly.vertices[(i + 1) % m]);
    const double perimeter = cumulative[m];
    if (!(perimeter > 0.0)) throw ContourError("polygon has zero perimeter");

    const double step = perimeter / static_cast<double>(n);
    ContourSequence out;
    out.points.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = origin + static_cast<double>(i) * step;
        s = std::fmod(s, perimeter);
        if (s < 0.0) s += perimeter;
        // segment containing s
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
        std::size_t seg = static_cast<std::size_t>(it - cumulative.begin());
        seg = seg == 0 ? 0 : seg - 1;
        if (seg >= m) seg = m - 1;
        const double len = cumulative[seg + 1] - cumulative[seg];
        const double t = len > 0.0 ? (s - cumulative[seg]) / len : 0.0;
        const Vec2& a = poly.vertices[seg];
        const Vec2& b = poly.vertices[(seg + 1) % m];
        out.points[i] = {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t};
    }
    return out;
}

/// Full mask-to-contour pipeline: outline, orientation fix, resampling.
inline ContourSequence contour_from_mask(const BinaryMask& mask, std::size_t n, double level = 0.5) {
    return resample_uniform(ensure_ccw(extract_outline(mask, level)), n);
}

} // namespace sedm
