#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <random>
#include <vector>

#include "sedm/distmat.hpp"
#include "sedm/error.hpp"
#include "sedm/geometry.hpp"

namespace sedm {

struct MdsConfig {
    std::size_t max_iter = 2000;
    double tol = 1e-12; // relative stress decrease threshold
    std::uint64_t seed = 0;
};

/// Raw stress: sum over i<j of (d_ij - |p_i - p_j|)^2.
inline double stress_of(const std::vector<Vec2>& pts, const DistanceMatrix& d) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
            const double diff = d.at(i, j) - distance(pts[i], pts[j]);
            acc += diff * diff;
        }
    return acc;
}

/// SMACOF majorization: starts from a seeded standard-normal point cloud and
/// applies Guttman transforms, which decrease stress monotonically. Stops at
/// max_iter or when the relative stress decrease falls below tol.
inline std::vector<Vec2> smacof(const DistanceMatrix& d, const MdsConfig& config = {}) {
    if (config.max_iter < 1 || !(config.tol > 0.0)) throw ConfigError("invalid MDS configuration");
    if (!is_sanitized(d, 0.0)) throw PreconditionError("smacof input must be symmetric, zero-diagonal, non-negative");
    const std::size_t n = d.n;
    if (n < 2) throw ShapeError("need at least 2 points");

    std::mt19937_64 rng(config.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Vec2> x(n);
    for (auto& p : x) {
        p.x = gauss(rng);
        p.y = gauss(rng);
    }

    double stress = stress_of(x, d);
    std::vector<Vec2> next(n);
    for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
        // Guttman transform: X' = B(X) X / n with
        // B_ij = -d_ij / |x_i - x_j| (i != j, zero when coincident),
        // B_ii = -sum_j B_ij.
        for (std::size_t i = 0; i < n; ++i) next[i] = {0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) {
            double bii = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double dist = distance(x[i], x[j]);
                const double b = dist > 0.0 ? d.at(i, j) / dist : 0.0;
                bii += b;
                next[i].x -= b * x[j].x;
                next[i].y -= b * x[j].y;
            }
            next[i].x += bii * x[i].x;
            next[i].y += bii * x[i].y;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i].x = next[i].x * inv_n;
            x[i].y = next[i].y * inv_n;
        }
        const double new_stress = stress_of(x, d);
        if (stress > 0.0 && (stress - new_stress) / stress < config.tol) {
            stress = new_stress;
            break;
        }
        stress = new_stress;
    }
    return x;
}

struct AlignmentResult {
    std::vector<Vec2> aligned_points; // B mapped onto A
    double rmse = 0.0;
    double rotation[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    Vec2 translation;
    bool reflected = false;
};

/// Optimal rigid superposition (rotation, optional reflection, translation —
/// no scaling) of B onto A, minimizing RMSE.
inline AlignmentResult procrustes_align(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
    if (a.size() != b.size()) throw ShapeError("procrustes point lists differ in size");
    if (a.size() < 2) throw ShapeError("procrustes needs at least 2 points");
    const std::size_t n = a.size();
    const Vec2 ca = centroid_of(a), cb = centroid_of(b);

    Eigen::Matrix2d h = Eigen::Matrix2d::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 pa = a[i] - ca, pb = b[i] - cb;
        h(0, 0) += pb.x * pa.x;
        h(0, 1) += pb.x * pa.y;
        h(1, 0) += pb.y * pa.x;
        h(1, 1) += pb.y * pa.y;
    }
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Eigen::Matrix2d r = svd.matrixV() * svd.matrixU().transpose();

    AlignmentResult res;
    res.reflected = r.determinant() < 0.0;
    res.rotation[0][0] = r(0, 0);
    res.rotation[0][1] = r(0, 1);
    res.rotation[1][0] = r(1, 0);
    res.rotation[1][1] = r(1, 1);
    res.translation = {ca.x - (r(0, 0) * cb.x + r(0, 1) * cb.y), ca.y - (r(1, 0) * cb.x + r(1, 1) * cb.y)};
    res.aligned_points.resize(n);
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 p = b[i];
        const Vec2 q{r(0, 0) * p.x + r(0, 1) * p.y + res.translation.x,
                     r(1, 0) * p.x + r(1, 1) * p.y + res.translation.y};
        res.aligned_points[i] = q;
        sq += (q - a[i]).dot(q - a[i]);
    }
    res.rmse = std::sqrt(sq / static_cast<double>(n));
    return res;
}

/// Sanitizes a raw decoder output, restores the stored scale, and embeds it
/// back into 2D points. Point i connects to point (i+1) mod N.
inline std::vector<Vec2> reconstruct_outline(const RawMatrix& m, double norm, const MdsConfig& config = {}) {
    if (!(norm > 0.0)) throw PreconditionError("matrix norm must be positive");
    DistanceMatrix d = sanitize(m);
    for (auto& v : d.entries) v *= norm;
    return smacof(d, config);
}

/// Writes outlines as SVG polylines for visual inspection.
inline void write_svg(const std::string& path, const std::vector<std::vector<Vec2>>& outlines) {
    if (outlines.empty()) throw NoData("no outlines to export");
    double min_x = 1e300, min_y = 1e300, max_x = -1e300, max_y = -1e300;
    for (const auto& o : outlines)
        for (const auto& p : o) {
            min_x = std::min(min_x, p.x);
            min_y = std::min(min_y, p.y);
            max_x = std::max(max_x, p.x);
            max_y = std::max(max_y, p.y);
        }
    const double pad = 0.05 * std::max(max_x - min_x, max_y - min_y) + 1e-9;
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' viewBox='" << (min_x - pad) << " " << (min_y - pad) << " "
       << (max_x - min_x + 2 * pad) << " " << (max_y - min_y + 2 * pad) << "'>\n";
    for (const auto& o : outlines) {
        os << "<polygon fill='none' stroke='black' stroke-width='" << (0.005 * (max_x - min_x + 2 * pad))
           << "' points='";
        for (const auto& p : o) os << p.x << "," << p.y << " ";
        os << "'/>\n";
    }
    os << "</svg>\n";
}

} // namespace sedm
