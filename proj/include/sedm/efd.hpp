#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "sedm/error.hpp"
#include "sedm/geometry.hpp"

namespace sedm {

/// Elliptic Fourier descriptor coefficients: one (a_n, b_n, c_n, d_n) row
/// per harmonic. The DC locus is dropped, so the representation is
/// translation invariant from the start.
struct EfdCoefficients {
    std::size_t order = 0;
    std::vector<double> coeffs; // order x 4, row-major: a, b, c, d
    bool normalized = false;

    double a(std::size_t n) const { return coeffs[n * 4 + 0]; }
    double b(std::size_t n) const { return coeffs[n * 4 + 1]; }
    double c(std::size_t n) const { return coeffs[n * 4 + 2]; }
    double d(std::size_t n) const { return coeffs[n * 4 + 3]; }
};

/// Kuhl-Giardina coefficients of the closed piecewise-linear contour.
inline EfdCoefficients efd_coeffs(const ContourSequence& contour, std::size_t order = 30) {
    const std::size_t k = contour.points.size();
    if (k < 3) throw ContourError("EFD needs at least 3 contour points");
    if (order < 1) throw ConfigError("EFD order must be >= 1");

    std::vector<double> dx(k), dy(k), dt(k), t(k + 1, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const Vec2& cur = contour.points[p];
        const Vec2& nxt = contour.points[(p + 1) % k];
        dx[p] = nxt.x - cur.x;
        dy[p] = nxt.y - cur.y;
        dt[p] = std::hypot(dx[p], dy[p]);
        t[p + 1] = t[p] + dt[p];
    }
    const double total = t[k];
    if (!(total > 0.0)) throw ContourError("contour has zero perimeter");

    EfdCoefficients out;
    out.order = order;
    out.coeffs.assign(order * 4, 0.0);
    for (std::size_t n = 1; n <= order; ++n) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(n) / total;
        const double scale = total / (2.0 * static_cast<double>(n * n) * std::numbers::pi * std::numbers::pi);
        double a = 0.0, b = 0.0, c = 0.0, d = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            if (dt[p] <= 0.0) continue;
            const double cos1 = std::cos(w * t[p + 1]) - std::cos(w * t[p]);
            const double sin1 = std::sin(w * t[p + 1]) - std::sin(w * t[p]);
            a += dx[p] / dt[p] * cos1;
            b += dx[p] / dt[p] * sin1;
            c += dy[p] / dt[p] * cos1;
            d += dy[p] / dt[p] * sin1;
        }
        out.coeffs[(n - 1) * 4 + 0] = scale * a;
        out.coeffs[(n - 1) * 4 + 1] = scale * b;
        out.coeffs[(n - 1) * 4 + 2] = scale * c;
        out.coeffs[(n - 1) * 4 + 3] = scale * d;
    }
    return out;
}

/// Canonical normalization for invariance to scale, rotation, and contour
/// starting point: rotate the parameterization so the first harmonic starts
/// on its semi-major axis, rotate space so that axis is horizontal, divide by
/// the first semi-major magnitude, and fix the residual half-turn ambiguity
/// by a deterministic sign rule. Afterwards a1 = 1 and b1 = c1 = 0.
inline EfdCoefficients efd_normalize(const EfdCoefficients& in) {
    if (in.order < 1) throw ConfigError("cannot normalize empty coefficients");
    EfdCoefficients out = in;
    const double a1 = in.a(0), b1 = in.b(0), c1 = in.c(0), d1 = in.d(0);
    const double power = a1 * a1 + b1 * b1 + c1 * c1 + d1 * d1;
    if (!(power > 0.0)) throw DegenerateShape("degenerate first EFD harmonic");

    const double theta = 0.5 * std::atan2(2.0 * (a1 * b1 + c1 * d1), a1 * a1 - b1 * b1 + c1 * c1 - d1 * d1);

    auto apply = [&](EfdCoefficients& e, double th) {
        // parameter-space rotation by n*th per harmonic
        for (std::size_t n = 1; n <= e.order; ++n) {
            const double cn = std::cos(static_cast<double>(n) * th), sn = std::sin(static_cast<double>(n) * th);
            double* row = e.coeffs.data() + (n - 1) * 4;
            const double na = row[0] * cn + row[1] * sn;
            const double nb = -row[0] * sn + row[1] * cn;
            const double nc = row[2] * cn + row[3] * sn;
            const double nd = -row[2] * sn + row[3] * cn;
            row[0] = na;
            row[1] = nb;
            row[2] = nc;
            row[3] = nd;
        }
        // spatial rotation aligning the first semi-major axis with x
        const double psi = std::atan2(e.coeffs[2], e.coeffs[0]);
        const double cp = std::cos(psi), sp = std::sin(psi);
        for (std::size_t n = 1; n <= e.order; ++n) {
            double* row = e.coeffs.data() + (n - 1) * 4;
            const double na = cp * row[0] + sp * row[2];
            const double nb = cp * row[1] + sp * row[3];
            const double nc = -sp * row[0] + cp * row[2];
            const double nd = -sp * row[1] + cp * row[3];
            row[0] = na;
            row[1] = nb;
            row[2] = nc;
            row[3] = nd;
        }
        const double size = std::abs(e.coeffs[0]);
        if (!(size > 0.0)) throw DegenerateShape("degenerate first EFD harmonic");
        for (auto& v : e.coeffs) v /= size;
    };

    apply(out, theta);

    // The canonical form is preserved by a further half-turn in both
    // parameter and image space, which multiplies harmonic n by (-1)^(n+1).
    // Pick the representative whose first significant coefficient beyond the
    // first harmonic is positive.
    if (out.order > 1) {
        for (std::size_t n = 2; n <= out.order; ++n) {
            if (n % 2 == 1) continue; // odd harmonics are unaffected by the flip
            bool decided = false;
            for (std::size_t j = 0; j < 4; ++j) {
                const double v = out.coeffs[(n - 1) * 4 + j];
                if (std::abs(v) > 1e-7) {
                    if (v < 0.0)
                        for (std::size_t m = 2; m <= out.order; ++m)
                            if (m % 2 == 0)
                                for (std::size_t jj = 0; jj < 4; ++jj) out.coeffs[(m - 1) * 4 + jj] *= -1.0;
                    decided = true;
                    break;
                }
            }
            if (decided) break;
        }
    }
    out.normalized = true;
    return out;
}

/// Inverse Fourier synthesis of the contour (centered at the origin).
inline ContourSequence efd_synthesize(const EfdCoefficients& e, std::size_t n_points) {
    ContourSequence out;
    out.points.resize(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(n_points);
        double x = 0.0, y = 0.0;
        for (std::size_t n = 1; n <= e.order; ++n) {
            const double w = 2.0 * std::numbers::pi * static_cast<double>(n) * t;
            const double cw = std::cos(w), sw = std::sin(w);
            x += e.a(n - 1) * cw + e.b(n - 1) * sw;
            y += e.c(n - 1) * cw + e.d(n - 1) * sw;
        }
        out.points[i] = {x, y};
    }
    return out;
}

} // namespace sedm
