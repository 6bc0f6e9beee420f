#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sedm/error.hpp"
#include "sedm/geometry.hpp"

namespace sedm {

/// One member of the 2N-element indexation equivalence class: origin k and
/// direction of travel o.
struct Reindexing {
    std::size_t k = 0;
    int o = +1;
};

/// Enumeration order of the equivalence class. The identity (k=0, o=+1)
/// comes first; ties in loss minimization are broken by this order.
inline std::vector<Reindexing> all_reindexings(std::size_t n) {
    std::vector<Reindexing> out;
    out.reserve(2 * n);
    for (int o : {+1, -1})
        for (std::size_t k = 0; k < n; ++k) out.push_back({k, o});
    return out;
}

/// Unconstrained square matrix, e.g. a decoder output before sanitization.
struct RawMatrix {
    std::size_t n = 0;
    std::vector<double> entries; // row-major, n*n

    double& at(std::size_t i, std::size_t j) { return entries[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return entries[i * n + j]; }

    static RawMatrix zeros(std::size_t n) { return {n, std::vector<double>(n * n, 0.0)}; }
};

/// Symmetric, zero-diagonal, non-negative matrix of pairwise distances.
/// frobenius_norm records the norm of the raw matrix at normalization time;
/// it is unset for raw (unnormalized) matrices.
struct DistanceMatrix {
    std::size_t n = 0;
    std::vector<double> entries; // row-major, n*n
    std::optional<double> frobenius_norm;

    double& at(std::size_t i, std::size_t j) { return entries[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return entries[i * n + j]; }
};

inline double frobenius(const std::vector<double>& entries) {
    double acc = 0.0;
    for (double v : entries) acc += v * v;
    return std::sqrt(acc);
}

/// Pairwise Euclidean distance matrix of a contour. Raw (unnormalized).
inline DistanceMatrix edm(const ContourSequence& contour) {
    const std::size_t n = contour.points.size();
    DistanceMatrix d;
    d.n = n;
    d.entries.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = distance(contour.points[i], contour.points[j]);
            d.at(i, j) = v;
            d.at(j, i) = v;
        }
    return d;
}

/// Divides all entries by the Frobenius norm and records the divisor.
inline DistanceMatrix normalize(const DistanceMatrix& d) {
    const double f = frobenius(d.entries);
    if (!(f > 0.0)) throw DegenerateShape("cannot normalize an all-zero distance matrix");
    DistanceMatrix out;
    out.n = d.n;
    out.entries.resize(d.entries.size());
    for (std::size_t i = 0; i < d.entries.size(); ++i) out.entries[i] = d.entries[i] / f;
    out.frobenius_norm = f;
    return out;
}

namespace detail {
inline std::size_t wrap_index(long long v, std::size_t n) {
    const long long m = static_cast<long long>(n);
    return static_cast<std::size_t>(((v % m) + m) % m);
}
} // namespace detail

/// Re-indexed member D^{k,o} of the equivalence class:
/// entry (i,j) of the result is d_{(i*o+k) mod N, (j*o+k) mod N}.
inline DistanceMatrix reindex(const DistanceMatrix& d, const Reindexing& r) {
    const std::size_t n = d.n;
    DistanceMatrix out;
    out.n = n;
    out.entries.resize(n * n);
    out.frobenius_norm = d.frobenius_norm;
    std::vector<std::size_t> map(n);
    for (std::size_t i = 0; i < n; ++i)
        map[i] = detail::wrap_index(static_cast<long long>(i) * r.o + static_cast<long long>(r.k), n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.at(i, j) = d.at(map[i], map[j]);
    return out;
}

/// All 2N members of the equivalence class in the fixed (o, k) order.
inline std::vector<DistanceMatrix> equivalence_class(const DistanceMatrix& d) {
    std::vector<DistanceMatrix> out;
    out.reserve(2 * d.n);
    for (const auto& r : all_reindexings(d.n)) out.push_back(reindex(d, r));
    return out;
}

/// Horizontal + vertical mirror: entry (i,j) -> entry (N-1-i, N-1-j).
/// Equals reindex with (k=N-1, o=-1).
template <typename MatrixT>
MatrixT mirror_both(const MatrixT& m) {
    const std::size_t n = m.n;
    MatrixT out = m;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out.entries[i * n + j] = m.entries[(n - 1 - i) * n + (n - 1 - j)];
    return out;
}

/// Projects an arbitrary square matrix onto the set of valid distance
/// matrices: symmetrize as (M + M^T)/2, zero the diagonal, clamp negatives.
inline DistanceMatrix sanitize(const RawMatrix& m) {
    const std::size_t n = m.n;
    for (double v : m.entries)
        if (!std::isfinite(v)) throw PreconditionError("sanitize requires finite entries");
    DistanceMatrix out;
    out.n = n;
    out.entries.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = 0.5 * (m.at(i, j) + m.at(j, i));
            const double c = v < 0.0 ? 0.0 : v;
            out.at(i, j) = c;
            out.at(j, i) = c;
        }
    return out;
}

inline bool is_sanitized(const DistanceMatrix& d, double tol = 0.0) {
    for (std::size_t i = 0; i < d.n; ++i) {
        if (std::abs(d.at(i, i)) > tol) return false;
        for (std::size_t j = 0; j < d.n; ++j) {
            if (d.at(i, j) < -tol) return false;
            if (std::abs(d.at(i, j) - d.at(j, i)) > tol) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// SEDM container: binary file holding a batch of normalized distance matrices.
// Layout: magic "SEDM", u32 version=1, u32 N, u32 count, then per record a
// 64-byte zero-padded object id, f32 frobenius_norm, and N*N little-endian
// f32 entries row-major.
// ---------------------------------------------------------------------------

struct SedmRecord {
    std::string object_id;
    float frobenius_norm = 0.0f;
    std::vector<float> entries; // n*n, row-major
};

struct SedmFile {
    std::uint32_t n = 0;
    std::vector<SedmRecord> records;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff), static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    put_u32(os, u);
}

inline float get_f32(std::istream& is) {
    const std::uint32_t u = get_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

} // namespace detail

inline void write_sedm(const std::string& path, const SedmFile& file) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write("SEDM", 4);
    detail::put_u32(os, 1u);
    detail::put_u32(os, file.n);
    detail::put_u32(os, static_cast<std::uint32_t>(file.records.size()));
    const std::size_t nn = static_cast<std::size_t>(file.n) * file.n;
    for (const auto& rec : file.records) {
        if (rec.object_id.size() > 64) throw ConfigError("object id longer than 64 bytes: " + rec.object_id);
        if (rec.entries.size() != nn) throw ShapeError("record entry count does not match container N");
        char id[64] = {};
        std::memcpy(id, rec.object_id.data(), rec.object_id.size());
        os.write(id, 64);
        detail::put_f32(os, rec.frobenius_norm);
        for (float v : rec.entries) detail::put_f32(os, v);
    }
    if (!os) throw IoError("short write: " + path);
}

inline SedmFile read_sedm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "SEDM", 4) != 0) throw DecodeError("not a SEDM container: " + path);
    const std::uint32_t version = detail::get_u32(is);
    if (version != 1) throw DecodeError("unsupported SEDM version " + std::to_string(version) + ": " + path);
    SedmFile file;
    file.n = detail::get_u32(is);
    const std::uint32_t count = detail::get_u32(is);
    if (!is) throw DecodeError("truncated SEDM header: " + path);
    const std::size_t nn = static_cast<std::size_t>(file.n) * file.n;
    file.records.resize(count);
    for (auto& rec : file.records) {
        char id[64];
        is.read(id, 64);
        rec.object_id.assign(id, strnlen(id, 64));
        rec.frobenius_norm = detail::get_f32(is);
        rec.entries.resize(nn);
        for (auto& v : rec.entries) v = detail::get_f32(is);
        if (!is) throw DecodeError("truncated SEDM record: " + path);
    }
    return file;
}

/// f32 copy consumed by the model; the deterministic pipeline stays in f64.
inline std::vector<float> to_f32(const std::vector<double>& v) {
    std::vector<float> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
    return out;
}

inline std::vector<double> to_f64(const std::vector<float>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<double>(v[i]);
    return out;
}

} // namespace sedm
