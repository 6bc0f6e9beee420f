#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sedm/csv.hpp"
#include "sedm/error.hpp"
#include "sedm/geometry.hpp"
#include "sedm/image.hpp"

namespace sedm {

struct ManifestRecord {
    std::string object_id;
    std::string label;
    std::string source_path;
};

struct Manifest {
    std::vector<ManifestRecord> records;
    std::map<std::string, int> class_table; // label -> index, lexicographic

    std::size_t size() const { return records.size(); }

    void rebuild_class_table() {
        class_table.clear();
        for (const auto& r : records) class_table.emplace(r.label, 0);
        int idx = 0;
        for (auto& [label, i] : class_table) i = idx++;
    }
};

/// Scans root/<class>/<image> into a manifest. Labels come from subdirectory
/// names; ordering is lexicographic and deterministic.
inline Manifest scan_dataset(const std::string& root_dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root_dir)) throw NoData("dataset root is not a directory: " + root_dir);
    std::vector<std::string> classes;
    for (const auto& e : fs::directory_iterator(root_dir))
        if (e.is_directory()) classes.push_back(e.path().filename().string());
    std::sort(classes.begin(), classes.end());

    Manifest m;
    for (const auto& cls : classes) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(fs::path(root_dir) / cls))
            if (e.is_regular_file() && is_supported_image(e.path().filename().string()))
                files.push_back(e.path().filename().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            const fs::path p = fs::path(root_dir) / cls / f;
            const std::string stem = fs::path(f).stem().string();
            m.records.push_back({cls + "/" + stem, cls, p.string()});
        }
    }
    if (m.records.empty()) throw NoData("no images found under " + root_dir);
    m.rebuild_class_table();
    return m;
}

inline void write_manifest_csv(const std::string& path, const Manifest& m) {
    csv::Writer w(path);
    w.row({"object_id", "label", "source_path"});
    for (const auto& r : m.records) w.row({r.object_id, r.label, r.source_path});
}

inline Manifest read_manifest_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const auto ic = t.column("object_id"), lc = t.column("label"), sc = t.column("source_path");
    Manifest m;
    for (const auto& row : t.rows) m.records.push_back({row[ic], row[lc], row[sc]});
    if (m.records.empty()) throw NoData("empty manifest: " + path);
    m.rebuild_class_table();
    return m;
}

/// Per class, moves round(count * test_fraction) records (clamped to
/// [1, count-1]) into the test split. Deterministic for a fixed seed.
inline std::pair<Manifest, Manifest> split_stratified(const Manifest& manifest, double test_fraction,
                                                      std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw ConfigError("test fraction must lie strictly between 0 and 1");
    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        by_class[manifest.records[i].label].push_back(i);

    std::mt19937_64 rng(seed);
    std::vector<bool> in_test(manifest.records.size(), false);
    for (auto& [label, idx] : by_class) {
        if (idx.size() < 2)
            throw StratificationError("class '" + label + "' has a single record; cannot stratify");
        std::shuffle(idx.begin(), idx.end(), rng);
        const auto count = static_cast<long>(idx.size());
        long k = std::lround(static_cast<double>(count) * test_fraction);
        k = std::clamp(k, 1L, count - 1);
        for (long i = 0; i < k; ++i) in_test[idx[static_cast<std::size_t>(i)]] = true;
    }

    Manifest train, test;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
        (in_test[i] ? test : train).records.push_back(manifest.records[i]);
    train.rebuild_class_table();
    test.rebuild_class_table();
    return {std::move(train), std::move(test)};
}

/// Randomization ranges for synthetic dataset generation. These are module
/// defaults, configurable from the CLI.
struct SyntheticRandomize {
    double scale_min = 0.5;
    double scale_max = 2.0;
    bool rotation = true;
    double translation_range = 10.0; // t_x, t_y uniform in [-range, range]
};

struct SyntheticDataset {
    Manifest manifest;
    std::vector<Polygon> shapes; // aligned with manifest.records
};

namespace detail {

inline Polygon ellipse_polygon(double axis_ratio, std::size_t samples = 256) {
    Polygon p;
    p.vertices.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(samples);
        p.vertices.push_back({axis_ratio * std::cos(phi), std::sin(phi)});
    }
    return p;
}

inline Polygon rectangle_polygon(double aspect) {
    const double w = aspect * 0.5, h = 0.5;
    return Polygon{{{-w, -h}, {w, -h}, {w, h}, {-w, h}}};
}

// Three-lobed star: r(phi) = 1 + 0.4 cos(3 phi), 256 angles.
inline Polygon star_polygon(std::size_t samples = 256) {
    Polygon p;
    p.vertices.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        const double phi = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(samples);
        const double r = 1.0 + 0.4 * std::cos(3.0 * phi);
        p.vertices.push_back({r * std::cos(phi), r * std::sin(phi)});
    }
    return p;
}

} // namespace detail

/// Three-class synthetic dataset: ellipses (axis ratio in [1.5, 3]),
/// rectangles (aspect in [1.5, 3]), three-lobed stars. Each instance gets a
/// random similarity transform drawn from the stated ranges. Deterministic
/// per seed.
inline SyntheticDataset make_synthetic_shapes(std::size_t n_per_class, std::uint64_t seed,
                                              const SyntheticRandomize& randomize = {}) {
    if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
    if (!(randomize.scale_min > 0.0) || randomize.scale_max < randomize.scale_min)
        throw ConfigError("invalid scale range");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> shape_param(1.5, 3.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    auto draw_transform = [&]() {
        SimilarityTransform t;
        t.a = randomize.scale_min + (randomize.scale_max - randomize.scale_min) * unit(rng);
        t.theta = randomize.rotation ? 2.0 * std::numbers::pi * unit(rng) : 0.0;
        if (randomize.translation_range > 0.0) {
            t.t_x = randomize.translation_range * (2.0 * unit(rng) - 1.0);
            t.t_y = randomize.translation_range * (2.0 * unit(rng) - 1.0);
        }
        return t;
    };

    const std::vector<std::string> labels = {"ellipse", "rectangle", "star"};
    SyntheticDataset ds;
    for (const auto& label : labels) {
        for (std::size_t i = 0; i < n_per_class; ++i) {
            Polygon base;
            if (label == "ellipse") base = detail::ellipse_polygon(shape_param(rng));
            else if (label == "rectangle") base = detail::rectangle_polygon(shape_param(rng));
            else base = detail::star_polygon();
            const Polygon shaped = transform_polygon(base, draw_transform());
            char id[32];
            std::snprintf(id, sizeof id, "%s/%04zu", label.c_str(), i);
            ds.manifest.records.push_back({id, label, ""});
            ds.shapes.push_back(shaped);
        }
    }
    ds.manifest.rebuild_class_table();
    return ds;
}

// --------------------------------------------------------------------------
// Contour CSV: object_id,point_index,x,y
// --------------------------------------------------------------------------

struct NamedContour {
    std::string object_id;
    ContourSequence contour;
};

inline void write_contours_csv(const std::string& path, const std::vector<NamedContour>& contours) {
    csv::Writer w(path);
    w.row({"object_id", "point_index", "x", "y"});
    for (const auto& nc : contours)
        for (std::size_t i = 0; i < nc.contour.points.size(); ++i)
            w.row({nc.object_id, std::to_string(i), format_double(nc.contour.points[i].x),
                   format_double(nc.contour.points[i].y)});
}

inline std::vector<NamedContour> read_contours_csv(const std::string& path) {
    const auto t = csv::read_file(path);
    const auto ic = t.column("object_id"), pc = t.column("point_index");
    const auto xc = t.column("x"), yc = t.column("y");
    std::vector<NamedContour> out;
    std::map<std::string, std::size_t> index;
    for (const auto& row : t.rows) {
        const std::string& id = row[ic];
        auto [it, inserted] = index.emplace(id, out.size());
        if (inserted) out.push_back({id, {}});
        auto& contour = out[it->second].contour;
        const auto pi = std::stoul(row[pc]);
        if (contour.points.size() != pi) throw DecodeError("out-of-order contour points for " + id);
        contour.points.push_back({std::stod(row[xc]), std::stod(row[yc])});
    }
    if (out.empty()) throw NoData("no contours in " + path);
    return out;
}

} // namespace sedm
