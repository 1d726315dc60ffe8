#pragma once

#include "ellipse.hpp"
#include "error.hpp"
#include "image_io.hpp"
#include "palette.hpp"
#include "raster.hpp"
#include "stack_recon.hpp"
#include "synth.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sushi {

inline constexpr int kPatchWidth = 100;
inline constexpr int kPatchHeight = 50;

/// Lower half of a dish warped to a circle: 50 rows x 100 columns x 3.
struct DishPatch {
    Raster pixels{kPatchWidth, kPatchHeight, 3};
    std::optional<ClassLabel> label;
};

/// Affine map from patch unit coordinates to the image. The symmetric form
/// R(a) diag(A, B) R(-a) keeps patch rows aligned with image rows.
struct CircleWarp {
    Ellipse ellipse;
    int diameter = 100;

    Point2d to_image(double u, double v) const {
        const double half = diameter / 2.0;
        const double mid = (diameter - 1) / 2.0;
        const double x = (u - mid) / half, y = (v - mid) / half;
        const double c = std::cos(ellipse.alpha), s = std::sin(ellipse.alpha);
        // R(-a)
        const double rx = c * x + s * y, ry = -s * x + c * y;
        const double sx = ellipse.A * rx, sy = ellipse.B * ry;
        return {ellipse.p + c * sx - s * sy, ellipse.q + s * sx + c * sy};
    }
};

inline Raster warp_to_circle(const Raster& img, const Ellipse& e, int diameter = 100) {
    if (!(e.B > 0.0) || !(e.A > 0.0)) throw InvalidArgument("degenerate ellipse");
    if (diameter < 2) throw InvalidArgument("diameter must be at least 2");
    if (img.channels() != 3) throw InvalidArgument("warp_to_circle needs a color image");
    const CircleWarp w{e, diameter};
    Raster out(diameter, diameter, 3);
    for (int v = 0; v < diameter; ++v)
        for (int u = 0; u < diameter; ++u) {
            const Point2d src = w.to_image(u, v);
            for (int k = 0; k < 3; ++k) out.at(u, v, k) = img.sample(src.x, src.y, k, 0.0);
        }
    return out;
}

/// Patch of dish `i`, counted from the top of the tower (0 = top dish). The
/// region covered by dish i-1, the one directly above, is zeroed.
inline DishPatch extract_patch(const Raster& img, const ParamMatrix& stack, std::size_t i) {
    if (i >= stack.size()) throw InvalidArgument("dish index out of range");
    const std::size_t n = stack.size();
    const Ellipse& e = stack.rows[n - 1 - i];
    const Raster circle = warp_to_circle(img, e, kPatchWidth);
    const CircleWarp w{e, kPatchWidth};
    DishPatch patch;
    for (int v = 0; v < kPatchHeight; ++v)
        for (int u = 0; u < kPatchWidth; ++u) {
            const int row = v + kPatchWidth / 2;
            bool covered = false;
            if (i > 0) {
                const Point2d src = w.to_image(u, row);
                covered = norm(to_unit_frame(stack.rows[n - i], src)) <= 1.0;
            }
            for (int k = 0; k < 3; ++k) patch.pixels.at(u, v, k) = covered ? 0.0 : circle.at(u, row, k);
        }
    return patch;
}

struct ManifestEntry {
    std::string file;
    int label_index = 0;
    std::string label_name;
    std::string source_image;
    int dish_index = 0;
};

inline std::string to_manifest_line(const ManifestEntry& m) {
    std::ostringstream out;
    out << m.file << ',' << m.label_index << ',' << m.label_name << ',' << m.source_image << ',' << m.dish_index;
    return out.str();
}

inline ManifestEntry parse_manifest_line(const std::string& line) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 5) throw InvalidArgument("manifest line needs 5 fields: " + line);
    try {
        return {f[0], std::stoi(f[1]), f[2], f[3], std::stoi(f[4])};
    } catch (const std::logic_error&) {
        throw InvalidArgument("bad number in manifest line: " + line);
    }
}

struct LabeledPatch {
    DishPatch patch;
    std::string source_image;
    int dish_index = 0;
};

/// Writes one PNG per patch plus `manifest.csv` (no header) into `dir`.
inline void export_dataset(const std::filesystem::path& dir, const std::vector<LabeledPatch>& items) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string());
    std::ofstream manifest(dir / "manifest.csv");
    if (!manifest) throw IoError("cannot write manifest in " + dir.string());
    for (std::size_t k = 0; k < items.size(); ++k) {
        const auto& it = items[k];
        if (!it.patch.label) throw InvalidArgument("exported patches must be labeled");
        char name[32];
        std::snprintf(name, sizeof name, "patch_%05zu.png", k);
        write_png((dir / name).string(), it.patch.pixels);
        manifest << to_manifest_line({name, it.patch.label->index, it.patch.label->name, it.source_image, it.dish_index})
                 << '\n';
    }
}

/// Reads a dataset written by export_dataset; labels are checked against the palette.
inline std::vector<LabeledPatch> load_dataset(const std::filesystem::path& dir, const Palette& palette) {
    std::ifstream manifest(dir / "manifest.csv");
    if (!manifest) throw IoError("cannot read manifest in " + dir.string());
    std::vector<LabeledPatch> out;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const ManifestEntry m = parse_manifest_line(line);
        if (m.label_index < 0 || m.label_index >= int(palette.entries.size()))
            throw InvalidArgument("label index out of range: " + line);
        LabeledPatch lp;
        lp.patch.pixels = read_image((dir / m.file).string());
        if (lp.patch.pixels.width() != kPatchWidth || lp.patch.pixels.height() != kPatchHeight ||
            lp.patch.pixels.channels() != 3)
            throw InvalidArgument("patch has wrong dimensions: " + m.file);
        lp.patch.label = palette.label(m.label_index);
        lp.source_image = m.source_image;
        lp.dish_index = m.dish_index;
        out.push_back(std::move(lp));
    }
    return out;
}

/// Labeled patches cut from rendered scenes at their true ellipses, scenes
/// drawn from consecutive seeds starting at `first_seed`, until `count` patches exist.
inline std::vector<LabeledPatch> synth_patches(std::uint64_t first_seed, std::size_t count,
                                               const SceneRanges& ranges = {}) {
    const Palette palette = default_palette();
    std::vector<LabeledPatch> out;
    for (std::uint64_t seed = first_seed; out.size() < count; ++seed) {
        const GroundTruth gt = render(random_scene(seed, ranges));
        std::vector<Ellipse> rows;
        for (const auto& d : gt.dishes) rows.push_back(d.ellipse);
        const ParamMatrix stack = make_param_matrix(rows);
        const std::size_t n = gt.dishes.size();
        for (std::size_t i = 0; i < n && out.size() < count; ++i) {
            LabeledPatch lp;
            lp.patch = extract_patch(gt.image, stack, i);
            lp.patch.label = palette.label(gt.dishes[n - 1 - i].label);
            lp.source_image = "scene_" + std::to_string(seed);
            lp.dish_index = int(i);
            out.push_back(std::move(lp));
        }
    }
    return out;
}

} // namespace sushi
