#pragma once

#include "ellipse.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "palette.hpp"
#include "random.hpp"
#include "raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace sushi {

/// Everything needed to render one dish-tower scene. Dish 0 is the bottom dish.
struct SceneSpec {
    int width = 640;
    int height = 800;
    int dish_count = 5;
    std::vector<int> labels;      // one class index per dish, bottom first
    Ellipse base{320, 650, 140, 60, 0};
    double spacing = 30;          // bottom_y distance between neighbouring dishes
    double drift_radius = 0.0;    // relative change of A and B per dish upward
    double drift_spacing = 0.0;   // relative change of spacing per dish upward
    double rim_thickness = 4.0;
    double rim_level = 0.95;
    double wall_height = 6.0;     // visible side wall between the rim and the bottom edge
    double wall_shade = 0.35;     // wall color as a fraction of the dish color
    Rgb background{0.35, 0.28, 0.22};
    double illumination = 1.0;
    double shadow = 0.0;          // darkening at the far end of the shadow ramp
    double shadow_angle = 0.0;
    double backdrop_ramp = 0.0;   // background brightness gain from top to bottom edge
    double backdrop_wave = 0.0;   // amplitude of one horizontal brightness period
    int clutter = 0;
    double noise_sigma = 0.0;
    int occluded_count = 1;       // dishes thinned out by render_occluded
    std::uint64_t seed = 0;
};

struct DishTruth {
    Ellipse ellipse;
    int label = 0;
    bool occluded = false;
};

/// Rendered image plus per-dish ellipses sorted by descending bottom_y.
struct GroundTruth {
    Raster image;
    std::vector<DishTruth> dishes;
};

/// Ranges random_scene draws from.
struct SceneRanges {
    int min_dishes = 3;
    int max_dishes = 10;
    int max_clutter = 5;
    double max_noise = 0.02;
    double min_illumination = 0.6;
    double max_illumination = 1.15;
    double max_shadow = 0.35;
};

inline void validate(const SceneSpec& s) {
    if (s.dish_count < 1) throw InvalidArgument("scene needs at least one dish");
    if (!(s.spacing > 0.0)) throw InvalidArgument("dish spacing must be positive");
    if (int(s.labels.size()) != s.dish_count) throw InvalidArgument("one label per dish required");
    for (int l : s.labels)
        if (l < 0 || l >= kClassCount) throw InvalidArgument("dish label out of range");
    if (s.width < 1 || s.height < 1) throw InvalidArgument("scene size must be positive");
    if (!(s.base.B > s.rim_thickness) || s.base.A < s.base.B) throw InvalidArgument("bad dish ellipse");
    if (s.noise_sigma < 0.0 || s.wall_height < 0.0 || s.clutter < 0 || s.illumination <= 0.0)
        throw InvalidArgument("bad scene perturbation parameters");
}

/// Bottom-edge ellipse of dish `i` (0 = bottom) under the linear perspective drift.
inline Ellipse dish_ellipse(const SceneSpec& s, int i) {
    Ellipse e = s.base;
    const double scale = 1.0 + s.drift_radius * i;
    e.A *= scale;
    e.B *= scale;
    double rise = 0.0;
    for (int k = 0; k < i; ++k) rise += s.spacing * (1.0 + s.drift_spacing * k);
    // keep bottom_y steps equal to the spacing even when B drifts
    e.q = bottom_y(s.base) - rise - (bottom_y(e) - e.q);
    return e;
}

/// Draws a random but valid scene; all randomness comes from `seed`.
inline SceneSpec random_scene(std::uint64_t seed, const SceneRanges& r = {}) {
    Rng rng(seed);
    SceneSpec s;
    s.seed = seed;
    s.dish_count = r.min_dishes + int(rng.index(std::size_t(r.max_dishes - r.min_dishes + 1)));
    for (int i = 0; i < s.dish_count; ++i) s.labels.push_back(int(rng.index(kClassCount)));
    const double A = rng.uniform(110.0, 165.0);
    const double B = A * rng.uniform(0.35, 0.55);
    s.spacing = B * rng.uniform(0.5, 0.75);
    const double room = s.height - 2.0 * B - 60.0;
    if (s.dish_count > 1) s.spacing = std::min(s.spacing, room / (s.dish_count - 1) / 1.05);
    s.drift_radius = rng.uniform(-0.008, 0.008);
    s.drift_spacing = rng.uniform(-0.01, 0.01);
    s.base = {s.width / 2.0 + rng.uniform(-40.0, 40.0), 0.0, A, B, deg_to_rad(rng.uniform(-3.0, 3.0))};
    s.base.q = s.height - rng.uniform(25.0, 60.0) - bottom_y({0, 0, A, B, s.base.alpha});
    s.rim_thickness = rng.uniform(3.0, 6.0);
    s.rim_level = rng.uniform(0.88, 1.0);
    s.wall_height = rng.uniform(4.0, 8.0);
    s.wall_shade = rng.uniform(0.25, 0.45);
    const double bg = rng.uniform(0.2, 0.45);
    s.background = {bg * rng.uniform(0.9, 1.2), bg, bg * rng.uniform(0.7, 1.0)};
    s.backdrop_ramp = rng.uniform(0.4, 0.9);
    s.backdrop_wave = rng.uniform(0.0, 0.1);
    s.illumination = rng.uniform(r.min_illumination, r.max_illumination);
    s.shadow = rng.uniform(0.0, r.max_shadow);
    s.shadow_angle = rng.uniform(0.0, 2.0 * kPi);
    s.clutter = int(rng.index(std::size_t(r.max_clutter + 1)));
    s.noise_sigma = rng.uniform(0.0, r.max_noise);
    return s;
}

namespace detail {

/// Anti-aliased coverage of pixel (x, y) by the filled ellipse.
inline double ellipse_coverage(const Ellipse& e, double x, double y) {
    const Point2d u = to_unit_frame(e, {x, y});
    const double r = norm(u);
    if (r < 1e-9) return 1.0;
    const double grad = std::hypot(u.x / e.A, u.y / e.B) / r;
    const double d = (r - 1.0) / grad;  // approximate signed distance in pixels
    return std::clamp(0.5 - d, 0.0, 1.0);
}

inline void blend(Raster& img, int x, int y, const Rgb& c, double cov) {
    for (int k = 0; k < 3; ++k) img.at(x, y, k) = img.at(x, y, k) * (1.0 - cov) + c[std::size_t(k)] * cov;
}

/// Paints a filled ellipse, restricted to parametric angles inside `arc` when given.
inline void fill_ellipse(Raster& img, const Ellipse& e, const Rgb& c, double arc_from = 0.0,
                         double arc_len = 2.0 * kPi) {
    const double ext = e.A + 2.0;
    const int x0 = std::max(0, int(std::floor(e.p - ext)));
    const int x1 = std::min(img.width() - 1, int(std::ceil(e.p + ext)));
    const int y0 = std::max(0, int(std::floor(e.q - ext)));
    const int y1 = std::min(img.height() - 1, int(std::ceil(e.q + ext)));
    const bool full = arc_len >= 2.0 * kPi;
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double cov = ellipse_coverage(e, x, y);
            if (cov <= 0.0) continue;
            if (!full) {
                double t = ellipse_angle(e, {double(x), double(y)}) - arc_from;
                t = std::fmod(std::fmod(t, 2.0 * kPi) + 2.0 * kPi, 2.0 * kPi);
                if (t > arc_len) continue;
            }
            blend(img, x, y, c, cov);
        }
}

/// Paints the part of `outer` that lies outside `hole`, restricted to an arc.
inline void draw_band(Raster& img, const Ellipse& outer, const Ellipse& hole, const Rgb& c,
                      double arc_from, double arc_len) {
    // fill the outer ellipse and then restore the hole with what lies underneath
    Raster before = img;
    fill_ellipse(img, outer, c, arc_from, arc_len);
    const double ext = hole.A + 2.0;
    for (int y = std::max(0, int(hole.q - ext)); y <= std::min(img.height() - 1, int(hole.q + ext)); ++y)
        for (int x = std::max(0, int(hole.p - ext)); x <= std::min(img.width() - 1, int(hole.p + ext)); ++x) {
            const double cov = ellipse_coverage(hole, x, y);
            if (cov <= 0.0) continue;
            for (int k = 0; k < 3; ++k)
                img.at(x, y, k) = img.at(x, y, k) * (1.0 - cov) + before.at(x, y, k) * cov;
        }
}

inline void draw_thick_line(Raster& img, Point2d a, Point2d b, double half_width, const Rgb& c) {
    const int x0 = std::max(0, int(std::min(a.x, b.x) - half_width - 2));
    const int x1 = std::min(img.width() - 1, int(std::max(a.x, b.x) + half_width + 2));
    const int y0 = std::max(0, int(std::min(a.y, b.y) - half_width - 2));
    const int y1 = std::min(img.height() - 1, int(std::max(a.y, b.y) + half_width + 2));
    const Point2d d = b - a;
    const double len2 = dot(d, d);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const Point2d pt{double(x), double(y)};
            const double t = std::clamp(dot(pt - a, d) / len2, 0.0, 1.0);
            const double dist = distance(pt, a + t * d);
            const double cov = std::clamp(half_width + 0.5 - dist, 0.0, 1.0);
            if (cov > 0.0) blend(img, x, y, c, cov);
        }
}

inline Rgb random_color(Rng& rng) {
    return hsv_to_rgb(rng.uniform(0.0, 360.0), rng.uniform(0.0, 0.8), rng.uniform(0.3, 0.95));
}

/// Off-tower distractors: bowls (rimmed ellipses) and bundles of parallel bars.
inline void draw_clutter(Raster& img, const SceneSpec& s, Rng& rng) {
    const double tower_half = s.base.A * (1.0 + std::fabs(s.drift_radius) * s.dish_count) + 10.0;
    for (int i = 0; i < s.clutter; ++i) {
        const bool left = rng.uniform() < 0.5;
        const double margin_lo = left ? 0.0 : s.base.p + tower_half;
        const double margin_hi = left ? s.base.p - tower_half : double(s.width);
        const double cx = rng.uniform(margin_lo, std::max(margin_lo + 1.0, margin_hi));
        const double cy = rng.uniform(0.1 * s.height, 0.9 * s.height);
        if (rng.uniform() < 0.6) {
            Ellipse bowl{cx, cy, rng.uniform(25.0, 70.0), 0.0, rng.uniform(-kPi / 2, kPi / 2)};
            bowl.B = bowl.A * rng.uniform(0.3, 0.9);
            fill_ellipse(img, bowl, random_color(rng));
            Ellipse inner = bowl;
            inner.A *= 0.8;
            inner.B *= 0.8;
            fill_ellipse(img, inner, random_color(rng));
        } else {
            const double angle = rng.uniform(0.0, kPi);
            const double len = rng.uniform(80.0, 200.0);
            const Point2d dir{std::cos(angle), std::sin(angle)};
            const Point2d normal{-dir.y, dir.x};
            const int bars = 2 + int(rng.index(3));
            const Rgb c = random_color(rng);
            for (int k = 0; k < bars; ++k) {
                const Point2d mid = Point2d{cx, cy} + (8.0 * k) * normal;
                draw_thick_line(img, mid - (len / 2) * dir, mid + (len / 2) * dir, 1.5, c);
            }
        }
    }
}

inline Rgb scaled(const Rgb& c, double f) { return {c[0] * f, c[1] * f, c[2] * f}; }

struct ArcMask {
    bool erased = false;
    double from = 0.0;
    double length = 2.0 * kPi;
};

inline GroundTruth render_scene(const SceneSpec& s, const std::vector<ArcMask>& masks) {
    validate(s);
    Rng rng(s.seed ^ 0x5deece66dULL);
    const Palette palette = default_palette();
    GroundTruth gt;
    gt.image = Raster(s.width, s.height, 3);
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            // backdrop brightens smoothly towards the bottom edge
            const double g = 1.0 + s.backdrop_ramp * (double(y) / s.height - 0.5) +
                             s.backdrop_wave * std::sin(2.0 * kPi * x / s.width);
            for (int k = 0; k < 3; ++k)
                gt.image.at(x, y, k) = std::clamp(s.background[std::size_t(k)] * g, 0.0, 1.0);
        }
    draw_clutter(gt.image, s, rng);

    const Rgb rim{s.rim_level, s.rim_level, s.rim_level * 0.97};
    for (int i = 0; i < s.dish_count; ++i) {
        const Ellipse e = dish_ellipse(s, i);
        const Rgb color = palette.entries[std::size_t(s.labels[std::size_t(i)])].rgb;
        const ArcMask& m = masks[std::size_t(i)];
        const Rgb shade = scaled(color, s.wall_shade);
        // e is the plate's bottom edge; the rim sits wall_height above it
        Ellipse top = e;
        top.q -= s.wall_height;
        Ellipse inner = top;
        inner.A -= s.rim_thickness;
        inner.B -= s.rim_thickness;
        if (m.erased) {
            if (s.wall_height > 0.0) draw_band(gt.image, e, top, shade, m.from, m.length);
            draw_band(gt.image, top, inner, rim, m.from, m.length);
        } else {
            if (s.wall_height > 0.0) fill_ellipse(gt.image, e, shade);
            fill_ellipse(gt.image, top, rim);
            fill_ellipse(gt.image, inner, color);
        }
        gt.dishes.push_back({normalized(e), s.labels[std::size_t(i)], m.erased});
    }

    // illumination, shadow ramp and sensor noise
    const Point2d dir{std::cos(s.shadow_angle), std::sin(s.shadow_angle)};
    double lo = 1e300, hi = -1e300;
    for (Point2d c : {Point2d{0, 0}, Point2d{double(s.width), 0}, Point2d{0, double(s.height)},
                      Point2d{double(s.width), double(s.height)}}) {
        lo = std::min(lo, dot(c, dir));
        hi = std::max(hi, dot(c, dir));
    }
    for (int y = 0; y < s.height; ++y)
        for (int x = 0; x < s.width; ++x) {
            const double t = (dot({double(x), double(y)}, dir) - lo) / (hi - lo);
            const double gain = s.illumination * (1.0 - s.shadow * t);
            for (int k = 0; k < 3; ++k) {
                double v = gt.image.at(x, y, k) * gain;
                if (s.noise_sigma > 0.0) v += rng.normal(0.0, s.noise_sigma);
                gt.image.at(x, y, k) = std::clamp(v, 0.0, 1.0);
            }
        }

    std::stable_sort(gt.dishes.begin(), gt.dishes.end(), [](const DishTruth& a, const DishTruth& b) {
        return bottom_y(a.ellipse) > bottom_y(b.ellipse);
    });
    return gt;
}

} // namespace detail

/// Renders the tower bottom-up: each dish is a filled ellipse in its class
/// color with a bright rim, partially covered by the dish above.
inline GroundTruth render(const SceneSpec& spec) {
    return detail::render_scene(spec, std::vector<detail::ArcMask>(std::size_t(std::max(spec.dish_count, 0))));
}

/// Like render, but interior dishes chosen from the seed keep only a contiguous
/// arc of their rim covering `drop_fraction` of the perimeter; the rest of the
/// dish is not drawn, so its edge evidence is a single short arc.
inline GroundTruth render_occluded(const SceneSpec& spec, double drop_fraction) {
    if (!(drop_fraction >= 0.0 && drop_fraction < 1.0))
        throw InvalidArgument("drop_fraction must lie in [0, 1)");
    std::vector<detail::ArcMask> masks(std::size_t(std::max(spec.dish_count, 0)));
    if (drop_fraction == 0.0 || spec.dish_count < 3) return detail::render_scene(spec, masks);
    Rng rng(spec.seed ^ 0x0cc1d3dULL);
    std::vector<int> interior;
    for (int i = 1; i + 1 < spec.dish_count; ++i) interior.push_back(i);
    rng.shuffle(interior.begin(), interior.end());
    int chosen = 0;
    for (int i : interior) {
        if (chosen >= spec.occluded_count) break;
        // never two neighbours, so every gap in the tower stays a single dish wide
        if (masks[std::size_t(i - 1)].erased || masks[std::size_t(i + 1)].erased) continue;
        auto& m = masks[std::size_t(i)];
        m.erased = true;
        m.length = drop_fraction * 2.0 * kPi;
        // centred near the bottom of the dish, the part the dish above never covers
        m.from = kPi / 2.0 + rng.uniform(-kPi / 6.0, kPi / 6.0) - m.length / 2.0;
        ++chosen;
    }
    return detail::render_scene(spec, masks);
}

} // namespace sushi
