#pragma once

#include "edges.hpp"
#include "ellipse.hpp"
#include "polyline.hpp"
#include "raster.hpp"
#include "stack_recon.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sushi {

/// Every tunable of the detection chain, defaults included.
struct DetectorConfig {
    int max_side = 800;
    bool equalize = true;
    double canny_low = 0.2;
    double canny_high = 0.2;
    double canny_sigma = 1.0;
    double rdp_tolerance = 2.0;
    double sharp_turn_deg = 90.0;
    std::size_t min_fit_vertices = 6;   // a smooth curve needs more than 5 points to be fitted
    double max_fit_residual = 0.05;
    double min_minor_radius = 5.0;      // pixels, in the resized image
    ConsensusParams consensus;
    double min_gap_fraction = 0.35;     // of the median minor radius
    bool reconstruct = true;
    ReconstructionParams reconstruction;
};

/// Final tower plus every intermediate product (for overlays and evaluation).
struct Detection {
    double scale = 1.0;  // resized / original
    Raster gray;         // preprocessed, resized
    EdgeMap edges;
    std::vector<EdgeContour> contours;
    std::vector<Polyline> polylines;
    std::vector<SmoothCurve> curves;
    std::vector<FitResult> fits;
    std::vector<FitResult> consensus;
    std::vector<FitResult> deduplicated;
    Reconstruction reconstruction;
    ParamMatrix before_reconstruction;  // original image coordinates
    ParamMatrix stack;                  // original image coordinates

    bool tower_found() const { return !stack.empty(); }
};

/// Maps an ellipse from resized-image to original-image pixel coordinates.
inline Ellipse unscale(const Ellipse& e, double scale) {
    if (scale == 1.0) return e;
    Ellipse out = e;
    out.p = (e.p + 0.5) / scale - 0.5;
    out.q = (e.q + 0.5) / scale - 0.5;
    out.A = e.A / scale;
    out.B = e.B / scale;
    return out;
}

inline Raster preprocess(const Raster& img, const DetectorConfig& cfg) {
    Raster gray = img.channels() == 3 ? to_grayscale(img) : img;
    gray = resize_max_side(gray, cfg.max_side);
    if (cfg.equalize) gray = equalize_histogram(gray);
    return gray;
}

/// Fits every smooth curve with enough vertices; failed or poor fits are dropped.
inline std::vector<FitResult> fit_curves(const std::vector<SmoothCurve>& curves, const DetectorConfig& cfg,
                                         int width, int height) {
    std::vector<FitResult> fits;
    const double max_radius = double(std::max(width, height));
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        if (c.vertices.size() < cfg.min_fit_vertices || c.support.size() < 6) continue;
        try {
            FitResult f = fit_ellipse(c.support);
            f.source = i;
            if (f.residual > cfg.max_fit_residual) continue;
            if (f.ellipse.B < cfg.min_minor_radius || f.ellipse.A > max_radius) continue;
            fits.push_back(f);
        } catch (const DegenerateConic&) {
        }
    }
    return fits;
}

/// Edge processing, fitting, tower consensus, double-border removal and
/// evidence-gated reconstruction.
inline Detection detect(const Raster& img, const DetectorConfig& cfg = {}) {
    Detection d;
    d.scale = resize_factor(img.width(), img.height(), cfg.max_side);
    d.gray = preprocess(img, cfg);
    d.edges = cleanup(canny(d.gray, cfg.canny_low, cfg.canny_high, cfg.canny_sigma));
    d.contours = trace_contours(d.edges);
    for (const auto& c : d.contours) {
        if (c.points.size() < 2) continue;
        d.polylines.push_back(rdp_simplify(c, cfg.rdp_tolerance));
        for (auto& piece : split_smooth(d.polylines.back(), cfg.sharp_turn_deg)) d.curves.push_back(std::move(piece));
    }
    d.fits = fit_curves(d.curves, cfg, d.gray.width(), d.gray.height());
    d.consensus = consensus_filter(d.fits, cfg.consensus);
    d.deduplicated = dedup_double_borders(d.consensus, default_min_gap(d.consensus, cfg.min_gap_fraction));

    ParamMatrix stack;
    for (const auto& f : d.deduplicated) stack.rows.push_back(f.ellipse);
    stack.sort();
    if (cfg.reconstruct) {
        d.reconstruction = reconstruct_detailed(stack, d.curves, cfg.reconstruction);
    } else {
        d.reconstruction.stack = stack;
    }
    for (const Ellipse& e : stack.rows) d.before_reconstruction.rows.push_back(unscale(e, d.scale));
    for (const Ellipse& e : d.reconstruction.stack.rows) d.stack.rows.push_back(unscale(e, d.scale));
    return d;
}

} // namespace sushi
