#pragma once

#include "ellipse.hpp"
#include "error.hpp"
#include "polyline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace sushi {

/// Detected tower, one (p, q, A, B, alpha) row per dish, ordered by descending
/// bottom_y: row 0 is the bottom-most dish.
struct ParamMatrix {
    std::vector<Ellipse> rows;

    void sort() {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Ellipse& a, const Ellipse& b) { return bottom_y(a) > bottom_y(b); });
    }
    std::size_t size() const { return rows.size(); }
    bool empty() const { return rows.empty(); }
};

inline ParamMatrix make_param_matrix(std::vector<Ellipse> rows) {
    ParamMatrix m{std::move(rows)};
    m.sort();
    return m;
}

struct Prediction {
    Ellipse ellipse;
    std::size_t insert_index = 0;
    std::vector<SmoothCurve> gathered;
};

struct Evidence {
    double coverage = 0.0;
    double rms_error = 0.0;
    double max_error = 0.0;
};

struct ReconstructionParams {
    double gather_tolerance = 0.3;   // segment_error bound for a fragment to count as evidence
    double claim_tolerance = 0.05;   // fragments this close to a detected row belong to that row
    double search_range = 0.10;      // +- fraction of A explored per parameter
    double min_step = 0.01;          // pixels; coordinate descent stops below this step
    int coverage_bins = 64;
    double min_coverage = 0.10;
    double max_rms_error = 0.1;
    double max_point_error = 0.2;
};

/// Stack position of every row once the gaps are expanded by the reference
/// spacing (the lower median of the bottom_y gaps).
inline std::vector<std::size_t> stack_positions(const ParamMatrix& stack) {
    std::vector<std::size_t> pos(stack.size(), 0);
    if (stack.size() < 2) return pos;
    std::vector<double> gaps;
    for (std::size_t i = 0; i + 1 < stack.size(); ++i)
        gaps.push_back(bottom_y(stack.rows[i]) - bottom_y(stack.rows[i + 1]));
    std::vector<double> sorted = gaps;
    std::sort(sorted.begin(), sorted.end());
    const double reference = sorted[(sorted.size() - 1) / 2];
    for (std::size_t i = 0; i + 1 < stack.size(); ++i) {
        long step = 1;
        if (reference > 0.0) step = std::max(1L, std::lround(gaps[i] / reference));
        pos[i + 1] = pos[i] + std::size_t(step);
    }
    return pos;
}

/// Positions (in the completed stack) of dishes missing between detected rows.
inline std::vector<std::size_t> find_missing(const ParamMatrix& stack) {
    std::vector<std::size_t> missing;
    if (stack.size() < 2) return missing;
    const auto pos = stack_positions(stack);
    for (std::size_t i = 0; i + 1 < pos.size(); ++i)
        for (std::size_t k = pos[i] + 1; k < pos[i + 1]; ++k) missing.push_back(k);
    return missing;
}

namespace detail {

// Least-squares line through (x_i, y_i) evaluated at x.
inline double linear_trend(std::span<const double> xs, std::span<const double> ys, double x) {
    const double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double denom = n * sxx - sx * sx;
    if (std::fabs(denom) < 1e-12) return sy / n;
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return intercept + slope * x;
}

} // namespace detail

/// Fragments whose every support point lies within `tolerance` of `e`, except
/// those lying within `claim_tolerance` of one of the `claimed` ellipses.
inline std::vector<SmoothCurve> gather_fragments(const Ellipse& e, const std::vector<SmoothCurve>& curves,
                                                 double tolerance, std::span<const Ellipse> claimed = {},
                                                 double claim_tolerance = 0.0) {
    auto within = [](const Ellipse& el, const SmoothCurve& c, double tol) {
        return std::all_of(c.support.begin(), c.support.end(),
                           [&](Point2d pt) { return segment_error(el, pt) < tol; });
    };
    std::vector<SmoothCurve> out;
    for (const auto& c : curves) {
        if (c.support.empty() || !within(e, c, tolerance)) continue;
        if (std::any_of(claimed.begin(), claimed.end(),
                        [&](const Ellipse& r) { return within(r, c, claim_tolerance); }))
            continue;
        out.push_back(c);
    }
    return out;
}

/// Extrapolates each of the five parameters along the stack with its own
/// least-squares line and collects nearby fragments as evidence.
inline Prediction predict(const ParamMatrix& stack, std::size_t insert_index,
                          const std::vector<SmoothCurve>& curves = {},
                          const ReconstructionParams& params = {}) {
    if (stack.empty()) throw InvalidArgument("cannot predict from an empty stack");
    const auto pos = stack_positions(stack);
    if (insert_index > pos.back() + 1) throw InvalidArgument("insert index outside the stack");
    std::vector<double> xs(pos.begin(), pos.end());
    std::array<std::vector<double>, 5> cols;
    const double alpha0 = stack.rows.front().alpha;
    for (const Ellipse& e : stack.rows) {
        cols[0].push_back(e.p);
        cols[1].push_back(e.q);
        cols[2].push_back(e.A);
        cols[3].push_back(e.B);
        cols[4].push_back(alpha0 + wrap_half_turn(e.alpha - alpha0));  // unwrapped
    }
    const double x = double(insert_index);
    Prediction pred;
    pred.insert_index = insert_index;
    pred.ellipse.p = detail::linear_trend(xs, cols[0], x);
    pred.ellipse.q = detail::linear_trend(xs, cols[1], x);
    pred.ellipse.A = detail::linear_trend(xs, cols[2], x);
    pred.ellipse.B = detail::linear_trend(xs, cols[3], x);
    pred.ellipse.alpha = detail::linear_trend(xs, cols[4], x);
    pred.ellipse = normalized(pred.ellipse);
    pred.gathered =
        gather_fragments(pred.ellipse, curves, params.gather_tolerance, stack.rows, params.claim_tolerance);
    return pred;
}

/// Coverage, RMS and max segment_error of `points` against `e`.
inline Evidence measure_evidence(const Ellipse& e, std::span<const Point2d> points, int bins = 64) {
    Evidence ev;
    if (points.empty()) return ev;
    std::vector<char> hit(std::size_t(bins), 0);
    double sum = 0.0;
    for (const Point2d pt : points) {
        const double err = segment_error(e, pt);
        sum += err * err;
        ev.max_error = std::max(ev.max_error, err);
        const auto bin = std::min(std::size_t(bins - 1), std::size_t(ellipse_angle(e, pt) / (2.0 * kPi) * bins));
        hit[bin] = 1;
    }
    ev.rms_error = std::sqrt(sum / double(points.size()));
    ev.coverage = double(std::count(hit.begin(), hit.end(), 1)) / double(bins);
    return ev;
}

inline std::vector<Point2d> gathered_points(const Prediction& pred) {
    std::vector<Point2d> pts;
    for (const auto& c : pred.gathered) pts.insert(pts.end(), c.support.begin(), c.support.end());
    return pts;
}

/// Coordinate descent over (p, q, A, B) with alpha held fixed, minimizing RMS
/// segment_error over the gathered points. Each parameter stays within
/// +- search_range * A of the prediction; the step halves whenever no move helps.
inline std::pair<Ellipse, Evidence> refine(const Prediction& pred, const ReconstructionParams& params = {}) {
    const auto pts = gathered_points(pred);
    if (pts.empty()) throw NoEvidence();
    const Ellipse start = pred.ellipse;
    const double range = params.search_range * start.A;
    std::array<double, 4> x{start.p, start.q, start.A, start.B};
    const std::array<double, 4> x0 = x;
    auto make = [&](const std::array<double, 4>& v) {
        Ellipse e = start;
        e.p = v[0];
        e.q = v[1];
        e.A = v[2];
        e.B = v[3];
        return e;
    };
    double best = rms_segment_error(make(x), pts);
    for (double step = range / 4.0; step >= params.min_step; step /= 2.0) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (std::size_t k = 0; k < 4; ++k)
                for (const double dir : {-1.0, 1.0}) {
                    std::array<double, 4> trial = x;
                    trial[k] += dir * step;
                    if (std::fabs(trial[k] - x0[k]) > range + 1e-12) continue;
                    if (trial[2] <= 0.0 || trial[3] <= 0.0) continue;
                    const double err = rms_segment_error(make(trial), pts);
                    if (err < best) {
                        best = err;
                        x = trial;
                        improved = true;
                    }
                }
        }
    }
    const Ellipse optimum = make(x);
    return {optimum, measure_evidence(optimum, pts, params.coverage_bins)};
}

/// The three-condition evidence gate.
inline bool accept(const Evidence& ev, const ReconstructionParams& params = {}) {
    return ev.coverage > params.min_coverage && ev.rms_error < params.max_rms_error &&
           ev.max_error < params.max_point_error;
}

struct ReconstructionStep {
    Prediction prediction;
    bool refined = false;
    Ellipse optimum;
    Evidence evidence;
    bool accepted = false;
};

struct Reconstruction {
    ParamMatrix stack;
    std::vector<ReconstructionStep> steps;
};

/// Fills the gaps of a detected tower with predicted ellipses that pass the
/// evidence gate. Existing rows are never modified and the top dish is never
/// a candidate (only gaps between detected rows are considered).
inline Reconstruction reconstruct_detailed(const ParamMatrix& stack, const std::vector<SmoothCurve>& curves,
                                           const ReconstructionParams& params = {}) {
    Reconstruction out{stack, {}};
    std::vector<Ellipse> added;
    for (const std::size_t index : find_missing(stack)) {
        ReconstructionStep step;
        step.prediction = predict(stack, index, curves, params);
        if (!step.prediction.gathered.empty()) {
            auto [optimum, evidence] = refine(step.prediction, params);
            step.refined = true;
            step.optimum = normalized(optimum);
            step.evidence = evidence;
            step.accepted = accept(evidence, params);
            if (step.accepted) added.push_back(step.optimum);
        }
        out.steps.push_back(std::move(step));
    }
    out.stack.rows.insert(out.stack.rows.end(), added.begin(), added.end());
    out.stack.sort();
    return out;
}

inline ParamMatrix reconstruct(const ParamMatrix& stack, const std::vector<SmoothCurve>& curves,
                               const ReconstructionParams& params = {}) {
    return reconstruct_detailed(stack, curves, params).stack;
}

} // namespace sushi
