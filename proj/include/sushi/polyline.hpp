#pragma once

#include "edges.hpp"
#include "error.hpp"
#include "geometry.hpp"

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace sushi {

/// Piece-wise linear approximation of an edge contour.
struct Polyline {
    std::vector<Point2d> vertices;
    /// Index of every vertex in `dense`; empty when built directly from vertices.
    std::vector<std::size_t> source;
    /// The contour points the polyline was simplified from.
    std::vector<Point2d> dense;
};

/// Polyline portion without sharp turns or inflexions.
struct SmoothCurve {
    std::vector<Point2d> vertices;
    /// Contour points between the first and last vertex (inclusive), or the
    /// vertices themselves when no dense contour is known.
    std::vector<Point2d> support;
};

/// Perpendicular distance from `pt` to the infinite line through a and b.
///
/// This is the classic two-point line form |x(y1-yn) + y(xn-x1) + yn*x1 - y1*xn|
/// divided by |b - a|, so the result is in pixels.
inline double point_line_deviation(Point2d pt, Point2d a, Point2d b) {
    const double len = distance(a, b);
    if (len == 0.0) throw InvalidArgument("deviation line needs two distinct points");
    const double num = pt.x * (a.y - b.y) + pt.y * (b.x - a.x) + b.y * a.x - a.y * b.x;
    return std::fabs(num) / len;
}

/// Distance from `pt` to the closed segment a-b. Equals point_line_deviation
/// whenever the foot of the perpendicular falls inside the segment.
inline double point_segment_distance(Point2d pt, Point2d a, Point2d b) {
    const Point2d d = b - a;
    const double len2 = dot(d, d);
    if (len2 == 0.0) return distance(pt, a);
    const double t = dot(pt - a, d) / len2;
    if (t <= 0.0) return distance(pt, a);
    if (t >= 1.0) return distance(pt, b);
    return point_line_deviation(pt, a, b);
}

/// Ramer-Douglas-Peucker on a dense point sequence; returns kept indices in order.
/// Deviation is measured to the covering segment, so every dropped point ends up
/// within `tol` of the simplified polyline even when the contour doubles back.
inline std::vector<std::size_t> rdp_indices(const std::vector<Point2d>& pts, double tol) {
    const std::size_t n = pts.size();
    if (n < 2) throw InvalidArgument("rdp needs at least 2 points");
    std::vector<char> keep(n, 0);
    keep[0] = 1;
    keep[n - 1] = 1;
    std::vector<std::pair<std::size_t, std::size_t>> work{{0, n - 1}};
    while (!work.empty()) {
        const auto [first, last] = work.back();
        work.pop_back();
        if (last <= first + 1) continue;
        double worst = -1.0;
        std::size_t split = first;
        for (std::size_t i = first + 1; i < last; ++i) {
            const double d = point_segment_distance(pts[i], pts[first], pts[last]);
            if (d > worst) {
                worst = d;
                split = i;
            }
        }
        if (worst > tol) {
            keep[split] = 1;
            work.emplace_back(split, last);
            work.emplace_back(first, split);
        }
    }
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
        if (keep[i]) idx.push_back(i);
    return idx;
}

inline Polyline rdp_simplify(const std::vector<Point2d>& points, double tol = 2.0) {
    Polyline out;
    out.dense = points;
    out.source = rdp_indices(points, tol);
    out.vertices.reserve(out.source.size());
    for (std::size_t i : out.source) out.vertices.push_back(points[i]);
    return out;
}

inline Polyline rdp_simplify(const EdgeContour& contour, double tol = 2.0) {
    std::vector<Point2d> pts;
    pts.reserve(contour.points.size());
    for (const Pixel p : contour.points) pts.push_back(p.to_point());
    return rdp_simplify(pts, tol);
}

/// Signed exterior angle at vertex b of the path a -> b -> c, in (-pi, pi].
inline double turn_angle(Point2d a, Point2d b, Point2d c) {
    const Point2d d1 = b - a;
    const Point2d d2 = c - b;
    return std::atan2(cross(d1, d2), dot(d1, d2));
}

/// Cuts a polyline at sharp turns (|turn| > threshold) and at inflexions, where
/// the turn sign differs from the previous non-zero turn. Cut vertices are
/// shared by the two pieces they separate.
inline std::vector<SmoothCurve> split_smooth(const Polyline& poly, double sharp_turn_deg = 90.0) {
    std::vector<SmoothCurve> out;
    const auto& v = poly.vertices;
    if (v.empty()) return out;
    const double sharp = deg_to_rad(sharp_turn_deg);
    const bool has_dense = !poly.source.empty() && poly.source.size() == v.size();

    auto emit = [&](std::size_t first, std::size_t last) {
        SmoothCurve c;
        c.vertices.assign(v.begin() + std::ptrdiff_t(first), v.begin() + std::ptrdiff_t(last) + 1);
        if (has_dense)
            c.support.assign(poly.dense.begin() + std::ptrdiff_t(poly.source[first]),
                             poly.dense.begin() + std::ptrdiff_t(poly.source[last]) + 1);
        else
            c.support = c.vertices;
        out.push_back(std::move(c));
    };

    std::size_t start = 0;
    int last_sign = 0;
    for (std::size_t k = 1; k + 1 < v.size(); ++k) {
        const double t = turn_angle(v[k - 1], v[k], v[k + 1]);
        const double c = cross(v[k] - v[k - 1], v[k + 1] - v[k]);
        const int sign = c > 0.0 ? 1 : (c < 0.0 ? -1 : 0);
        if (std::fabs(t) > sharp) {
            emit(start, k);
            start = k;
            last_sign = 0;
            continue;
        }
        if (sign != 0) {
            if (last_sign != 0 && sign != last_sign) {
                emit(start, k);
                start = k;
            }
            last_sign = sign;
        }
    }
    emit(start, v.size() - 1);
    return out;
}

} // namespace sushi
