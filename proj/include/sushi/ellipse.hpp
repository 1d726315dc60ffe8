#pragma once

#include "error.hpp"
#include "geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

namespace sushi {

/// Ellipse with center (p, q), radii A >= B > 0 and orientation alpha.
///
/// A point at parameter theta is (p, q) + R(alpha) * (A cos theta, B sin theta).
struct Ellipse {
    double p = 0.0;
    double q = 0.0;
    double A = 1.0;
    double B = 1.0;
    double alpha = 0.0;

    Point2d center() const { return {p, q}; }
    friend bool operator==(const Ellipse&, const Ellipse&) = default;
};

/// Relative axis difference below which an ellipse is treated as a circle.
inline constexpr double kCircleTolerance = 1e-6;

/// Restores A >= B, wraps alpha into [-pi/2, pi/2) and zeroes alpha for circles.
inline Ellipse normalized(Ellipse e) {
    e.A = std::fabs(e.A);
    e.B = std::fabs(e.B);
    if (e.B > e.A) {
        std::swap(e.A, e.B);
        e.alpha += kPi / 2.0;
    }
    e.alpha = wrap_half_turn(e.alpha);
    if (e.A > 0.0 && (e.A - e.B) / e.A < kCircleTolerance) e.alpha = 0.0;
    return e;
}

inline Point2d ellipse_point(const Ellipse& e, double theta) {
    const double ca = std::cos(e.alpha);
    const double sa = std::sin(e.alpha);
    const double u = e.A * std::cos(theta);
    const double v = e.B * std::sin(theta);
    return {e.p + ca * u - sa * v, e.q + sa * u + ca * v};
}

/// Largest image y reached by the ellipse (y grows downward).
inline double bottom_y(const Ellipse& e) {
    const double s = std::sin(e.alpha);
    const double c = std::cos(e.alpha);
    return e.q + std::sqrt(e.A * e.A * s * s + e.B * e.B * c * c);
}

/// Coordinates of `pt` in the frame where `e` is the unit circle.
inline Point2d to_unit_frame(const Ellipse& e, Point2d pt) {
    const double dx = pt.x - e.p;
    const double dy = pt.y - e.q;
    const double ca = std::cos(e.alpha);
    const double sa = std::sin(e.alpha);
    return {(ca * dx + sa * dy) / e.A, (-sa * dx + ca * dy) / e.B};
}

/// Normalized-frame distance | ||pt'|| - 1 |; zero exactly on the ellipse.
inline double segment_error(const Ellipse& e, Point2d pt) {
    return std::fabs(norm(to_unit_frame(e, pt)) - 1.0);
}

/// Parametric angle of `pt` around the ellipse, in [0, 2 pi).
inline double ellipse_angle(const Ellipse& e, Point2d pt) {
    const Point2d u = to_unit_frame(e, pt);
    double t = std::atan2(u.y, u.x);
    if (t < 0.0) t += 2.0 * kPi;
    return t;
}

inline double rms_segment_error(const Ellipse& e, std::span<const Point2d> pts) {
    if (pts.empty()) return 0.0;
    double s = 0.0;
    for (const Point2d pt : pts) {
        const double d = segment_error(e, pt);
        s += d * d;
    }
    return std::sqrt(s / double(pts.size()));
}

inline constexpr std::size_t kNoSource = std::numeric_limits<std::size_t>::max();

struct FitResult {
    Ellipse ellipse;
    /// Index of the smooth curve the fit came from, or kNoSource.
    std::size_t source = kNoSource;
    /// RMS of segment_error over the fitted points.
    double residual = 0.0;
};

/// Conic coefficients a x^2 + b xy + c y^2 + d x + e y + f = 0.
struct Conic {
    double a, b, c, d, e, f;
};

/// Geometric parameters of an ellipse conic; throws DegenerateConic otherwise.
inline Ellipse conic_to_ellipse(Conic k) {
    if (4.0 * k.a * k.c - k.b * k.b <= 0.0) throw DegenerateConic("conic is not an ellipse");
    if (k.a + k.c < 0.0) k = {-k.a, -k.b, -k.c, -k.d, -k.e, -k.f};
    const double det = 4.0 * k.a * k.c - k.b * k.b;
    const double x0 = (k.b * k.e - 2.0 * k.c * k.d) / det;
    const double y0 = (k.b * k.d - 2.0 * k.a * k.e) / det;
    const double f0 = k.f + 0.5 * (k.d * x0 + k.e * y0);
    if (!(f0 < 0.0)) throw DegenerateConic("conic has no real points");
    const double h = 0.5 * k.b;
    const double mean = 0.5 * (k.a + k.c);
    const double radius = std::hypot(0.5 * (k.a - k.c), h);
    const double lmin = mean - radius;
    const double lmax = mean + radius;
    if (!(lmin > 0.0)) throw DegenerateConic("conic is not an ellipse");
    Ellipse e;
    e.p = x0;
    e.q = y0;
    e.A = std::sqrt(-f0 / lmin);
    e.B = std::sqrt(-f0 / lmax);
    // direction maximizing the quadratic form is the minor axis
    e.alpha = 0.5 * std::atan2(2.0 * h, k.a - k.c) + kPi / 2.0;
    return normalized(e);
}

/// Direct ellipse-specific least squares (numerically stable split form of the
/// 4ac - b^2 = 1 constrained fit) on centered and scaled coordinates.
inline FitResult fit_ellipse(std::span<const Point2d> points) {
    const std::size_t n = points.size();
    if (n < 6) throw TooFewPoints("ellipse fit needs at least 6 points");

    double mx = 0.0, my = 0.0;
    for (const Point2d pt : points) {
        mx += pt.x;
        my += pt.y;
    }
    mx /= double(n);
    my /= double(n);
    double spread = 0.0;
    for (const Point2d pt : points) spread += (pt.x - mx) * (pt.x - mx) + (pt.y - my) * (pt.y - my);
    spread = std::sqrt(spread / (2.0 * double(n)));
    if (!(spread > 0.0)) throw DegenerateConic("all points coincide");

    Eigen::Matrix3d s1 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d s2 = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d s3 = Eigen::Matrix3d::Zero();
    for (const Point2d pt : points) {
        const double u = (pt.x - mx) / spread;
        const double v = (pt.y - my) / spread;
        const Eigen::Vector3d quad(u * u, u * v, v * v);
        const Eigen::Vector3d lin(u, v, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    // s3 is singular exactly when the points are collinear.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> s3_eig(s3);
    if (s3_eig.eigenvalues()(0) <= 1e-10 * s3_eig.eigenvalues()(2))
        throw DegenerateConic("points are collinear");

    // The unconstrained algebraic fit (unit-norm coefficients) decides whether
    // the data is elliptic at all; the constrained fit below always is.
    Eigen::Matrix<double, 6, 6> scatter;
    scatter << s1, s2, s2.transpose(), s3;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> free_fit(scatter);
    const Eigen::Matrix<double, 6, 1> free_conic = free_fit.eigenvectors().col(0);
    if (4.0 * free_conic(0) * free_conic(2) - free_conic(1) * free_conic(1) <= 0.0)
        throw DegenerateConic("best-fit conic is a parabola or hyperbola");
    const Eigen::Matrix3d t = -s3.ldlt().solve(s2.transpose());
    const Eigen::Matrix3d m = s1 + s2 * t;
    Eigen::Matrix3d reduced;
    reduced.row(0) = m.row(2) / 2.0;
    reduced.row(1) = -m.row(1);
    reduced.row(2) = m.row(0) / 2.0;

    Eigen::EigenSolver<Eigen::Matrix3d> eig(reduced);
    const auto vecs = eig.eigenvectors();
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d a1 = vecs.col(i).real();
        const double constraint = 4.0 * a1(0) * a1(2) - a1(1) * a1(1);
        if (constraint <= 0.0) continue;
        // among admissible eigenvectors take the smallest algebraic residual
        const double val = std::fabs(eig.eigenvalues()(i).real());
        if (val < best_val) {
            best_val = val;
            best = i;
        }
    }
    if (best < 0) throw DegenerateConic("least-squares conic is not an ellipse");
    const Eigen::Vector3d a1 = vecs.col(best).real();
    const Eigen::Vector3d a2 = t * a1;

    Ellipse local = conic_to_ellipse({a1(0), a1(1), a1(2), a2(0), a2(1), a2(2)});
    Ellipse e;
    e.p = mx + spread * local.p;
    e.q = my + spread * local.q;
    e.A = spread * local.A;
    e.B = spread * local.B;
    e.alpha = local.alpha;
    e = normalized(e);
    if (!(e.B > 0.0) || !std::isfinite(e.A)) throw DegenerateConic("fitted ellipse is degenerate");

    FitResult r;
    r.ellipse = e;
    r.residual = rms_segment_error(e, points);
    return r;
}

/// Consensus tolerances, all relative to the candidate's major radius.
struct ConsensusParams {
    double p_tolerance = 0.15;
    double a_tolerance = 0.15;
    double alpha_tolerance_deg = 10.0;
    std::size_t max_iterations = 50;
    std::uint64_t seed = 0;
};

inline bool consistent_with(const Ellipse& candidate, const Ellipse& reference,
                            const ConsensusParams& params) {
    const double scale = reference.A;
    return std::fabs(candidate.p - reference.p) <= params.p_tolerance * scale &&
           std::fabs(candidate.A - reference.A) <= params.a_tolerance * scale &&
           orientation_distance(candidate.alpha, reference.alpha) <=
               deg_to_rad(params.alpha_tolerance_deg) + 1e-12;
}

/// RANSAC-style tower selection: candidates are drawn without replacement in a
/// seeded order and the largest set consistent in (p, A, alpha) wins. The
/// vertical position q does not take part.
inline std::vector<FitResult> consensus_filter(const std::vector<FitResult>& fits,
                                               const ConsensusParams& params = {}) {
    if (fits.size() <= 1) return fits;
    std::vector<std::size_t> order(fits.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(params.seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = std::size_t(rng() % (i + 1));
        std::swap(order[i], order[j]);
    }
    const std::size_t iterations = std::min(fits.size(), params.max_iterations);
    std::vector<char> best_mask;
    std::size_t best_count = 0;
    for (std::size_t it = 0; it < iterations; ++it) {
        const Ellipse& ref = fits[order[it]].ellipse;
        std::vector<char> mask(fits.size(), 0);
        std::size_t count = 0;
        for (std::size_t i = 0; i < fits.size(); ++i)
            if (consistent_with(fits[i].ellipse, ref, params)) {
                mask[i] = 1;
                ++count;
            }
        if (count > best_count) {
            best_count = count;
            best_mask = std::move(mask);
        }
    }
    std::vector<FitResult> out;
    for (std::size_t i = 0; i < fits.size(); ++i)
        if (best_mask[i]) out.push_back(fits[i]);
    return out;
}

/// Default double-border gap: a fraction of the median minor radius.
inline double default_min_gap(const std::vector<FitResult>& fits, double fraction = 0.35) {
    if (fits.empty()) return 0.0;
    std::vector<double> b;
    b.reserve(fits.size());
    for (const auto& f : fits) b.push_back(f.ellipse.B);
    std::sort(b.begin(), b.end());
    const std::size_t m = b.size() / 2;
    const double median = b.size() % 2 ? b[m] : 0.5 * (b[m - 1] + b[m]);
    return fraction * median;
}

/// Sorts by descending bottom_y and drops any ellipse whose bottom point is
/// closer than `min_gap` to the last kept (lower) one.
inline std::vector<FitResult> dedup_double_borders(std::vector<FitResult> fits, double min_gap) {
    std::stable_sort(fits.begin(), fits.end(), [](const FitResult& a, const FitResult& b) {
        return bottom_y(a.ellipse) > bottom_y(b.ellipse);
    });
    std::vector<FitResult> out;
    for (auto& f : fits) {
        if (!out.empty() && bottom_y(out.back().ellipse) - bottom_y(f.ellipse) < min_gap) continue;
        out.push_back(std::move(f));
    }
    return out;
}

} // namespace sushi
