#pragma once

#include <cmath>
#include <compare>
#include <cstdint>

namespace sushi {

/// Real-valued image-plane point; x grows right, y grows down.
struct Point2d {
    double x = 0.0;
    double y = 0.0;

    friend constexpr Point2d operator+(Point2d a, Point2d b) { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Point2d operator-(Point2d a, Point2d b) { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Point2d operator*(double s, Point2d a) { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Point2d, Point2d) = default;
};

/// Integer pixel coordinate.
struct Pixel {
    int x = 0;
    int y = 0;

    friend constexpr bool operator==(Pixel, Pixel) = default;
    friend constexpr auto operator<=>(Pixel a, Pixel b) {
        // (y, x) order, row-major scan order
        if (auto c = a.y <=> b.y; c != 0) return c;
        return a.x <=> b.x;
    }

    constexpr Point2d to_point() const { return {double(x), double(y)}; }
};

inline double dot(Point2d a, Point2d b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2d a, Point2d b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2d a) { return std::hypot(a.x, a.y); }
inline double distance(Point2d a, Point2d b) { return norm(a - b); }

inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

/// Wraps an angle into [-pi/2, pi/2), the period of an ellipse orientation.
inline double wrap_half_turn(double a) {
    a = std::fmod(a + kPi / 2.0, kPi);
    if (a < 0.0) a += kPi;
    double r = a - kPi / 2.0;
    if (r >= kPi / 2.0) r -= kPi;
    return r;
}

/// Absolute difference of two orientations modulo pi, in [0, pi/2].
inline double orientation_distance(double a, double b) {
    double d = std::fabs(wrap_half_turn(a - b));
    return d;
}

} // namespace sushi
