#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "raster.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

namespace sushi {

/// Binary edge mask.
class EdgeMap {
public:
    EdgeMap() = default;
    EdgeMap(int width, int height)
        : width_(width), height_(height), on_(std::size_t(width) * std::size_t(height), 0) {}

    int width() const { return width_; }
    int height() const { return height_; }

    bool on(int x, int y) const {
        return x >= 0 && y >= 0 && x < width_ && y < height_ &&
               on_[std::size_t(y) * std::size_t(width_) + std::size_t(x)] != 0;
    }
    void set(int x, int y, bool v = true) {
        on_[std::size_t(y) * std::size_t(width_) + std::size_t(x)] = v ? 1 : 0;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto v : on_) n += v;
        return n;
    }

    /// Number of on-pixels among the 8 neighbours of (x, y).
    int neighbor_count(int x, int y) const {
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if ((dx != 0 || dy != 0) && on(x + dx, y + dy)) ++n;
        return n;
    }

    friend bool operator==(const EdgeMap&, const EdgeMap&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> on_;
};

/// Ordered chain of 8-connected pixels.
struct EdgeContour {
    std::vector<Pixel> points;
};

namespace detail {

// Clockwise from north; used by walking and thinning.
inline constexpr std::array<Pixel, 8> kRing = {
    Pixel{0, -1}, Pixel{1, -1}, Pixel{1, 0}, Pixel{1, 1},
    Pixel{0, 1}, Pixel{-1, 1}, Pixel{-1, 0}, Pixel{-1, -1}};

} // namespace detail

/// Sobel derivatives of a smoothed raster.
struct Gradient {
    std::vector<double> gx;
    std::vector<double> gy;
};

inline Gradient sobel_gradient(const Raster& smooth) {
    const int w = smooth.width();
    const int h = smooth.height();
    Gradient g{std::vector<double>(std::size_t(w) * std::size_t(h)),
               std::vector<double>(std::size_t(w) * std::size_t(h))};
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            auto p = [&](int dx, int dy) { return smooth.at_clamped(x + dx, y + dy); };
            const double gx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            const double gy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            const std::size_t i = std::size_t(y) * std::size_t(w) + std::size_t(x);
            g.gx[i] = gx;
            g.gy[i] = gy;
        }
    return g;
}

/// Canny detector: blur, Sobel, 4-direction non-maximum suppression and
/// hysteresis. Thresholds are fractions of the image's maximum gradient magnitude.
inline EdgeMap canny(const Raster& img, double t_low = 0.2, double t_high = 0.2, double sigma = 1.0) {
    if (img.channels() != 1) throw InvalidArgument("canny expects a 1-channel raster");
    if (!(t_low >= 0.0 && t_low <= t_high && t_high <= 1.0))
        throw InvalidArgument("canny thresholds must satisfy 0 <= t_low <= t_high <= 1");
    const int w = img.width();
    const int h = img.height();
    EdgeMap edges(w, h);
    if (w == 0 || h == 0) return edges;

    const Raster smooth = gaussian_blur(img, sigma);
    const Gradient grad = sobel_gradient(smooth);
    std::vector<double> mag(grad.gx.size());
    double max_mag = 0.0;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        mag[i] = std::hypot(grad.gx[i], grad.gy[i]);
        max_mag = std::max(max_mag, mag[i]);
    }
    if (max_mag <= 1e-12) return edges;

    auto m = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
        return mag[std::size_t(y) * std::size_t(w) + std::size_t(x)];
    };

    // Non-maximum suppression. Ties are broken by a strict comparison on the
    // "forward" neighbour only, so plateaus of width 2 keep a single pixel.
    std::vector<double> thin(mag.size(), 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = std::size_t(y) * std::size_t(w) + std::size_t(x);
            const double v = mag[i];
            if (v <= 0.0) continue;
            double angle = std::atan2(grad.gy[i], grad.gx[i]);
            if (angle < 0.0) angle += kPi;
            int dx = 0, dy = 0;
            if (angle < kPi / 8.0 || angle >= 7.0 * kPi / 8.0) {
                dx = 1;
            } else if (angle < 3.0 * kPi / 8.0) {
                dx = 1;
                dy = 1;
            } else if (angle < 5.0 * kPi / 8.0) {
                dy = 1;
            } else {
                dx = -1;
                dy = 1;
            }
            if (v > m(x - dx, y - dy) && v >= m(x + dx, y + dy)) thin[i] = v;
        }

    const double lo = t_low * max_mag;
    const double hi = t_high * max_mag;
    std::vector<Pixel> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = thin[std::size_t(y) * std::size_t(w) + std::size_t(x)];
            if (v >= hi && v > 0.0 && !edges.on(x, y)) {
                edges.set(x, y);
                stack.push_back({x, y});
                while (!stack.empty()) {
                    const Pixel p = stack.back();
                    stack.pop_back();
                    for (const Pixel d : detail::kRing) {
                        const int nx = p.x + d.x;
                        const int ny = p.y + d.y;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h || edges.on(nx, ny)) continue;
                        const double nv = thin[std::size_t(ny) * std::size_t(w) + std::size_t(nx)];
                        if (nv >= lo && nv > 0.0) {
                            edges.set(nx, ny);
                            stack.push_back({nx, ny});
                        }
                    }
                }
            }
        }
    return edges;
}

namespace detail {

// One Zhang-Suen sub-iteration; returns whether any pixel was removed.
inline bool zhang_suen_pass(EdgeMap& e, bool first) {
    std::vector<Pixel> remove;
    for (int y = 0; y < e.height(); ++y)
        for (int x = 0; x < e.width(); ++x) {
            if (!e.on(x, y)) continue;
            std::array<int, 8> p{};
            int b = 0;
            for (std::size_t k = 0; k < 8; ++k) {
                p[k] = e.on(x + kRing[k].x, y + kRing[k].y) ? 1 : 0;
                b += p[k];
            }
            if (b < 2 || b > 6) continue;
            int a = 0;
            for (std::size_t k = 0; k < 8; ++k)
                if (p[k] == 0 && p[(k + 1) % 8] == 1) ++a;
            if (a != 1) continue;
            // p[0]=N, p[2]=E, p[4]=S, p[6]=W
            if (first) {
                if (p[0] * p[2] * p[4] != 0 || p[2] * p[4] * p[6] != 0) continue;
            } else {
                if (p[0] * p[2] * p[6] != 0 || p[0] * p[4] * p[6] != 0) continue;
            }
            remove.push_back({x, y});
        }
    for (const Pixel q : remove) e.set(q.x, q.y, false);
    return !remove.empty();
}

// Removes, in scan order, pixels with >= 2 neighbours whose neighbours stay
// 8-connected to each other without them (staircase corners Zhang-Suen keeps).
inline bool remove_redundant(EdgeMap& e) {
    bool changed = false;
    for (int y = 0; y < e.height(); ++y)
        for (int x = 0; x < e.width(); ++x) {
            if (!e.on(x, y)) continue;
            std::array<int, 8> p{};
            int b = 0;
            for (std::size_t k = 0; k < 8; ++k) {
                p[k] = e.on(x + kRing[k].x, y + kRing[k].y) ? 1 : 0;
                b += p[k];
            }
            if (b < 2) continue;
            // flood the on-neighbours inside the 3x3 window, centre excluded
            std::array<int, 8> label{};
            std::size_t seed = 0;
            while (p[seed] == 0) ++seed;
            std::vector<std::size_t> stack{seed};
            label[seed] = 1;
            int reached = 1;
            while (!stack.empty()) {
                const std::size_t k = stack.back();
                stack.pop_back();
                for (std::size_t j = 0; j < 8; ++j) {
                    if (!p[j] || label[j]) continue;
                    const int dx = std::abs(kRing[k].x - kRing[j].x);
                    const int dy = std::abs(kRing[k].y - kRing[j].y);
                    if (dx <= 1 && dy <= 1) {
                        label[j] = 1;
                        ++reached;
                        stack.push_back(j);
                    }
                }
            }
            if (reached == b) {
                e.set(x, y, false);
                changed = true;
            }
        }
    return changed;
}

inline bool remove_where(EdgeMap& e, auto&& predicate) {
    std::vector<Pixel> remove;
    for (int y = 0; y < e.height(); ++y)
        for (int x = 0; x < e.width(); ++x)
            if (e.on(x, y) && predicate(e.neighbor_count(x, y))) remove.push_back({x, y});
    for (const Pixel q : remove) e.set(q.x, q.y, false);
    return !remove.empty();
}

} // namespace detail

/// Zhang-Suen thinning followed by staircase removal, to a fixed point. The
/// result is a minimally 8-connected skeleton.
inline EdgeMap thin(EdgeMap e) {
    bool changed = true;
    while (changed) {
        const bool a = detail::zhang_suen_pass(e, true);
        const bool b = detail::zhang_suen_pass(e, false);
        const bool c = detail::remove_redundant(e);
        changed = a || b || c;
    }
    return e;
}

/// Thinning, junction removal (>= 3 neighbours) and isolated-pixel removal,
/// repeated until nothing changes. Every surviving pixel has 1 or 2 neighbours.
inline EdgeMap cleanup(EdgeMap e) {
    bool changed = true;
    while (changed) {
        const EdgeMap before = e;
        e = thin(std::move(e));
        detail::remove_where(e, [](int n) { return n >= 3; });
        detail::remove_where(e, [](int n) { return n == 0; });
        changed = !(e == before);
    }
    return e;
}

/// Splits a cleaned edge map into branchless contours. Open chains are traced
/// endpoint to endpoint first; the remaining loops are cut open at their
/// smallest (y, x) pixel.
inline std::vector<EdgeContour> trace_contours(const EdgeMap& edges) {
    const int w = edges.width();
    const int h = edges.height();
    std::vector<std::uint8_t> visited(std::size_t(w) * std::size_t(h), 0);
    auto seen = [&](Pixel p) -> std::uint8_t& {
        return visited[std::size_t(p.y) * std::size_t(w) + std::size_t(p.x)];
    };
    std::vector<EdgeContour> out;

    auto walk = [&](Pixel start) {
        EdgeContour c;
        Pixel cur = start;
        seen(cur) = 1;
        c.points.push_back(cur);
        for (;;) {
            bool moved = false;
            // 4-neighbours before diagonals keeps the chain tight at corners.
            for (int pass = 0; pass < 2 && !moved; ++pass)
                for (std::size_t k = std::size_t(pass); k < 8; k += 2) {
                    const Pixel n{cur.x + detail::kRing[k].x, cur.y + detail::kRing[k].y};
                    if (edges.on(n.x, n.y) && !seen(n)) {
                        cur = n;
                        seen(cur) = 1;
                        c.points.push_back(cur);
                        moved = true;
                        break;
                    }
                }
            if (!moved) break;
        }
        out.push_back(std::move(c));
    };

    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (edges.on(x, y) && !seen({x, y}) && edges.neighbor_count(x, y) <= 1) walk({x, y});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (edges.on(x, y) && !seen({x, y})) walk({x, y});
    return out;
}

} // namespace sushi
