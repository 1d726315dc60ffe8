#include <sushi/ellipse.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace sushi;

namespace {

std::vector<Point2d> sample(const Ellipse& e, int n, double phase = 0.0) {
    std::vector<Point2d> pts;
    for (int i = 0; i < n; ++i) pts.push_back(ellipse_point(e, phase + 2.0 * kPi * i / n));
    return pts;
}

Ellipse random_ellipse(std::mt19937& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Ellipse e;
    e.p = -500 + 1000 * u(rng);
    e.q = -500 + 1000 * u(rng);
    e.A = 5 + 295 * u(rng);
    e.B = e.A * (0.2 + 0.75 * u(rng));
    e.alpha = -kPi / 2 + kPi * u(rng);
    return e;
}

void expect_same_ellipse(const Ellipse& got, const Ellipse& want, double rel) {
    const double scale = want.A;
    EXPECT_NEAR(got.p, want.p, rel * scale);
    EXPECT_NEAR(got.q, want.q, rel * scale);
    EXPECT_NEAR(got.A, want.A, rel * scale);
    EXPECT_NEAR(got.B, want.B, rel * scale);
    EXPECT_NEAR(orientation_distance(got.alpha, want.alpha), 0.0, rel);
}

FitResult fit_of(Ellipse e) {
    FitResult f;
    f.ellipse = e;
    return f;
}

} // namespace

TEST(EllipsePoint, Examples) {
    const Point2d a = ellipse_point({0, 0, 2, 1, 0}, 0.0);
    EXPECT_NEAR(a.x, 2.0, 1e-15);
    EXPECT_NEAR(a.y, 0.0, 1e-15);
    const Point2d b = ellipse_point({0, 0, 2, 1, kPi / 2}, 0.0);
    EXPECT_NEAR(b.x, 0.0, 1e-15);
    EXPECT_NEAR(b.y, 2.0, 1e-15);
    const Point2d c = ellipse_point({3, -2, 5, 2, kPi / 6}, kPi / 4);
    const double r2 = std::sqrt(0.5);
    EXPECT_NEAR(c.x, 3 + 5 * r2 * std::cos(kPi / 6) - 2 * r2 * std::sin(kPi / 6), 1e-12);
    EXPECT_NEAR(c.y, -2 + 5 * r2 * std::sin(kPi / 6) + 2 * r2 * std::cos(kPi / 6), 1e-12);
}

TEST(BottomY, Examples) {
    EXPECT_DOUBLE_EQ(bottom_y({0, 0, 2, 1, 0}), 1.0);
    EXPECT_NEAR(bottom_y({0, 0, 2, 1, kPi / 2}), 2.0, 1e-15);
    EXPECT_DOUBLE_EQ(bottom_y({0, 5, 2, 1, 0}), 6.0);
}

TEST(BottomY, MatchesDenseSampling) {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const Ellipse e = random_ellipse(rng);
        double best = -1e300;
        for (int i = 0; i < 200000; ++i) best = std::max(best, ellipse_point(e, 2 * kPi * i / 200000).y);
        EXPECT_NEAR(bottom_y(e), best, 1e-6 * e.A);
    }
}

TEST(SegmentError, Examples) {
    const Ellipse e{0, 0, 2, 1, 0};
    EXPECT_NEAR(segment_error(e, ellipse_point(e, 1.1)), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(segment_error(e, {0, 0}), 1.0);
    EXPECT_DOUBLE_EQ(segment_error(e, {3, 0}), 0.5);
}

TEST(FitEllipse, RecoversSampledEllipse) {
    const Ellipse truth{3, -2, 5, 2, kPi / 6};
    const FitResult r = fit_ellipse(sample(truth, 20));
    expect_same_ellipse(r.ellipse, truth, 1e-6);
    EXPECT_LT(r.residual, 1e-9);
}

TEST(FitEllipse, CircleReportsZeroOrientation) {
    const FitResult r = fit_ellipse(sample({10, 20, 4, 4, 0.7}, 12));
    EXPECT_NEAR(r.ellipse.A, 4.0, 1e-9);
    EXPECT_NEAR(r.ellipse.B, 4.0, 1e-9);
    EXPECT_EQ(r.ellipse.alpha, 0.0);
}

TEST(FitEllipse, Errors) {
    std::vector<Point2d> line;
    for (int i = 0; i < 6; ++i) line.push_back({double(i), 2.0 * i + 1});
    EXPECT_THROW(fit_ellipse(line), DegenerateConic);
    EXPECT_THROW(fit_ellipse(sample({0, 0, 3, 2, 0}, 5)), TooFewPoints);
}

TEST(FitEllipse, HyperbolaIsRejected) {
    std::vector<Point2d> pts;
    for (double t = -1.5; t <= 1.5; t += 0.25) pts.push_back({std::cosh(t), std::sinh(t)});
    for (double t = -1.5; t <= 1.5; t += 0.25) pts.push_back({-std::cosh(t), std::sinh(t)});
    EXPECT_THROW(fit_ellipse(pts), DegenerateConic);
}

TEST(FitEllipse, RoundTripRandom) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(0.0, 2 * kPi);
    for (int trial = 0; trial < 300; ++trial) {
        const Ellipse truth = normalized(random_ellipse(rng));
        std::vector<Point2d> pts;
        for (int i = 0; i < 6 + int(rng() % 30); ++i) pts.push_back(ellipse_point(truth, u(rng)));
        const FitResult r = fit_ellipse(pts);
        expect_same_ellipse(r.ellipse, truth, 1e-6);
        EXPECT_LT(r.residual, 1e-9);
    }
}

TEST(FitEllipse, OrderInvariant) {
    std::mt19937 rng(5);
    const Ellipse truth{100, 80, 60, 25, 0.2};
    std::vector<Point2d> pts;
    std::normal_distribution<double> noise(0.0, 0.5);
    for (int i = 0; i < 40; ++i) {
        Point2d p = ellipse_point(truth, 0.1 * i);
        pts.push_back({p.x + noise(rng), p.y + noise(rng)});
    }
    const Ellipse ref = fit_ellipse(pts).ellipse;
    for (int k = 0; k < 10; ++k) {
        std::shuffle(pts.begin(), pts.end(), rng);
        expect_same_ellipse(fit_ellipse(pts).ellipse, ref, 1e-9);
    }
}

TEST(Consensus, RemovesDisplacedOutliers) {
    std::vector<FitResult> fits;
    for (int i = 0; i < 5; ++i) fits.push_back(fit_of({200, 100.0 + 30 * i, 80, 30, 0.0}));
    fits.push_back(fit_of({200 + 5 * 80, 150, 80, 30, 0.0}));
    fits.push_back(fit_of({200 - 5 * 80, 120, 80, 30, 0.0}));
    const auto kept = consensus_filter(fits);
    ASSERT_EQ(kept.size(), 5u);
    for (const auto& f : kept) EXPECT_EQ(f.ellipse.p, 200.0);
}

TEST(Consensus, UnanimousAndSingle) {
    std::vector<FitResult> same(4, fit_of({10, 10, 5, 3, 0.1}));
    EXPECT_EQ(consensus_filter(same).size(), 4u);
    EXPECT_EQ(consensus_filter({fit_of({1, 2, 3, 2, 0})}).size(), 1u);
    EXPECT_TRUE(consensus_filter({}).empty());
}

TEST(Consensus, SubsetOfInputAndSeedDeterministic) {
    std::mt19937 rng(9);
    std::vector<FitResult> fits;
    for (int i = 0; i < 80; ++i) fits.push_back(fit_of(normalized(random_ellipse(rng))));
    ConsensusParams params;
    params.seed = 1234;
    const auto a = consensus_filter(fits, params);
    const auto b = consensus_filter(fits, params);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].ellipse, b[i].ellipse);
        EXPECT_TRUE(std::any_of(fits.begin(), fits.end(),
                                [&](const FitResult& f) { return f.ellipse == a[i].ellipse; }));
    }
}

TEST(Dedup, KeepsLowerOfDoubleBorder) {
    // bottom_y = q + B for alpha = 0
    const auto kept = dedup_double_borders({fit_of({0, 170, 50, 30, 0}), fit_of({0, 168, 50, 30, 0})}, 5.0);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_DOUBLE_EQ(bottom_y(kept[0].ellipse), 200.0);
}

TEST(Dedup, SeparatedEllipsesAllKept) {
    const auto kept = dedup_double_borders(
        {fit_of({0, 110, 50, 30, 0}), fit_of({0, 170, 50, 30, 0}), fit_of({0, 140, 50, 30, 0})}, 5.0);
    ASSERT_EQ(kept.size(), 3u);
    EXPECT_DOUBLE_EQ(bottom_y(kept[0].ellipse), 200.0);
    EXPECT_DOUBLE_EQ(bottom_y(kept[2].ellipse), 140.0);
    EXPECT_TRUE(dedup_double_borders({}, 5.0).empty());
}

TEST(Dedup, GapsRespectMinimum) {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(0.0, 300.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<FitResult> fits;
        for (int i = 0; i < 30; ++i) fits.push_back(fit_of({0, u(rng), 40, 20, 0}));
        const auto kept = dedup_double_borders(fits, 12.0);
        for (std::size_t i = 0; i + 1 < kept.size(); ++i)
            EXPECT_GE(bottom_y(kept[i].ellipse) - bottom_y(kept[i + 1].ellipse), 12.0);
    }
}

TEST(Dedup, DefaultGapIsFractionOfMedianMinorRadius) {
    EXPECT_DOUBLE_EQ(default_min_gap({fit_of({0, 0, 50, 20, 0}), fit_of({0, 0, 50, 40, 0}),
                                      fit_of({0, 0, 50, 30, 0})}),
                     0.35 * 30.0);
}
