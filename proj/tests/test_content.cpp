#include <gtest/gtest.h>

#include <betascan/content.hpp>

#include <random>

using namespace betascan;

namespace {

Mat line_pts(int N, double len) {
    Mat P(2, N);
    for (int i = 0; i < N; ++i) P.col(i) = Eigen::Vector2d(len * i / (N - 1), 0.0);
    return P;
}

ContentConfig cfg_for(int d, double h) {
    auto g = GlobalParams::defaults(d);
    return ContentConfig::from(g, h);
}

// Direct evaluation of the good-cover conditions on a dense set of scales.
struct BruteVerdict {
    bool lr = true, ur = true;
};

BruteVerdict brute_good(const Mat& P, const Ball& B, const std::vector<Ball>& cover, const ContentConfig& cfg) {
    BruteVerdict v;
    std::vector<int> ids;
    for (int i = 0; i < P.cols(); ++i)
        if (B.contains(P.col(i))) ids.push_back(i);
    const int d = cfg.d;
    for (int i : ids) {
        Vec x = P.col(i);
        // per ball: closest point of E cap B inside it
        std::vector<double> e(cover.size(), std::numeric_limits<double>::infinity());
        for (size_t b = 0; b < cover.size(); ++b)
            for (int j : ids)
                if (cover[b].contains(P.col(j))) e[b] = std::min(e[b], (P.col(j) - x).norm());
        std::vector<double> scales;
        for (size_t b = 0; b < cover.size(); ++b) {
            if (std::isfinite(e[b])) {
                scales.push_back(e[b]);
                scales.push_back(e[b] * (1 + 1e-9));
            }
            scales.push_back(cover[b].radius);
        }
        scales.push_back(B.radius * (1 - 1e-12));
        std::sort(scales.begin(), scales.end());
        size_t n0 = scales.size();
        for (size_t k = 0; k + 1 < n0; ++k) scales.push_back(0.5 * (scales[k] + scales[k + 1]));
        for (double r : scales) {
            if (!(r > 0 && r < B.radius)) continue;
            double S = 0, U = 0;
            for (size_t b = 0; b < cover.size(); ++b)
                if (e[b] < r) {
                    S += std::pow(cover[b].radius, d);
                    if (cover[b].radius <= r) U += std::pow(cover[b].radius, d);
                }
            if (S < cfg.c1 * std::pow(r, d)) v.lr = false;
            if (U > cfg.c2 * std::pow(r, d) * (1 + 1e-12)) v.ur = false;
        }
    }
    return v;
}

}  // namespace

TEST(CheckGood, SingleBallIsGood) {
    PointCloud E(line_pts(50, 1.0), 0.02);
    Ball B(Vec::Zero(2), 1.0);
    auto rep = check_good(BallCover{{B}}, E, B, cfg_for(1, 0.02));
    EXPECT_TRUE(rep.good());
    EXPECT_TRUE(rep.to_json()["good"].get<bool>());
}

TEST(CheckGood, UncoveredPointReported) {
    PointCloud E(line_pts(11, 1.0), 0.1);
    Ball B(Vec::Zero(2), 2.0);
    auto rep = check_good(BallCover{{Ball(Vec::Zero(2), 0.5)}}, E, B, cfg_for(1, 0.1));
    EXPECT_FALSE(rep.covers_ok);
    EXPECT_FALSE(rep.good());
    EXPECT_GE(rep.uncovered_point, 6);
}

TEST(CheckGood, TinyBallsFailLowerRegularity) {
    // many minute balls carry too little mass at large scales
    PointCloud E(line_pts(101, 1.0), 0.01);
    Ball B(Vec::Zero(2), 1.0);
    std::vector<Ball> cov;
    for (int i = 0; i < 101; ++i) cov.emplace_back(E.point(i), 1e-4);
    auto rep = check_good(BallCover{cov}, E, B, cfg_for(1, 0.01));
    EXPECT_TRUE(rep.covers_ok);
    EXPECT_FALSE(rep.lr_ok);
    EXPECT_FALSE(rep.to_json().contains("ur_witness"));
    EXPECT_TRUE(rep.to_json().contains("lr_witness"));
}

TEST(CheckGood, StackedBallsFailUpperRegularity) {
    PointCloud E(line_pts(21, 1.0), 0.05);
    Ball B(Vec::Zero(2), 1.0);
    std::vector<Ball> cov{B};
    for (int k = 0; k < 2000; ++k) cov.emplace_back(Vec::Zero(2), 0.05);
    auto cfg = cfg_for(1, 0.05);
    auto rep = check_good(BallCover{cov}, E, B, cfg);
    EXPECT_FALSE(rep.ur_ok);
    EXPECT_GT(rep.ur_worst.sum, rep.ur_worst.bound);
}

TEST(CheckGood, AgreesWithDirectEvaluation) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-1, 1), lr(-6, 0);
    int disagreements = 0, goods = 0;
    for (int t = 0; t < 300; ++t) {
        int N = 5 + t % 25;
        Mat P(2, N);
        for (int i = 0; i < N; ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.2 * u(rng));
        PointCloud E(P, 0.01);
        Ball B(Vec::Zero(2), 0.8);
        auto cfg = cfg_for(1, 0.01);
        cfg.c2 = 0.5 + 4.0 * (t % 3);
        std::vector<Ball> cov;
        for (int i = 0; i < N; ++i)
            if (B.contains(P.col(i))) cov.emplace_back(P.col(i), std::exp(lr(rng)) * (t % 2 ? 1.0 : 0.3));
        if (cov.empty()) continue;
        if (t % 4 == 0) cov.push_back(B);
        auto rep = check_good(BallCover{cov}, E, B, cfg);
        auto bv = brute_good(P, B, cov, cfg);
        if (rep.lr_ok != bv.lr || rep.ur_ok != bv.ur) ++disagreements;
        goods += rep.good();
    }
    EXPECT_EQ(disagreements, 0);
    EXPECT_GT(goods, 5);
}

TEST(ExactSmallContent, PairAndFloor) {
    Mat X(1, 2);
    X << 0.0, 1.0;
    EXPECT_DOUBLE_EQ(detail::exact_small_content(X, {0, 1}, 1, 0.005), 0.01);
    EXPECT_DOUBLE_EQ(detail::exact_small_content(X, {0, 1}, 1, 0.8), 0.8);
    Mat Y(2, 3);
    Y << 0, 1, 0.5, 0, 0, 0.1;
    EXPECT_DOUBLE_EQ(detail::exact_small_content(Y, {0, 1, 2}, 1, 0.6), 0.6);
    EXPECT_DOUBLE_EQ(detail::exact_small_content(Y, {0, 1, 2}, 1, 0.01), 0.03);
    EXPECT_DOUBLE_EQ(detail::exact_small_content(Y, {0, 1, 2}, 1, 0.2), 0.2 + 0.5 * std::sqrt(0.26));
}

TEST(DyadicContent, DenseSegmentNearHalfLength) {
    // balls covering a sample with gaps g of a segment of length L satisfy sum r >= (L/2) / (1 + g/h)
    auto cfg = cfg_for(1, 0.01);
    for (double L : {0.3, 1.0, 7.0}) {
        int N = static_cast<int>(L / 0.0005) + 1;
        double g = L / (N - 1);
        double v = dyadic_content(line_pts(N, L), cfg);
        EXPECT_LE(v, 0.5 * L + 1e-12);
        EXPECT_GE(v, 0.5 * L / (1 + g / cfg.h) - 1e-12);
    }
    EXPECT_NEAR(dyadic_content_diameter(line_pts(2001, 1.0), cfg), 2 * dyadic_content(line_pts(2001, 1.0), cfg), 1e-12);
    EXPECT_EQ(dyadic_content(Mat(2, 0), cfg), 0.0);
}

TEST(DyadicContent, SparseSampleIsDust) {
    // points farther apart than h cost one floor ball each
    auto cfg = cfg_for(1, 0.01);
    EXPECT_NEAR(dyadic_content(line_pts(200, 7.0), cfg), 200 * 0.005, 1e-12);
}

TEST(DyadicContent, FloorForSinglePoint) {
    auto cfg = cfg_for(2, 0.1);
    Mat X = Mat::Zero(3, 1);
    EXPECT_DOUBLE_EQ(dyadic_content(X, cfg), 0.05 * 0.05);
}

TEST(DyadicContent, DustCheaperThanSpan) {
    // four far-apart tiny clusters cost less than one ball around all of them
    auto cfg = cfg_for(1, 0.001);
    Mat X(2, 8);
    for (int i = 0; i < 4; ++i) {
        X.col(2 * i) = Eigen::Vector2d(i, 0);
        X.col(2 * i + 1) = Eigen::Vector2d(i + 0.002, 0);
    }
    double v = dyadic_content(X, cfg);
    EXPECT_LT(v, 0.1);
    EXPECT_GE(v, 4 * 0.0005);
}

TEST(DyadicContent, HomogeneousUnderScaling) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int d : {1, 2}) {
        Mat X(3, 150);
        for (int i = 0; i < X.size(); ++i) X(i) = u(rng);
        auto cfg = cfg_for(d, 0.02);
        double a = dyadic_content(X, cfg);
        for (double s : {0.5, 2.0, 8.0}) {
            auto c2 = cfg;
            c2.h *= s;
            EXPECT_NEAR(dyadic_content(s * X, c2), std::pow(s, d) * a, 1e-9 * std::pow(s, d) * a);
        }
    }
}

TEST(DyadicContent, MonotoneInSet) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    Mat X(2, 120);
    for (int i = 0; i < X.size(); ++i) X(i) = u(rng);
    Vec lo = Vec::Zero(2);
    std::vector<int> A;
    double prev = 0;
    for (int i = 0; i < 120; ++i) {
        A.push_back(i);
        double v = dyadic_content_anchored(X, A, lo, 1.0, 1, 0.01);
        ASSERT_GE(v, prev - 1e-15);
        prev = v;
    }
}

TEST(ContentFamily, RestrictedBoundsAndOrdering) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    Mat P(2, 300);
    for (int i = 0; i < 300; ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.05 * u(rng));
    Ball B(Vec::Zero(2), 0.7);
    auto cfg = cfg_for(1, 0.01);
    std::vector<AdaptiveSeed> seeds{{AffinePlane(Vec::Zero(2), Eigen::Vector2d(1, 0)), 0.5}};
    ContentFamily fam(P, B, cfg, seeds, true);
    ASSERT_GE(fam.good_count(), 2);
    const int m = fam.local().size();
    std::vector<int> all(m);
    std::iota(all.begin(), all.end(), 0);
    double R = fam.restricted(all), H = fam.hausdorff(all);
    EXPECT_LE(R, B.radius + 1e-15);
    EXPECT_LE(H, R + 1e-15);
    EXPECT_GT(H, 0.0);
    std::vector<int> half(all.begin(), all.begin() + m / 2);
    EXPECT_LE(fam.restricted(half), R + 1e-15);
    EXPECT_EQ(fam.restricted({}), 0.0);
}

TEST(ContentFamily, UncheckedContainsCheckedCovers) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    Mat P(2, 200);
    for (int i = 0; i < 200; ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.3 * u(rng));
    Ball B(Vec::Zero(2), 0.9);
    auto cfg = cfg_for(1, 0.01);
    ContentFamily good(P, B, cfg, {}, true), all(P, B, cfg, {}, false);
    std::vector<double> dist(good.local().size());
    for (int i = 0; i < good.local().size(); ++i) dist[i] = std::abs(good.local().X()(1, i));
    double a = all.level_integral(dist, 1.0, false);
    double b = good.level_integral(dist, 1.0, true);
    EXPECT_LE(a, b + 1e-15);
    EXPECT_LE(b, 1.0);
}

TEST(ContentFamily, LevelIntegralMatchesChoquet) {
    // for p = 1 the level integral is the Choquet integral of u/r
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1, 1);
    Mat P(2, 40);
    for (int i = 0; i < 40; ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.2 * u(rng));
    Ball B(Vec::Zero(2), 1.0);
    auto cfg = cfg_for(1, 0.02);
    ContentFamily fam(P, B, cfg, {}, true);
    const int m = fam.local().size();
    std::vector<double> dist(m), f(m);
    for (int i = 0; i < m; ++i) {
        dist[i] = std::abs(fam.local().X()(1, i));
        f[i] = dist[i] / B.radius;
    }
    double I = fam.level_integral(dist, 1.0, true);
    double C = choquet(f, [&](const std::vector<int>& A) { return fam.restricted(A); });
    EXPECT_NEAR(I, C, 1e-12);
}

TEST(ContentFamily, InheritedCoversAreChecked) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    Mat P(2, 250);
    for (int i = 0; i < 250; ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.02 * u(rng));
    auto cfg = cfg_for(1, 0.01);
    ContentFamily big(P, Ball(Vec::Zero(2), 1.0), cfg);
    ContentFamily small(P, Ball(Vec::Zero(2), 0.5), cfg);
    small.inherit(big);
    int n = 0;
    for (const auto& c : small.covers()) n += c.good();
    EXPECT_GE(n, 1);
}

TEST(Choquet, Examples) {
    auto count = [](const std::vector<int>& A) { return static_cast<double>(A.size()); };
    EXPECT_DOUBLE_EQ(choquet({1.0, 2.0, 3.0}, count), 6.0);
    EXPECT_DOUBLE_EQ(choquet({0.0, 0.0}, count), 0.0);
    auto cap = [](const std::vector<int>& A) { return A.empty() ? 0.0 : 1.0; };
    EXPECT_DOUBLE_EQ(choquet({0.5, 2.0}, cap), 2.0);
    EXPECT_THROW(choquet({-1.0}, count), InputError);
}

TEST(Choquet, MonotoneAndHomogeneous) {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0, 1);
    auto sq = [](const std::vector<int>& A) { return std::sqrt(static_cast<double>(A.size())); };
    for (int t = 0; t < 200; ++t) {
        std::vector<double> f(10), g(10);
        for (int i = 0; i < 10; ++i) {
            f[i] = u(rng);
            g[i] = f[i] + u(rng);
        }
        ASSERT_LE(choquet(f, sq), choquet(g, sq) + 1e-12);
        std::vector<double> f3 = f;
        for (auto& x : f3) x *= 3;
        ASSERT_NEAR(choquet(f3, sq), 3 * choquet(f, sq), 1e-12);
    }
}

TEST(RestrictedContent, RejectsForeignSubset) {
    PointCloud E(line_pts(20, 2.0), 0.1);
    Ball B(Vec::Zero(2), 0.5);
    auto cfg = cfg_for(1, 0.1);
    EXPECT_THROW(restricted_content({19}, E, B, cfg), InputError);
    EXPECT_GT(restricted_content({0, 1}, E, B, cfg), 0.0);
}

TEST(Packing, FrozenDefaultsDominateFreshTrials) {
    for (int d = 1; d <= 3; ++d) EXPECT_LE(estimate_kappa(d, 500, 99), GlobalParams::default_kappa(d) * (1 + 1e-9));
}
