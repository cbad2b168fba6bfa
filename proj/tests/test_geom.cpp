#include <gtest/gtest.h>

#include <betascan/geom.hpp>

#include <random>

using namespace betascan;
using Vec2d = Eigen::Vector2d;
using Vec3d = Eigen::Vector3d;

namespace {

Mat cols(std::initializer_list<std::initializer_list<double>> pts) {
    int n = static_cast<int>(pts.begin()->size());
    Mat m(n, static_cast<Eigen::Index>(pts.size()));
    int j = 0;
    for (auto& p : pts) {
        int i = 0;
        for (double v : p) m(i++, j) = v;
        ++j;
    }
    return m;
}

AffinePlane line2(double x, double y, double dx, double dy) {
    Mat f(2, 1);
    f << dx, dy;
    return AffinePlane(Vec2d(x, y), f);
}

// Grid search over line angle and offset, step 1e-3.
double grid_minimax_width(const Mat& P) {
    double best = 1e300;
    const double step = 1e-3;
    for (double th = 0.0; th < std::numbers::pi; th += step) {
        double nx = -std::sin(th), ny = std::cos(th);
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < P.cols(); ++i) {
            double s = nx * P(0, i) + ny * P(1, i);
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        for (double c = lo; c <= hi + step; c += step) {
            double w = std::max(std::abs(hi - c), std::abs(c - lo));
            best = std::min(best, w);
        }
    }
    return best;
}

Mat equilateral_in_unit_circle() {
    Mat P(2, 3);
    for (int i = 0; i < 3; ++i) {
        double a = std::numbers::pi / 2 + 2 * std::numbers::pi * i / 3;
        P(0, i) = std::cos(a);
        P(1, i) = std::sin(a);
    }
    return P;
}

}  // namespace

TEST(DistPointPlane, Examples) {
    EXPECT_DOUBLE_EQ(dist_point_plane(Vec2d(0, 3), line2(0, 0, 1, 0)), 3.0);
    EXPECT_NEAR(dist_point_plane(Vec2d(2, 0), line2(0, 0, 1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(dist_point_plane(Vec2d(1, 0), line2(0, 0, 1, 1)), std::sqrt(2.0) / 2, 1e-15);
    EXPECT_THROW(dist_point_plane(Vec3d(1, 0, 0), line2(0, 0, 1, 0)), InputError);
}

TEST(ProjectPlane, Examples) {
    EXPECT_TRUE(project_plane(Vec2d(3, 0), line2(0, 0, 1, 0)).isApprox(Vec2d(3, 0)));
    EXPECT_NEAR((project_plane(Vec2d(0, 3), line2(0, 0, 1, 0)) - Vec2d(0, 0)).norm(), 0.0, 1e-15);
    EXPECT_NEAR((project_plane(Vec2d(1, 1), line2(0, 0, 0, 1)) - Vec2d(0, 1)).norm(), 0.0, 1e-15);
}

TEST(ProjectPlane, DistanceIdentityAndIdempotence) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        Mat f(4, 2);
        for (int i = 0; i < 8; ++i) f(i % 4, i / 4) = g(rng);
        Vec b(4), x(4);
        for (int i = 0; i < 4; ++i) b[i] = g(rng), x[i] = g(rng);
        AffinePlane P(b, f);
        Vec px = project_plane(x, P);
        EXPECT_NEAR(dist_point_plane(x, P), (x - px).norm(), 1e-12);
        EXPECT_NEAR((project_plane(px, P) - px).norm(), 0.0, 1e-12);
    }
}

TEST(LocalHausdorff, Examples) {
    const int m = 4001;
    Mat ax(2, m), ay(2, m);
    for (int i = 0; i < m; ++i) {
        double s = -2.0 + 1e-3 * i;
        ax.col(i) = Vec2d(s, 0);
        ay.col(i) = Vec2d(0, s);
    }
    PointCloud E(ax, 1e-3), F(ay, 1e-3);
    Ball B(Vec2d(0, 0), 1.0);
    auto v = local_hausdorff(E, F, B);
    ASSERT_TRUE(v.has_value());
    EXPECT_NEAR(*v, 1.0, 2e-3);
    EXPECT_NEAR(*local_hausdorff(E, E, B), 0.0, 1e-15);
    EXPECT_NEAR(*local_hausdorff(F, E, B), *v, 1e-15);

    Mat ax2(2, m + 1);
    ax2.leftCols(m) = ax;
    ax2.col(m) = Vec2d(5, 5);
    EXPECT_DOUBLE_EQ(*local_hausdorff(PointCloud(ax2, 1e-3), F, B), *v);

    Ball far(Vec2d(10, 10), 1.0);
    EXPECT_FALSE(local_hausdorff(E, F, far).has_value());
}

TEST(PlaneAngle, Examples) {
    auto x = line2(0, 0, 1, 0), y = line2(3, 4, 0, 1);
    EXPECT_NEAR(plane_angle(x, x), 0.0, 1e-15);
    EXPECT_NEAR(plane_angle(x, y), 1.0, 1e-15);
    EXPECT_NEAR(plane_angle(x, line2(0, 0, 1, 1)), std::sqrt(0.5), 1e-12);
}

// Sampled-sphere oracle for the unit-ball bilateral distance of two linear planes.
static double sampled_angle(const AffinePlane& P, const AffinePlane& Q, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    double best = 0.0;
    for (int s = 0; s < 4000; ++s) {
        for (int side = 0; side < 2; ++side) {
            const AffinePlane& A = side ? Q : P;
            const AffinePlane& Bp = side ? P : Q;
            Vec c(A.dim());
            for (int i = 0; i < A.dim(); ++i) c[i] = g(rng);
            Vec u = A.frame() * c.normalized();
            Vec v = u - Bp.frame() * (Bp.frame().transpose() * u);
            best = std::max(best, v.norm());
        }
    }
    return best;
}

TEST(PlaneAngle, TriangleInequalityAndSamplingOracle) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    auto rnd = [&](int n, int d) {
        Mat f(n, d);
        for (int i = 0; i < n * d; ++i) f(i % n, i / n) = g(rng);
        Vec b(n);
        for (int i = 0; i < n; ++i) b[i] = g(rng);
        return AffinePlane(b, f);
    };
    for (int t = 0; t < 1000; ++t) {
        int n = 2 + t % 3, d = 1 + (t / 3) % (n - 1);
        auto a = rnd(n, d), b = rnd(n, d), c = rnd(n, d);
        EXPECT_LE(plane_angle(a, c), plane_angle(a, b) + plane_angle(b, c) + 1e-9);
        EXPECT_NEAR(plane_angle(a, b), plane_angle(b, a), 1e-12);
    }
    for (int t = 0; t < 20; ++t) {
        auto a = rnd(3, 2), b = rnd(3, 2);
        double s = sampled_angle(a, b, rng);
        EXPECT_LE(s, plane_angle(a, b) + 1e-12);
        EXPECT_GE(s, plane_angle(a, b) - 5e-3);
    }
}

TEST(Eta, Examples) {
    EXPECT_NEAR(eta(cols({{0, 0}, {1, 1}, {2, 2}})), 0.0, 1e-15);
    Mat tri = cols({{0, 0}, {1, 0}, {0.5, std::sqrt(3.0) / 2}});
    double height = std::sqrt(1.0 - 0.25);
    EXPECT_NEAR(eta(tri), height / 1.0, 1e-12);
    EXPECT_NEAR(eta(tri), std::sqrt(3.0) / 2, 1e-12);
    EXPECT_NEAR(eta(cols({{0, 0}, {0, 0}, {1, 0.3}})), 0.0, 1e-15);
    EXPECT_THROW(eta(cols({{1, 1}, {1, 1}, {1, 1}})), InputError);
}

TEST(Eta, RigidMotionAndScaleInvariance) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 200; ++t) {
        Mat X(3, 3);
        for (int i = 0; i < 9; ++i) X(i % 3, i / 3) = g(rng);
        Mat R = Eigen::HouseholderQR<Mat>(Mat::Random(3, 3)).householderQ();
        Vec sh(3);
        sh << g(rng), g(rng), g(rng);
        double s = 0.1 + std::abs(g(rng));
        Mat Y = (s * R * X).colwise() + sh;
        double a = eta(X), b = eta(Y);
        EXPECT_GE(a, 0.0);
        EXPECT_LE(a, 1.0);
        EXPECT_NEAR(a, b, 1e-12);
    }
}

TEST(FitPlanePca, Examples) {
    Mat P = cols({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 3, 0}});
    auto L = fit_plane_pca(P, 2);
    for (int i = 0; i < P.cols(); ++i) EXPECT_NEAR(L.dist(P.col(i)), 0.0, 1e-12);

    auto one = fit_plane_pca(cols({{3, 4}}), 1);
    EXPECT_NEAR(one.frame()(0, 0), 1.0, 1e-15);
    EXPECT_NEAR((one.base() - Vec2d(3, 4)).norm(), 0.0, 1e-15);

    Mat cross = cols({{1, 0}, {-1, 0}, {0, 1}, {0, -1}});
    // eigen-decomposition oracle: covariance is a multiple of the identity
    Vec c = cross.rowwise().mean();
    Mat C = (cross.colwise() - c) * (cross.colwise() - c).transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    EXPECT_NEAR(es.eigenvalues()(0), es.eigenvalues()(1), 1e-12);
    auto L2 = fit_plane_pca(cross, 1);
    EXPECT_NEAR(std::abs(L2.frame()(0, 0)), 1.0, 1e-12);
    double r1 = 0, r2 = 0;
    auto L3 = AffinePlane(Vec2d(0, 0), Mat(Vec2d(0, 1)));
    for (int i = 0; i < 4; ++i) r1 += std::pow(L2.dist(cross.col(i)), 2), r2 += std::pow(L3.dist(cross.col(i)), 2);
    EXPECT_NEAR(r1, r2, 1e-12);
}

TEST(FitPlaneMinimax, Examples) {
    Mat col = cols({{0, 0}, {1, 1}, {3, 3}, {-2, -2}});
    EXPECT_NEAR(minimax_fit(col, 1).width, 0.0, 1e-12);

    Mat tri = equilateral_in_unit_circle();
    double oracle = grid_minimax_width(tri);
    EXPECT_NEAR(oracle, 0.75, 2e-3);
    auto f = fit_plane_minimax(PointCloud(tri, 0.1), Ball(Vec2d(0, 0), 1.0), 1);
    ASSERT_TRUE(f.has_value());
    EXPECT_NEAR(f->width, 0.75, 1e-9);

    Mat sq = cols({{1, 1}, {1, -1}, {-1, 1}, {-1, -1}});
    EXPECT_NEAR(grid_minimax_width(sq), 1.0, 2e-3);
    auto g = fit_plane_minimax(PointCloud(sq, 0.1), Ball(Vec2d(0, 0), std::sqrt(2.0)), 1);
    EXPECT_NEAR(g->width, 1.0, 1e-9);

    EXPECT_FALSE(fit_plane_minimax(PointCloud(sq, 0.1), Ball(Vec2d(10, 10), 1.0), 1).has_value());
}

TEST(FitPlaneMinimax, NeverWorseThanPca) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (int t = 0; t < 100; ++t) {
        int n = 2 + t % 3, m = 5 + t % 60;
        Mat P(n, m);
        for (int i = 0; i < n * m; ++i) P(i % n, i / n) = g(rng) * (i % n == 0 ? 3.0 : 1.0);
        int d = 1 + t % (n - 1);
        auto pca = fit_plane_pca(P, d);
        double res = 0;
        for (int i = 0; i < m; ++i) res = std::max(res, pca.dist(P.col(i)));
        auto f = minimax_fit(P, d);
        EXPECT_LE(f.width, res + 1e-12);
        double achieved = 0;
        for (int i = 0; i < m; ++i) achieved = std::max(achieved, f.plane.dist(P.col(i)));
        EXPECT_NEAR(achieved, f.width, 1e-9 * (1 + f.width));
    }
}

TEST(MinEnclosingBall, MatchesBruteForceIn2D) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 50; ++t) {
        Mat W(2, 12);
        for (int i = 0; i < 24; ++i) W(i % 2, i / 2) = u(rng);
        auto mb = min_enclosing_ball(W);
        // brute force over pairs and triples
        double best = 1e300;
        auto test = [&](const Vec& c) {
            double r = 0;
            for (int i = 0; i < W.cols(); ++i) r = std::max(r, (W.col(i) - c).norm());
            best = std::min(best, r);
        };
        for (int i = 0; i < 12; ++i)
            for (int j = i + 1; j < 12; ++j) {
                test(0.5 * (W.col(i) + W.col(j)));
                for (int k = j + 1; k < 12; ++k) {
                    Vec a = W.col(i), b = W.col(j), c = W.col(k);
                    double dd = 2 * (a.x() * (b.y() - c.y()) + b.x() * (c.y() - a.y()) + c.x() * (a.y() - b.y()));
                    if (std::abs(dd) < 1e-14) continue;
                    double ux = (a.squaredNorm() * (b.y() - c.y()) + b.squaredNorm() * (c.y() - a.y()) + c.squaredNorm() * (a.y() - b.y())) / dd;
                    double uy = (a.squaredNorm() * (c.x() - b.x()) + b.squaredNorm() * (a.x() - c.x()) + c.squaredNorm() * (b.x() - a.x())) / dd;
                    test(Vec2d(ux, uy));
                }
            }
        EXPECT_NEAR(mb.radius, best, 1e-9);
    }
}

TEST(GlobalParams, DefaultsAndValidation) {
    auto g = GlobalParams::defaults(2);
    EXPECT_NEAR(g.c1, std::numbers::pi * 0.25 / (8.0 * 9.0), 1e-15);
    EXPECT_NEAR(g.c2, 324.0 * g.kappa, 1e-12);
    EXPECT_LT(g.tau, 1.0 / 3.0);
    EXPECT_NO_THROW(g.validate(3));
    g.tau = 0.4;
    EXPECT_THROW(g.validate(3), InputError);
    auto h = GlobalParams::defaults(3);
    h.p = 6.0;
    EXPECT_THROW(h.validate(4), InputError);
    h.p = 5.9;
    EXPECT_NO_THROW(h.validate(4));
}

TEST(Diameter, ExactOnLargeSets) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    Mat P(3, 1500);
    for (int i = 0; i < P.size(); ++i) P(i % 3, i / 3) = g(rng);
    double brute = 0;
    for (int i = 0; i < P.cols(); ++i)
        for (int j = i + 1; j < P.cols(); ++j) brute = std::max(brute, (P.col(i) - P.col(j)).norm());
    EXPECT_DOUBLE_EQ(diameter(P), brute);
}
