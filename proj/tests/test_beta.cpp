#include <gtest/gtest.h>

#include <betascan/beta.hpp>

#include <random>

using namespace betascan;

namespace {

Mat pts2(std::initializer_list<std::pair<double, double>> xs) {
    Mat P(2, static_cast<int>(xs.size()));
    int i = 0;
    for (auto [x, y] : xs) P.col(i++) = Eigen::Vector2d(x, y);
    return P;
}

AffinePlane xaxis() { return AffinePlane(Vec::Zero(2), Eigen::Vector2d(1, 0)); }

// Minimax line width by angle grid with the exact best offset per angle.
double grid_width(const Mat& P) {
    double best = 1e300;
    for (int k = 0; k < 31416; ++k) {
        double a = k * 1e-4;
        Eigen::Vector2d nrm(-std::sin(a), std::cos(a));
        double lo = 1e300, hi = -1e300;
        for (int i = 0; i < P.cols(); ++i) {
            double s = nrm.dot(P.col(i));
            lo = std::min(lo, s);
            hi = std::max(hi, s);
        }
        best = std::min(best, 0.5 * (hi - lo));
    }
    return best;
}

// Smallest enclosing circle by enumeration of pair and triple circles.
double brute_meb(const std::vector<Eigen::Vector2d>& S) {
    if (S.size() == 1) return 0.0;
    auto ok = [&](const Eigen::Vector2d& c, double r) {
        for (const auto& p : S)
            if ((p - c).norm() > r * (1 + 1e-12) + 1e-15) return false;
        return true;
    };
    double best = 1e300;
    for (size_t i = 0; i < S.size(); ++i)
        for (size_t j = i + 1; j < S.size(); ++j) {
            Eigen::Vector2d c = 0.5 * (S[i] + S[j]);
            double r = 0.5 * (S[i] - S[j]).norm();
            if (ok(c, r)) best = std::min(best, r);
            for (size_t k = j + 1; k < S.size(); ++k) {
                Eigen::Vector2d a = S[i], b = S[j], e = S[k];
                double D = 2 * (a.x() * (b.y() - e.y()) + b.x() * (e.y() - a.y()) + e.x() * (a.y() - b.y()));
                if (std::abs(D) < 1e-14) continue;
                double ux = (a.squaredNorm() * (b.y() - e.y()) + b.squaredNorm() * (e.y() - a.y()) + e.squaredNorm() * (a.y() - b.y())) / D;
                double uy = (a.squaredNorm() * (e.x() - b.x()) + b.squaredNorm() * (a.x() - e.x()) + e.squaredNorm() * (b.x() - a.x())) / D;
                Eigen::Vector2d c3(ux, uy);
                double r3 = (a - c3).norm();
                if (ok(c3, r3)) best = std::min(best, r3);
            }
        }
    return best;
}

// Interval-cover oracle: best partition into floored enclosing circles, d = 1.
double brute_content(const std::vector<Eigen::Vector2d>& A, double rmin) {
    const int m = static_cast<int>(A.size());
    if (m == 0) return 0.0;
    double best = 1e300;
    std::vector<int> lab(m, 0);
    std::function<void(int, int)> rec = [&](int i, int k) {
        if (i == m) {
            double s = 0;
            for (int g = 0; g < k; ++g) {
                std::vector<Eigen::Vector2d> grp;
                for (int j = 0; j < m; ++j)
                    if (lab[j] == g) grp.push_back(A[j]);
                s += std::max(rmin, brute_meb(grp));
            }
            best = std::min(best, s);
            return;
        }
        for (int g = 0; g <= k; ++g) {
            lab[i] = g;
            rec(i + 1, std::max(k, g + 1));
        }
    };
    rec(0, 0);
    return best;
}

double oracle_beta_check(const Mat& P, const Ball& B, double h) {
    std::vector<Eigen::Vector2d> in;
    for (int i = 0; i < P.cols(); ++i)
        if (B.contains(P.col(i))) in.emplace_back(P.col(i));
    Mat X(2, static_cast<int>(in.size()));
    for (size_t i = 0; i < in.size(); ++i) X.col(static_cast<int>(i)) = in[i];
    std::vector<AffinePlane> lines{fit_plane_pca(X, 1)};
    for (size_t i = 0; i < in.size(); ++i)
        for (size_t j = i + 1; j < in.size(); ++j)
            if ((in[j] - in[i]).norm() > 0) lines.emplace_back(in[i], Vec((in[j] - in[i]).normalized()));
    double best = 1e300;
    const double r = B.radius;
    for (const auto& L : lines) {
        std::vector<double> u;
        for (const auto& x : in) u.push_back(L.dist(Vec(x)));
        std::vector<double> v;
        for (double x : u)
            if (x > 0) v.push_back(x);
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        double I = 0, prev = 0;
        for (double lvl : v) {
            if (prev >= r) break;
            std::vector<Eigen::Vector2d> A;
            for (size_t i = 0; i < in.size(); ++i)
                if (u[i] >= lvl) A.push_back(in[i]);
            I += brute_content(A, h / 2) * (std::min(lvl, r) - prev) / r;
            prev = lvl;
        }
        best = std::min(best, I / r);
    }
    return best;
}

Mat dense_line(double x0, double x1, double y, int N) {
    Mat P(2, N);
    for (int i = 0; i < N; ++i) P.col(i) = Eigen::Vector2d(x0 + (x1 - x0) * i / (N - 1), y);
    return P;
}

Mat hcat(const Mat& A, const Mat& B) {
    Mat C(A.rows(), A.cols() + B.cols());
    C << A, B;
    return C;
}

// Minimum bilateral line distance over a dense angle x offset grid.
double oracle_bilateral(const PointCloud& E, const Ball& B) {
    KdTree tree(E.points());
    double best = 1e300;
    for (int a = 0; a < 180; ++a) {
        double th = a * std::numbers::pi / 180;
        Vec dir = Eigen::Vector2d(std::cos(th), std::sin(th));
        Vec nrm = Eigen::Vector2d(-std::sin(th), std::cos(th));
        for (int o = -40; o <= 40; ++o) {
            AffinePlane L(B.center + nrm * (o * 0.025 * B.radius), dir);
            best = std::min(best, bilateral_distance(E, tree, B, {L}));
        }
    }
    return best;
}

}  // namespace

TEST(BetaInf, Examples) {
    auto g = GlobalParams::defaults(1);
    PointCloud line(dense_line(-1, 1, 0.3, 50), 0.04);
    EXPECT_NEAR(beta_inf(line, Ball(Vec::Zero(2), 1.0), 1).value, 0.0, 1e-12);
    Mat tri(2, 3);
    for (int i = 0; i < 3; ++i) tri.col(i) = Eigen::Vector2d(std::cos(2 * std::numbers::pi * i / 3 + 0.3), std::sin(2 * std::numbers::pi * i / 3 + 0.3));
    PointCloud T(tri, 0.1);
    double w = beta_inf(T, Ball(Vec::Zero(2), 1.0), 1).value;
    EXPECT_NEAR(w, 0.75, 1e-9);
    EXPECT_NEAR(w, grid_width(tri), 2e-4);
    auto empty = beta_inf(T, Ball(Eigen::Vector2d(10, 10), 0.5), 1);
    EXPECT_EQ(empty.value, 0.0);
    EXPECT_FALSE(empty.plane.has_value());
    (void)g;
}

TEST(BetaInf, AtMostTwoAndMatchesGridOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 40; ++t) {
        Mat P(2, 25);
        for (int i = 0; i < P.size(); ++i) P(i) = u(rng);
        PointCloud E(P, 0.05);
        Ball B(Vec::Zero(2), 1.2);
        double v = beta_inf(E, B, 1).value;
        ASSERT_LE(v, 2.0);
        std::vector<int> ids = points_in_ball(P, B);
        double o = grid_width(gather(P, ids)) / B.radius;
        ASSERT_LE(v, o + 1e-9);
        ASSERT_GE(v, o - 2e-4);
    }
}

TEST(BetaCheck, CoplanarIsZero) {
    auto g = GlobalParams::defaults(2);
    Mat P(3, 100);
    for (int i = 0; i < 100; ++i) P.col(i) = Eigen::Vector3d((i % 10) * 0.1, (i / 10) * 0.1, 0.2);
    PointCloud E(P, 0.1);
    EXPECT_LE(beta_check(E, Ball(Eigen::Vector3d(0.5, 0.5, 0.2), 0.8), g).value, 1e-12);
    EXPECT_LE(beta_new(E, Ball(Eigen::Vector3d(0.5, 0.5, 0.2), 0.8), g).value, 1e-12);
}

TEST(BetaCheck, FivePointOracle) {
    auto g = GlobalParams::defaults(1);
    Mat P = pts2({{0, 0}, {1, 0}, {2, 0}, {1, 0.5}, {-1, 0}});
    PointCloud E(P, 0.01);
    Ball B(Eigen::Vector2d(1, 0), 2.0);
    double v = beta_check(E, B, g).value;
    double o = oracle_beta_check(P, B, 0.01);
    EXPECT_LE(v, o + 1e-12);
    EXPECT_NEAR(v, o, 1e-6);
}

TEST(BetaCheck, SmallSetsMatchOracle) {
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(-1, 1);
    auto g = GlobalParams::defaults(1);
    for (int t = 0; t < 40; ++t) {
        int m = 2 + t % 5;
        Mat P(2, m);
        for (int i = 0; i < P.size(); ++i) P(i) = u(rng);
        PointCloud E(P, 0.02);
        Ball B(Vec::Zero(2), 1.5);
        double v = beta_check(E, B, g).value;
        double o = oracle_beta_check(P, B, 0.02);
        ASSERT_LE(v, o + 1e-12);
        ASSERT_NEAR(v, o, 1e-6);
    }
}

TEST(BetaNew, PlanarIsZero) {
    auto g = GlobalParams::defaults(1);
    PointCloud E(dense_line(-1, 1, 0, 400), 0.005);
    EXPECT_LE(beta_new(E, Ball(Vec::Zero(2), 0.9), g).value, 1e-12);
}

TEST(BetaNew, SingletonAboveLineHasLowerBound) {
    auto g = GlobalParams::defaults(1);
    for (double hgt : {0.05, 0.3, 0.9}) {
        PointCloud E(pts2({{0, hgt}}), 0.01);
        BallBeta bb(E, Ball(Vec::Zero(2), 1.0), g);
        EXPECT_GE(bb.integral_for(xaxis(), true), g.c1 * hgt);
    }
}

TEST(BetaNew, TentIsNotMonotone) {
    // plane with an eps-tent versus the singleton tip of the tent
    auto g = GlobalParams::defaults(1);
    const double eps = 0.01, h = 1e-3;
    const double half = eps / std::sqrt(3.0);
    std::vector<Eigen::Vector2d> pts;
    for (double x = -1.0; x <= 1.0 + 1e-12; x += h) {
        double ax = std::abs(x);
        double y = ax < half ? eps * (1 - ax / half) : 0.0;
        pts.emplace_back(x, y);
    }
    pts.emplace_back(0.0, eps);
    Mat F(2, static_cast<int>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i) F.col(static_cast<int>(i)) = pts[i];
    Ball B(Vec::Zero(2), 1.0);
    BallBeta bf(PointCloud(F, h), B, g);
    BallBeta be(PointCloud(pts2({{0, eps}}), h), B, g);
    double vf = bf.integral_for(xaxis(), true);
    double ve = be.integral_for(xaxis(), true);
    RecordProperty("beta_F", std::to_string(vf));
    RecordProperty("beta_E", std::to_string(ve));
    EXPECT_LT(vf, ve);
    EXPECT_GE(ve, g.c1 * eps);
}

TEST(BetaNew, CheckBelowNewOnRandomBalls) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    auto g = GlobalParams::defaults(1);
    for (int t = 0; t < 30; ++t) {
        Mat P(2, 60 + 10 * (t % 5));
        for (int i = 0; i < P.cols(); ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.1 * (t % 4) * u(rng));
        PointCloud E(P, 0.02);
        BallBeta bb(E, Ball(P.col(0), 0.3 + 0.1 * (t % 6)), g);
        double c = bb.check().value, n = bb.new_beta().value;
        ASSERT_LE(c, n + 1e-15);
    }
}

TEST(BetaNew, HolderChainExact) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-1, 1);
    auto g = GlobalParams::defaults(1);
    for (int t = 0; t < 20; ++t) {
        Mat P(2, 80);
        for (int i = 0; i < 80; ++i) P.col(i) = Eigen::Vector2d(u(rng), 0.2 * u(rng) * u(rng));
        PointCloud E(P, 0.02);
        BallBeta bb(E, Ball(P.col(t), 0.7), g);
        double r = 0.7;
        std::vector<int> all(bb.size());
        std::iota(all.begin(), all.end(), 0);
        double H = bb.family().restricted(all);
        for (double p : {1.5, 2.0, 3.0}) {
            double b1 = bb.new_beta(1.0).value, bp = bb.new_beta(p).value;
            ASSERT_LE(b1, std::pow(H / r, (p - 1) / p) * bp + 1e-12);
        }
    }
}

TEST(BetaNew, BallMonotoneWithNestedFamilies) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    auto g = GlobalParams::defaults(1);
    int violations = 0;
    for (int t = 0; t < 30; ++t) {
        Mat P(2, 120);
        for (int i = 0; i < 120; ++i) {
            double x = u(rng);
            P.col(i) = Eigen::Vector2d(x, 0.15 * std::sin(4 * x + t) + 0.02 * u(rng));
        }
        PointCloud E(P, 0.02);
        Ball B(P.col(0), 0.9);
        BallBeta big(E, B, g);
        auto vb = big.new_beta();
        for (double s : {0.3, 0.6}) {
            Ball B1(P.col(0), s * 0.9);
            BallBeta small(E, B1, g, big.candidates(), &big.family());
            double lhs = small.new_beta().value;
            double rhs = std::pow(1.0 / s, 1.0 + g.d / g.p) * vb.value;
            if (lhs > rhs + 1e-9) ++violations;
        }
    }
    EXPECT_EQ(violations, 0);
}

TEST(BetaHat, ClosedFormForFixedLine) {
    auto g = GlobalParams::defaults(1);
    for (double off : {0.1, 0.25}) {
        const int N = 1000;
        Mat P = dense_line(0, 1, off, N);
        PointCloud E(P, 1e-3);
        BallBeta bb(E, Ball(Eigen::Vector2d(0.5, off), 1.0), g);
        std::vector<double> w(N, 1.0 / N);
        EXPECT_NEAR(bb.hat_for(xaxis(), w), off * 1.0, 1e-12);
        EXPECT_LE(bb.hat(w).value, 1e-12);
    }
    auto g2 = g;
    g2.p = 2.0;
    Mat P = dense_line(0, 1, 0.2, 1000);
    BallBeta bb2(PointCloud(P, 1e-3), Ball(Eigen::Vector2d(0.5, 0.2), 2.0), g2);
    std::vector<double> w(1000, 1e-3);
    // (1/2 * 1 * (0.2/2)^2)^(1/2)
    EXPECT_NEAR(bb2.hat_for(xaxis(), w), std::sqrt(0.5 * 0.01), 1e-12);
}

TEST(BetaHat, ScaleInvariant) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1, 1);
    auto g = GlobalParams::defaults(1);
    Mat P(2, 70);
    for (int i = 0; i < P.size(); ++i) P(i) = u(rng);
    PointCloud E(P, 0.05);
    Ball B(Vec::Zero(2), 0.8);
    double a = beta_hat(E, B, g).value;
    for (double s : {0.1, 3.0}) EXPECT_NEAR(beta_hat(E.scaled(s), Ball(B.center * s, B.radius * s), g).value, a, 1e-9);
}

TEST(JonesSum, LineHasNoBetaMass) {
    auto g = GlobalParams::defaults(1);
    PointCloud E(dense_line(0, 1, 0, 300), 1.0 / 299);
    auto T = build_cube_tree(E, g);
    for (BetaKind k : {BetaKind::Inf, BetaKind::Check, BetaKind::New}) {
        auto rep = jones_sum(T, k, g);
        double l0 = T.cube(T.root).side;
        EXPECT_LE(rep.sum_part(), 1e-12 * l0);
        EXPECT_GE(rep.total, std::pow(rep.diam_root, 1));
    }
}

TEST(JonesSum, ScaleCovariant) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    auto g = GlobalParams::defaults(1);
    Mat P(2, 80);
    for (int i = 0; i < 80; ++i) {
        double x = u(rng);
        P.col(i) = Eigen::Vector2d(x, 0.1 * std::sin(6 * x));
    }
    PointCloud E(P, 0.02);
    for (BetaKind k : {BetaKind::Inf, BetaKind::New}) {
        double a = jones_sum(build_cube_tree(E, g), k, g).total;
        for (double s : {0.5, 4.0}) {
            auto Es = E.scaled(s);
            double b = jones_sum(build_cube_tree(Es, g), k, g).total;
            EXPECT_NEAR(b, s * a, 1e-9 * s * a);
        }
    }
}

TEST(JonesSum, ReportSerialization) {
    auto g = GlobalParams::defaults(1);
    PointCloud E(dense_line(0, 1, 0, 20), 1.0 / 19);
    auto T = build_cube_tree(E, g);
    auto rep = jones_sum(T, BetaKind::Inf, g);
    auto j = rep.to_json();
    EXPECT_EQ(j["schema"], "betascan/1");
    EXPECT_EQ(j["cubes"].size(), T.cubes.size());
    auto csv = rep.level_csv();
    EXPECT_EQ(csv.rfind("level,sum_beta2_side_d\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), T.levels() + 1);
}

TEST(Classify, PlaneIsNeitherBwglNorBaup) {
    auto g = GlobalParams::defaults(1);
    PointCloud E(dense_line(-1, 1, 0, 400), 0.005);
    auto T = build_cube_tree(E, g);
    // an interior cube whose inflated ball stays inside the sampled patch
    int q = -1;
    for (const auto& c : T.cubes)
        if (c.side * g.C0 <= 0.5 && std::abs(T.points()(0, c.center_idx)) < 0.3) {
            q = c.id;
            break;
        }
    ASSERT_GE(q, 0);
    EXPECT_FALSE(classify_bwgl(T, q, g.C0, 0.1, 1));
    EXPECT_FALSE(classify_baup(T, q, g.C0, 0.1, 2, 1));
    EXPECT_FALSE(classify_bwgl(T, T.root, g.C0, 2.5, 1));
    EXPECT_FALSE(classify_baup(T, T.root, g.C0, 2.5, 1, 1));
}

TEST(Classify, ParallelLines) {
    PointCloud E(hcat(dense_line(-1.2, 1.2, 0.5, 500), dense_line(-1.2, 1.2, -0.5, 500)), 0.005);
    Ball B(Vec::Zero(2), 1.0);
    double v = best_bilateral_plane(E, B, 1).second;
    double o = oracle_bilateral(E, B);
    EXPECT_NEAR(o, 0.5, 0.01);
    EXPECT_GE(v, o - 0.01);
    EXPECT_GE(v, 0.3);
}

TEST(Classify, CrossIsBwglButNotBaup) {
    Mat X = dense_line(-1.2, 1.2, 0, 600);
    Mat Y(2, 600);
    for (int i = 0; i < 600; ++i) Y.col(i) = Eigen::Vector2d(0, -1.2 + 2.4 * i / 599);
    PointCloud E(hcat(X, Y), 0.004);
    Ball B(Vec::Zero(2), 1.0);
    double single = best_bilateral_plane(E, B, 1).second;
    double o = oracle_bilateral(E, B);
    EXPECT_NEAR(o, std::sqrt(0.5), 0.03);
    EXPECT_GE(single, 0.2);
    EXPECT_LT(best_plane_union(E, B, 1, 2).second, 0.2);
}
