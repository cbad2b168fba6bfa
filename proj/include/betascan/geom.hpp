#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "kdtree.hpp"

namespace betascan {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Point = Vec;

struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kBallTol = 1e-12;

struct Ball {
    Vec center;
    double radius = 1.0;

    Ball() = default;
    Ball(Vec c, double r) : center(std::move(c)), radius(r) {
        if (!(r > 0.0) || !std::isfinite(r)) throw InputError("ball radius must be positive and finite");
    }

    Ball scaled(double s) const { return Ball(center, s * radius); }

    // Closed ball with a relative tolerance.
    template <class V>
    bool contains(const V& x) const {
        return (x - center).norm() <= radius * (1.0 + kBallTol);
    }
};

class AffinePlane {
public:
    AffinePlane() = default;

    // frame columns are orthonormalized; rank must equal the number of columns.
    AffinePlane(Vec base, const Mat& frame) : base_(std::move(base)) {
        if (frame.rows() != base_.size()) throw InputError("plane frame dimension mismatch");
        if (frame.cols() < 1 || frame.cols() >= frame.rows()) throw InputError("plane dimension must satisfy 1 <= d < n");
        frame_ = orthonormalize(frame);
        if (frame_.cols() != frame.cols()) throw InputError("plane frame is rank deficient");
    }

    const Vec& base() const { return base_; }
    const Mat& frame() const { return frame_; }
    int dim() const { return static_cast<int>(frame_.cols()); }
    int ambient() const { return static_cast<int>(base_.size()); }
    bool valid() const { return frame_.cols() > 0; }

    template <class V>
    Vec project(const V& x) const {
        Vec v = x - base_;
        return base_ + frame_ * (frame_.transpose() * v);
    }

    template <class V>
    double dist(const V& x) const {
        Vec v = x - base_;
        return (v - frame_ * (frame_.transpose() * v)).norm();
    }

    // Orthonormal basis of the orthogonal complement (n x (n-d)).
    Mat normal_basis() const { return complement(frame_); }

    AffinePlane through(const Vec& x) const {
        AffinePlane q = *this;
        q.base_ = x;
        return q;
    }

    static Mat orthonormalize(const Mat& A) {
        Mat Q(A.rows(), 0);
        for (int j = 0; j < A.cols(); ++j) {
            Vec v = A.col(j);
            double n0 = v.norm();
            if (n0 == 0.0) continue;
            for (int pass = 0; pass < 2; ++pass)
                for (int k = 0; k < Q.cols(); ++k) v -= Q.col(k).dot(v) * Q.col(k);
            double nv = v.norm();
            if (nv <= 1e-10 * n0) continue;
            Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
            Q.col(Q.cols() - 1) = v / nv;
        }
        return Q;
    }

    // Completes Q to an orthonormal basis using coordinate axes in order; returns the added columns.
    static Mat complement(const Mat& Q) {
        const int n = static_cast<int>(Q.rows());
        Mat all = Q;
        Mat out(n, 0);
        for (int i = 0; i < n && all.cols() < n; ++i) {
            Vec v = Vec::Unit(n, i);
            for (int pass = 0; pass < 2; ++pass)
                for (int k = 0; k < all.cols(); ++k) v -= all.col(k).dot(v) * all.col(k);
            double nv = v.norm();
            if (nv <= 1e-8) continue;
            v /= nv;
            all.conservativeResize(Eigen::NoChange, all.cols() + 1);
            all.col(all.cols() - 1) = v;
            out.conservativeResize(Eigen::NoChange, out.cols() + 1);
            out.col(out.cols() - 1) = v;
        }
        return out;
    }

private:
    Vec base_;
    Mat frame_;
};

class PointCloud {
public:
    PointCloud() = default;

    PointCloud(Mat pts, double h) : pts_(std::move(pts)), h_(h) {
        if (pts_.cols() == 0) throw InputError("point cloud is empty");
        if (pts_.rows() < 1) throw InputError("point cloud has no coordinates");
        if (!pts_.allFinite()) throw InputError("point cloud has non-finite coordinates");
        if (!(h_ > 0.0) || !std::isfinite(h_)) throw InputError("resolution must be positive");
    }

    // Resolution estimated as the median nearest-neighbour distance.
    explicit PointCloud(Mat pts) : PointCloud(pts, 1.0) { h_ = estimate_resolution(pts_); }

    const Mat& points() const { return pts_; }
    int size() const { return static_cast<int>(pts_.cols()); }
    int dim() const { return static_cast<int>(pts_.rows()); }
    double resolution() const { return h_; }
    auto point(int i) const { return pts_.col(i); }
    void set_resolution(double h) { h_ = h; }

    PointCloud scaled(double s) const { return PointCloud(pts_ * s, h_ * s); }

    PointCloud subset(const std::vector<int>& ids) const {
        Mat m(pts_.rows(), static_cast<Eigen::Index>(ids.size()));
        for (size_t i = 0; i < ids.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = pts_.col(ids[i]);
        return PointCloud(std::move(m), h_);
    }

    static double estimate_resolution(const Mat& pts) {
        const int N = static_cast<int>(pts.cols());
        if (N < 2) return 1.0;
        KdTree tree(pts);
        std::vector<double> nn;
        nn.reserve(N);
        std::vector<int> nb;
        for (int i = 0; i < N; ++i) {
            double r = 0.0;
            double best = std::numeric_limits<double>::infinity();
            // expanding search avoids a k-nearest query
            for (double s = 1e-12; s < 1e300; s *= 4.0) {
                r = s;
                tree.radius(pts.col(i), r, nb);
                for (int j : nb)
                    if (j != i) best = std::min(best, (pts.col(j) - pts.col(i)).norm());
                if (std::isfinite(best)) break;
            }
            if (std::isfinite(best) && best > 0.0) nn.push_back(best);
        }
        if (nn.empty()) return 1.0;
        std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
        return nn[nn.size() / 2];
    }

private:
    Mat pts_;
    double h_ = 1.0;
};

// Exact diameter of a column set.
inline double diameter(const Mat& P, const std::vector<int>& ids) {
    const size_t m = ids.size();
    if (m < 2) return 0.0;
    if (m <= 600) {
        double best = 0.0;
        for (size_t i = 0; i < m; ++i)
            for (size_t j = i + 1; j < m; ++j) best = std::max(best, (P.col(ids[i]) - P.col(ids[j])).squaredNorm());
        return std::sqrt(best);
    }
    Vec c = Vec::Zero(P.rows());
    for (int i : ids) c += P.col(i);
    c /= static_cast<double>(m);
    std::vector<double> rc(m);
    double rmax = 0.0;
    for (size_t i = 0; i < m; ++i) {
        rc[i] = (P.col(ids[i]) - c).norm();
        rmax = std::max(rmax, rc[i]);
    }
    // farthest-point sweeps give a lower bound
    size_t a = 0;
    double lower = 0.0;
    for (int sweep = 0; sweep < 4; ++sweep) {
        size_t far = a;
        double fd = 0.0;
        for (size_t i = 0; i < m; ++i) {
            double dd = (P.col(ids[i]) - P.col(ids[a])).norm();
            if (dd > fd) {
                fd = dd;
                far = i;
            }
        }
        lower = std::max(lower, fd);
        a = far;
    }
    std::vector<size_t> A, B;
    for (size_t i = 0; i < m; ++i) {
        if (rc[i] >= 0.5 * lower - 1e-12 * rmax) A.push_back(i);
        if (rc[i] >= lower - rmax - 1e-12 * rmax) B.push_back(i);
    }
    double best = lower * lower;
    for (size_t i : A)
        for (size_t j : B) best = std::max(best, (P.col(ids[i]) - P.col(ids[j])).squaredNorm());
    return std::sqrt(best);
}

inline double diameter(const Mat& P) {
    std::vector<int> ids(P.cols());
    std::iota(ids.begin(), ids.end(), 0);
    return diameter(P, ids);
}

inline std::vector<int> points_in_ball(const Mat& P, const Ball& B) {
    std::vector<int> out;
    for (int i = 0; i < P.cols(); ++i)
        if (B.contains(P.col(i))) out.push_back(i);
    return out;
}

inline std::vector<int> points_in_ball(const KdTree& tree, const Ball& B) {
    std::vector<int> out = tree.radius(B.center, B.radius * (1.0 + kBallTol));
    std::sort(out.begin(), out.end());
    return out;
}

inline Mat gather(const Mat& P, const std::vector<int>& ids) {
    Mat m(P.rows(), static_cast<Eigen::Index>(ids.size()));
    for (size_t i = 0; i < ids.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = P.col(ids[i]);
    return m;
}

struct GlobalParams {
    int d = 1;
    double p = 1.0;
    double rho = 0.5;
    double c0_target = 0.002;
    double c1 = 0.0;
    double c2 = 0.0;
    double kappa = 0.0;
    double omega_d = 0.0;
    double C0 = 2.0;
    double M = 8.0;
    double eps = 1e-2;
    double alpha = 0.1;
    double tau = 0.0;
    double lambda = 0.1;

    // estimator and iteration controls
    int ladder_depth = 6;
    int adaptive_t_max = 3;
    double dt_base = 2.0;
    double dt_radius_factor = 100.0;
    double dt_support_factor = 100.0;
    double eps0_gate = 0.03;
    int max_depth = -1;
    double stage_budget_s = 300.0;
    std::uint64_t seed = 1;

    static double omega(int d) { return std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0); }

    static double p_critical(int d) {
        if (d <= 2) return std::numeric_limits<double>::infinity();
        return 2.0 * d / (d - 2.0);
    }

    static double tau0(double rho) { return 1.0 / (2.0 * (1.0 + rho)); }

    static double default_c1(int d, double rho) {
        return omega(d) * std::pow(rho, d) / (std::pow(2.0, d + 1) * std::pow(3.0, d));
    }

    // Packing constants: 1.5 times the best of 10^4 random greedy admissible packings (seed 7).
    static double default_kappa(int d);

    static GlobalParams defaults(int d, double rho = 0.5) {
        GlobalParams g;
        g.d = d;
        g.rho = rho;
        g.finalize();
        return g;
    }

    // Fills derived constants left at zero.
    void finalize() {
        if (omega_d <= 0.0) omega_d = omega(d);
        if (kappa <= 0.0) kappa = default_kappa(d);
        if (c1 <= 0.0) c1 = default_c1(d, rho);
        if (c2 <= 0.0) c2 = std::pow(18.0, d) * kappa;
        if (tau <= 0.0) tau = 0.5 * tau0(rho);
        if (M <= 0.0) M = std::max(2.0 * C0, 4.0 / rho);
    }

    void validate(int n) const {
        if (d < 1 || d >= n) throw InputError("intrinsic dimension must satisfy 1 <= d < n");
        if (!(p >= 1.0) || !(p < p_critical(d))) throw InputError("p must lie in [1, p(d))");
        if (!(rho > 0.0 && rho <= 0.5)) throw InputError("rho must lie in (0, 1/2]");
        if (!(tau > 0.0 && tau < tau0(rho))) throw InputError("tau must lie in (0, 1/(2(1+rho)))");
        if (!(c1 > 0.0 && c1 < 1.0 && c2 >= 1.0)) throw InputError("content constants must satisfy 0 < c1 < 1 <= c2");
        if (!(C0 >= 1.0)) throw InputError("C0 must be at least 1");
        if (!(M >= 1.0)) throw InputError("M must be at least 1");
        if (!(eps > 0.0)) throw InputError("eps must be positive");
        if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0,1)");
    }
};

inline double GlobalParams::default_kappa(int d) {
    switch (d) {
        case 1: return 1.592392;
        case 2: return 1.497308;
        case 3: return 1.498007;
        case 4: return 1.498354;
        default: return 1.5;
    }
}

template <class V>
void check_dims(const V& x, const AffinePlane& P) {
    if (x.size() != P.ambient()) throw InputError("dimension mismatch between point and plane");
}

template <class V>
double dist_point_plane(const V& x, const AffinePlane& P) {
    check_dims(x, P);
    return P.dist(x);
}

template <class V>
Vec project_plane(const V& x, const AffinePlane& P) {
    check_dims(x, P);
    return P.project(x);
}

// Renormalised Hausdorff distance inside B; empty optional when either side has no point in B.
inline std::optional<double> local_hausdorff(const PointCloud& E, const PointCloud& F, const Ball& B) {
    if (E.dim() != F.dim() || E.dim() != B.center.size()) throw InputError("dimension mismatch");
    KdTree te(E.points()), tf(F.points());
    auto ein = points_in_ball(te, B);
    auto fin = points_in_ball(tf, B);
    if (ein.empty() || fin.empty()) return std::nullopt;
    double s = 0.0;
    for (int i : ein) s = std::max(s, tf.nearest(E.point(i)).second);
    for (int i : fin) s = std::max(s, te.nearest(F.point(i)).second);
    return s / B.radius;
}

// Largest principal-angle sine between the linear parts, which is the unit-ball bilateral distance.
inline double plane_angle(const AffinePlane& P, const AffinePlane& P2) {
    if (P.dim() != P2.dim() || P.ambient() != P2.ambient()) throw InputError("plane dimension mismatch");
    const Mat& U = P.frame();
    const Mat& V = P2.frame();
    Mat a = U - V * (V.transpose() * U);
    Mat b = V - U * (U.transpose() * V);
    Eigen::JacobiSVD<Mat> sa(a), sb(b);
    double s = std::max(sa.singularValues()(0), sb.singularValues()(0));
    return std::min(s, 1.0);
}

// Distance from x to the affine span of the columns of S.
inline double dist_to_affine_span(const Vec& x, const Mat& S) {
    if (S.cols() == 0) return std::numeric_limits<double>::infinity();
    Vec base = S.col(0);
    if (S.cols() == 1) return (x - base).norm();
    Mat D(S.rows(), S.cols() - 1);
    for (int j = 1; j < S.cols(); ++j) D.col(j - 1) = S.col(j) - base;
    Mat Q = AffinePlane::orthonormalize(D);
    Vec v = x - base;
    if (Q.cols() > 0) v -= Q * (Q.transpose() * v);
    return v.norm();
}

inline double eta(const Mat& X) {
    double dm = diameter(X);
    if (!(dm > 0.0)) throw InputError("eta requires positive diameter");
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < X.cols(); ++i) {
        Mat rest(X.rows(), X.cols() - 1);
        for (int j = 0, c = 0; j < X.cols(); ++j)
            if (j != i) rest.col(c++) = X.col(j);
        best = std::min(best, dist_to_affine_span(X.col(i), rest));
    }
    return std::clamp(best / dm, 0.0, 1.0);
}

inline double eta(const std::vector<Vec>& X) {
    if (X.empty()) throw InputError("eta requires points");
    Mat m(X[0].size(), static_cast<Eigen::Index>(X.size()));
    for (size_t i = 0; i < X.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = X[i];
    return eta(m);
}

namespace detail {

inline void canonical_signs(Mat& F) {
    for (int j = 0; j < F.cols(); ++j) {
        int k = 0;
        F.col(j).cwiseAbs().maxCoeff(&k);
        for (int i = 0; i < F.rows(); ++i)
            if (std::abs(F(i, j)) > 1e-9) {
                k = i;
                break;
            }
        if (F(k, j) < 0) F.col(j) = -F.col(j);
    }
}

}  // namespace detail

// Weighted PCA plane; eigenvalue ties are resolved by projecting coordinate axes in order.
inline AffinePlane fit_plane_pca(const Mat& P, const Vec& w, int d) {
    const int n = static_cast<int>(P.rows());
    if (P.cols() == 0) throw InputError("fit_plane_pca needs at least one point");
    if (d < 1 || d >= n) throw InputError("plane dimension must satisfy 1 <= d < n");
    double W = w.sum();
    Vec c = (W > 0.0) ? Vec(P * w / W) : Vec(P.rowwise().mean());
    Mat C = Mat::Zero(n, n);
    for (int i = 0; i < P.cols(); ++i) {
        double wi = (W > 0.0) ? w[i] : 1.0;
        Vec v = P.col(i) - c;
        C.noalias() += wi * v * v.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    Vec ev = es.eigenvalues();
    Mat evec = es.eigenvectors();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return ev[a] > ev[b]; });
    double scale = std::max(std::abs(ev[order[0]]), 1e-300);
    double tol = 1e-9 * scale;
    // eigenvalue at the cut and the group tied with it
    double cut = ev[order[d - 1]];
    Mat sure(n, 0), tie(n, 0);
    for (int i = 0; i < n; ++i) {
        double v = ev[order[i]];
        if (v > cut + tol) {
            sure.conservativeResize(Eigen::NoChange, sure.cols() + 1);
            sure.col(sure.cols() - 1) = evec.col(order[i]);
        } else if (std::abs(v - cut) <= tol) {
            tie.conservativeResize(Eigen::NoChange, tie.cols() + 1);
            tie.col(tie.cols() - 1) = evec.col(order[i]);
        }
    }
    Mat frame = sure;
    Mat Tq = AffinePlane::orthonormalize(tie);
    for (int a = 0; a < n && frame.cols() < d; ++a) {
        Vec e = Vec::Unit(n, a);
        Vec v = Tq * (Tq.transpose() * e);
        for (int pass = 0; pass < 2; ++pass)
            for (int k = 0; k < frame.cols(); ++k) v -= frame.col(k).dot(v) * frame.col(k);
        if (v.norm() <= 1e-8) continue;
        frame.conservativeResize(Eigen::NoChange, frame.cols() + 1);
        frame.col(frame.cols() - 1) = v.normalized();
    }
    detail::canonical_signs(frame);
    return AffinePlane(c, frame);
}

inline AffinePlane fit_plane_pca(const Mat& P, int d) { return fit_plane_pca(P, Vec::Ones(P.cols()), d); }

// Minimum enclosing ball of the columns of W (Welzl, move-to-front, deterministic order).
struct MinBall {
    Vec center;
    double radius = 0.0;
};

namespace detail {

inline MinBall circum(const std::vector<Vec>& S) {
    MinBall b;
    if (S.empty()) return b;
    const Vec& p0 = S[0];
    if (S.size() == 1) {
        b.center = p0;
        b.radius = 0.0;
        return b;
    }
    const int k = static_cast<int>(S.size()) - 1;
    Mat A(p0.size(), k);
    for (int i = 0; i < k; ++i) A.col(i) = S[i + 1] - p0;
    Mat G = A.transpose() * A;
    Vec rhs = 0.5 * G.diagonal();
    Vec lam = G.completeOrthogonalDecomposition().solve(rhs);
    b.center = p0 + A * lam;
    b.radius = 0.0;
    for (const auto& s : S) b.radius = std::max(b.radius, (s - b.center).norm());
    return b;
}

inline bool inside(const MinBall& b, const Vec& x) {
    return b.center.size() > 0 && (x - b.center).norm() <= b.radius * (1.0 + 1e-12) + 1e-300;
}

inline MinBall welzl(std::vector<Vec>& pts, int end, std::vector<Vec>& support, int dim) {
    MinBall b = circum(support);
    if (static_cast<int>(support.size()) == dim + 1) return b;
    for (int i = 0; i < end; ++i) {
        if (b.center.size() > 0 && inside(b, pts[i])) continue;
        support.push_back(pts[i]);
        b = welzl(pts, i, support, dim);
        support.pop_back();
        // move to front
        Vec t = pts[i];
        for (int j = i; j > 0; --j) pts[j] = pts[j - 1];
        pts[0] = t;
    }
    return b;
}

}  // namespace detail

inline MinBall min_enclosing_ball(const Mat& W) {
    MinBall b;
    if (W.cols() == 0) return b;
    if (W.rows() == 1) {
        double lo = W.row(0).minCoeff(), hi = W.row(0).maxCoeff();
        b.center = Vec::Constant(1, 0.5 * (lo + hi));
        b.radius = 0.5 * (hi - lo);
        return b;
    }
    if (W.cols() <= 2) {
        b.center = 0.5 * (W.col(0) + W.col(W.cols() - 1));
        b.radius = 0.5 * (W.col(0) - W.col(W.cols() - 1)).norm();
        return b;
    }
    std::vector<Vec> pts(W.cols());
    for (int i = 0; i < W.cols(); ++i) pts[i] = W.col(i);
    std::minstd_rand rng(12345);
    std::shuffle(pts.begin(), pts.end(), rng);
    std::vector<Vec> support;
    b = detail::welzl(pts, static_cast<int>(pts.size()), support, static_cast<int>(W.rows()));
    for (int i = 0; i < W.cols(); ++i) b.radius = std::max(b.radius, (W.col(i) - b.center).norm());
    return b;
}

struct MinimaxFit {
    AffinePlane plane;
    double width = 0.0;
};

namespace detail {

// Best offset for a fixed linear part: centre of the minimum ball of the normal components.
inline MinimaxFit minimax_for_frame(const Mat& P, const Mat& U) {
    Mat N = AffinePlane::complement(U);
    Mat W = N.transpose() * P;
    MinBall mb = min_enclosing_ball(W);
    Vec base = N * mb.center;
    if (P.cols() > 0) base += U * (U.transpose() * P.col(0));
    return MinimaxFit{AffinePlane(base, U), mb.radius};
}

inline void combos(int m, int k, int start, std::vector<int>& cur, const std::function<void(const std::vector<int>&)>& f) {
    if (static_cast<int>(cur.size()) == k) {
        f(cur);
        return;
    }
    for (int i = start; i <= m - (k - static_cast<int>(cur.size())); ++i) {
        cur.push_back(i);
        combos(m, k, i + 1, cur, f);
        cur.pop_back();
    }
}

}  // namespace detail

// Approximate minimax plane for a point matrix; exact for subset-spanned optima when |P| <= 30.
inline MinimaxFit minimax_fit(const Mat& P, int d, int subset_limit = 30, int refine_iters = 40) {
    const int n = static_cast<int>(P.rows());
    if (P.cols() == 0) throw InputError("minimax fit of an empty set");
    if (d < 1 || d >= n) throw InputError("plane dimension must satisfy 1 <= d < n");
    MinimaxFit best = detail::minimax_for_frame(P, fit_plane_pca(P, d).frame());
    const int m = static_cast<int>(P.cols());
    if (m <= subset_limit && m >= d + 1) {
        std::vector<int> cur;
        detail::combos(m, d + 1, 0, cur, [&](const std::vector<int>& s) {
            Mat D(n, d);
            for (int j = 1; j <= d; ++j) D.col(j - 1) = P.col(s[j]) - P.col(s[0]);
            Mat Q = AffinePlane::orthonormalize(D);
            if (Q.cols() != d) return;
            MinimaxFit f = detail::minimax_for_frame(P, Q);
            if (f.width < best.width - 1e-15) best = f;
        });
    }
    // coordinate descent over Givens rotations between frame and normal directions
    Mat U = best.plane.frame();
    double step = 0.1;
    for (int it = 0; it < refine_iters && best.width > 0.0; ++it) {
        bool improved = false;
        Mat N = AffinePlane::complement(U);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < N.cols(); ++j)
                for (double sgn : {1.0, -1.0}) {
                    double a = sgn * step;
                    Mat U2 = U;
                    U2.col(i) = std::cos(a) * U.col(i) + std::sin(a) * N.col(j);
                    MinimaxFit f = detail::minimax_for_frame(P, AffinePlane::orthonormalize(U2));
                    if (f.width < best.width - 1e-15) {
                        best = f;
                        improved = true;
                    }
                }
        U = best.plane.frame();
        if (!improved) step *= 0.5;
    }
    return best;
}

inline std::optional<MinimaxFit> fit_plane_minimax(const PointCloud& E, const Ball& B, int d) {
    auto ids = points_in_ball(E.points(), B);
    if (ids.empty()) return std::nullopt;
    return minimax_fit(gather(E.points(), ids), d);
}

}  // namespace betascan
