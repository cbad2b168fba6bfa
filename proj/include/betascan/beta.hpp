#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "content.hpp"
#include "cubes.hpp"
#include "geom.hpp"
#include "kdtree.hpp"

namespace betascan {

enum class BetaKind { Inf, Hat, Check, New };

inline std::string to_string(BetaKind k) {
    switch (k) {
        case BetaKind::Inf: return "inf";
        case BetaKind::Hat: return "hat";
        case BetaKind::Check: return "check";
        case BetaKind::New: return "new";
    }
    return "?";
}

inline BetaKind parse_beta_kind(const std::string& s) {
    if (s == "inf") return BetaKind::Inf;
    if (s == "hat") return BetaKind::Hat;
    if (s == "check") return BetaKind::Check;
    if (s == "new") return BetaKind::New;
    throw InputError("unknown beta kind: " + s);
}

inline nlohmann::json plane_json(const std::optional<AffinePlane>& P) {
    if (!P) return nullptr;
    nlohmann::json frame = nlohmann::json::array();
    for (int j = 0; j < P->dim(); ++j) {
        nlohmann::json col = nlohmann::json::array();
        for (int i = 0; i < P->ambient(); ++i) col.push_back(P->frame()(i, j));
        frame.push_back(col);
    }
    nlohmann::json base = nlohmann::json::array();
    for (int i = 0; i < P->ambient(); ++i) base.push_back(P->base()[i]);
    return {{"base", base}, {"frame", frame}};
}

struct BetaValue {
    BetaKind kind = BetaKind::Inf;
    double value = 0.0;
    std::optional<AffinePlane> plane;
    Ball ball;
    double p = 1.0;
    int d = 1;

    nlohmann::json to_json() const {
        return {{"kind", to_string(kind)}, {"value", value}, {"p", p}, {"d", d}, {"radius", ball.radius}, {"plane", plane_json(plane)}};
    }
};

struct BetaOptions {
    int subset_limit = 12;  // all (d+1)-point planes when |E cap B| is at most this
    int critical_limit = 6;  // all critical lines of the level integral for d = 1 in the plane up to this many points
    bool build_restricted = true;
};

// Lines in R^2 meeting two of the conditions dist(x_i, L) = 0, dist(x_i, L) = dist(x_j, L): through two points or
// midpoints, or through one parallel to a point pair. The level integral over lines is minimised among them.
inline std::vector<AffinePlane> critical_lines(const Mat& X) {
    std::vector<AffinePlane> out;
    const int m = static_cast<int>(X.cols());
    std::vector<Vec> S, dirs;
    for (int i = 0; i < m; ++i) S.push_back(X.col(i));
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            S.push_back(0.5 * (X.col(i) + X.col(j)));
            Vec u = X.col(j) - X.col(i);
            if (u.norm() > 0.0) dirs.push_back(u.normalized());
        }
    for (size_t a = 0; a < S.size(); ++a) {
        for (size_t b = a + 1; b < S.size(); ++b) {
            Vec u = S[b] - S[a];
            if (u.norm() > 1e-14) out.emplace_back(S[a], Vec(u.normalized()));
        }
        for (const auto& u : dirs) out.emplace_back(S[a], u);
    }
    return out;
}

// Candidate planes shared by every beta kind on one ball.
inline std::vector<AffinePlane> candidate_planes(const Mat& X, int d, double r, int subset_limit,
                                                 const std::vector<AffinePlane>& extra = {}) {
    std::vector<AffinePlane> out;
    const int m = static_cast<int>(X.cols());
    const int n = static_cast<int>(X.rows());
    if (m == 0) return out;
    out.push_back(fit_plane_pca(X, d));
    out.push_back(minimax_fit(X, d).plane);
    if (m <= subset_limit && m >= d + 1) {
        std::vector<int> cur;
        detail::combos(m, d + 1, 0, cur, [&](const std::vector<int>& s) {
            Mat D(n, d);
            for (int j = 1; j <= d; ++j) D.col(j - 1) = X.col(s[j]) - X.col(s[0]);
            Mat Q = AffinePlane::orthonormalize(D);
            if (Q.cols() != d) return;
            detail::canonical_signs(Q);
            out.emplace_back(X.col(s[0]), Q);
        });
    } else if (m > d + 1) {
        // reweighted fit that discounts far points
        AffinePlane P = out.front();
        for (int it = 0; it < 6; ++it) {
            Vec w(m);
            for (int i = 0; i < m; ++i) w[i] = 1.0 / std::max(P.dist(X.col(i)), 1e-3 * r);
            P = fit_plane_pca(X, w, d);
        }
        out.push_back(P);
    }
    for (const auto& e : extra)
        if (e.valid() && e.ambient() == n && e.dim() == d) out.push_back(e);
    return out;
}

// Evaluation context for one ball: local points, candidate planes and the cover family.
class BallBeta {
public:
    BallBeta(const PointCloud& E, const Ball& B, const GlobalParams& g, const std::vector<AffinePlane>& extra = {},
             const ContentFamily* parent = nullptr, BetaOptions opt = {})
        : g_(g), B_(B), opt_(opt) {
        if (B.center.size() != E.dim()) throw InputError("dimension mismatch between ball and cloud");
        S_ = std::make_shared<LocalSet>(E.points(), B);
        h_ = E.resolution();
        cands_ = candidate_planes(S_->X(), g.d, B.radius, opt.subset_limit, extra);
        seeding_ = cands_.size();
        if (g.d == 1 && E.dim() == 2 && S_->size() >= 2 && S_->size() <= opt.critical_limit)
            for (auto& L : critical_lines(S_->X())) cands_.push_back(std::move(L));
        cfg_ = ContentConfig::from(g, h_);
        parent_ = parent;
    }

    int size() const { return S_->size(); }
    const LocalSet& local() const { return *S_; }
    const std::vector<AffinePlane>& candidates() const { return cands_; }

    std::vector<double> distances(const AffinePlane& L) const {
        std::vector<double> u(S_->size());
        for (int i = 0; i < S_->size(); ++i) u[i] = L.dist(S_->X().col(i));
        return u;
    }

    ContentFamily& family() {
        if (!fam_) build_family();
        return *fam_;
    }

    BetaValue inf() {
        BetaValue v = blank(BetaKind::Inf);
        if (size() == 0) return v;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& L : cands_) {
            double w = 0.0;
            for (double x : distances(L)) w = std::max(w, x);
            if (w < best) {
                best = w;
                v.plane = L;
            }
        }
        v.value = best / B_.radius;
        return v;
    }

    // Content-integrated beta^p for one plane; restricted selects the good-cover content.
    double integral_for(const AffinePlane& L, bool restricted, double p = 0.0) {
        auto u = distances(L);
        return family().level_integral(u, p > 0.0 ? p : g_.p, restricted);
    }

    BetaValue check(double p = 0.0) { return integrated(BetaKind::Check, false, p > 0.0 ? p : g_.p); }
    BetaValue new_beta(double p = 0.0) { return integrated(BetaKind::New, true, p > 0.0 ? p : g_.p); }

    // Weighted L^p average for a fixed plane.
    double hat_for(const AffinePlane& L, const std::vector<double>& w) const {
        auto u = distances(L);
        const double r = B_.radius;
        double s = 0.0;
        for (int i = 0; i < size(); ++i) s += w[i] * std::pow(u[i] / r, g_.p);
        return std::pow(s / std::pow(r, g_.d), 1.0 / g_.p);
    }

    BetaValue hat(const std::vector<double>& w) {
        BetaValue v = blank(BetaKind::Hat);
        if (size() == 0) return v;
        if (static_cast<int>(w.size()) != size()) throw InputError("weight count must match points in the ball");
        double best = std::numeric_limits<double>::infinity();
        const double r = B_.radius;
        for (const auto& L : cands_) {
            auto u = distances(L);
            double s = 0.0;
            for (int i = 0; i < size(); ++i) {
                if (w[i] < 0.0) throw InputError("weights must be nonnegative");
                s += w[i] * std::pow(u[i] / r, g_.p);
            }
            s /= std::pow(r, g_.d);
            if (s < best) {
                best = s;
                v.plane = L;
            }
        }
        v.value = std::pow(best, 1.0 / g_.p);
        return v;
    }

    BetaValue hat() {
        std::vector<double> w(size(), std::pow(h_, g_.d));
        return hat(w);
    }

private:
    GlobalParams g_;
    Ball B_;
    BetaOptions opt_;
    double h_ = 1.0;
    std::shared_ptr<LocalSet> S_;
    std::vector<AffinePlane> cands_;
    ContentConfig cfg_;
    const ContentFamily* parent_ = nullptr;
    std::unique_ptr<ContentFamily> fam_;
    size_t seeding_ = 0;  // candidates that seed adaptive covers

    BetaValue blank(BetaKind k) const {
        BetaValue v;
        v.kind = k;
        v.ball = B_;
        v.p = g_.p;
        v.d = g_.d;
        return v;
    }

    bool flat() const {
        for (const auto& L : cands_) {
            double w = 0.0;
            for (double x : distances(L)) w = std::max(w, x);
            if (w <= 1e-13 * B_.radius) return true;
        }
        return false;
    }

    void build_family() {
        std::vector<AdaptiveSeed> seeds;
        if (size() > 0 && !flat()) {
            for (size_t c = 0; c < seeding_; ++c) {
                const AffinePlane& L = cands_[c];
                std::vector<double> t;
                for (double x : distances(L)) {
                    double s = x / B_.radius;
                    if (s > 0.0 && s < 1.0) t.push_back(s);
                }
                std::sort(t.begin(), t.end());
                t.erase(std::unique(t.begin(), t.end()), t.end());
                if (t.empty()) continue;
                int T = std::min<int>(cfg_.adaptive_t_max, static_cast<int>(t.size()));
                for (int q = 0; q < T; ++q) {
                    size_t idx = static_cast<size_t>((q + 0.5) * t.size() / T);
                    seeds.push_back(AdaptiveSeed{L, t[std::min(idx, t.size() - 1)]});
                }
            }
        }
        ContentConfig cfg = cfg_;
        if (size() > 0 && flat()) {
            cfg.ladder_depth = -1;
            cfg.exhaustive_limit = 0;
        }
        fam_ = std::make_unique<ContentFamily>(S_, cfg, seeds, true);
        if (parent_) fam_->inherit(*parent_);
    }

    BetaValue integrated(BetaKind k, bool restricted, double p) {
        BetaValue v = blank(k);
        v.p = p;
        if (size() == 0) return v;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& L : cands_) {
            double I = integral_for(L, restricted, p);
            if (I < best) {
                best = I;
                v.plane = L;
            }
        }
        v.value = std::pow(std::max(best, 0.0), 1.0 / p);
        return v;
    }
};

inline BetaValue beta_inf(const PointCloud& E, const Ball& B, int d) {
    auto g = GlobalParams::defaults(d);
    BallBeta bb(E, B, g);
    auto v = bb.inf();
    if (bb.size() > 0) {
        auto f = minimax_fit(bb.local().X(), d);
        if (f.width / B.radius < v.value) {
            v.value = f.width / B.radius;
            v.plane = f.plane;
        }
    }
    return v;
}

inline BetaValue beta_check(const PointCloud& E, const Ball& B, const GlobalParams& g, const std::vector<AffinePlane>& extra = {}) {
    BallBeta bb(E, B, g, extra);
    return bb.check();
}

inline BetaValue beta_new(const PointCloud& E, const Ball& B, const GlobalParams& g, const std::vector<AffinePlane>& extra = {}) {
    BallBeta bb(E, B, g, extra);
    return bb.new_beta();
}

inline BetaValue beta_hat(const PointCloud& E, const Ball& B, const GlobalParams& g, const std::vector<double>& weights = {},
                          const std::vector<AffinePlane>& extra = {}) {
    BallBeta bb(E, B, g, extra);
    return weights.empty() ? bb.hat() : bb.hat(weights);
}

struct JonesRow {
    int cube = -1;
    int level = 0;
    double side = 0.0;
    BetaValue beta;
};

struct JonesReport {
    BetaKind kind = BetaKind::Inf;
    double C0 = 2.0;
    double diam_root = 0.0;
    int d = 1;
    double total = 0.0;
    std::vector<JonesRow> rows;
    std::vector<double> level_sums;
    bool truncated = false;

    double sum_part() const { return total - std::pow(diam_root, d); }

    nlohmann::json to_json() const {
        nlohmann::json j{{"schema", "betascan/1"}, {"kind", to_string(kind)}, {"C0", C0}, {"d", d}, {"diam_root", diam_root},
                         {"total", total}, {"truncated", truncated}};
        j["level_sums"] = level_sums;
        nlohmann::json rs = nlohmann::json::array();
        for (const auto& r : rows)
            rs.push_back({{"cube", r.cube}, {"level", r.level}, {"side", r.side}, {"value", r.beta.value}, {"plane", plane_json(r.beta.plane)}});
        j["cubes"] = rs;
        return j;
    }

    std::string level_csv() const {
        std::ostringstream os;
        os.precision(17);
        os << "level,sum_beta2_side_d\n";
        for (size_t k = 0; k < level_sums.size(); ++k) os << k << "," << level_sums[k] << "\n";
        return os.str();
    }
};

inline BetaValue beta_of_kind(BallBeta& bb, BetaKind kind) {
    switch (kind) {
        case BetaKind::Inf: return bb.inf();
        case BetaKind::Hat: return bb.hat();
        case BetaKind::Check: return bb.check();
        case BetaKind::New: return bb.new_beta();
    }
    return bb.inf();
}

// diam(Q0)^d plus the sum over cubes Q of Q0 of beta(C0 B_Q)^2 l(Q)^d.
inline JonesReport jones_sum(const CubeTree& T, BetaKind kind, const GlobalParams& g, double budget_s = 0.0) {
    JonesReport rep;
    rep.kind = kind;
    rep.C0 = g.C0;
    rep.d = g.d;
    rep.diam_root = T.diam(T.root);
    rep.level_sums.assign(T.levels(), 0.0);
    auto t0 = std::chrono::steady_clock::now();
    double sum = 0.0;
    std::vector<char> inside(T.size(), 0);
    for (int q : T.subtree(T.root)) inside[q] = 1;
    for (int k = 0; k < T.levels(); ++k)
        for (int q : T.level_cubes[k]) {
            if (!inside[q]) continue;
            if (budget_s > 0.0 &&
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() > budget_s) {
                rep.truncated = true;
                break;
            }
            const Cube& Q = T.cube(q);
            BallBeta bb(*T.cloud, T.ball(q, g.C0), g);
            JonesRow row{q, k, Q.side, beta_of_kind(bb, kind)};
            double term = row.beta.value * row.beta.value * std::pow(Q.side, g.d);
            rep.level_sums[k] += term;
            sum += term;
            rep.rows.push_back(std::move(row));
        }
    rep.total = std::pow(rep.diam_root, g.d) + sum;
    return rep;
}

// Sample points of the plane disk L cap B.
inline Mat plane_disk_samples(const AffinePlane& L, const Ball& B, int per_axis = 0) {
    const int d = L.dim();
    Vec c = L.project(B.center);
    double off = (c - B.center).norm();
    if (off > B.radius) return Mat(L.ambient(), 0);
    double rr = std::sqrt(std::max(0.0, B.radius * B.radius - off * off));
    if (per_axis <= 0) per_axis = d == 1 ? 401 : d == 2 ? 61 : 13;
    std::vector<Vec> pts;
    std::vector<int> idx(d, 0);
    for (;;) {
        Vec s(d);
        for (int k = 0; k < d; ++k) s[k] = -rr + 2.0 * rr * idx[k] / (per_axis - 1);
        if (s.norm() <= rr) pts.push_back(c + L.frame() * s);
        int k = 0;
        while (k < d && ++idx[k] == per_axis) idx[k++] = 0;
        if (k == d) break;
    }
    Mat M(L.ambient(), static_cast<int>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i) M.col(static_cast<int>(i)) = pts[i];
    return M;
}

// Normalised bilateral distance between E cap B and a union of planes, with both sides restricted to B.
inline double bilateral_distance(const PointCloud& E, const KdTree& tree, const Ball& B, const std::vector<AffinePlane>& U) {
    auto ids = points_in_ball(tree, B);
    double s = 0.0;
    for (int i : ids) {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& L : U) m = std::min(m, L.dist(E.point(i)));
        s = std::max(s, m);
    }
    bool any_plane = false;
    for (const auto& L : U) {
        Mat S = plane_disk_samples(L, B);
        for (int j = 0; j < S.cols(); ++j) {
            any_plane = true;
            s = std::max(s, tree.nearest(S.col(j)).second);
        }
    }
    if (!any_plane || ids.empty()) return 2.0;
    return std::min(s / B.radius, 2.0);
}

namespace detail {

// Coordinate descent on frame rotations and offsets for the bilateral distance.
inline std::pair<AffinePlane, double> refine_bilateral(const PointCloud& E, const KdTree& tree, const Ball& B, AffinePlane P, int iters = 25) {
    double best = bilateral_distance(E, tree, B, {P});
    double ang = 0.1, shift = 0.1 * B.radius;
    const int d = P.dim();
    for (int it = 0; it < iters; ++it) {
        bool improved = false;
        Mat N = AffinePlane::complement(P.frame());
        for (int j = 0; j < N.cols(); ++j) {
            for (double sg : {1.0, -1.0}) {
                AffinePlane Q(P.base() + sg * shift * N.col(j), P.frame());
                double v = bilateral_distance(E, tree, B, {Q});
                if (v < best - 1e-15) {
                    best = v;
                    P = Q;
                    improved = true;
                }
                for (int i = 0; i < d; ++i) {
                    Mat U2 = P.frame();
                    U2.col(i) = std::cos(sg * ang) * P.frame().col(i) + std::sin(sg * ang) * N.col(j);
                    AffinePlane R(P.project(B.center), AffinePlane::orthonormalize(U2));
                    double w = bilateral_distance(E, tree, B, {R});
                    if (w < best - 1e-15) {
                        best = w;
                        P = R;
                        improved = true;
                    }
                }
            }
        }
        if (!improved) {
            ang *= 0.5;
            shift *= 0.5;
        }
    }
    return {P, best};
}

}  // namespace detail

// Best single-plane bilateral distance over the candidate family with local refinement.
inline std::pair<AffinePlane, double> best_bilateral_plane(const PointCloud& E, const Ball& B, int d) {
    KdTree tree(E.points());
    auto ids = points_in_ball(tree, B);
    if (ids.empty()) return {AffinePlane(B.center, Mat::Identity(E.dim(), d)), 2.0};
    Mat X = gather(E.points(), ids);
    auto cands = candidate_planes(X, d, B.radius, 0);
    // spans of every d principal axes through the centroid
    const int n = E.dim();
    Vec c = X.rowwise().mean();
    Mat C = Mat::Zero(n, n);
    for (int i = 0; i < X.cols(); ++i) C.noalias() += (X.col(i) - c) * (X.col(i) - c).transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(C);
    std::vector<int> cur;
    detail::combos(n, d, 0, cur, [&](const std::vector<int>& s) {
        Mat F(n, d);
        for (int j = 0; j < d; ++j) F.col(j) = es.eigenvectors().col(s[j]);
        cands.emplace_back(c, F);
    });
    AffinePlane best = cands.front();
    double bv = std::numeric_limits<double>::infinity();
    for (const auto& L : cands) {
        auto [P, v] = detail::refine_bilateral(E, tree, B, L);
        if (v < bv) {
            bv = v;
            best = P;
        }
    }
    return {best, bv};
}

inline bool classify_bwgl(const CubeTree& T, int q, double C0, double eps, int d) {
    if (eps > 2.0) return false;
    Ball B = T.ball(q, C0);
    return best_bilateral_plane(*T.cloud, B, d).second >= eps;
}

// Best union of at most m planes found by k-plane clustering from farthest-point seeds.
inline std::pair<std::vector<AffinePlane>, double> best_plane_union(const PointCloud& E, const Ball& B, int d, int m) {
    KdTree tree(E.points());
    auto ids = points_in_ball(tree, B);
    if (ids.empty()) return {{}, 2.0};
    Mat X = gather(E.points(), ids);
    const int N = static_cast<int>(X.cols());
    auto [P1, v1] = best_bilateral_plane(E, B, d);
    std::vector<AffinePlane> bestU{P1};
    double bestv = v1;
    for (int k = 2; k <= m && k <= N; ++k) {
        // local PCA planes at farthest-point seeds
        std::vector<int> seeds{0};
        std::vector<double> dmin(N, std::numeric_limits<double>::infinity());
        while (static_cast<int>(seeds.size()) < 4 * k && static_cast<int>(seeds.size()) < N) {
            int s = seeds.back();
            int far = -1;
            double fd = -1;
            for (int i = 0; i < N; ++i) {
                dmin[i] = std::min(dmin[i], (X.col(i) - X.col(s)).norm());
                if (dmin[i] > fd) {
                    fd = dmin[i];
                    far = i;
                }
            }
            if (fd <= 0) break;
            seeds.push_back(far);
        }
        KdTree lt(X);
        std::vector<AffinePlane> local;
        for (int s : seeds) {
            auto nb = lt.radius(X.col(s), 0.3 * B.radius);
            if (static_cast<int>(nb.size()) < d + 1) continue;
            local.push_back(fit_plane_pca(gather(X, nb), d));
        }
        if (static_cast<int>(local.size()) < k) continue;
        // greedy union selection
        std::vector<AffinePlane> U;
        std::vector<char> used(local.size(), 0);
        std::vector<double> res(N, std::numeric_limits<double>::infinity());
        for (int c = 0; c < k; ++c) {
            int bi = -1;
            double bs = std::numeric_limits<double>::infinity();
            for (size_t j = 0; j < local.size(); ++j) {
                if (used[j]) continue;
                double s = 0;
                for (int i = 0; i < N; ++i) s += std::min(res[i], local[j].dist(X.col(i)));
                if (s < bs) {
                    bs = s;
                    bi = static_cast<int>(j);
                }
            }
            used[bi] = 1;
            U.push_back(local[bi]);
            for (int i = 0; i < N; ++i) res[i] = std::min(res[i], local[bi].dist(X.col(i)));
        }
        // k-planes refinement
        for (int it = 0; it < 10; ++it) {
            std::vector<std::vector<int>> cl(k);
            for (int i = 0; i < N; ++i) {
                int a = 0;
                for (int c = 1; c < k; ++c)
                    if (U[c].dist(X.col(i)) < U[a].dist(X.col(i))) a = c;
                cl[a].push_back(i);
            }
            for (int c = 0; c < k; ++c)
                if (static_cast<int>(cl[c].size()) >= d + 1) U[c] = fit_plane_pca(gather(X, cl[c]), d);
        }
        double v = bilateral_distance(E, tree, B, U);
        if (v < bestv) {
            bestv = v;
            bestU = U;
        }
    }
    return {bestU, bestv};
}

inline bool classify_baup(const CubeTree& T, int q, double C0, double eps, int m, int d) {
    if (eps > 2.0) return false;
    Ball B = T.ball(q, C0);
    return best_plane_union(*T.cloud, B, d, m).second >= eps;
}

}  // namespace betascan
