#pragma once

#include <json.hpp>

#include <cstdint>
#include <limits>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "cubes.hpp"
#include "geom.hpp"

namespace betascan {

struct ContentConfig {
    int d = 1;
    double c1 = 0.1;
    double c2 = 18.0;
    double kappa = 1.0;
    double h = 1e-3;             // resolution; no ball radius below h/2
    int ladder_depth = 6;        // uniform net covers at r_B 2^-j, j = 0..J
    int adaptive_t_max = 3;      // thresholds per candidate plane for adaptive covers
    int exhaustive_limit = 6;    // partition covers when |E cap B| is at most this
    int exact_hausdorff_limit = 7;

    static ContentConfig from(const GlobalParams& g, double h) {
        ContentConfig c;
        c.d = g.d;
        c.c1 = g.c1;
        c.c2 = g.c2;
        c.kappa = g.kappa;
        c.h = h;
        c.ladder_depth = g.ladder_depth;
        c.adaptive_t_max = g.adaptive_t_max;
        return c;
    }

    double floor_radius() const { return 0.5 * h; }
};

struct BallCover {
    std::vector<Ball> balls;
};

struct CoverWitness {
    int point = -1;  // cloud index
    double r = 0.0;
    double sum = 0.0;
    double bound = 0.0;
};

struct GoodCoverReport {
    bool covers_ok = true;
    bool size_ok = true;
    bool lr_ok = true;
    bool ur_ok = true;
    CoverWitness lr_worst;
    CoverWitness ur_worst;
    int uncovered_point = -1;

    bool good() const { return covers_ok && size_ok && lr_ok && ur_ok; }

    nlohmann::json to_json() const {
        auto w = [](const CoverWitness& c) {
            return nlohmann::json{{"point", c.point}, {"r", c.r}, {"sum", c.sum}, {"bound", c.bound}};
        };
        nlohmann::json j{{"good", good()}, {"covers_ok", covers_ok}, {"size_ok", size_ok}, {"lr_ok", lr_ok}, {"ur_ok", ur_ok}};
        if (!covers_ok) j["uncovered_point"] = uncovered_point;
        if (!lr_ok) j["lr_witness"] = w(lr_worst);
        if (!ur_ok) j["ur_witness"] = w(ur_worst);
        return j;
    }
};

// Points of E inside a closed query ball, with local indexing.
class LocalSet {
public:
    LocalSet(const Mat& P, const Ball& B) : B_(B) {
        ids_ = points_in_ball(P, B);
        init(P);
    }
    LocalSet(const Mat& P, const KdTree& tree, const Ball& B) : B_(B) {
        ids_ = points_in_ball(tree, B);
        init(P);
    }

    const Ball& ball() const { return B_; }
    const std::vector<int>& ids() const { return ids_; }
    const Mat& X() const { return X_; }
    int size() const { return static_cast<int>(ids_.size()); }
    const KdTree& tree() const { return *tree_; }
    int local_of(int cloud_idx) const {
        auto it = std::lower_bound(ids_.begin(), ids_.end(), cloud_idx);
        return (it != ids_.end() && *it == cloud_idx) ? static_cast<int>(it - ids_.begin()) : -1;
    }

    // Sorted neighbours of point i, complete up to the returned radius (infinite when all points are listed).
    std::pair<const std::vector<std::pair<double, int>>*, double> neighbours(int i, double r) const {
        if (nb_.empty()) {
            nb_.assign(ids_.size(), {});
            nb_r_.assign(ids_.size(), 0.0);
        }
        auto& list = nb_[i];
        double& have = nb_r_[i];
        if (have < r && std::isfinite(have)) {
            double R = std::max(r, 2.0 * have);
            list = tree_->radius_sorted(X_.col(i), R);
            have = static_cast<int>(list.size()) == size() ? std::numeric_limits<double>::infinity() : R;
        }
        return {&list, have};
    }

private:
    Ball B_;
    std::vector<int> ids_;
    Mat X_;
    std::shared_ptr<KdTree> tree_;
    mutable std::vector<std::vector<std::pair<double, int>>> nb_;
    mutable std::vector<double> nb_r_;

    void init(const Mat& P) {
        X_ = gather(P, ids_);
        tree_ = std::make_shared<KdTree>(X_);
    }
};

// A cover restricted to a local set: radii and point incidences.
struct CoverIncidence {
    std::string label;
    std::vector<Ball> balls;
    std::vector<std::vector<int>> members;      // per ball, local point indices
    std::vector<std::vector<int>> point_balls;  // per point, ball indices
    GoodCoverReport report;
    bool checked = false;

    bool good() const { return checked && report.good(); }
};

inline CoverIncidence make_incidence(const LocalSet& S, std::vector<Ball> balls, std::string label) {
    CoverIncidence c;
    c.label = std::move(label);
    c.balls = std::move(balls);
    c.members.resize(c.balls.size());
    c.point_balls.assign(S.size(), {});
    std::vector<int> nb;
    for (size_t b = 0; b < c.balls.size(); ++b) {
        S.tree().radius(c.balls[b].center, c.balls[b].radius * (1.0 + kBallTol), nb);
        std::sort(nb.begin(), nb.end());
        c.members[b] = nb;
        for (int i : nb) c.point_balls[i].push_back(static_cast<int>(b));
    }
    return c;
}

namespace detail {

// Exhaustive check of the good-cover conditions by an event sweep around every point.
inline GoodCoverReport check_incidence(const LocalSet& S, const CoverIncidence& C, const ContentConfig& cfg) {
    GoodCoverReport rep;
    const int m = S.size();
    const double rB = S.ball().radius;
    const int d = cfg.d;
    for (const auto& b : C.balls)
        if (!(b.radius > 0.0) || !std::isfinite(b.radius)) rep.size_ok = false;
    for (int i = 0; i < m; ++i)
        if (C.point_balls[i].empty()) {
            rep.covers_ok = false;
            rep.uncovered_point = S.ids()[i];
            break;
        }
    if (!rep.covers_ok || !rep.size_ok || m == 0) return rep;

    // beyond r_ur every scale satisfies the upper bound for any centre
    std::vector<double> rads;
    rads.reserve(C.balls.size());
    for (const auto& b : C.balls) rads.push_back(b.radius);
    std::sort(rads.begin(), rads.end());
    double r_ur = 0.0, G = 0.0;
    for (size_t k = 0; k < rads.size(); ++k) {
        G += std::pow(rads[k], d);
        if (k + 1 < rads.size() && rads[k + 1] == rads[k]) continue;
        if (G > cfg.c2 * std::pow(rads[k], d)) r_ur = std::max(r_ur, std::pow(G / cfg.c2, 1.0 / d));
    }
    const double lr_target = cfg.c1 * std::pow(rB, d);
    std::vector<double> rad_d(C.balls.size());
    double total = 0.0;
    for (size_t b = 0; b < C.balls.size(); ++b) total += rad_d[b] = std::pow(C.balls[b].radius, d);
    if (total < lr_target) {
        rep.lr_ok = false;
        rep.lr_worst = CoverWitness{S.ids()[0], rB, total, lr_target};
    }
    double worst_lr = std::numeric_limits<double>::infinity();
    double worst_ur = 0.0;
    std::vector<int> stamp(C.balls.size(), -1);
    std::vector<std::pair<double, double>> ur_events;  // (max(e, rad), rad^d)

    for (int i = 0; i < m; ++i) {
        bool lr_done = !rep.lr_ok;
        double S_lr = 0.0;
        ur_events.clear();
        double R = std::max(rB / 32.0, 1e-300);
        int processed_upto = 0;
        for (;;) {
            auto [list, covered] = S.neighbours(i, R);
            const auto& nbrs = *list;
            R = std::max(R, covered);
            const bool all = !std::isfinite(covered);
            // process neighbours beyond those already consumed
            size_t k = processed_upto;
            while (k < nbrs.size()) {
                double dist = nbrs[k].first;
                size_t k2 = k;
                while (k2 < nbrs.size() && nbrs[k2].first == dist) ++k2;
                if (k2 == nbrs.size() && !all) break;  // group may continue past R
                if (!lr_done && dist > 0.0) {
                    double r = std::min(dist, rB);
                    double need = cfg.c1 * std::pow(r, d);
                    double ratio = S_lr / need;
                    if (ratio < worst_lr) {
                        worst_lr = ratio;
                        rep.lr_worst = CoverWitness{S.ids()[i], r, S_lr, need};
                    }
                    if (S_lr < need) rep.lr_ok = false;
                    if (dist >= rB) lr_done = true;
                }
                for (size_t q = k; q < k2; ++q)
                    for (int b : C.point_balls[nbrs[q].second]) {
                        if (stamp[b] == i) continue;
                        stamp[b] = i;
                        double rd = rad_d[b];
                        S_lr += rd;
                        ur_events.emplace_back(std::max(dist, C.balls[b].radius), rd);
                    }
                if (!lr_done && S_lr >= lr_target) lr_done = true;
                k = k2;
            }
            processed_upto = static_cast<int>(k);
            double pending = k < nbrs.size() ? nbrs[k].first : R;
            bool ur_done = !rep.ur_ok || pending >= std::min(r_ur, rB);
            if (all || (lr_done && ur_done)) {
                if (all && !lr_done) {
                    double ratio = S_lr / lr_target;
                    if (ratio < worst_lr) {
                        worst_lr = ratio;
                        rep.lr_worst = CoverWitness{S.ids()[i], rB, S_lr, lr_target};
                    }
                    if (S_lr < lr_target) rep.lr_ok = false;
                }
                break;
            }
            R *= 2.0;
        }
        // upper regularity at the jump points below r_B
        if (!rep.ur_ok) ur_events.clear();
        std::sort(ur_events.begin(), ur_events.end());
        double U = 0.0;
        for (size_t k = 0; k < ur_events.size(); ++k) {
            U += ur_events[k].second;
            double r = ur_events[k].first;
            if (k + 1 < ur_events.size() && ur_events[k + 1].first == r) continue;
            if (r >= rB || r >= r_ur) break;
            double cap = cfg.c2 * std::pow(r, d);
            if (U / cap > worst_ur) {
                worst_ur = U / cap;
                rep.ur_worst = CoverWitness{S.ids()[i], r, U, cap};
            }
            if (U > cap) rep.ur_ok = false;
        }
        if (!rep.lr_ok && !rep.ur_ok) break;
    }
    return rep;
}

inline void set_partitions(int m, const std::function<void(const std::vector<int>&, int)>& f) {
    std::vector<int> a(m, 0);
    std::function<void(int, int)> rec = [&](int i, int k) {
        if (i == m) {
            f(a, k);
            return;
        }
        for (int g = 0; g <= k && g < m; ++g) {
            a[i] = g;
            rec(i + 1, std::max(k, g + 1));
        }
    };
    if (m == 0) return;
    rec(0, 0);
}

// Exact floored ball-convention content of a small finite set: best partition into enclosing balls.
inline double exact_small_content(const Mat& X, const std::vector<int>& A, int d, double rmin,
                                  std::map<std::vector<int>, double>* radius_cache = nullptr) {
    const int m = static_cast<int>(A.size());
    if (m == 0) return 0.0;
    const unsigned full = (1u << m) - 1u;
    std::vector<double> cost(full + 1, 0.0), best(full + 1, std::numeric_limits<double>::infinity());
    std::vector<int> g;
    for (unsigned mask = 1; mask <= full; ++mask) {
        g.clear();
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) g.push_back(A[i]);
        double r = -1.0;
        if (radius_cache) {
            std::vector<int> key = g;
            std::sort(key.begin(), key.end());
            auto it = radius_cache->find(key);
            if (it != radius_cache->end()) r = it->second;
            else r = (*radius_cache)[key] = min_enclosing_ball(gather(X, g)).radius;
        } else {
            r = min_enclosing_ball(gather(X, g)).radius;
        }
        cost[mask] = std::pow(std::max(rmin, r), d);
    }
    best[0] = 0.0;
    for (unsigned mask = 1; mask <= full; ++mask) {
        unsigned low = mask & (~mask + 1u);
        unsigned rest = mask ^ low;
        // blocks containing the lowest element
        for (unsigned sub = rest;; sub = (sub - 1u) & rest) {
            unsigned blk = sub | low;
            best[mask] = std::min(best[mask], cost[blk] + best[mask ^ blk]);
            if (sub == 0u) break;
        }
    }
    return best[full];
}

// Multiscale grid cover: each cell is charged the smaller of its own enclosing ball and its children.
inline double dyadic_rec(const Mat& X, std::vector<int>& idx, int b, int e, const Vec& lo, double side, int d, double h) {
    if (b >= e) return 0.0;
    const int n = static_cast<int>(X.rows());
    Vec mn = X.col(idx[b]), mx = X.col(idx[b]);
    for (int i = b + 1; i < e; ++i) {
        mn = mn.cwiseMin(X.col(idx[i]));
        mx = mx.cwiseMax(X.col(idx[i]));
    }
    double own = std::pow(std::max(0.5 * h, 0.5 * (mx - mn).norm()), d);
    if (e - b == 1 || side < h * (1.0 - 1e-9)) return own;
    double half = 0.5 * side;
    // split planes snap with a relative tolerance so cell membership is invariant under scaling
    const double snap = 1e-9 * side;
    auto code = [&](int pt) {
        unsigned c = 0;
        for (int k = 0; k < n; ++k)
            if (X(k, pt) >= lo[k] + half - snap) c |= (1u << k);
        return c;
    };
    std::stable_sort(idx.begin() + b, idx.begin() + e, [&](int a, int c) { return code(a) < code(c); });
    double sum = 0.0;
    int s = b;
    while (s < e && sum < own) {
        unsigned c = code(idx[s]);
        int t = s;
        while (t < e && code(idx[t]) == c) ++t;
        Vec clo = lo;
        for (int k = 0; k < n; ++k)
            if (c & (1u << k)) clo[k] += half;
        sum += dyadic_rec(X, idx, s, t, clo, half, d, h);
        s = t;
    }
    return std::min(own, sum);
}

}  // namespace detail

// Grid-based upper estimate of the ball-convention content of a subset of the columns of X.
inline double dyadic_content_anchored(const Mat& X, std::vector<int> A, const Vec& lo, double side, int d, double h) {
    if (A.empty()) return 0.0;
    std::sort(A.begin(), A.end());
    return detail::dyadic_rec(X, A, 0, static_cast<int>(A.size()), lo, side, d, h);
}

// Content estimate of a point set (columns of A): grid cover anchored at the bounding box, exact for tiny sets.
inline double dyadic_content(const Mat& A, const ContentConfig& cfg) {
    if (A.cols() == 0) return 0.0;
    Vec lo = A.rowwise().minCoeff();
    Vec hi = A.rowwise().maxCoeff();
    double side = std::max((hi - lo).maxCoeff(), cfg.h);
    std::vector<int> all(A.cols());
    std::iota(all.begin(), all.end(), 0);
    double v = dyadic_content_anchored(A, all, lo, side, cfg.d, cfg.h);
    if (A.cols() <= cfg.exact_hausdorff_limit) v = std::min(v, detail::exact_small_content(A, all, cfg.d, cfg.floor_radius()));
    return v;
}

// Diameter convention: sum of diam^d; a ball of radius r has diameter 2r.
inline double dyadic_content_diameter(const Mat& A, const ContentConfig& cfg) {
    return std::pow(2.0, cfg.d) * dyadic_content(A, cfg);
}

struct AdaptiveSeed {
    AffinePlane plane;
    double t = 0.0;  // threshold as a fraction of r_B
};

// Candidate cover family for one query ball, shared by the restricted and the plain content estimators.
class ContentFamily {
public:
    ContentFamily(const Mat& P, const Ball& B, const ContentConfig& cfg, const std::vector<AdaptiveSeed>& seeds = {},
                  bool check = true)
        : S_(std::make_shared<LocalSet>(P, B)), cfg_(cfg), check_(check) {
        build(seeds);
    }

    ContentFamily(std::shared_ptr<LocalSet> S, const ContentConfig& cfg, const std::vector<AdaptiveSeed>& seeds = {},
                  bool check = true)
        : S_(std::move(S)), cfg_(cfg), check_(check) {
        build(seeds);
    }

    const LocalSet& local() const { return *S_; }
    std::shared_ptr<LocalSet> local_ptr() const { return S_; }
    const std::vector<CoverIncidence>& covers() const { return covers_; }
    const ContentConfig& config() const { return cfg_; }
    bool checked() const { return check_; }

    int good_count() const {
        int c = 0;
        for (const auto& cv : covers_) c += cv.good();
        return c;
    }

    // Adds a cover, checking it when this family is checked.
    void add(std::vector<Ball> balls, const std::string& label) {
        subset_memo_.clear();
        CoverIncidence c = make_incidence(*S_, std::move(balls), label);
        if (check_) {
            c.report = detail::check_incidence(*S_, c, cfg_);
            c.checked = true;
        }
        covers_.push_back(std::move(c));
    }

    // Filters the covers of a larger ball's family to this ball and re-checks them.
    void inherit(const ContentFamily& parent) {
        for (const auto& pc : parent.covers()) {
            if (pc.checked && !pc.good()) continue;
            std::vector<Ball> kept;
            for (size_t b = 0; b < pc.balls.size(); ++b) {
                bool meets = false;
                for (int li : pc.members[b])
                    if (S_->local_of(parent.local().ids()[li]) >= 0) {
                        meets = true;
                        break;
                    }
                if (meets) kept.push_back(pc.balls[b]);
            }
            if (!kept.empty()) add(std::move(kept), "inherited:" + pc.label);
        }
    }

    double restricted_sum(const CoverIncidence& c, const std::vector<char>& mask) const {
        double s = 0.0;
        for (size_t b = 0; b < c.balls.size(); ++b)
            for (int i : c.members[b])
                if (mask[i]) {
                    s += std::pow(c.balls[b].radius, cfg_.d);
                    break;
                }
        return s;
    }

    // Restricted content of a local subset (min over good covers; {B} is always good).
    double restricted(const std::vector<int>& local_subset) const {
        if (local_subset.empty()) return 0.0;
        std::vector<char> mask(S_->size(), 0);
        for (int i : local_subset) mask[i] = 1;
        double best = std::pow(S_->ball().radius, cfg_.d);
        for (const auto& c : covers_)
            if (c.good()) best = std::min(best, restricted_sum(c, mask));
        return best;
    }

    // Plain content estimate of a local subset: grid cover, every family cover, exact for tiny sets.
    double hausdorff(const std::vector<int>& local_subset) const {
        if (local_subset.empty()) return 0.0;
        std::vector<char> mask(S_->size(), 0);
        for (int i : local_subset) mask[i] = 1;
        double best = std::pow(S_->ball().radius, cfg_.d);
        for (const auto& c : covers_) best = std::min(best, restricted_sum(c, mask));
        best = std::min(best, grid(local_subset));
        if (static_cast<int>(local_subset.size()) <= cfg_.exact_hausdorff_limit)
            best = std::min(best, detail::exact_small_content(S_->X(), local_subset, cfg_.d, cfg_.floor_radius(), &meb_cache_));
        return best;
    }

    double grid(const std::vector<int>& local_subset) const {
        const Ball& B = S_->ball();
        Vec lo = B.center.array() - B.radius;
        return dyadic_content_anchored(S_->X(), local_subset, lo, 2.0 * B.radius, cfg_.d, cfg_.h);
    }

    // (1/r^d) * integral over t in (0,1) of content({u > t r}) p t^(p-1) dt for per-point values u.
    double level_integral(const std::vector<double>& u, double p, bool restricted_only) const {
        const int m = S_->size();
        const double r = S_->ball().radius;
        const int d = cfg_.d;
        std::vector<double> v;
        for (double x : u)
            if (x > 0.0) v.push_back(x);
        if (v.empty()) return 0.0;
        std::sort(v.begin(), v.end());
        // levels closer than a relative tolerance merge into the lowest one, so ties survive scaling
        v.erase(std::unique(v.begin(), v.end(), [&](double a, double b) { return b - a <= 1e-12 * r; }), v.end());
        // keep levels whose interval starts below r
        size_t K = 0;
        while (K < v.size() && (K == 0 || v[K - 1] < r)) ++K;
        v.resize(K);
        std::vector<double> content(K, std::pow(r, d));
        if (m <= kMemoPoints) {
            for (size_t k = 0; k < K; ++k) {
                std::uint32_t mask = 0;
                for (int i = 0; i < m; ++i)
                    if (u[i] >= v[k]) mask |= 1u << i;
                content[k] = subset_content(mask, restricted_only);
            }
        } else {
            auto eval_covers = [&](const CoverIncidence& c) {
                std::vector<std::pair<double, double>> mb;
                mb.reserve(c.balls.size());
                for (size_t b = 0; b < c.balls.size(); ++b) {
                    double mx = 0.0;
                    for (int i : c.members[b]) mx = std::max(mx, u[i]);
                    if (mx > 0.0) mb.emplace_back(mx, std::pow(c.balls[b].radius, d));
                }
                std::sort(mb.begin(), mb.end());
                std::vector<double> suffix(mb.size() + 1, 0.0);
                for (size_t j = mb.size(); j-- > 0;) suffix[j] = suffix[j + 1] + mb[j].second;
                for (size_t k = 0; k < K; ++k) {
                    auto it = std::lower_bound(mb.begin(), mb.end(), std::make_pair(v[k], -1.0));
                    content[k] = std::min(content[k], suffix[it - mb.begin()]);
                }
            };
            for (const auto& c : covers_)
                if (!restricted_only || c.good()) eval_covers(c);
            if (!restricted_only) {
                std::vector<int> order(m);
                std::iota(order.begin(), order.end(), 0);
                std::sort(order.begin(), order.end(), [&](int a, int b) { return u[a] > u[b] || (u[a] == u[b] && a < b); });
                auto level_set = [&](size_t k) {
                    std::vector<int> A;
                    for (int i : order) {
                        if (u[i] < v[k]) break;
                        A.push_back(i);
                    }
                    return A;
                };
                // grid covers at a few levels; each value bounds the following smaller level sets
                const size_t G = std::min<size_t>(K, 16);
                std::vector<size_t> at;
                for (size_t g = 0; g < G; ++g) at.push_back(g * K / G);
                double last = std::numeric_limits<double>::infinity();
                size_t gi = 0;
                for (size_t k = 0; k < K; ++k) {
                    if (gi < at.size() && at[gi] == k) {
                        last = grid(level_set(k));
                        ++gi;
                    }
                    content[k] = std::min(content[k], last);
                }
                for (size_t k = 0; k < K; ++k) {
                    auto A = level_set(k);
                    if (static_cast<int>(A.size()) <= cfg_.exact_hausdorff_limit)
                        content[k] = std::min(content[k], detail::exact_small_content(S_->X(), A, d, cfg_.floor_radius(), &meb_cache_));
                }
            }
        }
        double I = 0.0, prev = 0.0;
        for (size_t k = 0; k < K; ++k) {
            double a = prev / r, b = std::min(v[k], r) / r;
            I += content[k] * (std::pow(b, p) - std::pow(a, p));
            prev = v[k];
        }
        return I / std::pow(r, d);
    }

    static constexpr int kMemoPoints = 6;

private:
    std::shared_ptr<LocalSet> S_;
    ContentConfig cfg_;
    bool check_ = true;
    std::vector<CoverIncidence> covers_;
    mutable std::map<std::vector<int>, double> meb_cache_;
    mutable std::map<std::pair<std::uint32_t, bool>, double> subset_memo_;

    // Content of a subset of a small local set given as a bit mask, with the same candidates as the level integral.
    double subset_content(std::uint32_t mask, bool restricted_only) const {
        auto key = std::make_pair(mask, restricted_only);
        if (auto it = subset_memo_.find(key); it != subset_memo_.end()) return it->second;
        const int m = S_->size();
        std::vector<char> in(m, 0);
        std::vector<int> A;
        for (int i = 0; i < m; ++i)
            if (mask & (1u << i)) {
                in[i] = 1;
                A.push_back(i);
            }
        double best = std::pow(S_->ball().radius, cfg_.d);
        for (const auto& c : covers_)
            if (!restricted_only || c.good()) best = std::min(best, restricted_sum(c, in));
        if (!restricted_only) {
            best = std::min(best, grid(A));
            if (static_cast<int>(A.size()) <= cfg_.exact_hausdorff_limit)
                best = std::min(best, detail::exact_small_content(S_->X(), A, cfg_.d, cfg_.floor_radius(), &meb_cache_));
        }
        subset_memo_[key] = best;
        return best;
    }

    void build(const std::vector<AdaptiveSeed>& seeds) {
        const Ball& B = S_->ball();
        const int m = S_->size();
        const double fl = cfg_.floor_radius();
        add({B}, "ball");
        if (m == 0) return;
        for (int j = 0; j <= cfg_.ladder_depth; ++j) {
            double s = B.radius * std::pow(2.0, -j);
            bool at_floor = s <= fl;
            s = std::max(s, fl);
            auto net = maximal_net(S_->X(), s);
            std::vector<Ball> balls;
            for (int i : net) balls.emplace_back(S_->X().col(i), s);
            add(balls, "uniform:" + std::to_string(j));
            if (check_ && !covers_.back().good()) {
                for (auto& b : balls) b.radius *= 3.0;
                add(balls, "uniform3:" + std::to_string(j));
            }
            if (at_floor) break;
        }
        for (const auto& sd : seeds) add_adaptive(sd);
        if (m <= cfg_.exhaustive_limit) add_partition_covers();
    }

    void add_adaptive(const AdaptiveSeed& sd) {
        const int m = S_->size();
        const Mat& X = S_->X();
        const double fl = cfg_.floor_radius();
        std::vector<double> delta(m);
        for (int i = 0; i < m; ++i) delta[i] = std::max(sd.plane.dist(X.col(i)), fl) + sd.t * S_->ball().radius / 120.0;
        std::vector<int> order(m);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return delta[a] > delta[b] || (delta[a] == delta[b] && a < b); });
        std::vector<int> net;
        for (int i : order) {
            bool ok = true;
            for (int j : net)
                if ((X.col(i) - X.col(j)).norm() < 4.0 * std::max(delta[i], delta[j])) {
                    ok = false;
                    break;
                }
            if (ok) net.push_back(i);
        }
        std::vector<Ball> balls;
        for (int i : net) balls.emplace_back(X.col(i), 12.0 * delta[i]);
        add(std::move(balls), "adaptive");
    }

    void add_partition_covers() {
        const int m = S_->size();
        const Mat& X = S_->X();
        const double fl = cfg_.floor_radius();
        detail::set_partitions(m, [&](const std::vector<int>& a, int k) {
            std::vector<Ball> base;
            for (int g = 0; g < k; ++g) {
                std::vector<int> grp;
                for (int i = 0; i < m; ++i)
                    if (a[i] == g) grp.push_back(i);
                auto mb = min_enclosing_ball(gather(X, grp));
                base.emplace_back(mb.center, std::max(fl, mb.radius));
            }
            for (double f : {1.0, 2.0, 3.0}) {
                std::vector<Ball> balls = base;
                for (auto& b : balls) b.radius *= f;
                add(std::move(balls), "partition");
            }
            if (check_) add_min_inflation(base);
        });
    }

    // Smallest uniform inflation of a partition cover that is good, by bisection on the factor.
    void add_min_inflation(const std::vector<Ball>& base) {
        auto good_at = [&](double f) {
            std::vector<Ball> balls = base;
            for (auto& b : balls) b.radius *= f;
            CoverIncidence c = make_incidence(*S_, std::move(balls), "");
            return detail::check_incidence(*S_, c, cfg_).good();
        };
        if (good_at(1.0)) return;
        double lo = 1.0, hi = 2.0;
        const double cap = 4.0 * S_->ball().radius / std::max(cfg_.floor_radius(), 1e-300);
        while (!good_at(hi)) {
            lo = hi;
            hi *= 2.0;
            if (hi > cap) return;
        }
        for (int it = 0; it < 40 && hi - lo > 1e-12 * hi; ++it) {
            double mid = 0.5 * (lo + hi);
            (good_at(mid) ? hi : lo) = mid;
        }
        std::vector<Ball> balls = base;
        for (auto& b : balls) b.radius *= hi;
        add(std::move(balls), "partition-min");
    }
};

inline GoodCoverReport check_good(const BallCover& cover, const PointCloud& E, const Ball& B, const ContentConfig& cfg) {
    LocalSet S(E.points(), B);
    CoverIncidence c = make_incidence(S, cover.balls, "user");
    return detail::check_incidence(S, c, cfg);
}

namespace detail {

inline std::vector<int> to_local(const LocalSet& S, const std::vector<int>& A) {
    std::vector<int> out;
    for (int i : A) {
        int l = S.local_of(i);
        if (l < 0) throw InputError("subset is not contained in E cap B");
        out.push_back(l);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace detail

// Restricted content of A (cloud indices, subset of E cap B) over the candidate family.
inline double restricted_content(const std::vector<int>& A, const PointCloud& E, const Ball& B, const ContentConfig& cfg,
                                 const std::vector<AdaptiveSeed>& seeds = {}) {
    ContentFamily fam(E.points(), B, cfg, seeds, true);
    return fam.restricted(detail::to_local(fam.local(), A));
}

// Exact Choquet integral over a finite domain: sum of (t_{i+1} - t_i) content({f > t_i}).
inline double choquet(const std::vector<double>& f, const std::function<double(const std::vector<int>&)>& content) {
    for (double x : f)
        if (x < 0.0 || !std::isfinite(x)) throw InputError("choquet integrand must be finite and nonnegative");
    std::vector<double> t(f.begin(), f.end());
    t.push_back(0.0);
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
    double I = 0.0;
    for (size_t i = 0; i + 1 < t.size(); ++i) {
        std::vector<int> A;
        for (size_t j = 0; j < f.size(); ++j)
            if (f[j] > t[i]) A.push_back(static_cast<int>(j));
        I += (t[i + 1] - t[i]) * content(A);
    }
    return I;
}

// One random greedy packing of disjoint balls centred near a d-plane inside the unit ball of R^(d+1).
inline double packing_trial(int d, std::mt19937_64& rng, bool largest_first) {
    const int n = d + 1;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> g(0.0, 1.0);
    const int cand = 300;
    std::vector<double> radii(cand);
    for (auto& r : radii) r = std::exp(std::log(0.01) * u(rng));
    if (largest_first) std::sort(radii.begin(), radii.end(), std::greater<>());
    std::vector<std::pair<Vec, double>> placed;
    double sum = 0.0;
    for (double r : radii) {
        for (int attempt = 0; attempt < 20; ++attempt) {
            Vec c = Vec::Zero(n);
            // uniform point of the d-disk of radius 1 - r, lifted by less than r/2
            Vec dir(d);
            for (int k = 0; k < d; ++k) dir[k] = g(rng);
            double rad = (1.0 - r) * std::pow(u(rng), 1.0 / d);
            c.head(d) = dir.normalized() * rad;
            c[d] = (u(rng) - 0.5) * r;
            if (c.norm() + r > 1.0) continue;
            bool ok = true;
            for (const auto& [pc, pr] : placed)
                if ((pc - c).norm() < pr + r) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            placed.emplace_back(c, r);
            sum += std::pow(r, d);
            break;
        }
    }
    return sum;
}

// 1.5 times the best packing sum over random trials.
inline double estimate_kappa(int d, int trials, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double best = 0.0;
    for (int t = 0; t < trials; ++t) best = std::max(best, packing_trial(d, rng, t % 2 == 0));
    return 1.5 * best;
}

}  // namespace betascan
