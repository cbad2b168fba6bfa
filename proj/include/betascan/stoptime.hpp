#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "beta.hpp"
#include "cubes.hpp"
#include "geom.hpp"
#include "kdtree.hpp"

namespace betascan {

struct SeparationResult {
    bool ok = false;
    bool exhaustive = false;
    std::vector<int> witness;  // cloud indices x_0..x_d
    double score = 0.0;        // smallest increment over r_B for the witness

    nlohmann::json to_json() const {
        return {{"ok", ok}, {"exhaustive", exhaustive}, {"witness", witness}, {"score", score}};
    }
};

namespace detail {

// Increments dist(x_{i+1}, span{x_0..x_i}) of an ordered tuple.
inline std::vector<double> span_increments(const Mat& X, const std::vector<int>& order) {
    std::vector<double> inc;
    if (order.empty()) return inc;
    const int n = static_cast<int>(X.rows());
    Vec x0 = X.col(order[0]);
    Mat Q(n, 0);
    for (size_t i = 1; i < order.size(); ++i) {
        Vec v = X.col(order[i]) - x0;
        if (Q.cols() > 0) v -= Q * (Q.transpose() * v);
        double nv = v.norm();
        inc.push_back(nv);
        if (nv > 0.0) {
            Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
            Q.col(Q.cols() - 1) = v / nv;
        }
    }
    return inc;
}

// Best ordered (d+1)-tuple by branch and bound on the smallest increment.
inline void sep_search(const Mat& X, int d, std::vector<int>& cur, std::vector<char>& used, const Vec& x0, Mat& Q,
                       double cur_min, double& best, std::vector<int>& best_tuple) {
    if (static_cast<int>(cur.size()) == d + 1) {
        if (cur_min > best) {
            best = cur_min;
            best_tuple = cur;
        }
        return;
    }
    const int m = static_cast<int>(X.cols());
    for (int j = 0; j < m; ++j) {
        if (used[j]) continue;
        double inc;
        Vec v;
        if (cur.empty()) {
            inc = std::numeric_limits<double>::infinity();
        } else {
            v = X.col(j) - x0;
            if (Q.cols() > 0) v -= Q * (Q.transpose() * v);
            inc = v.norm();
        }
        double nm = std::min(cur_min, inc);
        if (nm <= best) continue;
        used[j] = 1;
        cur.push_back(j);
        if (cur.size() == 1) {
            Mat Q0(X.rows(), 0);
            sep_search(X, d, cur, used, X.col(j), Q0, nm, best, best_tuple);
        } else {
            Mat Q2(X.rows(), Q.cols() + 1);
            Q2 << Q, v / inc;
            sep_search(X, d, cur, used, x0, Q2, nm, best, best_tuple);
        }
        cur.pop_back();
        used[j] = 0;
    }
}

inline std::vector<int> greedy_tuple(const Mat& X, int d, int first) {
    const int n = static_cast<int>(X.rows());
    const int m = static_cast<int>(X.cols());
    std::vector<int> order{first};
    Vec x0 = X.col(first);
    Mat Q(n, 0);
    for (int step = 0; step < d; ++step) {
        int arg = -1;
        double far = -1.0;
        Vec best_v;
        for (int j = 0; j < m; ++j) {
            Vec v = X.col(j) - x0;
            if (Q.cols() > 0) v -= Q * (Q.transpose() * v);
            double nv = v.norm();
            if (nv > far) {
                far = nv;
                arg = j;
                best_v = v;
            }
        }
        order.push_back(arg);
        if (far <= 0.0) break;
        Q.conservativeResize(Eigen::NoChange, Q.cols() + 1);
        Q.col(Q.cols() - 1) = best_v / far;
    }
    return order;
}

}  // namespace detail

// (d+1, alpha)-separated points of E in B: exhaustive up to exhaustive_limit points, greedy above.
inline SeparationResult separated_points(const PointCloud& E, const Ball& B, double alpha, int d, int exhaustive_limit = 20) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
    if (d < 1) throw InputError("d must be positive");
    SeparationResult res;
    auto ids = points_in_ball(E.points(), B);
    const int m = static_cast<int>(ids.size());
    if (m < d + 1) return res;
    Mat X = gather(E.points(), ids);
    const double need = alpha * B.radius * (1.0 - 1e-12);
    std::vector<int> tuple;
    if (m <= exhaustive_limit) {
        res.exhaustive = true;
        std::vector<int> cur;
        std::vector<char> used(m, 0);
        Mat Q(X.rows(), 0);
        double best = -1.0;
        detail::sep_search(X, d, cur, used, Vec::Zero(X.rows()), Q, std::numeric_limits<double>::infinity(), best, tuple);
    } else {
        tuple = detail::greedy_tuple(X, d, 0);
        auto inc = detail::span_increments(X, tuple);
        double s = inc.empty() ? 0.0 : *std::min_element(inc.begin(), inc.end());
        if (s < need) {
            auto alt = detail::greedy_tuple(X, d, tuple[1]);
            auto inc2 = detail::span_increments(X, alt);
            double s2 = inc2.empty() ? 0.0 : *std::min_element(inc2.begin(), inc2.end());
            if (s2 > s) tuple = alt;
        }
    }
    if (static_cast<int>(tuple.size()) != d + 1) return res;
    auto inc = detail::span_increments(X, tuple);
    double s = *std::min_element(inc.begin(), inc.end());
    res.score = s / B.radius;
    res.ok = s >= need;
    for (int t : tuple) res.witness.push_back(ids[t]);
    return res;
}

struct StoppingRegion {
    int id = -1;
    int top = -1;
    std::vector<int> cubes;      // breadth-first from the top
    std::vector<int> min_cubes;  // cubes with a child outside the region
    std::vector<int> stop;       // Stop(S), filled by stop_smooth
    bool singleton() const { return cubes.size() == 1; }

    nlohmann::json to_json() const {
        return {{"id", id}, {"top", top}, {"cubes", cubes}, {"min_cubes", min_cubes}, {"stop_cubes", stop}, {"singleton", singleton()}};
    }
};

struct RegionForest {
    std::string rule;
    std::vector<StoppingRegion> regions;
    std::vector<int> region_of;  // cube id -> region id, -1 outside the partition
    std::vector<int> excluded;   // tops of subtrees left unpartitioned (no restart allowed)
    std::map<int, double> chain_sum;  // cube -> sum of squared betas from the region top

    int region_count() const { return static_cast<int>(regions.size()); }
    int singleton_count() const {
        int c = 0;
        for (const auto& r : regions) c += r.singleton();
        return c;
    }
    const StoppingRegion& region_of_cube(int q) const { return regions.at(region_of.at(q)); }

    nlohmann::json to_json() const {
        nlohmann::json rs = nlohmann::json::array();
        for (const auto& r : regions) rs.push_back(r.to_json());
        return {{"schema", "betascan/1"},
                {"kind", "region_forest"},
                {"rule", rule},
                {"region_count", region_count()},
                {"singleton_count", singleton_count()},
                {"excluded_subtrees", excluded},
                {"regions", rs}};
    }
};

// Lazily evaluated beta of the ball factor * B_Q for every cube.
class CubeBetas {
public:
    CubeBetas(const CubeTree& T, BetaKind kind, double factor, const GlobalParams& g, double p = 1.0)
        : T_(T), kind_(kind), factor_(factor), g_(g), p_(p), val_(T.size(), -1.0) {}

    double operator()(int q) {
        if (val_[q] >= 0.0) return val_[q];
        BallBeta bb(*T_.cloud, T_.ball(q, factor_), g_);
        double v = 0.0;
        switch (kind_) {
            case BetaKind::Inf: v = bb.inf().value; break;
            case BetaKind::Hat: v = bb.hat().value; break;
            case BetaKind::Check: v = bb.check(p_).value; break;
            case BetaKind::New: v = bb.new_beta(p_).value; break;
        }
        ++evaluated_;
        return val_[q] = v;
    }
    int evaluated() const { return evaluated_; }

private:
    const CubeTree& T_;
    BetaKind kind_;
    double factor_;
    GlobalParams g_;
    double p_;
    std::vector<double> val_;
    int evaluated_ = 0;
};

namespace detail {

struct GrowRule {
    std::function<bool(int)> child_ok;   // per-sibling geometric condition
    std::function<double(int)> beta;     // beta of the cube's enlarged ball
    double eps = 0.0;
    bool strict = true;                  // chain sum < eps^2 (strict) or <= eps^2
    std::function<bool(int)> may_start;  // restart permitted at this cube
};

// Grows regions top-down: the children of P join together when every sibling passes; restarts at children of min cubes.
inline RegionForest grow_regions(const CubeTree& T, const GrowRule& rule) {
    RegionForest F;
    F.region_of.assign(T.size(), -1);
    const double eps2 = rule.eps * rule.eps;
    std::vector<int> tops;
    if (rule.may_start(T.root)) tops.push_back(T.root);
    else F.excluded.push_back(T.root);
    for (size_t t = 0; t < tops.size(); ++t) {
        StoppingRegion S;
        S.id = static_cast<int>(F.regions.size());
        S.top = tops[t];
        S.cubes.push_back(S.top);
        F.region_of[S.top] = S.id;
        for (size_t i = 0; i < S.cubes.size(); ++i) {
            int P = S.cubes[i];
            const auto& ch = T.cube(P).children;
            if (ch.empty()) continue;
            bool ok = true;
            for (int c : ch)
                if (!rule.child_ok(c)) {
                    ok = false;
                    break;
                }
            std::vector<double> sums;
            if (ok) {
                if (!F.chain_sum.count(P)) {
                    double b = rule.beta(P);
                    F.chain_sum[P] = b * b;
                }
                double base = F.chain_sum.at(P);
                for (int c : ch) {
                    double b = rule.beta(c);
                    double v = base + b * b;
                    if (rule.strict ? !(v < eps2) : !(v <= eps2)) {
                        ok = false;
                        break;
                    }
                    sums.push_back(v);
                }
            }
            if (ok) {
                for (size_t k = 0; k < ch.size(); ++k) {
                    S.cubes.push_back(ch[k]);
                    F.region_of[ch[k]] = S.id;
                    F.chain_sum[ch[k]] = sums[k];
                }
            } else {
                S.min_cubes.push_back(P);
                for (int c : ch) {
                    if (rule.may_start(c)) tops.push_back(c);
                    else F.excluded.push_back(c);
                }
            }
        }
        F.regions.push_back(std::move(S));
    }
    return F;
}

}  // namespace detail

// Distance from every point of A to the cloud B.
inline std::vector<double> distances_to(const Mat& A, const Mat& B) {
    KdTree tree(B);
    std::vector<double> d(A.cols());
    for (int i = 0; i < A.cols(); ++i) d[i] = tree.nearest(A.col(i)).second;
    return d;
}

// Regions over cubes of F: siblings stay eps-close to E and the chain sum of beta-check(M B_T)^2 stays below eps^2.
inline RegionForest regions_beta(const CubeTree& TF, const PointCloud& E, const GlobalParams& g,
                                 std::function<double(int)> beta = {}) {
    const Mat& PF = TF.points();
    if (E.dim() != TF.cloud->dim()) throw InputError("dimension mismatch between E and F");
    auto dE = distances_to(PF, E.points());
    auto dF = distances_to(E.points(), PF);
    const double tol = 1e-12 * std::max(1.0, TF.scale);
    for (double v : dF)
        if (v > tol) throw InputError("E must be a subset of F");
    if (!beta) {
        auto own = std::make_shared<CubeBetas>(TF, BetaKind::Check, g.M, g, 1.0);
        beta = [own](int q) { return (*own)(q); };
    }
    auto tE = std::make_shared<KdTree>(E.points());
    detail::GrowRule rule;
    rule.child_ok = [&](int r) {
        const Cube& R = TF.cube(r);
        for (int i : R.members)
            if (dE[i] > g.eps * R.side) return false;
        return true;
    };
    rule.beta = beta;
    rule.eps = g.eps;
    rule.strict = true;
    rule.may_start = [&](int q) { return tE->any_within(TF.center(q), g.C0 * TF.cube(q).side); };
    RegionForest F = detail::grow_regions(TF, rule);
    F.rule = "beta";
    return F;
}

// Regions over cubes of E: chain sum of beta(M B_T)^2 at most eps^2 and (d+1, alpha)-separated points in every sibling ball.
inline RegionForest regions_sep(const CubeTree& TE, const GlobalParams& g, std::function<double(int)> beta = {},
                                std::function<bool(int)> separated = {}) {
    if (!beta) {
        auto own = std::make_shared<CubeBetas>(TE, BetaKind::New, g.M, g, 1.0);
        beta = [own](int q) { return (*own)(q); };
    }
    if (!separated) {
        separated = [&TE, g](int q) { return separated_points(*TE.cloud, TE.ball(q, g.M), g.alpha, g.d).ok; };
    }
    std::vector<signed char> memo(TE.size(), -1);
    detail::GrowRule rule;
    rule.child_ok = [&](int r) {
        if (memo[r] < 0) memo[r] = separated(r) ? 1 : 0;
        return memo[r] == 1;
    };
    rule.beta = beta;
    rule.eps = g.eps;
    rule.strict = false;
    rule.may_start = [](int) { return true; };
    RegionForest F = detail::grow_regions(TE, rule);
    F.rule = "separation";
    return F;
}

struct ForestCheck {
    bool partition_ok = true;   // every admissible cube in exactly one region, nothing else
    bool contains_ok = true;    // the top contains all region cubes
    bool upward_ok = true;      // closed under parents up to the top
    bool sibling_ok = true;     // closed under siblings (except the top)
    bool tops_ok = true;        // tops are the root or children of earlier min cubes
    bool min_ok = true;         // min cubes are exactly the cubes with a child outside
    std::vector<std::string> problems;

    bool ok() const { return partition_ok && contains_ok && upward_ok && sibling_ok && tops_ok && min_ok; }
    nlohmann::json to_json() const {
        return {{"ok", ok()}, {"partition_ok", partition_ok}, {"contains_ok", contains_ok}, {"upward_ok", upward_ok},
                {"sibling_ok", sibling_ok}, {"tops_ok", tops_ok}, {"min_ok", min_ok}, {"problems", problems}};
    }
};

// Exact check of the coherence rules; admissible(q) selects the cubes that must be covered.
inline ForestCheck verify_forest(const CubeTree& T, const RegionForest& F, const std::function<bool(int)>& admissible) {
    ForestCheck ck;
    auto fail = [&](bool& flag, std::string msg) {
        flag = false;
        if (ck.problems.size() < 20) ck.problems.push_back(std::move(msg));
    };
    std::vector<int> count(T.size(), 0);
    for (const auto& S : F.regions)
        for (int q : S.cubes) ++count[q];
    for (int q = 0; q < T.size(); ++q) {
        bool adm = admissible(q);
        if (adm && count[q] != 1) fail(ck.partition_ok, "admissible cube " + std::to_string(q) + " covered " + std::to_string(count[q]) + " times");
        if (!adm && count[q] != 0) fail(ck.partition_ok, "inadmissible cube " + std::to_string(q) + " in a region");
        if (count[q] == 1 && F.region_of[q] < 0) fail(ck.partition_ok, "region map missing cube " + std::to_string(q));
    }
    std::vector<int> min_seen;
    for (size_t s = 0; s < F.regions.size(); ++s) {
        const auto& S = F.regions[s];
        std::vector<char> in(T.size(), 0);
        for (int q : S.cubes) in[q] = 1;
        for (int q : S.cubes) {
            if (!T.is_ancestor_or_self(S.top, q)) fail(ck.contains_ok, "top does not contain cube " + std::to_string(q));
            if (q != S.top) {
                int par = T.cube(q).parent;
                if (par < 0 || !in[par]) fail(ck.upward_ok, "parent of " + std::to_string(q) + " outside its region");
                if (par >= 0)
                    for (int sib : T.cube(par).children)
                        if (!in[sib]) fail(ck.sibling_ok, "sibling of " + std::to_string(q) + " outside its region");
            }
        }
        std::vector<int> mins;
        for (int q : S.cubes) {
            bool out = false;
            for (int c : T.cube(q).children) out = out || !in[c];
            if (out) mins.push_back(q);
        }
        auto a = mins, b = S.min_cubes;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) fail(ck.min_ok, "min cubes of region " + std::to_string(s) + " differ");
        if (s == 0) {
            if (S.top != T.root) fail(ck.tops_ok, "first region does not start at the root");
        } else {
            int par = T.cube(S.top).parent;
            bool found = false;
            for (size_t e = 0; e < s && !found; ++e) {
                const auto& mc = F.regions[e].min_cubes;
                found = std::find(mc.begin(), mc.end(), par) != mc.end();
            }
            if (!found) fail(ck.tops_ok, "top of region " + std::to_string(s) + " is not a child of an earlier min cube");
        }
    }
    return ck;
}

struct StopPartner {
    int R = -1;
    int Q = -1;  // partner in S, -1 when none was found
    double dist = 0.0;
    bool ok = false;

    nlohmann::json to_json() const { return {{"R", R}, {"Q", Q}, {"dist", dist}, {"ok", ok}}; }
};

struct StopResult {
    std::vector<int> stop;
    std::vector<StopPartner> partners;  // for stop cubes meeting 2 C0 B_{Q(S)}
    int partner_failures = 0;

    nlohmann::json to_json() const {
        nlohmann::json ps = nlohmann::json::array();
        for (const auto& p : partners) ps.push_back(p.to_json());
        return {{"stop", stop}, {"partners", ps}, {"partner_failures", partner_failures}};
    }
};

// Stop(S): maximal cubes with l(Q) < tau d_S(Q), with partners satisfying the comparability bounds.
inline StopResult stop_smooth(const StoppingRegion& S, const CubeTree& T, double tau, double C0) {
    const double tau0 = GlobalParams::tau0(T.rho);
    if (!(tau > 0.0 && tau < tau0)) throw InputError("tau must lie in (0, 1/(2(1+rho)))");
    StopResult res;
    std::vector<int> stack{T.root};
    while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        double dS = dist_to_family(T, q, S.cubes);
        if (T.cube(q).side < tau * dS) {
            res.stop.push_back(q);
            continue;
        }
        const auto& ch = T.cube(q).children;
        for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
    }
    std::sort(res.stop.begin(), res.stop.end());
    const Mat& P = T.points();
    Vec xs = P.col(T.cube(S.top).center_idx);
    const double reach = 2.0 * C0 * T.cube(S.top).side;
    for (int r : res.stop) {
        const Cube& R = T.cube(r);
        bool meets = false;
        for (int i : R.members)
            if ((P.col(i) - xs).norm() <= reach) {
                meets = true;
                break;
            }
        if (!meets) continue;
        StopPartner sp;
        sp.R = r;
        for (int q : S.cubes) {
            const double lq = T.cube(q).side, lr = R.side;
            if (!(tau * T.rho / 4.0 * lq <= lr && lr <= 3.0 * C0 * tau * lq)) continue;
            double dist = cube_distance(T, r, q);
            if (tau * dist <= 4.0 / T.rho * lr) {
                sp.Q = q;
                sp.dist = dist;
                sp.ok = true;
                break;
            }
        }
        if (!sp.ok) ++res.partner_failures;
        res.partners.push_back(sp);
    }
    return res;
}

struct TopUpSplit {
    std::vector<int> top;
    std::vector<int> up;            // cubes not properly contained in a Top cube (Top cubes included)
    std::vector<int> owner;         // cube -> Top cube properly containing it, -1 otherwise
    int max_overlap = 0;            // largest number of Top balls B_Q through one probe point
    double overlap_bound = 0.0;     // level-span times packing count from the comparability argument

    nlohmann::json to_json() const {
        return {{"top", top}, {"up", up}, {"max_overlap", max_overlap}, {"overlap_bound", overlap_bound}};
    }
};

// Top_F: maximal cubes with (C0 + M) l(Q) < dist(x_Q, E); Up_F: cubes not properly inside a Top cube.
inline TopUpSplit top_up_split(const CubeTree& TF, const PointCloud& E, const GlobalParams& g) {
    TopUpSplit res;
    res.owner.assign(TF.size(), -1);
    KdTree tE(E.points());
    const Mat& P = TF.points();
    std::vector<int> stack{TF.root};
    while (!stack.empty()) {
        int q = stack.back();
        stack.pop_back();
        const Cube& Q = TF.cube(q);
        double dq = tE.nearest(P.col(Q.center_idx)).second;
        res.up.push_back(q);
        if ((g.C0 + g.M) * Q.side < dq) {
            res.top.push_back(q);
            auto sub = TF.subtree(q);
            for (size_t i = 1; i < sub.size(); ++i) res.owner[sub[i]] = q;
            continue;
        }
        for (auto it = Q.children.rbegin(); it != Q.children.rend(); ++it) stack.push_back(*it);
    }
    std::sort(res.top.begin(), res.top.end());
    std::sort(res.up.begin(), res.up.end());
    // probes: every point of F and every Top centre
    if (!res.top.empty()) {
        double rmax = 0.0;
        Mat C(P.rows(), static_cast<Eigen::Index>(res.top.size()));
        for (size_t i = 0; i < res.top.size(); ++i) {
            C.col(static_cast<Eigen::Index>(i)) = P.col(TF.cube(res.top[i]).center_idx);
            rmax = std::max(rmax, TF.cube(res.top[i]).side);
        }
        KdTree tc(C);
        std::vector<int> nb;
        auto probe = [&](const Vec& x) {
            tc.radius(x, rmax * (1.0 + kBallTol), nb);
            int c = 0;
            for (int j : nb)
                if ((C.col(j) - x).norm() <= TF.cube(res.top[j]).side * (1.0 + kBallTol)) ++c;
            res.max_overlap = std::max(res.max_overlap, c);
        };
        for (int i = 0; i < P.cols(); ++i) probe(P.col(i));
        for (int j = 0; j < C.cols(); ++j) probe(C.col(j));
    }
    const double s = g.C0 + g.M;
    const double ratio = 2.0 * (1.0 + s) / (TF.rho * s);
    const int span = static_cast<int>(std::floor(std::log(ratio) / std::log(1.0 / TF.rho) + 1e-12)) + 1;
    res.overlap_bound = span * std::pow(11.0, TF.cloud->dim());
    return res;
}

}  // namespace betascan
