#pragma once

#include <json.hpp>

#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <unordered_map>
#include <vector>

#include "geom.hpp"

namespace betascan {

namespace detail {

// Uniform hash grid used by greedy net construction.
class HashGrid {
public:
    HashGrid(const Mat& P, double cell) : P_(P), cell_(cell), n_(static_cast<int>(P.rows())) {}

    void insert(int i) { cells_[key(P_.col(i))].push_back(i); }

    template <class V>
    bool any_closer(const V& x, double r) const {
        std::vector<long long> base(n_);
        for (int k = 0; k < n_; ++k) base[k] = static_cast<long long>(std::floor(x[k] / cell_));
        std::vector<long long> cur(n_);
        const int total = static_cast<int>(std::pow(3, n_));
        for (int c = 0; c < total; ++c) {
            int t = c;
            for (int k = 0; k < n_; ++k) {
                cur[k] = base[k] + (t % 3) - 1;
                t /= 3;
            }
            auto it = cells_.find(hash(cur));
            if (it == cells_.end()) continue;
            for (int j : it->second)
                if ((P_.col(j) - x).norm() < r) return true;
        }
        return false;
    }

private:
    const Mat& P_;
    double cell_;
    int n_;
    std::unordered_map<std::size_t, std::vector<int>> cells_;

    static std::size_t hash(const std::vector<long long>& v) {
        std::size_t h = 1469598103934665603ull;
        for (long long a : v) {
            h ^= static_cast<std::size_t>(a) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        }
        return h;
    }

    template <class V>
    std::size_t key(const V& x) const {
        std::vector<long long> b(n_);
        for (int k = 0; k < n_; ++k) b[k] = static_cast<long long>(std::floor(x[k] / cell_));
        return hash(b);
    }
};

}  // namespace detail

// Greedy maximal r-separated net; the seed (already separated) is kept as a prefix.
inline std::vector<int> maximal_net(const Mat& P, double r, const std::vector<int>& seed = {}) {
    if (!(r > 0.0)) throw InputError("net radius must be positive");
    std::vector<int> net;
    std::vector<char> in(P.cols(), 0);
    const bool use_grid = P.rows() <= 4;
    detail::HashGrid grid(P, r);
    auto closer = [&](int i) {
        if (use_grid) return grid.any_closer(P.col(i), r);
        for (int j : net)
            if ((P.col(j) - P.col(i)).norm() < r) return true;
        return false;
    };
    for (int i : seed) {
        if (i < 0 || i >= P.cols()) throw InputError("seed index out of range");
        if (in[i]) continue;
        if (closer(i)) throw InputError("seed set is not r-separated");
        net.push_back(i);
        in[i] = 1;
        if (use_grid) grid.insert(i);
    }
    for (int i = 0; i < P.cols(); ++i) {
        if (in[i] || closer(i)) continue;
        net.push_back(i);
        in[i] = 1;
        if (use_grid) grid.insert(i);
    }
    return net;
}

inline std::vector<int> maximal_net(const PointCloud& cloud, double r, const std::vector<int>& seed = {}) {
    return maximal_net(cloud.points(), r, seed);
}

struct Cube {
    int id = -1;
    int level = 0;
    int center_idx = -1;
    double side = 0.0;
    int parent = -1;
    std::vector<int> children;
    std::vector<int> members;
};

struct CubeTreeOptions {
    double scale = 0.0;                         // 0: derived from the cloud diameter
    std::vector<std::vector<int>> seed_nets;    // per-level nets to complete (net completion)
    int max_depth = -1;                         // -1: resolution floor
};

class CubeTree {
public:
    std::shared_ptr<const PointCloud> cloud;
    double rho = 0.5;
    double scale = 1.0;
    int k_min = 0;
    int k_max = 0;
    std::vector<std::vector<int>> nets;
    std::vector<std::vector<int>> level_cubes;
    std::vector<Cube> cubes;
    std::vector<std::vector<int>> point_cube;  // [level][point] -> cube id
    int root = -1;
    double c0_achieved = 0.0;

    double side(int k) const { return 5.0 * std::pow(rho, k) * scale; }
    const Cube& cube(int id) const { return cubes[id]; }
    int size() const { return static_cast<int>(cubes.size()); }
    int levels() const { return k_max - k_min + 1; }
    const Mat& points() const { return cloud->points(); }
    auto center(int id) const { return cloud->point(cubes[id].center_idx); }
    Ball ball(int id, double factor = 1.0) const { return Ball(cloud->point(cubes[id].center_idx), factor * cubes[id].side); }

    // Cubes of the subtree of q, in breadth-first order.
    std::vector<int> subtree(int q) const {
        std::vector<int> out{q};
        for (size_t i = 0; i < out.size(); ++i)
            for (int c : cubes[out[i]].children) out.push_back(c);
        return out;
    }

    bool is_ancestor_or_self(int a, int q) const {
        while (q >= 0) {
            if (q == a) return true;
            if (cubes[q].level <= cubes[a].level) return false;
            q = cubes[q].parent;
        }
        return false;
    }

    double diam(int id) const { return diameter(points(), cubes[id].members); }

    int root_with_center(int center_idx) const {
        for (int c : level_cubes[0])
            if (cubes[c].center_idx == center_idx) return c;
        return -1;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "betascan/1";
        j["kind"] = "cube_tree";
        j["rho"] = rho;
        j["scale"] = scale;
        j["levels"] = {k_min, k_max};
        j["root"] = root;
        j["c0_achieved"] = c0_achieved;
        j["nets"] = nets;
        nlohmann::json cs = nlohmann::json::array();
        for (const auto& c : cubes) {
            cs.push_back({{"id", c.id},
                          {"level", c.level},
                          {"center_idx", c.center_idx},
                          {"side", c.side},
                          {"parent", c.parent < 0 ? nlohmann::json(nullptr) : nlohmann::json(c.parent)},
                          {"children", c.children},
                          {"members", c.members}});
        }
        j["cubes"] = cs;
        return j;
    }
};

namespace detail {

inline int level_cap(double scale, double rho, double h, int max_depth) {
    int k = 0;
    while (k < 60 && 5.0 * std::pow(rho, k) * scale >= 2.0 * h) ++k;
    if (k > 0 && 5.0 * std::pow(rho, k) * scale < h) --k;
    if (max_depth >= 0) k = std::min(k, max_depth);
    return k;
}

template <class V>
int nearest_in(const Mat& P, const std::vector<int>& cand, const V& x) {
    int best = -1;
    double bd = std::numeric_limits<double>::infinity();
    for (int j : cand) {
        double d = (P.col(j) - x).squaredNorm();
        if (d < bd || (d == bd && j < best)) {
            bd = d;
            best = j;
        }
    }
    return best;
}

}  // namespace detail

inline CubeTree build_cube_tree(const PointCloud& cloud, const GlobalParams& params, const CubeTreeOptions& opt = {}) {
    if (!(params.rho > 0.0 && params.rho <= 0.5)) throw InputError("rho must lie in (0, 1/2]");
    CubeTree T;
    T.cloud = std::make_shared<const PointCloud>(cloud);
    T.rho = params.rho;
    const Mat& P = cloud.points();
    const int N = cloud.size();
    double dm = diameter(P);
    T.scale = opt.scale > 0.0 ? opt.scale : (dm > 0.0 ? dm * (1.0 + 1e-9) : cloud.resolution());
    int depth = opt.max_depth >= 0 ? opt.max_depth : params.max_depth;
    T.k_min = 0;
    T.k_max = detail::level_cap(T.scale, T.rho, cloud.resolution(), depth);
    const int L = T.k_max + 1;

    T.nets.resize(L);
    for (int k = 0; k < L; ++k) {
        double r = std::pow(T.rho, k) * T.scale;
        std::vector<int> seed;
        if (k > 0) seed = T.nets[k - 1];
        std::vector<int> extra;
        if (k < static_cast<int>(opt.seed_nets.size())) extra = opt.seed_nets[k];
        if (k == 0) {
            seed = extra;
            T.nets[k] = maximal_net(P, r, seed);
        } else {
            // keep the coarser net for nesting, then add compatible seed points
            std::vector<int> s = seed;
            std::vector<char> in(N, 0);
            for (int i : s) in[i] = 1;
            for (int i : extra) {
                if (in[i]) continue;
                bool ok = true;
                for (int j : s)
                    if ((P.col(j) - P.col(i)).norm() < r) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    s.push_back(i);
                    in[i] = 1;
                }
            }
            T.nets[k] = maximal_net(P, r, s);
        }
    }

    // parent net point of every net point, and of every point at the finest level
    std::vector<std::vector<int>> owner(L);  // owner[k][netpos] = parent net index (cloud idx) at level k-1
    std::vector<std::unordered_map<int, int>> cube_of_center(L);
    for (int k = 0; k < L; ++k) {
        T.level_cubes.emplace_back();
        for (int c : T.nets[k]) {
            Cube q;
            q.id = static_cast<int>(T.cubes.size());
            q.level = k;
            q.center_idx = c;
            q.side = T.side(k);
            cube_of_center[k][c] = q.id;
            T.level_cubes[k].push_back(q.id);
            T.cubes.push_back(std::move(q));
        }
    }
    for (int k = 1; k < L; ++k) {
        KdTree coarse(P, T.nets[k - 1]);
        double r = std::pow(T.rho, k - 1) * T.scale;
        for (int c : T.nets[k]) {
            auto near = coarse.radius(P.col(c), r);
            int par = near.empty() ? detail::nearest_in(P, T.nets[k - 1], P.col(c)) : detail::nearest_in(P, near, P.col(c));
            int cid = cube_of_center[k][c];
            int pid = cube_of_center[k - 1][par];
            T.cubes[cid].parent = pid;
            T.cubes[pid].children.push_back(cid);
        }
    }
    // finest-level assignment
    {
        KdTree fine(P, T.nets[L - 1]);
        double r = std::pow(T.rho, L - 1) * T.scale;
        for (int i = 0; i < N; ++i) {
            auto near = fine.radius(P.col(i), r);
            int own = near.empty() ? detail::nearest_in(P, T.nets[L - 1], P.col(i)) : detail::nearest_in(P, near, P.col(i));
            T.cubes[cube_of_center[L - 1][own]].members.push_back(i);
        }
    }
    for (int k = L - 2; k >= 0; --k) {
        for (int q : T.level_cubes[k]) {
            auto& m = T.cubes[q].members;
            for (int c : T.cubes[q].children) m.insert(m.end(), T.cubes[c].members.begin(), T.cubes[c].members.end());
            std::sort(m.begin(), m.end());
        }
    }
    for (auto& q : T.cubes) std::sort(q.children.begin(), q.children.end());
    T.point_cube.assign(L, std::vector<int>(N, -1));
    for (int k = 0; k < L; ++k)
        for (int q : T.level_cubes[k])
            for (int i : T.cubes[q].members) T.point_cube[k][i] = q;
    T.root = T.point_cube[0][T.nets[0][0]];

    // achieved inner-ball constant
    double c0 = 1.0;
    for (int k = 0; k < L; ++k) {
        if (T.level_cubes[k].size() < 2) continue;
        KdTree centers(P, T.nets[k]);
        double ell = T.side(k);
        std::vector<int> nb;
        for (int i = 0; i < N; ++i) {
            centers.radius(P.col(i), c0 * ell, nb);
            for (int c : nb) {
                int q = cube_of_center[k][c];
                if (q == T.point_cube[k][i]) continue;
                c0 = std::min(c0, (P.col(i) - P.col(c)).norm() / ell);
            }
        }
    }
    T.c0_achieved = c0 * (1.0 - 1e-12);
    return T;
}

// d_C(x) = inf over R in C of l(R) + dist(x, R); +inf for an empty family.
template <class V>
double dist_to_family(const CubeTree& T, const V& x, const std::vector<int>& C) {
    double best = std::numeric_limits<double>::infinity();
    const Mat& P = T.points();
    for (int r : C) {
        const Cube& R = T.cube(r);
        double lb = R.side + std::max(0.0, (P.col(R.center_idx) - x).norm() - R.side);
        if (lb >= best) continue;
        double dmin = std::numeric_limits<double>::infinity();
        for (int i : R.members) dmin = std::min(dmin, (P.col(i) - x).norm());
        best = std::min(best, R.side + dmin);
    }
    return best;
}

// Exact distance between the member sets of two cubes.
inline double cube_distance(const CubeTree& T, int a, int b) {
    if (T.is_ancestor_or_self(a, b) || T.is_ancestor_or_self(b, a)) return 0.0;
    const Mat& P = T.points();
    const Cube& A = T.cube(a);
    const Cube& B = T.cube(b);
    const Cube& small = A.members.size() <= B.members.size() ? A : B;
    const Cube& large = A.members.size() <= B.members.size() ? B : A;
    double best = std::numeric_limits<double>::infinity();
    if (large.members.size() > 64) {
        KdTree t(P, large.members);
        for (int i : small.members) best = std::min(best, t.nearest(P.col(i)).second);
    } else {
        for (int i : small.members)
            for (int j : large.members) best = std::min(best, (P.col(i) - P.col(j)).norm());
    }
    return best;
}

// d_C(Q) = inf over x in Q of d_C(x) = inf over R of l(R) + dist(Q, R).
inline double dist_to_family(const CubeTree& T, int q, const std::vector<int>& C) {
    double best = std::numeric_limits<double>::infinity();
    const Cube& Q = T.cube(q);
    const Mat& P = T.points();
    for (int r : C) {
        const Cube& R = T.cube(r);
        double cd = (P.col(Q.center_idx) - P.col(R.center_idx)).norm();
        double lb = R.side + std::max(0.0, cd - Q.side - R.side);
        if (lb >= best) continue;
        best = std::min(best, R.side + cube_distance(T, q, r));
    }
    return best;
}

// Des_k(Q): Q and its descendants down to k generations.
inline std::vector<int> descendants(const CubeTree& T, int q, int k) {
    std::vector<int> out{q};
    std::vector<int> frontier{q};
    for (int g = 0; g < k && !frontier.empty(); ++g) {
        std::vector<int> next;
        for (int c : frontier)
            for (int ch : T.cube(c).children) next.push_back(ch);
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

}  // namespace betascan
