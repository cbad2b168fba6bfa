#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

namespace betascan {

// Static kd-tree over the columns of an n x N matrix (or a subset of them).
class KdTree {
public:
    KdTree() = default;

    explicit KdTree(const Eigen::MatrixXd& pts) : pts_(&pts) {
        idx_.resize(pts.cols());
        std::iota(idx_.begin(), idx_.end(), 0);
        build();
    }

    KdTree(const Eigen::MatrixXd& pts, std::vector<int> subset) : pts_(&pts), idx_(std::move(subset)) {
        build();
    }

    bool empty() const { return idx_.empty(); }
    int size() const { return static_cast<int>(idx_.size()); }

    // Indices with |p - q| <= r, unordered.
    template <class Q>
    void radius(const Q& q, double r, std::vector<int>& out) const {
        out.clear();
        if (nodes_.empty()) return;
        radius_rec(0, q, r * r, out);
    }

    template <class Q>
    std::vector<int> radius(const Q& q, double r) const {
        std::vector<int> out;
        radius(q, r, out);
        return out;
    }

    // Pairs (distance, index) with distance <= r, sorted by distance then index.
    template <class Q>
    std::vector<std::pair<double, int>> radius_sorted(const Q& q, double r) const {
        std::vector<std::pair<double, int>> out;
        if (nodes_.empty()) return out;
        radius_pairs_rec(0, q, r * r, out);
        for (auto& e : out) e.first = std::sqrt(e.first);
        std::sort(out.begin(), out.end());
        return out;
    }

    // Nearest index and distance; (-1, inf) when empty.
    template <class Q>
    std::pair<int, double> nearest(const Q& q) const {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        if (!nodes_.empty()) nearest_rec(0, q, best, bd);
        return {best, std::sqrt(bd)};
    }

    template <class Q>
    bool any_within(const Q& q, double r) const {
        if (nodes_.empty()) return false;
        return any_rec(0, q, r * r);
    }

private:
    struct Node {
        int begin, end;
        int left = -1, right = -1;
        Eigen::VectorXd lo, hi;
    };

    const Eigen::MatrixXd* pts_ = nullptr;
    std::vector<int> idx_;
    std::vector<Node> nodes_;
    static constexpr int kLeaf = 12;

    void build() {
        nodes_.clear();
        if (idx_.empty()) return;
        nodes_.reserve(2 * idx_.size() / kLeaf + 4);
        build_rec(0, static_cast<int>(idx_.size()));
    }

    int build_rec(int b, int e) {
        const auto& P = *pts_;
        const int n = static_cast<int>(P.rows());
        int id = static_cast<int>(nodes_.size());
        nodes_.push_back(Node{b, e, -1, -1, Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity()),
                              Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity())});
        Eigen::VectorXd lo = nodes_[id].lo, hi = nodes_[id].hi;
        for (int i = b; i < e; ++i) {
            lo = lo.cwiseMin(P.col(idx_[i]));
            hi = hi.cwiseMax(P.col(idx_[i]));
        }
        nodes_[id].lo = lo;
        nodes_[id].hi = hi;
        if (e - b <= kLeaf) return id;
        int axis = 0;
        (hi - lo).maxCoeff(&axis);
        if (hi[axis] - lo[axis] <= 0.0) return id;
        int mid = (b + e) / 2;
        std::nth_element(idx_.begin() + b, idx_.begin() + mid, idx_.begin() + e, [&](int a, int c) {
            double va = P(axis, a), vc = P(axis, c);
            return va < vc || (va == vc && a < c);
        });
        int l = build_rec(b, mid);
        int r = build_rec(mid, e);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    template <class Q>
    double box_d2(const Node& nd, const Q& q) const {
        double s = 0.0;
        for (int k = 0; k < nd.lo.size(); ++k) {
            double v = q[k];
            double d = v < nd.lo[k] ? nd.lo[k] - v : (v > nd.hi[k] ? v - nd.hi[k] : 0.0);
            s += d * d;
        }
        return s;
    }

    template <class Q>
    double pt_d2(int i, const Q& q) const {
        double s = 0.0;
        const auto& P = *pts_;
        for (int k = 0; k < P.rows(); ++k) {
            double d = P(k, i) - q[k];
            s += d * d;
        }
        return s;
    }

    template <class Q>
    void radius_rec(int id, const Q& q, double r2, std::vector<int>& out) const {
        const Node& nd = nodes_[id];
        if (box_d2(nd, q) > r2) return;
        if (nd.left < 0) {
            for (int i = nd.begin; i < nd.end; ++i)
                if (pt_d2(idx_[i], q) <= r2) out.push_back(idx_[i]);
            return;
        }
        radius_rec(nd.left, q, r2, out);
        radius_rec(nd.right, q, r2, out);
    }

    template <class Q>
    void radius_pairs_rec(int id, const Q& q, double r2, std::vector<std::pair<double, int>>& out) const {
        const Node& nd = nodes_[id];
        if (box_d2(nd, q) > r2) return;
        if (nd.left < 0) {
            for (int i = nd.begin; i < nd.end; ++i) {
                double d2 = pt_d2(idx_[i], q);
                if (d2 <= r2) out.emplace_back(d2, idx_[i]);
            }
            return;
        }
        radius_pairs_rec(nd.left, q, r2, out);
        radius_pairs_rec(nd.right, q, r2, out);
    }

    template <class Q>
    void nearest_rec(int id, const Q& q, int& best, double& bd) const {
        const Node& nd = nodes_[id];
        if (box_d2(nd, q) > bd) return;
        if (nd.left < 0) {
            for (int i = nd.begin; i < nd.end; ++i) {
                double d2 = pt_d2(idx_[i], q);
                if (d2 < bd || (d2 == bd && idx_[i] < best)) {
                    bd = d2;
                    best = idx_[i];
                }
            }
            return;
        }
        double dl = box_d2(nodes_[nd.left], q), dr = box_d2(nodes_[nd.right], q);
        if (dl <= dr) {
            nearest_rec(nd.left, q, best, bd);
            nearest_rec(nd.right, q, best, bd);
        } else {
            nearest_rec(nd.right, q, best, bd);
            nearest_rec(nd.left, q, best, bd);
        }
    }

    template <class Q>
    bool any_rec(int id, const Q& q, double r2) const {
        const Node& nd = nodes_[id];
        if (box_d2(nd, q) > r2) return false;
        if (nd.left < 0) {
            for (int i = nd.begin; i < nd.end; ++i)
                if (pt_d2(idx_[i], q) <= r2) return true;
            return false;
        }
        return any_rec(nd.left, q, r2) || any_rec(nd.right, q, r2);
    }
};

}  // namespace betascan
