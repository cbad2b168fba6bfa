#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cubes.hpp"
#include "geom.hpp"
#include "kdtree.hpp"
#include "mesh.hpp"

namespace betascan {

// Centres, planes and exterior centres of one scale r_k.
struct ScaleData {
    int k = 0;
    double r = 1.0;
    Mat centers;                     // n x J
    std::vector<AffinePlane> planes; // one per centre, through it
    Mat exterior;                    // n x L

    int size() const { return static_cast<int>(centers.cols()); }
    int exterior_size() const { return static_cast<int>(exterior.cols()); }
    int ambient() const { return static_cast<int>(centers.rows()); }

    // Builds the search structures; call after centres and planes are final.
    void finalize() {
        if (static_cast<int>(planes.size()) != size()) throw InputError("one plane per centre required");
        auto ix = std::make_shared<Index>();
        ix->pts = centers;
        ix->tree = KdTree(ix->pts);
        for (const auto& P : planes) ix->normals.push_back(P.normal_basis());
        index_ = ix;
        set_exterior(exterior.cols() > 0 ? exterior : Mat(centers.rows(), 0));
    }

    void set_exterior(Mat ext) {
        exterior = std::move(ext);
        auto ix = std::make_shared<ExtIndex>();
        ix->pts = exterior;
        ix->tree = KdTree(ix->pts);
        ext_ = ix;
    }

    // Sorted centre indices within distance rad of y.
    template <class V>
    std::vector<int> centers_within(const V& y, double rad) const {
        require_index();
        auto out = index_->tree.radius(y, rad);
        std::sort(out.begin(), out.end());
        return out;
    }

    template <class V>
    std::vector<int> exterior_within(const V& y, double rad) const {
        require_index();
        auto out = ext_->tree.radius(y, rad);
        std::sort(out.begin(), out.end());
        return out;
    }

    template <class V>
    double nearest_center(const V& y) const {
        require_index();
        return index_->tree.nearest(y).second;
    }

    const Mat& normal(int j) const { return index_->normals[j]; }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["k"] = k;
        j["r"] = r;
        j["centers"] = static_cast<int>(centers.cols());
        j["exterior"] = static_cast<int>(exterior.cols());
        return j;
    }

private:
    struct Index {
        Mat pts;
        KdTree tree;
        std::vector<Mat> normals;
    };
    struct ExtIndex {
        Mat pts;
        KdTree tree;
    };
    std::shared_ptr<const Index> index_;
    std::shared_ptr<const ExtIndex> ext_;

    void require_index() const {
        if (!index_ || !ext_) throw InputError("scale data not finalized");
    }
};

namespace detail {

// sup over P ∩ B of dist(., Q), with Q given by base and normal basis NQ; 0 when P misses B.
template <int MaxN>
double plane_excess_t(const Vec& baseP, const Mat& UP, const Vec& baseQ, const Mat& NQ, const Eigen::Ref<const Vec>& x, double R) {
    using V = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, MaxN, 1>;
    using M = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, MaxN, MaxN>;
    V w = x - baseP;
    V ut = UP.transpose() * w;
    double h2 = std::max(0.0, w.squaredNorm() - ut.squaredNorm());
    if (h2 > R * R) return 0.0;
    double s = std::sqrt(R * R - h2);
    M A = NQ.transpose() * UP;
    V dq = baseP - baseQ;
    V v = NQ.transpose() * dq + A * ut;
    if (NQ.cols() == 1) return std::abs(v(0)) + s * A.row(0).norm();
    if (UP.cols() == 1) return std::max((v + s * A.col(0)).norm(), (v - s * A.col(0)).norm());
    const int d = static_cast<int>(UP.cols());
    auto f = [&](const V& t) { return (A * t + v).norm(); };
    double best = 0.0;
    if (d == 2) {
        const int S = 720;
        double a0 = 0.0;
        V t(2);
        for (int i = 0; i < S; ++i) {
            double a = 2.0 * std::numbers::pi * i / S;
            t << s * std::cos(a), s * std::sin(a);
            double val = f(t);
            if (val > best) {
                best = val;
                a0 = a;
            }
        }
        double da = 2.0 * std::numbers::pi / S;
        for (int it = 0; it < 40; ++it) {
            da *= 0.5;
            for (double a : {a0 - da, a0 + da}) {
                t << s * std::cos(a), s * std::sin(a);
                double val = f(t);
                if (val > best) {
                    best = val;
                    a0 = a;
                }
            }
        }
        return best;
    }
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    V t(d);
    for (int i = 0; i < 512 * d; ++i) {
        for (int a = 0; a < d; ++a) t(a) = nd(rng);
        t *= s / t.norm();
        best = std::max(best, f(t));
    }
    return best;
}

inline double plane_excess(const Vec& baseP, const Mat& UP, const Vec& baseQ, const Mat& NQ, const Eigen::Ref<const Vec>& x, double R) {
    if (x.size() <= 4) return plane_excess_t<4>(baseP, UP, baseQ, NQ, x, R);
    if (x.size() <= 8) return plane_excess_t<8>(baseP, UP, baseQ, NQ, x, R);
    return plane_excess_t<Eigen::Dynamic>(baseP, UP, baseQ, NQ, x, R);
}

}  // namespace detail

// Normalised bilateral distance d_{x,R}(P, Q) between two planes.
inline double plane_ball_distance(const AffinePlane& P, const AffinePlane& Q, const Ball& B) {
    if (P.ambient() != Q.ambient() || P.ambient() != B.center.size()) throw InputError("dimension mismatch");
    double a = detail::plane_excess(P.base(), P.frame(), Q.base(), Q.normal_basis(), B.center, B.radius);
    double b = detail::plane_excess(Q.base(), Q.frame(), P.base(), P.normal_basis(), B.center, B.radius);
    return std::max(a, b) / B.radius;
}

// Level position of k in a contiguous scale list.
inline int scale_position(const std::vector<ScaleData>& S, int k) {
    if (S.empty()) throw InputError("empty scale list");
    int i = k - S.front().k;
    if (i < 0 || i >= static_cast<int>(S.size())) throw InputError("scale level out of range");
    return i;
}

// epsilon_k(x): sup of d_{x_{i,l}, rf r_l}(P_{j,k}, P_{i,l}) over |l-k| <= 2, x in 10B_{j,k} ∩ 11B_{i,l}.
inline double eps_k(const Vec& x, const std::vector<ScaleData>& S, int k, double radius_factor) {
    const int p = scale_position(S, k);
    const ScaleData& Sk = S[p];
    auto J = Sk.centers_within(x, 10.0 * Sk.r);
    if (J.empty()) return 0.0;
    double sup = 0.0;
    const int lo = std::max(0, p - 2), hi = std::min(static_cast<int>(S.size()) - 1, p + 2);
    for (int q = lo; q <= hi; ++q) {
        const ScaleData& Sl = S[q];
        auto I = Sl.centers_within(x, 11.0 * Sl.r);
        const double R = radius_factor * Sl.r;
        for (int i : I) {
            const AffinePlane& Pi = Sl.planes[i];
            auto xi = Sl.centers.col(i);
            for (int j : J) {
                if (q == p && i == j) continue;
                const AffinePlane& Pj = Sk.planes[j];
                double a = detail::plane_excess(Pj.base(), Pj.frame(), Pi.base(), Sl.normal(i), xi, R);
                double b = detail::plane_excess(Pi.base(), Pi.frame(), Pj.base(), Sk.normal(j), xi, R);
                sup = std::max(sup, std::max(a, b) / R);
            }
        }
    }
    return sup;
}

inline double smoothstep5(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

// C^2 radial bump: 1 on B(c, 9 rad), 0 outside B(c, 10 rad).
inline double bump(double dist, double rad) { return smoothstep5((10.0 * rad - dist) / rad); }

struct BumpWeights {
    std::vector<std::pair<int, double>> theta; // (centre, weight)
    std::vector<std::pair<int, double>> exterior;
    double psi = 1.0;
    double total = 0.0;

    double sum() const {
        double s = psi;
        for (const auto& t : theta) s += t.second;
        return s;
    }
};

// Normalised partition of unity over the centre bumps (radius r_k) and exterior bumps (radius r_k / 10).
inline BumpWeights bump_partition(const Vec& y, const ScaleData& S) {
    BumpWeights w;
    for (int j : S.centers_within(y, 10.0 * S.r)) {
        double b = bump((y - S.centers.col(j)).norm(), S.r);
        if (b > 0.0) w.theta.emplace_back(j, b);
    }
    for (int j : S.exterior_within(y, S.r)) {
        double b = bump((y - S.exterior.col(j)).norm(), 0.1 * S.r);
        if (b > 0.0) w.exterior.emplace_back(j, b);
    }
    double tj = 0.0, tl = 0.0;
    for (const auto& t : w.theta) tj += t.second;
    for (const auto& t : w.exterior) tl += t.second;
    w.total = tj + tl;
    if (w.total == 0.0) {
        w.psi = 1.0;
        return w;
    }
    for (auto& t : w.theta) t.second /= w.total;
    for (auto& t : w.exterior) t.second /= w.total;
    w.psi = tl / w.total;
    return w;
}

// sigma_k(y) = psi(y) y + sum_j theta_j(y) pi_j(y).
inline Vec sigma_k(const Vec& y, const ScaleData& S) {
    BumpWeights w = bump_partition(y, S);
    if (w.theta.empty()) return y;
    Vec out = w.psi * y;
    for (const auto& [j, t] : w.theta) out += t * S.planes[j].project(y);
    return out;
}

// Maximal r/2-separated subset of the candidates lying outside V^9 (distance > 9 r from every centre).
inline Mat exterior_net(const ScaleData& S, const Mat& candidates) {
    std::vector<int> keep;
    for (int i = 0; i < candidates.cols(); ++i)
        if (S.size() == 0 || S.nearest_center(candidates.col(i)) > 9.0 * S.r) keep.push_back(i);
    Mat C = gather(candidates, keep);
    if (C.cols() == 0) return C;
    auto net = maximal_net(C, 0.5 * S.r);
    return gather(C, net);
}

// Nets of a sample at radii r_k = r0 base^{-k}, with the plane supplied per centre.
inline std::vector<ScaleData> scales_from_cloud(const Mat& pts, const std::function<AffinePlane(const Vec&)>& plane_at, double r0,
                                                double base, int K) {
    if (!(base > 1.0) || !(r0 > 0.0) || K < 0) throw InputError("invalid scale parameters");
    std::vector<ScaleData> out;
    for (int k = 0; k <= K; ++k) {
        ScaleData s;
        s.k = k;
        s.r = r0 * std::pow(base, -k);
        s.centers = gather(pts, maximal_net(pts, s.r));
        for (int j = 0; j < s.size(); ++j) s.planes.push_back(plane_at(s.centers.col(j)).through(s.centers.col(j)));
        s.finalize();
        out.push_back(std::move(s));
    }
    return out;
}

struct ScaleCheck {
    bool separated = true;
    bool nested = true;      // x_{j,k} in V^2_{k-1}
    bool base_in_P0 = true;  // level-0 centres on P0
    bool planes_through = true;
    std::vector<std::string> problems;

    bool ok() const { return separated && nested && base_in_P0 && planes_through; }
    nlohmann::json to_json() const {
        return {{"separated", separated}, {"nested", nested}, {"base_in_P0", base_in_P0}, {"planes_through", planes_through},
                {"problems", problems}};
    }
};

inline ScaleCheck check_scales(const std::vector<ScaleData>& S, const AffinePlane& P0, double tol = 1e-9) {
    ScaleCheck c;
    for (size_t p = 0; p < S.size(); ++p) {
        const auto& s = S[p];
        for (int a = 0; a < s.size(); ++a) {
            for (int b : s.centers_within(s.centers.col(a), s.r * (1.0 - 1e-12)))
                if (b != a) {
                    c.separated = false;
                    c.problems.push_back("level " + std::to_string(s.k) + ": centres closer than r_k");
                    break;
                }
            if (s.planes[a].dist(s.centers.col(a)) > tol * s.r) {
                c.planes_through = false;
                c.problems.push_back("level " + std::to_string(s.k) + ": plane misses its centre");
            }
            if (p == 0 && s.k == 0 && P0.dist(s.centers.col(a)) > tol * s.r) {
                c.base_in_P0 = false;
                c.problems.push_back("level 0 centre off P0");
            }
            if (p > 0 && S[p - 1].nearest_center(s.centers.col(a)) > 2.0 * S[p - 1].r * (1.0 + 1e-12)) {
                c.nested = false;
                c.problems.push_back("level " + std::to_string(s.k) + ": centre outside V^2 of the previous level");
            }
        }
    }
    return c;
}

struct IterateOptions {
    int K_max = -1;              // last level applied; -1: all
    double half_width = 1.0;     // parameter box [-w, w]^d around P0.base()
    double grid_step = 0.1;
    double radius_factor = 100.0;
    int eps_probes = 64;
    int residual_probes = 32;
    double eps0_gate = 0.03;
    std::uint64_t seed = 1;
};

struct LevelTrace {
    int k = 0;
    double r = 0.0;
    int centers = 0;
    int exterior = 0;
    int probes = 0;
    double eps_max = 0.0;
    double eps_mean = 0.0;
    double disp_max = 0.0;       // max |sigma_k(y) - y| / r_k over all vertices
    double disp_ratio_max = 0.0; // max |sigma_k(y) - y| / (eps_k(y) r_k) over probes
    int zero_eps_moves = 0;      // probes with eps_k(y) = 0 that moved by more than 1e-12 r_k
    int outside_moved = 0;       // vertices outside V^10 that moved
    int residual_probes = 0;
    double residual_max = 0.0;   // d_{x_j, 49 r_k}(Sigma_k, P_j), truncated to the mesh domain

    nlohmann::json to_json() const {
        return {{"k", k},
                {"r", r},
                {"centers", centers},
                {"exterior", exterior},
                {"probes", probes},
                {"eps_max", eps_max},
                {"eps_mean", eps_mean},
                {"disp_max", disp_max},
                {"disp_ratio_max", disp_ratio_max},
                {"zero_eps_moves", zero_eps_moves},
                {"outside_moved", outside_moved},
                {"residual_probes", residual_probes},
                {"residual_max", residual_max}};
    }
};

struct IterationTrace {
    double base = 2.0;
    double radius_factor = 100.0;
    std::vector<LevelTrace> levels;
    double eps_global = 0.0;     // max eps_k over all probes
    double K_upper = 0.0;        // sum_k (max eps_k)^2, an upper bound for sup_z sum_k eps_k(f_k(z))^2
    double disp_constant = 0.0;  // max over levels of disp_ratio_max
    double residual_constant = 0.0; // max residual / eps_global
    bool gate_exceeded = false;
    int degenerate_faces = 0;

    bool finite() const {
        for (const auto& l : levels)
            if (!std::isfinite(l.eps_max) || !std::isfinite(l.disp_max) || !std::isfinite(l.residual_max)) return false;
        return std::isfinite(K_upper);
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "betascan/1";
        j["kind"] = "iteration_trace";
        j["base"] = base;
        j["radius_factor"] = radius_factor;
        j["eps_global"] = eps_global;
        j["K_upper"] = K_upper;
        j["disp_constant"] = disp_constant;
        j["residual_constant"] = residual_constant;
        j["gate_exceeded"] = gate_exceeded;
        j["degenerate_faces"] = degenerate_faces;
        nlohmann::json ls = nlohmann::json::array();
        for (const auto& l : levels) ls.push_back(l.to_json());
        j["levels"] = ls;
        return j;
    }
};

namespace detail {

inline std::vector<int> sample_indices(const std::vector<int>& pool, int count, std::mt19937_64& rng) {
    std::vector<int> v = pool;
    if (static_cast<int>(v.size()) <= count) return v;
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> u(i, static_cast<int>(v.size()) - 1);
        std::swap(v[i], v[u(rng)]);
    }
    v.resize(count);
    std::sort(v.begin(), v.end());
    return v;
}

inline Mat disk_samples(const AffinePlane& P, const Vec& x, double R, int per_axis) {
    Vec c = P.project(x);
    double h = (x - c).norm();
    if (h >= R) return Mat(x.size(), 0);
    double s = std::sqrt(R * R - h * h);
    const int d = P.dim();
    std::vector<Vec> out;
    std::vector<int> idx(d, 0);
    for (;;) {
        Vec t(d);
        for (int a = 0; a < d; ++a) t(a) = -s + 2.0 * s * idx[a] / (per_axis - 1);
        if (t.norm() <= s) out.push_back(c + P.frame() * t);
        int a = 0;
        while (a < d && ++idx[a] == per_axis) idx[a++] = 0;
        if (a == d) break;
    }
    Mat M(x.size(), static_cast<Eigen::Index>(out.size()));
    for (size_t i = 0; i < out.size(); ++i) M.col(static_cast<Eigen::Index>(i)) = out[i];
    return M;
}

}  // namespace detail

// Truncated bilateral distance between the mesh and P in B(x, R): plane samples count only over the parameter domain.
inline double mesh_plane_residual(const SurfaceMesh& m, const KdTree& vtree, const AffinePlane& P, const Vec& x, double R, double half) {
    double s = 0.0;
    for (int v : vtree.radius(x, R)) s = std::max(s, P.dist(m.vertices.col(v)));
    Mat D = detail::disk_samples(P, x, R, m.d == 1 ? 65 : 17);
    const Mat& F = m.P0.frame();
    for (int i = 0; i < D.cols(); ++i) {
        Vec par = F.transpose() * (D.col(i) - m.P0.base());
        if (par.cwiseAbs().maxCoeff() > half - m.step) continue;
        s = std::max(s, vtree.nearest(D.col(i)).second);
    }
    return s / R;
}

// Sigma_k = sigma_k(Sigma_{k-1}) applied to a patch of P0, with diagnostics per level.
inline std::pair<SurfaceMesh, IterationTrace> iterate_surface(const AffinePlane& P0, const std::vector<ScaleData>& scales,
                                                              const IterateOptions& opt) {
    if (scales.empty()) throw InputError("no scales");
    SurfaceMesh mesh = make_patch(P0, opt.half_width, opt.grid_step);
    IterationTrace tr;
    tr.radius_factor = opt.radius_factor;
    if (scales.size() > 1) tr.base = scales[0].r / scales[1].r;
    const int last = opt.K_max < 0 ? static_cast<int>(scales.size()) - 1 : std::min(opt.K_max - scales[0].k, static_cast<int>(scales.size()) - 1);
    std::vector<ScaleData> S = scales;
    for (int p = 0; p <= last; ++p) {
        ScaleData& s = S[p];
        s.set_exterior(exterior_net(s, mesh.vertices));
        LevelTrace lt;
        lt.k = s.k;
        lt.r = s.r;
        lt.centers = s.size();
        lt.exterior = s.exterior_size();
        std::mt19937_64 rng(opt.seed * 7919 + static_cast<std::uint64_t>(s.k));
        std::vector<int> inside, outside;
        for (int v = 0; v < mesh.vertex_count(); ++v) {
            if (s.size() > 0 && s.nearest_center(mesh.vertices.col(v)) <= 10.0 * s.r) inside.push_back(v);
            else outside.push_back(v);
        }
        auto probes = detail::sample_indices(inside, opt.eps_probes, rng);
        std::vector<double> eps(probes.size());
        for (size_t i = 0; i < probes.size(); ++i) eps[i] = eps_k(mesh.vertices.col(probes[i]), S, s.k, opt.radius_factor);
        Mat X = mesh.vertices;
        for (int v : inside) X.col(v) = sigma_k(mesh.vertices.col(v), s);
        for (int v : outside) {
            Vec y = sigma_k(mesh.vertices.col(v), s);
            if ((y - mesh.vertices.col(v)).norm() > 0.0) ++lt.outside_moved;
            X.col(v) = y;
        }
        for (int v = 0; v < X.cols(); ++v) lt.disp_max = std::max(lt.disp_max, (X.col(v) - mesh.vertices.col(v)).norm() / s.r);
        lt.probes = static_cast<int>(probes.size());
        for (size_t i = 0; i < probes.size(); ++i) {
            double disp = (X.col(probes[i]) - mesh.vertices.col(probes[i])).norm();
            lt.eps_max = std::max(lt.eps_max, eps[i]);
            lt.eps_mean += eps[i] / probes.size();
            if (eps[i] > 0.0) lt.disp_ratio_max = std::max(lt.disp_ratio_max, disp / (eps[i] * s.r));
            else if (disp > 1e-12 * s.r) ++lt.zero_eps_moves;
        }
        mesh.vertices = X;
        mesh.history.push_back(X);

        KdTree vtree(mesh.vertices);
        std::vector<int> near;
        for (int j = 0; j < s.size(); ++j)
            if (vtree.nearest(s.centers.col(j)).second <= 10.0 * s.r) near.push_back(j);
        auto rp = detail::sample_indices(near, opt.residual_probes, rng);
        lt.residual_probes = static_cast<int>(rp.size());
        for (int j : rp)
            lt.residual_max = std::max(lt.residual_max, mesh_plane_residual(mesh, vtree, s.planes[j], s.centers.col(j), 49.0 * s.r, opt.half_width));
        tr.levels.push_back(lt);
    }
    for (const auto& l : tr.levels) {
        tr.eps_global = std::max(tr.eps_global, l.eps_max);
        tr.K_upper += l.eps_max * l.eps_max;
        tr.disp_constant = std::max(tr.disp_constant, l.disp_ratio_max);
        tr.gate_exceeded = tr.gate_exceeded || l.eps_max > opt.eps0_gate;
    }
    for (const auto& l : tr.levels)
        if (tr.eps_global > 0.0) tr.residual_constant = std::max(tr.residual_constant, l.residual_max / tr.eps_global);
    const double rK = tr.levels.back().r;
    tr.degenerate_faces = mesh.degenerate_faces(1e-14 * std::pow(rK, mesh.d));
    return {std::move(mesh), tr};
}

struct BilipOptions {
    int pairs = 10000;
    double scale = 1.0;  // pairs satisfy |x - y| <= scale in parameter space; distances are normalised by it
    double tau = 0.1;
    std::uint64_t seed = 1;
};

struct BilipReport {
    int pairs = 0;
    double min_ratio = 0.0;
    double max_ratio = 0.0;
    int envelope_violations = 0; // pairs outside 1/4 t^{1+tau} <= |f(x)-f(y)|/scale <= 10 t^{1-tau}
    double K_upper = 0.0;

    nlohmann::json to_json() const {
        return {{"pairs", pairs}, {"min_ratio", min_ratio}, {"max_ratio", max_ratio}, {"envelope_violations", envelope_violations},
                {"K_upper", K_upper}};
    }
};

// Distortion of f = sigma_K o ... o sigma_0 sampled over vertex pairs.
inline BilipReport bilip_check(const SurfaceMesh& m, const IterationTrace& tr, const BilipOptions& opt) {
    BilipReport rep;
    rep.K_upper = tr.K_upper;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    KdTree ptree(m.params);
    std::mt19937_64 rng(opt.seed);
    std::uniform_int_distribution<int> pick(0, m.vertex_count() - 1);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0, 1);
    int guard = 0;
    while (rep.pairs < opt.pairs && guard < 50 * opt.pairs) {
        ++guard;
        int a = pick(rng);
        Vec dir(m.d);
        for (int i = 0; i < m.d; ++i) dir(i) = nd(rng);
        dir *= opt.scale * std::pow(u(rng), 1.0 / m.d) / dir.norm();
        int b = ptree.nearest(Vec(m.params.col(a) + dir)).first;
        double dp = (m.params.col(a) - m.params.col(b)).norm();
        if (b == a || dp > opt.scale) continue;
        double df = (m.vertices.col(a) - m.vertices.col(b)).norm();
        double ratio = df / dp, t = dp / opt.scale, ft = df / opt.scale;
        rep.min_ratio = std::min(rep.min_ratio, ratio);
        rep.max_ratio = std::max(rep.max_ratio, ratio);
        if (!(0.25 * std::pow(t, 1.0 + opt.tau) <= ft && ft <= 10.0 * std::pow(t, 1.0 - opt.tau))) ++rep.envelope_violations;
        ++rep.pairs;
    }
    return rep;
}

struct LowerRegReport {
    int probes = 0;
    double min_ratio = 0.0; // min of measure(Sigma ∩ B(x,r)) / (omega_d r^d)
    nlohmann::json to_json() const { return {{"probes", probes}, {"min_ratio", min_ratio}}; }
};

// Mesh measure in balls centred on vertices whose parameter lies at least margin inside the domain.
inline LowerRegReport mesh_lower_regularity(const SurfaceMesh& m, int probes, double rmin, double rmax, double half, std::uint64_t seed) {
    LowerRegReport rep;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    std::vector<int> pool;
    for (int v = 0; v < m.vertex_count(); ++v)
        if (m.params.col(v).cwiseAbs().maxCoeff() <= half - 2.0 * rmax) pool.push_back(v);
    if (pool.empty()) throw InputError("no interior vertices for the requested radii");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    std::uniform_real_distribution<double> u(0, 1);
    const double om = GlobalParams::omega(m.d);
    for (int i = 0; i < probes; ++i) {
        int v = pool[pick(rng)];
        double r = rmin * std::pow(rmax / rmin, u(rng));
        double a = mesh_measure_in_ball(m, Ball(m.vertices.col(v), r));
        rep.min_ratio = std::min(rep.min_ratio, a / (om * std::pow(r, m.d)));
        ++rep.probes;
    }
    return rep;
}

}  // namespace betascan
