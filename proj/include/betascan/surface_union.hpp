#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "beta.hpp"
#include "content.hpp"
#include "cubes.hpp"
#include "geom.hpp"
#include "kdtree.hpp"
#include "mesh.hpp"
#include "reifenberg.hpp"
#include "stoptime.hpp"

namespace betascan {

namespace detail {

inline double point_segment_distance(const Vec& x, const Vec& a, const Vec& b) {
    Vec e = b - a;
    double L2 = e.squaredNorm();
    double t = L2 > 0.0 ? std::clamp((x - a).dot(e) / L2, 0.0, 1.0) : 0.0;
    return (x - a - t * e).norm();
}

inline double point_triangle_distance(const Vec& x, const Vec& a, const Vec& b, const Vec& c) {
    Vec e0 = b - a, e1 = c - a, w = x - a;
    double a00 = e0.dot(e0), a01 = e0.dot(e1), a11 = e1.dot(e1), b0 = e0.dot(w), b1 = e1.dot(w);
    double det = a00 * a11 - a01 * a01;
    if (det > 1e-300) {
        double s = (a11 * b0 - a01 * b1) / det, t = (a00 * b1 - a01 * b0) / det;
        if (s >= 0.0 && t >= 0.0 && s + t <= 1.0) return (w - s * e0 - t * e1).norm();
    }
    return std::min({point_segment_distance(x, a, b), point_segment_distance(x, b, c), point_segment_distance(x, a, c)});
}

}  // namespace detail

// Exact point-to-mesh distance over the faces touching a ball.
class MeshLocator {
public:
    MeshLocator(const SurfaceMesh& m, const Ball& restrict) : data_(std::make_shared<Data>()) {
        data_->mesh = &m;
        data_->V = m.vertices;
        data_->tree = KdTree(data_->V);
        data_->faces_of.assign(m.vertex_count(), {});
        for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
            const auto& t = m.faces[f];
            bool touches = false;
            for (int a = 0; a < m.simplex_size(); ++a) touches = touches || restrict.contains(m.vertices.col(t[a]));
            if (!touches) continue;
            for (int a = 0; a < m.simplex_size(); ++a) data_->faces_of[t[a]].push_back(f);
            for (int a = 0; a < m.simplex_size(); ++a)
                for (int b = a + 1; b < m.simplex_size(); ++b)
                    data_->max_edge = std::max(data_->max_edge, (m.vertices.col(t[a]) - m.vertices.col(t[b])).norm());
        }
    }

    double distance(const Vec& x) const {
        const auto& D = *data_;
        auto nn = D.tree.nearest(x);
        if (nn.first < 0) return std::numeric_limits<double>::infinity();
        std::vector<int> near = D.tree.radius(x, nn.second + D.max_edge * (1.0 + 1e-12));
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> seen;
        for (int v : near)
            for (int f : D.faces_of[v]) {
                if (std::find(seen.begin(), seen.end(), f) != seen.end()) continue;
                seen.push_back(f);
                const auto& t = D.mesh->faces[f];
                double dd = D.mesh->d == 1 ? detail::point_segment_distance(x, D.V.col(t[0]), D.V.col(t[1]))
                                           : detail::point_triangle_distance(x, D.V.col(t[0]), D.V.col(t[1]), D.V.col(t[2]));
                best = std::min(best, dd);
            }
        return best;
    }

private:
    struct Data {
        const SurfaceMesh* mesh = nullptr;
        Mat V;
        KdTree tree;
        std::vector<std::vector<int>> faces_of;
        double max_edge = 0.0;
    };
    std::shared_ptr<Data> data_;
};

// beta_E^{d,1}(M B_Q) with its minimising plane, evaluated once per cube.
class CubePlanes {
public:
    CubePlanes(const CubeTree& T, const GlobalParams& g) : T_(T), g_(g), val_(T.size()) {}

    const BetaValue& operator()(int q) {
        if (!val_[q]) {
            BallBeta bb(*T_.cloud, T_.ball(q, g_.M), g_);
            val_[q] = bb.new_beta(1.0);
            ++evaluated_;
        }
        return *val_[q];
    }

    double beta(int q) { return (*this)(q).value; }

    // The fitted plane moved to pass through x_Q.
    AffinePlane plane(int q) {
        const auto& b = (*this)(q);
        Vec x = T_.center(q);
        if (b.plane) return b.plane->through(x);
        auto ids = points_in_ball(T_.points(), T_.ball(q, g_.M));
        return fit_plane_pca(gather(T_.points(), ids), g_.d).through(x);
    }

    int evaluated() const { return evaluated_; }

private:
    const CubeTree& T_;
    GlobalParams g_;
    std::vector<std::optional<BetaValue>> val_;
    int evaluated_ = 0;
};

struct SurfaceOptions {
    int max_levels = 6;        // iteration levels below the top
    int max_vertices = 40000;
    double margin = 0.05;      // parameter margin beyond the top cube's points, in units of l(Q(S))
    int singleton_cells = 8;   // cells per half-width of a singleton disk patch
    int eps_probes = 16;
    int residual_probes = 8;
    double sample_spacing = 0.0; // resampling of F; 0: resolution of E
    double window_factor = 0.75; // resample F inside B(x_{Q0}, factor diam E + diam E / 2)
    double tube_factor = 2.0;    // and within tube_factor * spacing of E; <= 0 disables the tube
    int overlap_samples = 4000;
    double overlap_tol = 0.1;    // coincidence tolerance in units of the larger mesh step
    std::uint64_t seed = 1;
};

struct RegionSurface {
    int region = -1;
    int top = -1;
    bool singleton = false;
    bool low_confidence = false;
    AffinePlane plane;
    SurfaceMesh mesh;
    Ball restrict;  // M B_{Q(S)}
    Ball extended;  // 6 M B_{Q(S)}
    IterationTrace trace;
    int levels = 0;
    double r_last = 0.0;
    double closeness_C = 0.0;  // max dist(y, Sigma_S) / (eps^{1/(d+1)} max(l(R), r_last))
    int closeness_points = 0;

    double measure() const { return mesh_measure_in_ball(mesh, restrict); }

    nlohmann::json to_json() const {
        return {{"region", region},
                {"top", top},
                {"singleton", singleton},
                {"low_confidence", low_confidence},
                {"levels", levels},
                {"r_last", r_last},
                {"vertices", mesh.vertex_count()},
                {"measure", measure()},
                {"closeness_C", closeness_C},
                {"closeness_points", closeness_points},
                {"restrict_radius", restrict.radius},
                {"plane", plane_json(plane)},
                {"trace", singleton ? nlohmann::json(nullptr) : trace.to_json()}};
    }
};

namespace detail {

// Deepest cube of region s on the chain of point y, starting at the top.
inline int deepest_region_cube(const CubeTree& T, const RegionForest& F, int s, int y) {
    int best = -1;
    for (int k = 0; k < T.levels(); ++k) {
        int q = T.point_cube[k][y];
        if (F.region_of[q] == s) best = q;
        else if (best >= 0) break;
    }
    return best;
}

inline int level_for_radius(const CubeTree& T, double r) {
    for (int k = 0; k < T.levels(); ++k)
        if (T.side(k) <= r * (1.0 + 1e-12)) return k;
    return T.levels();
}

}  // namespace detail

// Surface of one stopping-time region: David-Toro iteration for non-singletons, a plane disk otherwise.
inline RegionSurface build_region_surface(const StoppingRegion& S, const RegionForest& F, const CubeTree& T, CubePlanes& planes,
                                          const GlobalParams& g, const SurfaceOptions& opt = {}) {
    RegionSurface rs;
    rs.region = S.id;
    rs.top = S.top;
    rs.singleton = S.singleton();
    const Cube& top = T.cube(S.top);
    const double l = top.side;
    rs.restrict = Ball(T.center(S.top), g.M * l);
    rs.extended = Ball(T.center(S.top), 6.0 * g.M * l);
    rs.plane = planes.plane(S.top);
    const double root_eps = std::pow(g.eps, 1.0 / (g.d + 1));
    if (rs.singleton) {
        double half = g.M * l;
        rs.mesh = make_patch(rs.plane, half, half / opt.singleton_cells);
        rs.r_last = l;
        for (int y : top.members) {
            double dd = rs.plane.dist(T.points().col(y));
            rs.closeness_C = std::max(rs.closeness_C, dd / (root_eps * l));
            ++rs.closeness_points;
        }
        return rs;
    }
    int deepest = top.level;
    for (int q : S.cubes) deepest = std::max(deepest, T.cube(q).level);
    double half = 0.0;
    const Mat& Fr = rs.plane.frame();
    for (int y : top.members) half = std::max(half, (Fr.transpose() * (T.points().col(y) - rs.plane.base())).cwiseAbs().maxCoeff());
    half = std::min(half + opt.margin * l, g.M * l);
    half = std::max(half, opt.margin * l);
    const int cells_max = g.d == 1 ? opt.max_vertices - 1 : static_cast<int>(std::sqrt(static_cast<double>(opt.max_vertices))) - 1;
    const double step_min = 2.0 * half / cells_max;
    const double base = g.dt_base;
    std::vector<ScaleData> scales;
    for (int k = 0; k <= opt.max_levels; ++k) {
        double r = l * std::pow(base, -k);
        int s = detail::level_for_radius(T, r);
        if (k > 0 && (s > deepest || 0.5 * r < step_min * (1.0 - 1e-9))) break;
        std::vector<int> ids;
        for (int q : S.cubes)
            if (T.cube(q).level == s) ids.push_back(q);
        if (ids.empty()) break;
        Mat C(T.points().rows(), static_cast<Eigen::Index>(ids.size()));
        for (size_t i = 0; i < ids.size(); ++i) C.col(static_cast<Eigen::Index>(i)) = T.center(ids[i]);
        auto sub = maximal_net(C, r);
        ScaleData sd;
        sd.k = k;
        sd.r = r;
        sd.centers = gather(C, sub);
        for (int i : sub) sd.planes.push_back(k == 0 ? rs.plane : planes.plane(ids[i]));
        sd.finalize();
        scales.push_back(std::move(sd));
    }
    rs.levels = static_cast<int>(scales.size());
    rs.r_last = scales.back().r;
    IterateOptions io;
    io.half_width = half;
    io.grid_step = std::max(step_min, 0.5 * rs.r_last);
    io.radius_factor = g.dt_radius_factor;
    io.eps_probes = opt.eps_probes;
    io.residual_probes = opt.residual_probes;
    io.eps0_gate = g.eps0_gate;
    io.seed = opt.seed + static_cast<std::uint64_t>(S.id);
    auto res = iterate_surface(rs.plane, scales, io);
    rs.mesh = std::move(res.first);
    rs.trace = std::move(res.second);
    rs.low_confidence = rs.trace.gate_exceeded;
    MeshLocator loc(rs.mesh, rs.restrict);
    for (int y : top.members) {
        int R = detail::deepest_region_cube(T, F, S.id, y);
        if (R < 0) continue;
        double le = std::max(T.cube(R).side, rs.r_last);
        rs.closeness_C = std::max(rs.closeness_C, loc.distance(T.points().col(y)) / (root_eps * le));
        ++rs.closeness_points;
    }
    return rs;
}

struct ContainingSet {
    GlobalParams g;
    SurfaceOptions opt;
    std::shared_ptr<CubeTree> tree;  // cubes of E
    RegionForest forest;
    std::vector<RegionSurface> surfaces;
    std::vector<int> residual;       // E' proxy: points whose last three chain cubes are singleton regions
    std::shared_ptr<PointCloud> cloud; // E followed by surface samples
    int e_count = 0;
    std::vector<double> dist_E;      // dist(x, F) per point of E
    std::vector<double> stop_scale;  // scale used in the closeness ratio per point of E
    double max_dist = 0.0;
    double max_ratio = 0.0;          // max dist(x, F) / (eps^{1/(d+1)} stop_scale)
    double measure = 0.0;
    double beta_M_sum = 0.0;         // sum over cubes of beta_E^{d,1}(M B_Q)^2 l(Q)^d

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["schema"] = "betascan/1";
        j["kind"] = "containing_set";
        j["regions"] = forest.region_count();
        j["singletons"] = forest.singleton_count();
        j["residual_points"] = residual;
        j["cloud_points"] = cloud ? cloud->size() : 0;
        j["max_dist"] = max_dist;
        j["max_ratio"] = max_ratio;
        j["measure"] = measure;
        j["beta_M_sum"] = beta_M_sum;
        nlohmann::json ss = nlohmann::json::array();
        for (const auto& s : surfaces) ss.push_back(s.to_json());
        j["surfaces"] = ss;
        return j;
    }
};

namespace detail {

// Barycentric samples at spacing about h of the faces meeting B, kept inside B.
inline std::vector<Vec> mesh_samples(const SurfaceMesh& m, const Ball& B, double h) {
    std::vector<Vec> out;
    for (const auto& t : m.faces) {
        const int s = m.simplex_size();
        bool touches = false;
        double edge = 0.0;
        for (int a = 0; a < s; ++a) {
            touches = touches || (m.vertices.col(t[a]) - B.center).norm() <= B.radius + 0.0;
            for (int b = a + 1; b < s; ++b) edge = std::max(edge, (m.vertices.col(t[a]) - m.vertices.col(t[b])).norm());
        }
        if (!touches) {
            double dmin = 1e300;
            for (int a = 0; a < s; ++a) dmin = std::min(dmin, (m.vertices.col(t[a]) - B.center).norm());
            if (dmin > B.radius + edge) continue;
        }
        int n = std::max(1, static_cast<int>(std::ceil(edge / h)));
        Vec a = m.vertices.col(t[0]), e0 = m.vertices.col(t[1]) - a;
        Vec e1 = m.d == 2 ? Vec(m.vertices.col(t[2]) - a) : Vec::Zero(a.size());
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= (m.d == 2 ? n - i : 0); ++j) {
                Vec x = a + (double(i) / n) * e0 + (double(j) / n) * e1;
                if (B.contains(x)) out.push_back(x);
            }
    }
    return out;
}

}  // namespace detail

// F = E' ∪ union of region surfaces, with a resampled cloud whose first columns are E.
inline ContainingSet build_F(const PointCloud& E, const GlobalParams& g, const SurfaceOptions& opt = {}) {
    ContainingSet cs;
    cs.g = g;
    cs.opt = opt;
    CubeTreeOptions to;
    to.max_depth = g.max_depth;
    cs.tree = std::make_shared<CubeTree>(build_cube_tree(E, g, to));
    const CubeTree& T = *cs.tree;
    CubePlanes planes(T, g);
    cs.forest = regions_sep(T, g, [&](int q) { return planes.beta(q); });
    for (const auto& S : cs.forest.regions) cs.surfaces.push_back(build_region_surface(S, cs.forest, T, planes, g, opt));
    for (int q = 0; q < T.size(); ++q) cs.beta_M_sum += std::pow(planes.beta(q), 2) * std::pow(T.cube(q).side, g.d);

    const int N = E.size();
    cs.e_count = N;
    const int L = T.levels();
    for (int y = 0; y < N; ++y) {
        bool tail = L >= 3;
        for (int k = std::max(0, L - 3); k < L && tail; ++k) {
            int s = cs.forest.region_of[T.point_cube[k][y]];
            tail = s >= 0 && cs.forest.regions[s].singleton();
        }
        if (tail) cs.residual.push_back(y);
    }

    std::vector<MeshLocator> locs;
    for (const auto& s : cs.surfaces) locs.emplace_back(s.mesh, s.restrict);
    const double root_eps = std::pow(g.eps, 1.0 / (g.d + 1));
    cs.dist_E.assign(N, 0.0);
    cs.stop_scale.assign(N, 0.0);
    std::vector<char> in_res(N, 0);
    for (int y : cs.residual) in_res[y] = 1;
    for (int y = 0; y < N; ++y) {
        int finest = T.point_cube[L - 1][y];
        int s = cs.forest.region_of[finest];
        const auto& rs = cs.surfaces[s];
        cs.stop_scale[y] = rs.singleton ? T.cube(finest).side : std::max(T.cube(finest).side, rs.r_last);
        if (in_res[y]) continue;
        Vec x = E.point(y);
        double best = locs[s].distance(x);
        for (size_t t = 0; t < cs.surfaces.size(); ++t) {
            if (static_cast<int>(t) == s) continue;
            const Ball& B = cs.surfaces[t].restrict;
            if ((x - B.center).norm() - B.radius >= best) continue;
            best = std::min(best, locs[t].distance(x));
        }
        cs.dist_E[y] = best;
        cs.max_dist = std::max(cs.max_dist, best);
        cs.max_ratio = std::max(cs.max_ratio, best / (root_eps * cs.stop_scale[y]));
    }

    const double h = opt.sample_spacing > 0.0 ? opt.sample_spacing : E.resolution();
    const double dE = std::max(T.diam(T.root), E.resolution());
    Ball window(T.center(T.root), opt.window_factor * dE + 0.5 * dE);
    std::vector<Vec> cand;
    for (const auto& s : cs.surfaces) {
        Ball B = s.restrict;
        double gap = (B.center - window.center).norm();
        if (gap > B.radius + window.radius) continue;
        for (auto& x : detail::mesh_samples(s.mesh, B, h))
            if (window.contains(x)) cand.push_back(std::move(x));
    }
    Mat C(E.dim(), static_cast<Eigen::Index>(cand.size()));
    for (size_t i = 0; i < cand.size(); ++i) C.col(static_cast<Eigen::Index>(i)) = cand[i];
    KdTree etree(E.points());
    std::vector<int> far;
    for (int i = 0; i < C.cols(); ++i) {
        double dd = etree.nearest(C.col(i)).second;
        if (dd >= 0.5 * h && (opt.tube_factor <= 0.0 || dd <= opt.tube_factor * h)) far.push_back(i);
    }
    Mat Cf = gather(C, far);
    Mat Cn = Cf.cols() > 0 ? gather(Cf, maximal_net(Cf, 0.5 * h)) : Cf;
    Mat all(E.dim(), N + Cn.cols());
    all.leftCols(N) = E.points();
    if (Cn.cols() > 0) all.rightCols(Cn.cols()) = Cn;
    cs.cloud = std::make_shared<PointCloud>(all, std::min(E.resolution(), h));
    return cs;
}

struct MeasureOptions {
    int samples = 4000;
    double tol = 0.1;  // in units of the larger mesh step
    std::uint64_t seed = 1;
    int depth = 4;
};

namespace detail {

inline double mesh_measure_in_balls(const SurfaceMesh& m, const Ball& A, const Ball& B, int depth) {
    std::function<double(const Vec&, const Vec&, const Vec&, int)> tri = [&](const Vec& a, const Vec& b, const Vec& c, int dd) {
        Vec u = b - a, v = c - a;
        double area = 0.5 * std::sqrt(std::max(0.0, u.squaredNorm() * v.squaredNorm() - std::pow(u.dot(v), 2)));
        bool inA = A.contains(a) && A.contains(b) && A.contains(c), inB = B.contains(a) && B.contains(b) && B.contains(c);
        if (inA && inB) return area;
        double ext = std::max({u.norm(), v.norm(), (c - b).norm()});
        for (const Ball* K : {&A, &B})
            if (std::min({(a - K->center).norm(), (b - K->center).norm(), (c - K->center).norm()}) > K->radius + ext) return 0.0;
        if (dd == 0) {
            Vec g = (a + b + c) / 3.0;
            return A.contains(g) && B.contains(g) ? area : 0.0;
        }
        Vec ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
        return tri(a, ab, ca, dd - 1) + tri(ab, b, bc, dd - 1) + tri(ca, bc, c, dd - 1) + tri(ab, bc, ca, dd - 1);
    };
    auto chord = [](const Vec& a, const Vec& b, const Ball& K, double& t0, double& t1) {
        Vec u = b - a;
        double L = u.norm();
        Vec w = a - K.center;
        double pb = w.dot(u) / L, c = w.squaredNorm() - K.radius * K.radius, disc = pb * pb - c;
        if (disc <= 0.0) {
            t0 = 1.0;
            t1 = 0.0;
            return;
        }
        double s = std::sqrt(disc);
        t0 = std::max(0.0, (-pb - s) / L);
        t1 = std::min(1.0, (-pb + s) / L);
    };
    double total = 0.0;
    for (const auto& t : m.faces) {
        if (m.d == 1) {
            Vec a = m.vertices.col(t[0]), b = m.vertices.col(t[1]);
            double a0, a1, b0, b1;
            chord(a, b, A, a0, a1);
            chord(a, b, B, b0, b1);
            double lo = std::max(a0, b0), hi = std::min(a1, b1);
            if (hi > lo) total += (hi - lo) * (b - a).norm();
        } else {
            total += tri(m.vertices.col(t[0]), m.vertices.col(t[1]), m.vertices.col(t[2]), depth);
        }
    }
    return total;
}

// Area-weighted uniform samples of the mesh inside the two balls.
inline std::vector<Vec> random_mesh_points(const SurfaceMesh& m, const Ball& A, const Ball& B, int count, std::mt19937_64& rng) {
    std::vector<int> fs;
    std::vector<double> w;
    for (int f = 0; f < static_cast<int>(m.faces.size()); ++f) {
        const auto& t = m.faces[f];
        double ext = 0.0;
        bool nearA = false, nearB = false;
        for (int a = 0; a < m.simplex_size(); ++a)
            for (int b = a + 1; b < m.simplex_size(); ++b) ext = std::max(ext, (m.vertices.col(t[a]) - m.vertices.col(t[b])).norm());
        for (int a = 0; a < m.simplex_size(); ++a) {
            nearA = nearA || (m.vertices.col(t[a]) - A.center).norm() <= A.radius + ext;
            nearB = nearB || (m.vertices.col(t[a]) - B.center).norm() <= B.radius + ext;
        }
        if (!nearA || !nearB) continue;
        fs.push_back(f);
        w.push_back(m.face_measure(f));
    }
    std::vector<Vec> out;
    if (fs.empty()) return out;
    std::discrete_distribution<int> pick(w.begin(), w.end());
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < count; ++i) {
        const auto& t = m.faces[fs[pick(rng)]];
        Vec x;
        if (m.d == 1) {
            x = m.vertices.col(t[0]) + u(rng) * (m.vertices.col(t[1]) - m.vertices.col(t[0]));
        } else {
            double s = u(rng), r = u(rng);
            if (s + r > 1.0) {
                s = 1.0 - s;
                r = 1.0 - r;
            }
            x = m.vertices.col(t[0]) + s * (m.vertices.col(t[1]) - m.vertices.col(t[0])) + r * (m.vertices.col(t[2]) - m.vertices.col(t[0]));
        }
        if (A.contains(x) && B.contains(x)) out.push_back(std::move(x));
    }
    return out;
}

}  // namespace detail

// Measure of the union of the patches inside the window; each patch loses the part already covered by earlier patches.
inline double surface_measure(const std::vector<RegionSurface>& surfaces, const Ball& window, const MeasureOptions& opt = {}) {
    std::mt19937_64 rng(opt.seed);
    std::vector<std::unique_ptr<MeshLocator>> locs(surfaces.size());
    double total = 0.0;
    for (size_t p = 0; p < surfaces.size(); ++p) {
        const auto& S = surfaces[p];
        if ((S.restrict.center - window.center).norm() > S.restrict.radius + window.radius) continue;
        double a = detail::mesh_measure_in_balls(S.mesh, S.restrict, window, opt.depth);
        if (a <= 0.0) continue;
        std::vector<size_t> earlier;
        for (size_t q = 0; q < p; ++q) {
            const auto& R = surfaces[q];
            if ((R.restrict.center - S.restrict.center).norm() <= R.restrict.radius + S.restrict.radius &&
                (R.restrict.center - window.center).norm() <= R.restrict.radius + window.radius)
                earlier.push_back(q);
        }
        if (!earlier.empty()) {
            auto pts = detail::random_mesh_points(S.mesh, S.restrict, window, opt.samples, rng);
            int covered = 0;
            for (const auto& x : pts) {
                for (size_t q : earlier) {
                    const auto& R = surfaces[q];
                    if (!R.restrict.contains(x)) continue;
                    if (!locs[q]) locs[q] = std::make_unique<MeshLocator>(R.mesh, R.restrict);
                    double tol = opt.tol * std::max(S.mesh.step, R.mesh.step);
                    if (locs[q]->distance(x) <= tol) {
                        ++covered;
                        break;
                    }
                }
            }
            if (!pts.empty()) a *= 1.0 - static_cast<double>(covered) / pts.size();
        }
        total += a;
    }
    return total;
}

inline double surface_measure(const ContainingSet& F, const Ball& window) {
    MeasureOptions mo;
    mo.samples = F.opt.overlap_samples;
    mo.tol = F.opt.overlap_tol;
    mo.seed = F.opt.seed;
    return surface_measure(F.surfaces, window, mo);
}

// Whole-set measure: a window containing every restriction ball.
inline double surface_measure(const ContainingSet& F) {
    if (F.surfaces.empty()) return 0.0;
    Vec c = F.surfaces[0].restrict.center;
    double R = 0.0;
    for (const auto& s : F.surfaces) R = std::max(R, (s.restrict.center - c).norm() + s.restrict.radius);
    return surface_measure(F, Ball(c, 2.0 * R));
}

struct LowerRegProbe {
    int probes = 0;
    int passed = 0;
    double min_ratio = 0.0;  // min of content proxy / r^d
    nlohmann::json to_json() const { return {{"probes", probes}, {"passed", passed}, {"min_ratio", min_ratio}}; }
};

// Grid-content proxy of H^d_inf(F ∩ B(x, r)) against c1 r^d at random centres of the cloud.
inline LowerRegProbe probe_lower_regularity(const PointCloud& F, const GlobalParams& g, int probes, double rmin, double rmax, std::uint64_t seed) {
    LowerRegProbe rep;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    KdTree tree(F.points());
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, F.size() - 1);
    std::uniform_real_distribution<double> u(0, 1);
    auto cfg = ContentConfig::from(g, F.resolution());
    for (int i = 0; i < probes; ++i) {
        Vec x = F.point(pick(rng));
        double r = rmin * std::pow(rmax / rmin, u(rng));
        auto ids = points_in_ball(tree, Ball(x, r));
        double c = dyadic_content(gather(F.points(), ids), cfg);
        double ratio = c / std::pow(r, g.d);
        rep.min_ratio = std::min(rep.min_ratio, ratio);
        rep.passed += ratio >= g.c1;
        ++rep.probes;
    }
    return rep;
}

struct RatioReport {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double diam_E = 0.0;
    double diam_F = 0.0;
    JonesReport jones_E;
    JonesReport jones_F;
    bool fatness_ok = true;
    double measure_F = 0.0;
    double measure_bound = 0.0;  // H^d(F) / (l(Q0)^d + sum beta(M B_Q)^2 l^d)
    nlohmann::json to_json() const {
        return {{"schema", "betascan/1"},
                {"kind", "ratio_report"},
                {"lhs", lhs},
                {"rhs", rhs},
                {"ratio", ratio},
                {"diam_E", diam_E},
                {"diam_F", diam_F},
                {"fatness_ok", fatness_ok},
                {"measure_F", measure_F},
                {"measure_bound", measure_bound},
                {"level_sums_E", jones_E.level_sums},
                {"level_sums_F", jones_F.level_sums}};
    }
};

namespace detail {

// Indices of E's points inside F (exact coincidence up to 1e-12 of the scale).
inline std::vector<int> embed(const PointCloud& E, const PointCloud& F) {
    KdTree tf(F.points());
    const double tol = 1e-12 * std::max(1.0, diameter(E.points()));
    std::vector<int> idx(E.size());
    for (int i = 0; i < E.size(); ++i) {
        auto nn = tf.nearest(E.point(i));
        if (nn.second > tol) throw InputError("E is not contained in F");
        idx[i] = nn.first;
    }
    return idx;
}

// Cubes of F on nets that complete the nets of T_E, with the same top scale.
inline CubeTree completed_tree(const CubeTree& TE, const PointCloud& F, const std::vector<int>& embed_idx, const GlobalParams& g) {
    CubeTreeOptions o;
    o.scale = TE.scale;
    o.max_depth = TE.levels() - 1;
    for (const auto& net : TE.nets) {
        std::vector<int> s;
        for (int i : net) s.push_back(embed_idx[i]);
        o.seed_nets.push_back(s);
    }
    return build_cube_tree(F, g, o);
}

}  // namespace detail

// LHS = diam(Q0^E)^d + sum beta_E(C0 Q)^2 l^d over D^E, RHS = diam(Q0^F)^d + sum beta-check_F(C0 Q)^2 l^d over D^F.
inline RatioReport verify_thm1(const PointCloud& E, const PointCloud& F, const GlobalParams& g) {
    CubeTreeOptions o;
    o.max_depth = g.max_depth;
    CubeTree TE = build_cube_tree(E, g, o);
    auto idx = detail::embed(E, F);
    CubeTree TF = detail::completed_tree(TE, F, idx, g);
    RatioReport rep;
    rep.jones_E = jones_sum(TE, BetaKind::New, g);
    rep.jones_F = jones_sum(TF, BetaKind::Check, g);
    rep.diam_E = rep.jones_E.diam_root;
    rep.diam_F = rep.jones_F.diam_root;
    rep.lhs = rep.jones_E.total;
    rep.rhs = rep.jones_F.total;
    rep.ratio = rep.lhs / rep.rhs;
    return rep;
}

// Compares both sides with the orientation F over E for a containing set built from E; also reports the measure bound of F.
inline RatioReport verify_thm4(const ContainingSet& cs, const PointCloud& E, const GlobalParams& g) {
    const CubeTree& TE = *cs.tree;
    std::vector<int> idx(E.size());
    std::iota(idx.begin(), idx.end(), 0);
    CubeTree TF = detail::completed_tree(TE, *cs.cloud, idx, g);
    RatioReport rep;
    rep.jones_E = jones_sum(TE, BetaKind::New, g);
    rep.jones_F = jones_sum(TF, BetaKind::Check, g);
    rep.diam_E = rep.jones_E.diam_root;
    rep.diam_F = rep.jones_F.diam_root;
    rep.fatness_ok = rep.diam_E >= g.lambda * TE.cube(TE.root).side;
    rep.lhs = rep.jones_F.total;
    rep.rhs = rep.jones_E.total;
    rep.ratio = rep.lhs / rep.rhs;
    rep.measure_F = cs.measure > 0.0 ? cs.measure : surface_measure(cs);
    rep.measure_bound = rep.measure_F / (std::pow(TE.cube(TE.root).side, g.d) + cs.beta_M_sum);
    return rep;
}

inline RatioReport verify_thm4(const PointCloud& E, const GlobalParams& g, const SurfaceOptions& opt = {}, ContainingSet* out = nullptr) {
    ContainingSet cs = build_F(E, g, opt);
    cs.measure = surface_measure(cs);
    auto rep = verify_thm4(cs, E, g);
    if (out) *out = std::move(cs);
    return rep;
}

struct BaupCertificate {
    bool ok = false;
    bool no_patch = false;
    double distance = 0.0;
    double single_plane_distance = 0.0;
    std::vector<AffinePlane> planes;
    nlohmann::json to_json() const {
        nlohmann::json ps = nlohmann::json::array();
        for (const auto& p : planes) ps.push_back(plane_json(p));
        return {{"ok", ok}, {"no_patch", no_patch}, {"distance", distance}, {"single_plane_distance", single_plane_distance}, {"planes", ps}};
    }
};

// Union of local tangent planes of the extended patches meeting B, against the sample of F in B.
inline BaupCertificate baup_certificate(const Ball& B, const std::vector<RegionSurface>& surfaces, const PointCloud& F, const GlobalParams& g,
                                        double C = 20.0, bool compare_single = true) {
    BaupCertificate cert;
    const int d = g.d;
    for (const auto& s : surfaces) {
        std::vector<int> ids;
        for (int v = 0; v < s.mesh.vertex_count(); ++v)
            if (B.contains(s.mesh.vertices.col(v)) && s.extended.contains(s.mesh.vertices.col(v))) ids.push_back(v);
        if (ids.empty()) continue;
        AffinePlane L = s.plane;
        if (static_cast<int>(ids.size()) >= d + 1) {
            AffinePlane fit = fit_plane_pca(gather(s.mesh.vertices, ids), d);
            L = fit;
        }
        bool dup = false;
        for (const auto& P : cert.planes)
            if (plane_ball_distance(P, L, B) <= 1e-9) dup = true;
        if (!dup) cert.planes.push_back(L);
    }
    if (cert.planes.empty()) {
        cert.no_patch = true;
        cert.distance = 2.0;
        return cert;
    }
    KdTree tree(F.points());
    cert.distance = bilateral_distance(F, tree, B, cert.planes);
    if (compare_single) cert.single_plane_distance = best_bilateral_plane(F, B, d).second;
    cert.ok = cert.distance <= C * g.eps;
    return cert;
}

inline BaupCertificate baup_certificate(const CubeTree& TF, int q, const ContainingSet& Fs, double C = 20.0, bool compare_single = true) {
    return baup_certificate(TF.ball(q, Fs.g.C0), Fs.surfaces, *Fs.cloud, Fs.g, C, compare_single);
}

}  // namespace betascan
