#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "beta.hpp"
#include "cubes.hpp"
#include "geom.hpp"
#include "kdtree.hpp"
#include "stoptime.hpp"
#include "surface_union.hpp"

namespace betascan {

struct GeneratorSpec {
    std::string kind = "line";  // line, plane_patch, circle, sphere_cap, lipschitz_graph, koch, cantor4, noisy_plane, cluster_mix
    int count = 400;
    std::uint64_t seed = 1;
    int n = 0;            // ambient dimension; 0: smallest admissible
    double lambda = 0.1;  // lipschitz_graph
    double theta = 0.2;   // koch
    int gens = 3;         // koch, cantor4
    double a = 0.01;      // noisy_plane noise, cluster_mix spread
    int clusters = 3;     // cluster_mix
    double cap = 0.5;     // sphere_cap geodesic radius

    nlohmann::json to_json() const {
        return {{"kind", kind}, {"count", count}, {"seed", seed},   {"n", n},        {"lambda", lambda},
                {"theta", theta}, {"gens", gens},  {"a", a},         {"clusters", clusters}, {"cap", cap}};
    }
};

namespace detail {

inline Mat from_columns(const std::vector<Vec>& pts, int n) {
    Mat P(n, static_cast<Eigen::Index>(pts.size()));
    for (size_t i = 0; i < pts.size(); ++i) {
        P.col(static_cast<Eigen::Index>(i)).setZero();
        P.col(static_cast<Eigen::Index>(i)).head(pts[i].size()) = pts[i];
    }
    return P;
}

inline int grid_side(int count) { return std::max(2, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count))))); }

// Smooth 1-Lipschitz height on [0,1]^d.
inline double lipschitz_height(double x, double y) {
    return (std::sin(2.0 * x + 0.3) * std::cos(1.5 * y) + 0.5 * std::sin(3.0 * x * y)) / 3.6;
}

inline void koch_rec(const Vec& a, const Vec& b, double theta, int g, std::vector<Vec>& out) {
    if (g == 0) {
        out.push_back(a);
        return;
    }
    Vec u = b - a;
    const double s = 1.0 / (2.0 * (1.0 + std::cos(theta)));
    Vec nrm(2);
    nrm << -u(1), u(0);
    Vec p1 = a + s * u, p3 = b - s * u;
    Vec p2 = 0.5 * (a + b) + s * std::sin(theta) * nrm;
    koch_rec(a, p1, theta, g - 1, out);
    koch_rec(p1, p2, theta, g - 1, out);
    koch_rec(p2, p3, theta, g - 1, out);
    koch_rec(p3, b, theta, g - 1, out);
}

}  // namespace detail

// Deterministic synthetic cloud with its construction spacing as resolution.
inline PointCloud generate(const GeneratorSpec& s) {
    if (s.count < 1) throw InputError("sample count must be positive");
    auto need = [&](int nmin) {
        int n = s.n > 0 ? s.n : nmin;
        if (n < nmin) throw InputError(s.kind + " needs ambient dimension at least " + std::to_string(nmin));
        return n;
    };
    std::mt19937_64 rng(s.seed);
    std::normal_distribution<double> N(0.0, 1.0);
    std::vector<Vec> pts;
    double h = 0.0;
    int n = 0;
    if (s.kind == "line") {
        n = need(2);
        const int m = std::max(2, s.count);
        for (int i = 0; i < m; ++i) pts.push_back(Vec::Constant(1, double(i) / (m - 1)));
        h = 1.0 / (m - 1);
    } else if (s.kind == "plane_patch" || s.kind == "noisy_plane" || s.kind == "lipschitz_graph") {
        if (s.kind == "lipschitz_graph" && !(s.lambda >= 0.0)) throw InputError("lambda must be non-negative");
        if (s.kind == "noisy_plane" && !(s.a >= 0.0)) throw InputError("noise amplitude must be non-negative");
        n = need(s.kind == "plane_patch" ? 3 : 2);
        const int dd = s.kind == "plane_patch" ? 2 : std::min(2, n - 1);
        auto height = [&](double x, double y) {
            if (s.kind == "lipschitz_graph") return s.lambda * detail::lipschitz_height(x, y);
            if (s.kind == "noisy_plane") return s.a * N(rng);
            return 0.0;
        };
        if (dd == 1) {
            const int m = std::max(2, s.count);
            for (int i = 0; i < m; ++i) {
                double x = double(i) / (m - 1);
                Vec p(2);
                p << x, height(x, 0.0);
                pts.push_back(p);
            }
            h = 1.0 / (m - 1);
        } else {
            const int m = detail::grid_side(s.count);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    double x = double(i) / (m - 1), y = double(j) / (m - 1);
                    Vec p(3);
                    p << x, y, height(x, y);
                    pts.push_back(p);
                }
            h = 1.0 / (m - 1);
        }
    } else if (s.kind == "circle") {
        n = need(2);
        const int m = std::max(3, s.count);
        for (int i = 0; i < m; ++i) {
            double t = 2.0 * std::numbers::pi * i / m;
            Vec p(2);
            p << std::cos(t), std::sin(t);
            pts.push_back(p);
        }
        h = 2.0 * std::sin(std::numbers::pi / m);
    } else if (s.kind == "sphere_cap") {
        n = need(3);
        if (!(s.cap > 0.0 && s.cap < std::numbers::pi)) throw InputError("cap radius must lie in (0, pi)");
        const double area = 2.0 * std::numbers::pi * (1.0 - std::cos(s.cap));
        h = std::sqrt(area / s.count);
        pts.push_back(Eigen::Vector3d(0, 0, 1));
        for (double t = h; t <= s.cap + 1e-12; t += h) {
            int m = std::max(6, static_cast<int>(std::ceil(2.0 * std::numbers::pi * std::sin(t) / h)));
            for (int i = 0; i < m; ++i) {
                double p = 2.0 * std::numbers::pi * i / m;
                pts.push_back(Eigen::Vector3d(std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)));
            }
        }
    } else if (s.kind == "koch") {
        n = need(2);
        if (s.gens < 1) throw InputError("generations must be at least 1");
        if (!(s.theta >= 0.0 && s.theta < std::numbers::pi / 3.0)) throw InputError("koch angle must lie in [0, pi/3)");
        std::vector<Vec> verts;
        detail::koch_rec(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), s.theta, s.gens, verts);
        verts.push_back(Eigen::Vector2d(1, 0));
        const double seg = std::pow(1.0 / (2.0 * (1.0 + std::cos(s.theta))), s.gens);
        const int per = std::max(1, static_cast<int>(std::lround(double(s.count) / std::pow(4.0, s.gens))));
        for (size_t i = 0; i + 1 < verts.size(); ++i)
            for (int k = 0; k < per; ++k) pts.push_back(verts[i] + (double(k) / per) * (verts[i + 1] - verts[i]));
        pts.push_back(verts.back());
        h = seg / per;
    } else if (s.kind == "cantor4") {
        n = need(2);
        if (s.gens < 1) throw InputError("generations must be at least 1");
        std::vector<Vec> cur{Eigen::Vector2d(0, 0)};
        double side = 1.0;
        for (int g = 0; g < s.gens; ++g) {
            std::vector<Vec> next;
            for (const auto& c : cur)
                for (double dx : {0.0, 0.75})
                    for (double dy : {0.0, 0.75}) next.push_back(c + side * Eigen::Vector2d(dx, dy));
            cur = std::move(next);
            side /= 4.0;
        }
        pts = cur;
        h = 3.0 * side;
    } else if (s.kind == "cluster_mix") {
        n = need(2);
        if (s.clusters < 1) throw InputError("cluster count must be positive");
        if (!(s.a > 0.0)) throw InputError("cluster spread must be positive");
        std::uniform_real_distribution<double> U(0.0, 1.0);
        std::vector<Vec> centres;
        for (int c = 0; c < s.clusters; ++c) centres.push_back(Vec::NullaryExpr(n, [&] { return U(rng); }));
        for (int i = 0; i < s.count; ++i) pts.push_back(centres[i % s.clusters] + s.a * Vec::NullaryExpr(n, [&] { return N(rng); }));
        Mat P = detail::from_columns(pts, n);
        return PointCloud(P);
    } else {
        throw InputError("unknown generator kind: " + s.kind);
    }
    Mat P = detail::from_columns(pts, n);
    if (P.cols() == 1) h = std::max(h, 1.0);
    return PointCloud(P, h);
}

// Median nearest-neighbour distance.
inline double median_nn(const PointCloud& E) {
    if (E.size() < 2) return 0.0;
    KdTree tree(E.points());
    std::vector<double> nn;
    for (int i = 0; i < E.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (double r = E.resolution(); !std::isfinite(best); r *= 2.0)
            for (const auto& [dd, j] : tree.radius_sorted(E.point(i), r))
                if (j != i) {
                    best = dd;
                    break;
                }
        nn.push_back(best);
    }
    std::nth_element(nn.begin(), nn.begin() + nn.size() / 2, nn.end());
    return nn[nn.size() / 2];
}

// CSV: one point per row, optional '#' header or comment lines.
inline PointCloud read_cloud_csv(std::istream& in, double h = 0.0) {
    std::vector<std::vector<double>> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                double v = std::stod(cell, &used);
                if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
                if (!std::isfinite(v)) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw InputError("invalid number on line " + std::to_string(lineno) + ": '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows[0].size()) throw InputError("inconsistent column count on line " + std::to_string(lineno));
        rows.push_back(std::move(row));
    }
    if (rows.empty() || rows[0].empty()) throw InputError("empty point cloud");
    Mat P(static_cast<Eigen::Index>(rows[0].size()), static_cast<Eigen::Index>(rows.size()));
    for (size_t j = 0; j < rows.size(); ++j)
        for (size_t i = 0; i < rows[j].size(); ++i) P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[j][i];
    return h > 0.0 ? PointCloud(P, h) : PointCloud(P);
}

// JSON: {"n": n, "h": h, "points": [[...], ...]}; h optional.
inline PointCloud read_cloud_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw InputError(std::string("invalid JSON cloud: ") + e.what());
    }
    if (!j.contains("points") || !j["points"].is_array() || j["points"].empty()) throw InputError("JSON cloud needs a nonempty points array");
    const auto& pts = j["points"];
    const int n = j.contains("n") ? j["n"].get<int>() : static_cast<int>(pts[0].size());
    Mat P(n, static_cast<Eigen::Index>(pts.size()));
    for (size_t c = 0; c < pts.size(); ++c) {
        if (!pts[c].is_array() || static_cast<int>(pts[c].size()) != n) throw InputError("point " + std::to_string(c) + " has wrong dimension");
        for (int i = 0; i < n; ++i) {
            if (!pts[c][i].is_number()) throw InputError("point " + std::to_string(c) + " has a non-numeric coordinate");
            P(i, static_cast<Eigen::Index>(c)) = pts[c][i].get<double>();
        }
    }
    if (!P.allFinite()) throw InputError("cloud coordinates must be finite");
    if (j.contains("h")) return PointCloud(P, j["h"].get<double>());
    return PointCloud(P);
}

inline PointCloud load_cloud(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    auto ends = [&](const std::string& ext) { return path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0; };
    return ends(".json") ? read_cloud_json(in) : read_cloud_csv(in);
}

inline std::string cloud_csv(const PointCloud& E) {
    std::ostringstream os;
    os.precision(17);
    os << "# betascan cloud n=" << E.dim() << " h=" << E.resolution() << "\n";
    for (int c = 0; c < E.size(); ++c) {
        for (int i = 0; i < E.dim(); ++i) os << (i ? "," : "") << E.points()(i, c);
        os << "\n";
    }
    return os.str();
}

inline nlohmann::json cloud_json(const PointCloud& E) {
    nlohmann::json pts = nlohmann::json::array();
    for (int c = 0; c < E.size(); ++c) {
        std::vector<double> x(E.points().col(c).data(), E.points().col(c).data() + E.dim());
        pts.push_back(x);
    }
    return {{"schema", "betascan/1"}, {"n", E.dim()}, {"h", E.resolution()}, {"points", pts}};
}

struct PipelineOptions {
    std::vector<BetaKind> kinds{BetaKind::Inf, BetaKind::Check, BetaKind::New};
    int classify_m = 2;
    int classify_max_level = 3;   // classifiers run on levels 0..classify_max_level
    SurfaceOptions surface;
    std::ostream* log = nullptr;  // per-stage wall clock
};

struct RunReport {
    nlohmann::json json;
    bool truncated = false;
    std::string dump() const { return json.dump(1); }
};

inline const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> s{"cubes", "beta", "regions", "surface", "thm1", "thm4", "classify"};
    return s;
}

inline std::vector<std::string> stage_requirements(const std::string& s) {
    if (s == "cubes") return {};
    if (s == "beta" || s == "regions" || s == "classify") return {"cubes"};
    if (s == "surface") return {"regions"};
    if (s == "thm1") return {"beta"};
    if (s == "thm4") return {"surface"};
    throw InputError("unknown stage: " + s);
}

inline nlohmann::json params_json(const GlobalParams& g) {
    return {{"d", g.d},           {"p", g.p},         {"rho", g.rho},   {"c1", g.c1},       {"c2", g.c2},     {"kappa", g.kappa},
            {"omega_d", g.omega_d}, {"C0", g.C0},     {"M", g.M},       {"eps", g.eps},     {"alpha", g.alpha}, {"tau", g.tau},
            {"lambda", g.lambda}, {"seed", g.seed},   {"max_depth", g.max_depth}, {"stage_budget_s", g.stage_budget_s}};
}

namespace detail {

inline nlohmann::json named_constant(const std::string& name, const std::string& bounds, const std::string& orientation, double value) {
    return {{"name", name}, {"bounds", bounds}, {"orientation", orientation}, {"value", value}};
}

}  // namespace detail

// Runs the requested stages in dependency order; the report holds no timings so equal inputs give equal bytes.
inline RunReport run_pipeline(const PointCloud& E, const GlobalParams& g, const std::vector<std::string>& stages, const PipelineOptions& opt = {}) {
    g.validate(E.dim());
    std::set<std::string> want(stages.begin(), stages.end());
    for (const auto& s : want)
        for (const auto& r : stage_requirements(s))
            if (!want.count(r)) throw InputError("stage '" + s + "' requires stage '" + r + "'");
    RunReport rep;
    auto& J = rep.json;
    J["schema"] = "betascan/1";
    J["kind"] = "run_report";
    J["params"] = params_json(g);
    J["cloud"] = {{"points", E.size()}, {"n", E.dim()}, {"h", E.resolution()}};
    nlohmann::json order = nlohmann::json::array();
    for (const auto& s : pipeline_stages())
        if (want.count(s)) order.push_back(s);
    J["stages"] = order;
    nlohmann::json constants = nlohmann::json::array();

    auto timed = [&](const std::string& name, auto&& body) {
        auto t0 = std::chrono::steady_clock::now();
        body();
        double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (opt.log) *opt.log << "stage " << name << " " << dt << " s\n";
    };

    CubeTreeOptions to;
    to.max_depth = g.max_depth;
    std::shared_ptr<CubeTree> T;
    ContainingSet cs;
    std::map<BetaKind, JonesReport> jones;
    if (want.count("cubes"))
        timed("cubes", [&] {
            T = std::make_shared<CubeTree>(build_cube_tree(E, g, to));
            std::vector<int> per;
            for (const auto& l : T->level_cubes) per.push_back(static_cast<int>(l.size()));
            J["cubes"] = {{"levels", T->levels()}, {"cubes", T->size()}, {"scale", T->scale}, {"per_level", per}, {"c0_achieved", T->c0_achieved}};
        });
    if (want.count("beta"))
        timed("beta", [&] {
            nlohmann::json b = nlohmann::json::object();
            for (BetaKind k : opt.kinds) {
                auto jr = jones_sum(*T, k, g, g.stage_budget_s);
                rep.truncated = rep.truncated || jr.truncated;
                b[to_string(k)] = {{"total", jr.total}, {"diam_root", jr.diam_root}, {"sum", jr.sum_part()}, {"level_sums", jr.level_sums}, {"truncated", jr.truncated}};
                jones[k] = std::move(jr);
            }
            J["beta"] = b;
        });
    if (want.count("regions"))
        timed("regions", [&] {
            auto Fb = regions_beta(*T, E, g);
            CubePlanes planes(*T, g);
            auto Fs = regions_sep(*T, g, [&](int q) { return planes.beta(q); });
            nlohmann::json r = nlohmann::json::object();
            for (const RegionForest* F : {&Fb, &Fs})
                r[F->rule] = {{"region_count", F->region_count()}, {"singleton_count", F->singleton_count()}, {"excluded_subtrees", F->excluded.size()}};
            J["regions"] = r;
        });
    if (want.count("surface"))
        timed("surface", [&] {
            cs = build_F(E, g, opt.surface);
            cs.measure = surface_measure(cs);
            double l0 = cs.tree->cube(cs.tree->root).side;
            double bound = cs.measure / (std::pow(l0, g.d) + cs.beta_M_sum);
            int low = 0, nonsingle = 0;
            double worstC = 0.0;
            for (const auto& s : cs.surfaces) {
                low += s.low_confidence;
                if (!s.singleton) {
                    ++nonsingle;
                    worstC = std::max(worstC, s.closeness_C);
                }
            }
            J["surface"] = {{"regions", cs.forest.region_count()},
                            {"singletons", cs.forest.singleton_count()},
                            {"surfaces", nonsingle},
                            {"low_confidence", low},
                            {"residual_points", cs.residual.size()},
                            {"cloud_points", cs.cloud->size()},
                            {"measure", cs.measure},
                            {"beta_M_sum", cs.beta_M_sum},
                            {"max_dist", cs.max_dist},
                            {"max_ratio", cs.max_ratio},
                            {"closeness_C", worstC}};
            constants.push_back(detail::named_constant("measure_bound", "H^d(F) / (l(Q0)^d + sum beta_E^{d,1}(M B_Q)^2 l(Q)^d)", "upper", bound));
            constants.push_back(detail::named_constant("closeness", "dist(x, F) / (eps^{1/(d+1)} stopping scale) over x in E", "upper", cs.max_ratio));
        });
    if (want.count("thm1"))
        timed("thm1", [&] {
            std::vector<int> half;
            for (int i = 0; i < E.size(); i += 2) half.push_back(i);
            PointCloud Eh = E.subset(half);
            auto r = verify_thm1(Eh, E, g);
            J["thm1"] = {{"subset", "even indices"}, {"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio}, {"diam_E", r.diam_E}, {"diam_F", r.diam_F}};
            constants.push_back(detail::named_constant("subset_vs_superset",
                                                       "(diam(Q0^E)^d + sum beta_E^{d,p}(C0 Q)^2 l^d) / (diam(Q0^F)^d + sum beta-check_F^{d,p}(C0 Q)^2 l^d)",
                                                       "upper", r.ratio));
        });
    if (want.count("thm4"))
        timed("thm4", [&] {
            auto r = verify_thm4(cs, E, g);
            J["thm4"] = {{"lhs", r.lhs}, {"rhs", r.rhs}, {"ratio", r.ratio}, {"fatness_ok", r.fatness_ok}, {"measure_bound", r.measure_bound}};
            constants.push_back(detail::named_constant("containing_set_vs_set",
                                                       "(diam(Q0^F)^d + sum beta-check_F^{d,p}(C0 Q)^2 l^d) / (diam(Q0^E)^d + sum beta_E^{d,p}(C0 Q)^2 l^d)",
                                                       "upper", r.ratio));
        });
    if (want.count("classify"))
        timed("classify", [&] {
            nlohmann::json rows = nlohmann::json::array();
            for (int k = 0; k < std::min(T->levels(), opt.classify_max_level + 1); ++k) {
                int bwgl = 0, baup = 0;
                std::vector<int> bw_cubes, ba_cubes;
                for (int q : T->level_cubes[k]) {
                    if (classify_bwgl(*T, q, g.C0, g.eps, g.d)) {
                        ++bwgl;
                        bw_cubes.push_back(q);
                    }
                    if (classify_baup(*T, q, g.C0, g.eps, opt.classify_m, g.d)) {
                        ++baup;
                        ba_cubes.push_back(q);
                    }
                }
                rows.push_back({{"level", k}, {"cubes", T->level_cubes[k].size()}, {"bwgl", bwgl}, {"baup", baup}, {"bwgl_cubes", bw_cubes}, {"baup_cubes", ba_cubes}});
            }
            J["classify"] = {{"eps", g.eps}, {"m", opt.classify_m}, {"levels", rows}};
        });
    J["constants"] = constants;
    J["truncated"] = rep.truncated;
    return rep;
}

}  // namespace betascan
