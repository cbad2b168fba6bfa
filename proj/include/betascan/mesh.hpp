#pragma once

#include <json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "geom.hpp"

namespace betascan {

// Simplicial patch of a d-plane (d = 1: polyline, d = 2: triangles) and its images under the iteration.
struct SurfaceMesh {
    int d = 2;
    AffinePlane P0;
    double step = 0.0;
    Mat params;                            // d x V parameter coordinates in the frame of P0
    Mat vertices;                          // n x V current positions
    std::vector<std::array<int, 3>> faces; // d = 1 uses the first two entries
    std::vector<Mat> history;              // positions after each applied level

    int vertex_count() const { return static_cast<int>(vertices.cols()); }
    int ambient() const { return static_cast<int>(vertices.rows()); }
    int simplex_size() const { return d + 1; }

    Vec param_point(int v) const { return P0.base() + P0.frame() * params.col(v); }

    double face_measure(int f, const Mat& X) const {
        const auto& t = faces[f];
        if (d == 1) return (X.col(t[1]) - X.col(t[0])).norm();
        Vec a = X.col(t[1]) - X.col(t[0]), b = X.col(t[2]) - X.col(t[0]);
        double aa = a.squaredNorm(), bb = b.squaredNorm(), ab = a.dot(b);
        return 0.5 * std::sqrt(std::max(0.0, aa * bb - ab * ab));
    }

    double face_measure(int f) const { return face_measure(f, vertices); }

    double measure() const {
        double s = 0.0;
        for (int f = 0; f < static_cast<int>(faces.size()); ++f) s += face_measure(f);
        return s;
    }

    // Faces whose measure is below tol.
    int degenerate_faces(double tol) const {
        int c = 0;
        for (int f = 0; f < static_cast<int>(faces.size()); ++f) c += face_measure(f) < tol;
        return c;
    }

    std::string to_obj() const;
    nlohmann::json sidecar_json() const;
};

// Regular patch of P0 over the parameter box [-half, half]^d around P0.base().
inline SurfaceMesh make_patch(const AffinePlane& P0, double half, double step) {
    const int d = P0.dim();
    if (d != 1 && d != 2) throw InputError("surface meshes support d = 1 and d = 2");
    if (!(half > 0.0) || !(step > 0.0)) throw InputError("patch size and step must be positive");
    SurfaceMesh m;
    m.d = d;
    m.P0 = P0;
    const int cells = std::max(1, static_cast<int>(std::ceil(2.0 * half / step - 1e-9)));
    m.step = 2.0 * half / cells;
    const int N = cells + 1;
    if (d == 1) {
        m.params.resize(1, N);
        for (int i = 0; i < N; ++i) m.params(0, i) = -half + i * m.step;
        for (int i = 0; i + 1 < N; ++i) m.faces.push_back({i, i + 1, -1});
    } else {
        m.params.resize(2, static_cast<Eigen::Index>(N) * N);
        for (int j = 0; j < N; ++j)
            for (int i = 0; i < N; ++i) {
                m.params(0, j * N + i) = -half + i * m.step;
                m.params(1, j * N + i) = -half + j * m.step;
            }
        for (int j = 0; j + 1 < N; ++j)
            for (int i = 0; i + 1 < N; ++i) {
                int a = j * N + i, b = a + 1, c = a + N, e = c + 1;
                m.faces.push_back({a, b, e});
                m.faces.push_back({a, e, c});
            }
    }
    m.vertices.resize(P0.ambient(), m.params.cols());
    for (int v = 0; v < m.params.cols(); ++v) m.vertices.col(v) = m.param_point(v);
    return m;
}

namespace detail {

inline double segment_in_ball(const Vec& a, const Vec& b, const Ball& B) {
    Vec u = b - a;
    double L = u.norm();
    if (L == 0.0) return 0.0;
    u /= L;
    Vec w = a - B.center;
    double pb = w.dot(u), c = w.squaredNorm() - B.radius * B.radius;
    double disc = pb * pb - c;
    if (disc <= 0.0) return 0.0;
    double s = std::sqrt(disc);
    double t0 = std::max(0.0, -pb - s), t1 = std::min(L, -pb + s);
    return std::max(0.0, t1 - t0);
}

inline double triangle_in_ball(const Vec& a, const Vec& b, const Vec& c, const Ball& B, int depth) {
    const double R = B.radius;
    double da = (a - B.center).norm(), db = (b - B.center).norm(), dc = (c - B.center).norm();
    Vec u = b - a, v = c - a;
    double area = 0.5 * std::sqrt(std::max(0.0, u.squaredNorm() * v.squaredNorm() - std::pow(u.dot(v), 2)));
    if (da <= R && db <= R && dc <= R) return area;
    double ext = std::max({(b - a).norm(), (c - a).norm(), (c - b).norm()});
    if (std::min({da, db, dc}) > R + ext) return 0.0;
    if (depth == 0) {
        Vec g = (a + b + c) / 3.0;
        return (g - B.center).norm() <= R ? area : 0.0;
    }
    Vec ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
    return triangle_in_ball(a, ab, ca, B, depth - 1) + triangle_in_ball(ab, b, bc, B, depth - 1) +
           triangle_in_ball(ca, bc, c, B, depth - 1) + triangle_in_ball(ab, bc, ca, B, depth - 1);
}

}  // namespace detail

// Measure of the mesh inside B: exact for polylines, 4^depth subdivision of boundary triangles otherwise.
inline double mesh_measure_in_ball(const SurfaceMesh& m, const Ball& B, int depth = 4) {
    double s = 0.0;
    for (const auto& t : m.faces) {
        if (m.d == 1) s += detail::segment_in_ball(m.vertices.col(t[0]), m.vertices.col(t[1]), B);
        else s += detail::triangle_in_ball(m.vertices.col(t[0]), m.vertices.col(t[1]), m.vertices.col(t[2]), B, depth);
    }
    return s;
}

// OBJ text; coordinates beyond the third are dropped and missing ones are zero.
inline std::string SurfaceMesh::to_obj() const {
    std::ostringstream os;
    os.precision(17);
    os << "# betascan mesh d=" << d << " n=" << ambient() << "\n";
    for (int v = 0; v < vertex_count(); ++v) {
        os << "v";
        for (int c = 0; c < 3; ++c) os << ' ' << (c < ambient() ? vertices(c, v) : 0.0);
        os << "\n";
    }
    for (const auto& t : faces) {
        if (d == 1) os << "l " << t[0] + 1 << ' ' << t[1] + 1 << "\n";
        else os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << "\n";
    }
    return os.str();
}

inline nlohmann::json SurfaceMesh::sidecar_json() const {
    nlohmann::json j;
    j["schema"] = "betascan/1";
    j["kind"] = "mesh";
    j["d"] = d;
    j["n"] = ambient();
    j["step"] = step;
    nlohmann::json vs = nlohmann::json::array();
    for (int v = 0; v < vertex_count(); ++v) {
        std::vector<double> x(vertices.col(v).data(), vertices.col(v).data() + ambient());
        vs.push_back(x);
    }
    j["vertices"] = vs;
    nlohmann::json fs = nlohmann::json::array();
    for (const auto& t : faces) {
        if (d == 1) fs.push_back({t[0], t[1]});
        else fs.push_back({t[0], t[1], t[2]});
    }
    j["faces"] = fs;
    return j;
}

// Writes path.obj and, when n > 3, path.json with full coordinates.
inline void write_mesh(const SurfaceMesh& m, const std::string& path_stem) {
    std::ofstream(path_stem + ".obj") << m.to_obj();
    if (m.ambient() > 3) std::ofstream(path_stem + ".json") << m.sidecar_json().dump(1) << "\n";
}

}  // namespace betascan
