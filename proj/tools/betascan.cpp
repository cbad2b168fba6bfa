#include <CLI11.hpp>
#include <json.hpp>

#include <betascan/harness.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

using namespace betascan;
namespace fs = std::filesystem;

namespace {

struct Common {
    int d = 1;
    double p = 1.0;
    double rho = 0.5;
    double C0 = 2.0;
    double M = 8.0;
    double eps = 1e-2;
    double alpha = 0.1;
    double tau = 0.0;
    double kappa = 0.0;
    std::uint64_t seed = 1;
    int depth = -1;
    double budget = 300.0;
    std::string in;
    std::string out;
    std::string format = "json";
    bool verbose = false;

    GlobalParams params(int n) const {
        GlobalParams g;
        g.d = d;
        g.p = p;
        g.rho = rho;
        g.C0 = C0;
        g.M = M;
        g.eps = eps;
        g.alpha = alpha;
        g.tau = tau;
        g.kappa = kappa;
        g.seed = seed;
        g.max_depth = depth;
        g.stage_budget_s = budget;
        g.finalize();
        g.validate(n);
        return g;
    }
};

void add_common(CLI::App* app, Common& c, bool needs_input = true) {
    app->add_option("--d", c.d, "intrinsic dimension");
    app->add_option("--p", c.p, "beta exponent");
    app->add_option("--rho", c.rho, "net ratio");
    app->add_option("--C0", c.C0, "ball inflation");
    app->add_option("--M", c.M, "stopping-time inflation");
    app->add_option("--eps", c.eps, "flatness threshold");
    app->add_option("--alpha", c.alpha, "separation threshold");
    app->add_option("--tau", c.tau, "smoothing parameter (0: default)");
    app->add_option("--kappa", c.kappa, "packing constant (0: default)");
    app->add_option("--seed", c.seed, "random seed");
    app->add_option("--depth", c.depth, "maximum cube level (-1: resolution floor)");
    app->add_option("--budget", c.budget, "per-stage budget in seconds");
    auto* in = app->add_option("--in", c.in, "input cloud (.csv or .json)");
    if (needs_input) in->required();
    app->add_option("--out", c.out, "output directory (default: stdout)");
    app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "csv"}));
    app->add_flag("--verbose", c.verbose, "log stage timings to stderr");
}

void emit(const Common& c, const std::string& name, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return;
    }
    fs::create_directories(c.out);
    std::ofstream f(fs::path(c.out) / name);
    if (!f) throw InputError("cannot write " + (fs::path(c.out) / name).string());
    f << text;
    if (!text.empty() && text.back() != '\n') f << "\n";
}

std::string dump(const nlohmann::json& j) { return j.dump(1); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"betascan: multiscale flatness statistics of point clouds"};
    app.require_subcommand(1);
    Common c;

    auto* net = app.add_subcommand("net", "maximal r-separated net of the cloud");
    add_common(net, c);
    double net_r = 0.0;
    net->add_option("--radius", net_r, "separation (default: 4 h)");

    auto* cubes = app.add_subcommand("cubes", "dyadic cube hierarchy");
    add_common(cubes, c);

    auto* beta = app.add_subcommand("beta", "Jones sums of beta numbers");
    add_common(beta, c);
    std::string kind = "new";
    beta->add_option("--kind", kind, "inf, hat, check, new")->check(CLI::IsMember({"inf", "hat", "check", "new"}));

    auto* regions = app.add_subcommand("regions", "stopping-time regions");
    add_common(regions, c);
    std::string rule = "separation";
    regions->add_option("--rule", rule, "beta or separation")->check(CLI::IsMember({"beta", "separation"}));

    auto* surface = app.add_subcommand("surface", "containing set from region surfaces");
    add_common(surface, c);
    bool meshes = false;
    surface->add_flag("--meshes", meshes, "write one OBJ per non-singleton region surface into --out");

    auto* classify = app.add_subcommand("classify", "bilateral-weak-geometric-lemma and union-of-planes classifiers");
    add_common(classify, c);
    int m = 2, max_level = 3;
    classify->add_option("--m", m, "planes in the union");
    classify->add_option("--max-level", max_level, "deepest classified level");

    auto* tst = app.add_subcommand("tst-report", "full pipeline report");
    add_common(tst, c);
    std::vector<std::string> stages = pipeline_stages();
    tst->add_option("--stages", stages, "stages to run");

    auto* gen = app.add_subcommand("gen", "synthetic clouds");
    add_common(gen, c, false);
    GeneratorSpec gs;
    gen->add_option("--kind", gs.kind, "line, plane_patch, circle, sphere_cap, lipschitz_graph, koch, cantor4, noisy_plane, cluster_mix")->required();
    gen->add_option("--count", gs.count, "sample count");
    gen->add_option("--n", gs.n, "ambient dimension");
    gen->add_option("--lambda", gs.lambda, "Lipschitz constant");
    gen->add_option("--theta", gs.theta, "Koch angle");
    gen->add_option("--gens", gs.gens, "generations");
    gen->add_option("--a", gs.a, "noise amplitude");
    gen->add_option("--clusters", gs.clusters, "cluster count");
    gen->add_option("--cap", gs.cap, "sphere cap geodesic radius");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        std::ostream* log = c.verbose ? &std::cerr : nullptr;
        if (gen->parsed()) {
            gs.seed = c.seed;
            PointCloud E = generate(gs);
            if (c.format == "csv") emit(c, "cloud.csv", cloud_csv(E));
            else emit(c, "cloud.json", dump(cloud_json(E)));
            return 0;
        }
        PointCloud E = load_cloud(c.in);
        GlobalParams g = c.params(E.dim());
        bool truncated = false;
        if (net->parsed()) {
            double r = net_r > 0.0 ? net_r : 4.0 * E.resolution();
            auto ids = maximal_net(E, r);
            if (c.format == "csv") {
                std::ostringstream os;
                os << "index\n";
                for (int i : ids) os << i << "\n";
                emit(c, "net.csv", os.str());
            } else {
                emit(c, "net.json", dump({{"schema", "betascan/1"}, {"kind", "net"}, {"radius", r}, {"indices", ids}}));
            }
        } else if (cubes->parsed()) {
            CubeTreeOptions o;
            o.max_depth = g.max_depth;
            emit(c, "cubes.json", dump(build_cube_tree(E, g, o).to_json()));
        } else if (beta->parsed()) {
            CubeTreeOptions o;
            o.max_depth = g.max_depth;
            CubeTree T = build_cube_tree(E, g, o);
            auto jr = jones_sum(T, parse_beta_kind(kind), g, g.stage_budget_s);
            truncated = jr.truncated;
            if (c.format == "csv") emit(c, "beta.csv", jr.level_csv());
            else emit(c, "beta.json", dump(jr.to_json()));
        } else if (regions->parsed()) {
            CubeTreeOptions o;
            o.max_depth = g.max_depth;
            CubeTree T = build_cube_tree(E, g, o);
            RegionForest F;
            if (rule == "beta") {
                F = regions_beta(T, E, g);
            } else {
                CubePlanes planes(T, g);
                F = regions_sep(T, g, [&](int q) { return planes.beta(q); });
            }
            emit(c, "regions.json", dump(F.to_json()));
        } else if (surface->parsed()) {
            SurfaceOptions so;
            so.seed = g.seed;
            ContainingSet cs = build_F(E, g, so);
            cs.measure = surface_measure(cs);
            emit(c, "surface.json", dump(cs.to_json()));
            if (meshes && !c.out.empty())
                for (const auto& s : cs.surfaces)
                    if (!s.singleton) write_mesh(s.mesh, (fs::path(c.out) / ("region_" + std::to_string(s.region))).string());
        } else if (classify->parsed() || tst->parsed()) {
            PipelineOptions po;
            po.classify_m = m;
            po.classify_max_level = max_level;
            po.surface.seed = g.seed;
            po.log = log;
            auto st = classify->parsed() ? std::vector<std::string>{"cubes", "classify"} : stages;
            auto rep = run_pipeline(E, g, st, po);
            truncated = rep.truncated;
            emit(c, classify->parsed() ? "classify.json" : "report.json", rep.dump());
        }
        if (truncated) {
            std::cerr << "stage budget exceeded; report is truncated\n";
            return 3;
        }
        return 0;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    }
}
