#include "oracles.hpp"

#include "commands.hpp"
#include "convlat/density.hpp"
#include "convlat/lattice.hpp"

#include <doctest.h>
#include <json.hpp>

#include <fstream>
#include <iterator>

namespace fs = std::filesystem;
using namespace convlat;

namespace {

int run(std::vector<std::string> args)
{
    args.insert(args.begin(), "convlat");
    return cli::run(args);
}

nlohmann::json manifest(const fs::path &dir)
{
    std::ifstream in(dir / "manifest.json");
    return nlohmann::json::parse(in);
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<fs::path> files_in(const fs::path &dir)
{
    std::vector<fs::path> out;
    if (fs::exists(dir))
        for (const auto &e : fs::directory_iterator(dir)) out.push_back(e.path().filename());
    std::sort(out.begin(), out.end());
    return out;
}

// Regular tet with edge 1 standing on z = 0: 6 struts, z extent sqrt(2/3).
fs::path tiny_lattice(const fs::path &dir)
{
    LatticeGraph g;
    g.add_node(Vec3d(0, 0, 0));
    g.add_node(Vec3d(1, 0, 0));
    g.add_node(Vec3d(0.5, std::sqrt(3.) / 2, 0));
    g.add_node(Vec3d(0.5, std::sqrt(3.) / 6, std::sqrt(2. / 3.)));
    for (std::uint32_t a = 0; a < 4; ++a)
        for (std::uint32_t b = a + 1; b < 4; ++b) g.add_edge(a, b, 1.);
    save_lattice(g, dir / "tiny.lat");
    return dir / "tiny.lat";
}

fs::path uniform_density(const fs::path &dir, int n, double value)
{
    DensityGrid g;
    g.nx = g.ny = g.nz = n;
    g.values.assign(g.size(), value);
    save_density_grid(g, dir / "density.txt");
    return dir / "density.txt";
}

} // namespace

TEST_CASE("missing input leaves only the manifest")
{
    const auto dir = oracle::temp_dir("cli");
    const auto out = dir / "out";
    CHECK(run({"slice", "--lattice", (dir / "nope.lat").string(), "--out-dir", out.string()}) != 0);
    CHECK(files_in(out) == std::vector<fs::path>{"manifest.json"});
    const auto m = manifest(out);
    CHECK(m["status"] == "failed");
    CHECK(m.contains("error"));
}

TEST_CASE("slicing a tiny lattice into three layers, twice")
{
    const auto dir = oracle::temp_dir("cli");
    const auto lat = tiny_lattice(dir);
    // z range [-0.3, sqrt(2/3) + 0.3] = 1.4165 mm at 0.5 mm per layer.
    const std::vector<std::string> args = {"slice",           "--lattice",  lat.string(), "--support-radius", "0.3",
                                           "--strut-radius",  "0.08",       "--layer-thickness", "0.5",
                                           "--pixel-size",    "0.02"};
    auto a = args, b = args;
    a.insert(a.end(), {"--out-dir", (dir / "a").string()});
    b.insert(b.end(), {"--out-dir", (dir / "b").string(), "--threads", "2"});
    REQUIRE(run(a) == 0);
    REQUIRE(run(b) == 0);
    const auto layers = files_in(dir / "a" / "layers");
    CHECK(layers == std::vector<fs::path>{"layer_00000.pgm", "layer_00001.pgm", "layer_00002.pgm"});
    for (const auto &f : layers) CHECK(slurp(dir / "a" / "layers" / f) == slurp(dir / "b" / "layers" / f));
    CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));
    CHECK(slurp(dir / "a" / "layers.csv") == slurp(dir / "b" / "layers.csv"));
    const auto m = manifest(dir / "a");
    CHECK(m["status"] == "ok");
    CHECK(m["seed"] == 42);
    for (const char *f : {"layers/", "summary.csv", "layers.csv", "timing.csv"})
        CHECK(std::find(m["artifacts"].begin(), m["artifacts"].end(), f) != m["artifacts"].end());
    CHECK(m["results"]["layers"] == 3);
}

TEST_CASE("stats-only slicing writes no images")
{
    const auto dir = oracle::temp_dir("cli");
    const auto lat = tiny_lattice(dir);
    REQUIRE(run({"slice", "--lattice", lat.string(), "--support-radius", "0.3", "--strut-radius", "0.08",
                 "--layer-thickness", "0.5", "--pixel-size", "0.02", "--stats-only", "--out-dir", dir.string()}) == 0);
    CHECK(!fs::exists(dir / "layers"));
    CHECK(fs::exists(dir / "summary.csv"));
    CHECK(fs::exists(dir / "layers.csv"));
}

TEST_CASE("flags override the config file, which overrides defaults")
{
    const auto dir = oracle::temp_dir("cli");
    const auto lat = tiny_lattice(dir);
    std::ofstream(dir / "cfg.toml") << "[slice]\nlayer-thickness = 0.25\nsupport-radius = 0.3\nstrut-radius = 0.08\n"
                                       "pixel-size = 0.05\nstats-only = true\n";
    REQUIRE(run({"--config", (dir / "cfg.toml").string(), "slice", "--lattice", lat.string(), "--out-dir",
                 (dir / "c").string()}) == 0);
    REQUIRE(run({"--config", (dir / "cfg.toml").string(), "slice", "--lattice", lat.string(), "--layer-thickness",
                 "0.5", "--out-dir", (dir / "f").string()}) == 0);
    // 1.4165 mm of z range.
    CHECK(manifest(dir / "c")["results"]["layers"] == 6);
    CHECK(manifest(dir / "f")["results"]["layers"] == 3);
}

TEST_CASE("gen-tet and stats")
{
    const auto dir = oracle::temp_dir("cli");
    REQUIRE(run({"gen-tet", "--box", "0,0,0,1,1,1", "--out-dir", dir.string()}) == 0);
    const LatticeGraph g = load_lattice(dir / "lattice.lat");
    CHECK(g.node_count() == 8);
    CHECK(g.edge_count() == 19);
    REQUIRE(run({"stats", "--lattice", (dir / "lattice.lat").string(), "--node", (dir / "mesh.node").string(), "--ele",
                 (dir / "mesh.ele").string(), "--out-dir", (dir / "s").string()}) == 0);
    CHECK(fs::exists(dir / "s" / "stats.csv"));
    CHECK(fs::exists(dir / "s" / "angles.csv"));
    CHECK(fs::exists(dir / "s" / "quality.csv"));
    CHECK(run({"gen-tet", "--box", "0,0,0,1,1", "--out-dir", (dir / "bad").string()}) != 0);
}

TEST_CASE("k outside (1, 3] is rejected")
{
    const auto dir = oracle::temp_dir("cli");
    const auto dens = uniform_density(dir, 2, 0.2);
    for (const char *k : {"1", "0.5", "3.5"})
        CHECK(run({"pipeline", "--density", dens.string(), "--k", k, "--out-dir", (dir / "o").string()}) != 0);
    CHECK(run({"optimize-support", "--box", "0,0,0,1,1,1", "--k", "3.01", "--out-dir", (dir / "o").string()}) != 0);
}

TEST_CASE("pipeline on a uniform cube")
{
    const auto dir = oracle::temp_dir("cli");
    const auto dens = uniform_density(dir, 2, 0.2);
    const auto out = dir / "run";
    REQUIRE(run({"pipeline", "--density", dens.string(), "--cell-size", "1", "--r-min", "0.03", "--samples", "512",
                 "--layer-thickness", "0.5", "--pixel-size", "0.1", "--po-iterations", "3", "--out-dir",
                 out.string()}) == 0);
    const auto m = manifest(out);
    CHECK(m["status"] == "ok");
    CHECK(m["results"]["gamma_after"].get<double>() <= m["results"]["gamma_before"].get<double>());
    for (const char *f : {"mesh_raw.node", "mesh_optimized.node", "mesh.node", "support.csv", "density_report.csv",
                          "lattice.lat", "summary.csv"})
        CHECK(fs::exists(out / f));
    CHECK(!files_in(out / "layers").empty());
}

TEST_CASE("pipeline names the failing stage")
{
    const auto dir = oracle::temp_dir("cli");
    const auto dens = uniform_density(dir, 2, 0.2);
    // R below the initial radius cannot be calibrated.
    CHECK(run({"pipeline", "--density", dens.string(), "--cell-size", "1", "--r-min", "0.03", "--support-radius", "0.05",
               "--samples", "64", "--po-iterations", "1", "--out-dir", dir.string()}) != 0);
    const auto m = manifest(dir);
    CHECK(m["status"] == "failed");
    CHECK(m["failed_stage"] == "match-density");
}
