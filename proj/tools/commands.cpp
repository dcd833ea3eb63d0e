#include "commands.hpp"

#include "convlat/contour.hpp"
#include "convlat/density.hpp"
#include "convlat/deviation.hpp"
#include "convlat/image_io.hpp"
#include "convlat/slicer.hpp"
#include "convlat/support.hpp"
#include "convlat/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace convlat::cli {

namespace {

// Mean edge length of the six-tet cube split relative to the cell size.
const double kMeanKuhnEdge = (3. + 3. * std::sqrt(2.) + std::sqrt(3.)) / 7.;

struct Common
{
    std::uint64_t seed = 42;
    unsigned      threads = 1;
    std::string   out_dir = ".";
};

// manifest.json in the output directory, written before any work and
// rewritten when the run ends.
class Manifest
{
public:
    Manifest(const CLI::App &sub, const Common &common, const std::vector<std::string> &argv) : m_dir(common.out_dir)
    {
        fs::create_directories(m_dir);
        m_json["tool"] = "convlat";
        m_json["version"] = kVersion;
        m_json["command"] = sub.get_name();
        m_json["arguments"] = std::vector<std::string>(argv.begin() + 1, argv.end());
        m_json["seed"] = common.seed;
        m_json["threads"] = common.threads;
        m_json["config"] = sub.config_to_str(true, false);
        m_json["artifacts"] = json::array();
        m_json["results"] = json::object();
        m_json["status"] = "running";
        save();
    }

    // Path of an output artifact, recorded in the manifest.
    fs::path artifact(const std::string &rel)
    {
        m_json["artifacts"].push_back(rel);
        const fs::path p = m_dir / rel;
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        return p;
    }
    const fs::path &dir() const { return m_dir; }
    json &results() { return m_json["results"]; }
    void set_stage(const std::string &stage) { m_stage = stage; }
    const std::string &stage() const { return m_stage; }

    void finish(const std::string &error)
    {
        m_json["status"] = error.empty() ? "ok" : "failed";
        if (!error.empty()) m_json["error"] = error;
        if (!m_stage.empty() && !error.empty()) m_json["failed_stage"] = m_stage;
        save();
    }

private:
    void save() const
    {
        std::ofstream out(m_dir / "manifest.json");
        out << m_json.dump(2) << '\n';
        if (!out) throw Error("cannot write manifest in " + m_dir.string());
    }

    fs::path m_dir;
    json m_json;
    std::string m_stage;
};

Vec3d vec3(const std::vector<double> &v, const char *what)
{
    if (v.size() != 3) throw Error(std::string(what) + " needs three components");
    return Vec3d(v[0], v[1], v[2]);
}

struct FieldOpts
{
    double R = 1.;
    double isovalue = 0.25;
    double strut_radius = 0.;
    CLI::Option *R_opt = nullptr, *iso_opt = nullptr, *radius_opt = nullptr;

    void add(CLI::App *app)
    {
        R_opt = app->add_option("--support-radius", R, "Kernel support radius R (mm)")->capture_default_str();
        iso_opt = app->add_option("--isovalue", isovalue, "Isovalue C")->capture_default_str();
        radius_opt = app->add_option("--strut-radius", strut_radius,
                                     "Calibrate C so that a weight-1 strut has this radius (mm)")
                         ->excludes(iso_opt);
    }

    FieldConfig resolve() const
    {
        FieldConfig cfg;
        cfg.support_radius = R;
        cfg.isovalue = isovalue;
        cfg.validate();
        if (radius_opt->count()) cfg.isovalue = calibrate_isovalue(strut_radius, 1., cfg);
        return cfg;
    }
};

struct PrintOpts
{
    double alpha_deg = 45.;
    std::vector<double> direction{0., 0., 1.};
    std::string g_mode = "exact";

    void add(CLI::App *app)
    {
        app->add_option("--alpha", alpha_deg, "Self-supporting angle (degrees)")->capture_default_str();
        app->add_option("--direction", direction, "Print direction x,y,z")
            ->expected(3)
            ->delimiter(',')
            ->capture_default_str();
        app->add_option("--g-mode", g_mode, "Overhang function: exact, printed, paper-poly, bivariate")
            ->capture_default_str();
    }

    PrintSetup setup() const
    {
        PrintSetup s;
        s.direction = vec3(direction, "--direction").normalized();
        s.alpha = alpha_deg * kPi / 180.;
        s.validate();
        return s;
    }
};

struct DomainOpts
{
    std::vector<double> box;
    std::string density;
    double cell_size = 1.;
    double jitter = 0.1;
    CLI::Option *cell_opt = nullptr;

    void add(CLI::App *app)
    {
        app->add_option("--box", box, "Domain box x0,y0,z0,x1,y1,z1 (mm)")->expected(6)->delimiter(',');
        app->add_option("--density", density, "Density grid; its positive voxels form the domain");
        cell_opt = app->add_option("--cell-size", cell_size, "Cube size of the tet grid (mm)")->capture_default_str();
        app->add_option("--jitter", jitter, "Interior node jitter, fraction of a cell")->capture_default_str();
    }

    bool given() const { return !box.empty() || !density.empty(); }

    TetMesh generate(double k, const Vec3d &direction, std::uint64_t seed, double cell) const
    {
        StructuredMeshOptions o;
        o.cell_size = cell;
        o.k = k;
        o.direction = direction;
        o.jitter = jitter;
        o.seed = seed;
        if (!density.empty()) return generate_structured_tets(load_density_grid(density), o);
        if (box.size() != 6) throw Error("need --box or --density");
        BoundingBox b;
        b.merge(Vec3d(box[0], box[1], box[2]));
        b.merge(Vec3d(box[3], box[4], box[5]));
        return generate_structured_tets(b, o);
    }
};

struct MaterialOpts
{
    double tau = 1.;
    double r_min = 0.03;
    double r = 0.;
    CLI::Option *r_opt = nullptr;

    void add(CLI::App *app)
    {
        app->add_option("--tau", tau, "Bulk material density")->capture_default_str();
        app->add_option("--r-min", r_min, "Smallest printable strut radius (mm)")->capture_default_str();
        r_opt = app->add_option("--r", r, "Initial strut radius (mm), default 2 r_min");
    }

    MaterialSpec spec() const
    {
        MaterialSpec m;
        m.tau = tau;
        m.r_min = r_min;
        m.r = r_opt->count() ? r : 2. * r_min;
        m.validate();
        return m;
    }
};

struct PositionOpts
{
    bool enabled = true;
    int  iterations = 100;

    void add(CLI::App *app)
    {
        app->add_flag("--po,!--no-po", enabled, "Run vertex position optimization");
        app->add_option("--po-iterations", iterations, "Position optimization sweeps")->capture_default_str();
    }
};

struct SliceOpts
{
    double layer = 0.1;
    double pixel = 0.05;
    std::string format = "pgm";
    double budget_mb = 256.;
    bool stats_only = false;
    bool contours = false;
    double simplify = 0.;
    double min_area = 0.;

    void add(CLI::App *app)
    {
        app->add_option("--layer-thickness", layer, "Layer thickness (mm)")->capture_default_str();
        app->add_option("--pixel-size", pixel, "Pixel size (mm)")->capture_default_str();
        app->add_option("--format", format, "Layer image format: pgm or pbm")
            ->check(CLI::IsMember({"pgm", "pbm"}))
            ->capture_default_str();
        app->add_option("--memory-budget", budget_mb, "Edge sort budget (MB)")->capture_default_str();
        app->add_flag("--stats-only", stats_only, "Write only the CSV reports, no images");
        app->add_flag("--contours", contours, "Write per-layer contour CSVs");
        app->add_option("--simplify", simplify, "Contour simplification tolerance (mm)")->capture_default_str();
        app->add_option("--min-area", min_area, "Drop contour loops smaller than this (mm^2)")->capture_default_str();
    }
};

auto k_range = CLI::Validator(
    [](std::string &s) -> std::string {
        double k = 0.;
        try {
            k = std::stod(s);
        } catch (const std::exception &) {
            return "not a number: " + s;
        }
        if (!(k > 1. && k <= 3.)) return "k must lie in (1, 3], got " + s;
        return {};
    },
    "in (1, 3]");

void write_support_csv(const fs::path &path, const std::vector<std::pair<std::string, SupportReport>> &stages)
{
    std::ofstream out(path);
    out.precision(10);
    out << "stage,gamma,psi,risky_length_percent\n";
    for (const auto &[name, r] : stages) out << name << ',' << r.gamma << ',' << r.psi << ',' << r.risky_length_percent << '\n';
    if (!out) throw Error("failed writing " + path.string());
}

void write_mesh(Manifest &m, const TetMesh &mesh, const std::string &stem)
{
    export_tetgen(mesh, m.artifact(stem + ".node"), m.artifact(stem + ".ele"));
}

SliceSummary run_slice(Manifest &m, const fs::path &lattice, const FieldConfig &cfg, const SliceOpts &so, unsigned threads)
{
    SliceJob job = make_slice_job(lattice_file_bounds(lattice), cfg, so.layer, so.pixel);
    job.threads = threads;
    StreamOptions stream;
    stream.scratch_dir = m.dir();
    stream.memory_budget = std::size_t(so.budget_mb * double(1 << 20));
    const ImageFormat fmt = so.format == "pbm" ? ImageFormat::Pbm : ImageFormat::Pgm;
    const char *ext = so.format == "pbm" ? "pbm" : "pgm";
    if (!so.stats_only) fs::create_directories(m.dir() / "layers");
    if (so.contours) fs::create_directories(m.dir() / "contours");
    SliceSummary sum = slice_file(lattice, job, stream, [&](const SliceImage &img, const LayerStats &) {
        if (!so.stats_only) write_image(img, m.dir() / "layers" / layer_file_name(img.layer, ext), fmt);
        if (so.contours) {
            ContourSet set = extract_contours(img, job);
            if (so.simplify > 0. || so.min_area > 0.) set = simplify_contours(set, so.simplify, so.min_area);
            write_contours_csv(set, m.dir() / "contours" / layer_file_name(img.layer, "csv"));
        }
    });
    if (!so.stats_only) m.artifact("layers/");
    if (so.contours) m.artifact("contours/");
    write_summary_csv(sum, m.artifact("summary.csv"));
    write_layers_csv(sum, m.artifact("layers.csv"));
    write_timing_csv(sum, m.artifact("timing.csv"));
    m.results()["layers"] = sum.layers;
    m.results()["struts"] = sum.struts;
    m.results()["max_active"] = sum.max_active;
    m.results()["peak_resident"] = sum.peak_resident;
    m.results()["resolution"] = std::to_string(sum.width) + "x" + std::to_string(sum.height);
    return sum;
}

// Cell size from the edge-length estimate at the smallest positive target.
double estimated_cell(const DensityGrid &grid, const MaterialSpec &mat, Manifest &m)
{
    double rho = 1.;
    for (double v : grid.values)
        if (v > 0.) rho = std::min(rho, v);
    const EdgeLengthEstimate e = target_edge_length(rho, mat.tau, mat.r, grid.spacing);
    m.results()["estimated_edge_length"] = e.length;
    return e.length / kMeanKuhnEdge;
}

FieldConfig match_field(const FieldOpts &fo, const MaterialSpec &mat)
{
    FieldConfig cfg;
    cfg.support_radius = fo.R_opt->count() ? fo.R : 5. * mat.r_min;
    cfg.validate();
    cfg.isovalue = calibrate_isovalue(mat.r, 1., cfg);
    return cfg;
}

void report_match(Manifest &m, const MatchResult &res)
{
    const MatchReport &r = res.report;
    res.report.write_csv(m.artifact("density_report.csv"));
    m.results()["leaf_tets"] = r.tets.size();
    m.results()["subdivisions"] = r.subdivisions;
    m.results()["unreachable_tets"] = r.unreachable_tets;
    m.results()["floored_edges"] = r.floored_edges;
    m.results()["mean_abs_error"] = r.mean_abs_error;
    m.results()["max_abs_error"] = r.max_abs_error;
}

} // namespace

int run(const std::vector<std::string> &argv)
{
    CLI::App app{"Convolution-surface lattice slicing and design"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "TOML/INI file with option values; flags override it");
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--seed", common.seed, "Seed for every randomized step")->capture_default_str();
    app.add_option("--threads", common.threads, "Worker threads for rasterization and sampling")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--out-dir", common.out_dir, "Directory for all outputs")->capture_default_str();

    std::function<void(Manifest &)> action;

    // gen-tet
    DomainOpts gen_dom;
    double gen_k = 1.;
    double gen_weight = 1.;
    PrintOpts gen_print;
    auto *gen = app.add_subcommand("gen-tet", "Fill a box or density-grid domain with a structured tet mesh");
    gen_dom.add(gen);
    gen->add_option("--k", gen_k, "Compression along the print direction (1 = none)")
        ->check(CLI::Range(1., 3.))
        ->capture_default_str();
    gen->add_option("--weight", gen_weight, "Strut weight of the emitted lattice")->capture_default_str();
    gen_print.add(gen);
    gen->callback([&] {
        action = [&](Manifest &m) {
            const PrintSetup ps = gen_print.setup();
            TetMesh mesh = gen_dom.generate(gen_k, ps.direction, common.seed, gen_dom.cell_size);
            write_mesh(m, mesh, "mesh");
            const LatticeGraph g = lattice_from_tetmesh(mesh, gen_weight);
            save_lattice(g, m.artifact("lattice.lat"));
            m.results()["nodes"] = mesh.nodes.size();
            m.results()["tets"] = mesh.tets.size();
            m.results()["edges"] = g.edge_count();
        };
    });

    // import-tetgen
    std::string imp_node, imp_ele;
    double imp_weight = 1.;
    auto *imp = app.add_subcommand("import-tetgen", "Convert a TetGen .node/.ele mesh to a lattice");
    imp->add_option("--node", imp_node, "TetGen .node file")->required();
    imp->add_option("--ele", imp_ele, "TetGen .ele file")->required();
    imp->add_option("--weight", imp_weight, "Strut weight")->capture_default_str();
    imp->callback([&] {
        action = [&](Manifest &m) {
            const TetMesh mesh = import_tetgen(imp_node, imp_ele);
            const LatticeGraph g = lattice_from_tetmesh(mesh, imp_weight);
            save_lattice(g, m.artifact("lattice.lat"));
            m.results()["nodes"] = mesh.nodes.size();
            m.results()["tets"] = mesh.tets.size();
            m.results()["edges"] = g.edge_count();
        };
    });

    // optimize-support
    DomainOpts so_dom;
    PrintOpts so_print;
    PositionOpts so_po;
    std::string so_node, so_ele;
    double so_k = 1.6;
    auto *sup = app.add_subcommand("optimize-support",
                                   "Scaling optimization (regenerate compressed) and vertex position optimization");
    so_dom.add(sup);
    so_print.add(sup);
    so_po.add(sup);
    sup->add_option("--node", so_node, "Optimize an existing TetGen mesh instead (position optimization only)");
    sup->add_option("--ele", so_ele, "TetGen .ele file for --node");
    sup->add_option("--k", so_k, "Compression factor")->check(k_range)->capture_default_str();
    sup->callback([&] {
        action = [&](Manifest &m) {
            const PrintSetup ps = so_print.setup();
            const GMode mode = parse_g_mode(so_print.g_mode);
            std::vector<std::pair<std::string, SupportReport>> stages;
            TetMesh mesh;
            if (!so_node.empty()) {
                mesh = import_tetgen(so_node, so_ele);
                stages.emplace_back("raw", support_report(lattice_from_tetmesh(mesh, 1.), ps, mode));
            } else {
                const TetMesh raw = so_dom.generate(1., ps.direction, common.seed, so_dom.cell_size);
                stages.emplace_back("raw", support_report(lattice_from_tetmesh(raw, 1.), ps, mode));
                mesh = so_dom.generate(so_k, ps.direction, common.seed, so_dom.cell_size);
                stages.emplace_back("so", support_report(lattice_from_tetmesh(mesh, 1.), ps, mode));
            }
            if (so_po.enabled) {
                PositionOptions po;
                po.max_iters = so_po.iterations;
                po.seed = common.seed;
                po.mode = mode;
                const PositionReport rep = optimize_vertex_positions(mesh, ps, po);
                stages.emplace_back(so_node.empty() ? "so+po" : "po", support_report(lattice_from_tetmesh(mesh, 1.), ps, mode));
                m.results()["po_moves"] = rep.moves.size();
                m.results()["po_sweeps"] = rep.sweeps;
                m.results()["inversions"] = rep.inversions;
            }
            write_support_csv(m.artifact("support.csv"), stages);
            write_mesh(m, mesh, "mesh");
            save_lattice(lattice_from_tetmesh(mesh, 1.), m.artifact("lattice.lat"));
            m.results()["gamma_before"] = stages.front().second.gamma;
            m.results()["gamma_after"] = stages.back().second.gamma;
            m.results()["psi_before"] = stages.front().second.psi;
            m.results()["psi_after"] = stages.back().second.psi;
        };
    });

    // match-density
    DomainOpts md_dom;
    MaterialOpts md_mat;
    FieldOpts md_field;
    std::string md_node, md_ele;
    std::size_t md_samples = 4096;
    int md_depth = 4;
    auto *md = app.add_subcommand("match-density", "Subdivide and tune strut weights to a density grid");
    md_dom.add(md);
    md_mat.add(md);
    md_field.add(md);
    md->add_option("--node", md_node, "Start from a TetGen mesh instead of the structured one");
    md->add_option("--ele", md_ele, "TetGen .ele file for --node");
    md->add_option("--samples", md_samples, "Monte Carlo samples per tet or voxel")->capture_default_str();
    md->add_option("--max-depth", md_depth, "Subdivision depth cap")->capture_default_str();
    md->callback([&] {
        action = [&](Manifest &m) {
            if (md_dom.density.empty()) throw Error("match-density needs --density");
            const MaterialSpec mat = md_mat.spec();
            const DensityGrid grid = load_density_grid(md_dom.density);
            TetMesh mesh;
            if (!md_node.empty()) {
                mesh = import_tetgen(md_node, md_ele);
            } else {
                const double cell = md_dom.cell_opt->count() ? md_dom.cell_size : estimated_cell(grid, mat, m);
                mesh = md_dom.generate(1., Vec3d::UnitZ(), common.seed, cell);
            }
            const FieldConfig cfg = match_field(md_field, mat);
            MatchOptions mo;
            mo.sampling.samples = md_samples;
            mo.sampling.seed = common.seed;
            mo.sampling.threads = common.threads;
            mo.max_depth = md_depth;
            const MatchResult res = match_density(mesh, grid, mat, cfg, mo);
            save_lattice(res.graph, m.artifact("lattice.lat"));
            write_mesh(m, mesh, "mesh");
            report_match(m, res);
            m.results()["support_radius"] = cfg.support_radius;
            m.results()["isovalue"] = cfg.isovalue;
        };
    });

    // slice
    std::string sl_lattice;
    FieldOpts sl_field;
    SliceOpts sl_opts;
    auto *sl = app.add_subcommand("slice", "Stream a lattice file into layer images");
    sl->add_option("--lattice", sl_lattice, "Lattice file (text or binary)")->required();
    sl_field.add(sl);
    sl_opts.add(sl);
    sl->callback([&] {
        action = [&](Manifest &m) { run_slice(m, sl_lattice, sl_field.resolve(), sl_opts, common.threads); };
    });

    // stats
    std::string st_lattice, st_node, st_ele;
    PrintOpts st_print;
    auto *st = app.add_subcommand("stats", "Edge statistics and support metrics of a lattice");
    st->add_option("--lattice", st_lattice, "Lattice file")->required();
    auto *st_node_opt = st->add_option("--node", st_node, "TetGen .node file for the tet aspect-ratio histogram");
    st->add_option("--ele", st_ele, "TetGen .ele file for --node")->needs(st_node_opt);
    st_node_opt->needs(st->get_option("--ele"));
    st_print.add(st);
    st->callback([&] {
        action = [&](Manifest &m) {
            const LatticeGraph g = load_lattice(st_lattice);
            if (g.empty()) throw Error("lattice has no edges");
            const PrintSetup ps = st_print.setup();
            const SupportReport rep = support_report(g, ps, parse_g_mode(st_print.g_mode));
            double total = 0., lo = INFINITY, hi = 0.;
            for (std::size_t i = 0; i < g.edge_count(); ++i) {
                const double L = g.edge_length(i);
                total += L;
                lo = std::min(lo, L);
                hi = std::max(hi, L);
            }
            const BoundingBox b = g.bounding_box();
            std::ofstream out(m.artifact("stats.csv"));
            out.precision(10);
            out << "key,value\n"
                << "nodes," << g.node_count() << "\nedges," << g.edge_count() << "\ntotal_length," << total
                << "\nmin_length," << lo << "\nmax_length," << hi << "\nmean_length," << total / double(g.edge_count())
                << "\nbbox_min," << b.min.x() << ' ' << b.min.y() << ' ' << b.min.z() << "\nbbox_max," << b.max.x()
                << ' ' << b.max.y() << ' ' << b.max.z() << "\ngamma," << rep.gamma << "\npsi," << rep.psi << '\n';
            std::ofstream ang(m.artifact("angles.csv"));
            ang.precision(10);
            ang << "angle_low_deg,angle_high_deg,length_percent\n";
            for (std::size_t i = 0; i < rep.angle_percent.size(); ++i)
                ang << 5 * i << ',' << 5 * (i + 1) << ',' << rep.angle_percent[i] << '\n';
            if (!out || !ang) throw Error("failed writing statistics");
            if (!st_node.empty()) {
                const TetQuality q = tet_quality(import_tetgen(st_node, st_ele));
                std::ofstream qo(m.artifact("quality.csv"));
                qo.precision(10);
                qo << "ratio_upper,percent\n";
                for (std::size_t i = 0; i < q.percent.size(); ++i) qo << q.bin_upper[i] << ',' << q.percent[i] << '\n';
                if (!qo) throw Error("failed writing quality.csv");
                m.results()["aspect_above_5_fraction"] = q.fraction_above_5;
                m.results()["aspect_worst"] = q.worst;
            }
            m.results()["gamma"] = rep.gamma;
            m.results()["psi"] = rep.psi;
        };
    });

    // deviation
    std::string dv_lattice;
    FieldOpts dv_field;
    double dv_ideal = 0., dv_region = 0.;
    std::vector<double> dv_center;
    std::size_t dv_samples = 2000, dv_bins = 20;
    double dv_bin_width = 0.01, dv_sigma = 0.;
    std::string dv_kernel = "compact";
    auto *dv = app.add_subcommand("deviation", "Histogram of surface distance to cylinders and spheres");
    dv->add_option("--lattice", dv_lattice, "Lattice file")->required();
    dv_field.add(dv);
    auto *dv_ideal_opt = dv->add_option("--ideal-radius", dv_ideal, "Radius of the reference cylinders (mm)");
    auto *dv_region_opt = dv->add_option("--region-radius", dv_region, "Sampling sphere radius (mm)");
    dv->add_option("--center", dv_center, "Sampling sphere center x,y,z")->expected(3)->delimiter(',');
    dv->add_option("--samples", dv_samples, "Surface samples")->capture_default_str();
    dv->add_option("--bin-width", dv_bin_width, "Histogram bin width (mm)")->capture_default_str();
    dv->add_option("--bins", dv_bins, "Histogram bin count")->capture_default_str();
    dv->add_option("--kernel", dv_kernel, "compact, gaussian or distance")
        ->check(CLI::IsMember({"compact", "gaussian", "distance"}))
        ->capture_default_str();
    auto *dv_sigma_opt = dv->add_option("--sigma", dv_sigma, "Gaussian width (mm), default R/sqrt(2)");
    dv->callback([&] {
        action = [&](Manifest &m) {
            const LatticeGraph g = load_lattice(dv_lattice);
            if (g.empty()) throw Error("lattice has no edges");
            FieldConfig cfg = dv_field.resolve();
            if (dv_kernel != "compact") {
                // Same curvature at the center as the quartic: 1 - 2 d^2 / R^2.
                cfg.sigma = dv_sigma_opt->count() ? dv_sigma : cfg.support_radius / std::sqrt(2.);
                cfg.kernel = dv_kernel == "gaussian" ? KernelKind::Gaussian : KernelKind::DistanceField;
                if (dv_field.radius_opt->count() && cfg.kernel == KernelKind::Gaussian) cfg.isovalue = calibrate_isovalue(dv_field.strut_radius, 1., cfg);
                cfg.validate();
            }
            const double ideal_r = dv_ideal_opt->count()                        ? dv_ideal
                                   : cfg.kernel == KernelKind::DistanceField ? g.edge(0).weight
                                                                             : strut_radius(g.edge(0).weight, cfg);
            DeviationRequest req;
            const BoundingBox b = g.bounding_box();
            req.center = dv_center.empty() ? b.center() : vec3(dv_center, "--center");
            req.radius = dv_region_opt->count() ? dv_region : 0.25 * b.diagonal();
            req.sample_count = dv_samples;
            req.bin_width = dv_bin_width;
            req.bin_count = dv_bins;
            req.seed = common.seed;
            const Histogram h = surface_deviation_histogram(g, cfg, ideal_from_graph(g, ideal_r), req);
            h.write_csv(m.artifact("deviation.csv"));
            m.results()["ideal_radius"] = ideal_r;
            m.results()["max_deviation"] = h.max_value;
        };
    });

    // sort
    std::string so_lattice;
    double so_budget = 256.;
    auto *srt = app.add_subcommand("sort", "Sort a lattice file's edges by lower z out of core");
    srt->add_option("--lattice", so_lattice, "Lattice file")->required();
    srt->add_option("--memory-budget", so_budget, "Buffer budget (MB)")->capture_default_str();
    srt->callback([&] {
        action = [&](Manifest &m) {
            SortStats stats;
            const fs::path out = m.artifact("sorted_edges.bin");
            SortedEdgeFile f = sort_edges_external(so_lattice, m.dir(), std::size_t(so_budget * double(1 << 20)), &stats, out);
            std::ofstream csv(m.artifact("sort.csv"));
            csv << "edges,runs,merge_passes,run_capacity,node_bytes,peak_bytes\n"
                << stats.edges << ',' << stats.runs << ',' << stats.merge_passes << ',' << stats.run_capacity << ','
                << stats.node_bytes << ',' << stats.peak_bytes << '\n';
            if (!csv) throw Error("failed writing sort.csv");
            m.results()["edges"] = stats.edges;
            m.results()["runs"] = stats.runs;
        };
    });

    // pipeline
    DomainOpts pl_dom;
    MaterialOpts pl_mat;
    FieldOpts pl_field;
    PrintOpts pl_print;
    PositionOpts pl_po;
    SliceOpts pl_slice;
    double pl_k = 1.6;
    std::size_t pl_samples = 4096;
    int pl_depth = 4;
    auto *pl = app.add_subcommand("pipeline", "Generate, optimize for self-support, match density, slice");
    pl_dom.add(pl);
    pl_mat.add(pl);
    pl_field.add(pl);
    pl_print.add(pl);
    pl_po.add(pl);
    pl_slice.add(pl);
    pl->add_option("--k", pl_k, "Compression factor")->check(k_range)->capture_default_str();
    pl->add_option("--samples", pl_samples, "Monte Carlo samples per tet or voxel")->capture_default_str();
    pl->add_option("--max-depth", pl_depth, "Subdivision depth cap")->capture_default_str();
    pl->callback([&] {
        action = [&](Manifest &m) {
            m.set_stage("setup");
            if (pl_dom.density.empty()) throw Error("pipeline needs --density");
            const MaterialSpec mat = pl_mat.spec();
            const DensityGrid grid = load_density_grid(pl_dom.density);
            const PrintSetup ps = pl_print.setup();
            const GMode mode = parse_g_mode(pl_print.g_mode);
            const double cell = pl_dom.cell_opt->count() ? pl_dom.cell_size : estimated_cell(grid, mat, m);
            m.results()["cell_size"] = cell;

            m.set_stage("generate");
            const TetMesh raw = pl_dom.generate(1., ps.direction, common.seed, cell);
            TetMesh mesh = pl_dom.generate(pl_k, ps.direction, common.seed, cell);
            write_mesh(m, raw, "mesh_raw");
            std::vector<std::pair<std::string, SupportReport>> stages;
            stages.emplace_back("raw", support_report(lattice_from_tetmesh(raw, 1.), ps, mode));
            stages.emplace_back("so", support_report(lattice_from_tetmesh(mesh, 1.), ps, mode));

            m.set_stage("optimize-support");
            if (pl_po.enabled) {
                PositionOptions po;
                po.max_iters = pl_po.iterations;
                po.seed = common.seed;
                po.mode = mode;
                const PositionReport rep = optimize_vertex_positions(mesh, ps, po);
                stages.emplace_back("so+po", support_report(lattice_from_tetmesh(mesh, 1.), ps, mode));
                m.results()["po_moves"] = rep.moves.size();
                m.results()["inversions"] = rep.inversions;
            }
            m.results()["gamma_before"] = stages.front().second.gamma;
            m.results()["gamma_after"] = stages.back().second.gamma;
            m.results()["psi_before"] = stages.front().second.psi;
            m.results()["psi_after"] = stages.back().second.psi;
            write_mesh(m, mesh, "mesh_optimized");

            m.set_stage("match-density");
            const FieldConfig cfg = match_field(pl_field, mat);
            MatchOptions mo;
            mo.sampling.samples = pl_samples;
            mo.sampling.seed = common.seed;
            mo.sampling.threads = common.threads;
            mo.max_depth = pl_depth;
            const MatchResult res = match_density(mesh, grid, mat, cfg, mo);
            stages.emplace_back("matched", support_report(res.graph, ps, mode));
            write_support_csv(m.artifact("support.csv"), stages);
            report_match(m, res);
            write_mesh(m, mesh, "mesh");
            const fs::path lattice = m.artifact("lattice.lat");
            save_lattice(res.graph, lattice);
            m.results()["support_radius"] = cfg.support_radius;
            m.results()["isovalue"] = cfg.isovalue;

            m.set_stage("slice");
            run_slice(m, lattice, cfg, pl_slice, common.threads);
            m.set_stage("");
        };
    });

    std::vector<const char *> raw_args;
    for (const std::string &a : argv) raw_args.push_back(a.c_str());
    try {
        app.parse(int(raw_args.size()), raw_args.data());
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    const CLI::App *sub = app.get_subcommands().front();
    std::unique_ptr<Manifest> manifest;
    try {
        manifest = std::make_unique<Manifest>(*sub, common, argv);
        action(*manifest);
        manifest->finish({});
    } catch (const std::exception &e) {
        std::string msg = e.what();
        if (manifest && !manifest->stage().empty()) msg = "stage " + manifest->stage() + " failed: " + msg;
        std::cerr << "convlat " << sub->get_name() << ": " << msg << '\n';
        if (manifest) {
            try {
                manifest->finish(msg);
            } catch (const std::exception &) {
            }
        }
        return 1;
    }
    return 0;
}

} // namespace convlat::cli
