#include "nprt/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nprt/partition.hpp"
#include "nprt/shader_codegen.hpp"

namespace nprt {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct TrainFlags {
    int width = 64;
    int depth = 4;
    int epochs = 200;
    std::size_t batch = 8192;
    double lr = 1e-3;
    double val_fraction = 0.05;
    std::uint64_t seed = 1;
    int freq_pos = 6;
    int freq_norm = 4;
    int log_every = 10;
};

void add_train_flags(CLI::App* app, TrainFlags& f)
{
    app->add_option("--width", f.width, "hidden width k")->capture_default_str();
    app->add_option("--depth", f.depth, "layer count l")->capture_default_str();
    app->add_option("--epochs", f.epochs)->capture_default_str();
    app->add_option("--batch", f.batch)->capture_default_str();
    app->add_option("--lr", f.lr)->capture_default_str();
    app->add_option("--val-fraction", f.val_fraction)->capture_default_str();
    app->add_option("--seed", f.seed, "split, shuffle and init seed")->capture_default_str();
    app->add_option("--freq-pos", f.freq_pos, "position encoding frequencies")->capture_default_str();
    app->add_option("--freq-norm", f.freq_norm, "normal encoding frequencies")->capture_default_str();
    app->add_option("--log-every", f.log_every, "epochs between progress lines (0: quiet)")->capture_default_str();
}

MlpConfig mlp_config(const TrainFlags& f, int order)
{
    MlpConfig c;
    c.width = f.width;
    c.depth = f.depth;
    c.order = order;
    return c;
}

TrainConfig train_config(const TrainFlags& f)
{
    TrainConfig c;
    c.epochs = f.epochs;
    c.batch = f.batch;
    c.lr = f.lr;
    c.val_fraction = f.val_fraction;
    c.seed = f.seed;
    return c;
}

PositionalEncodingConfig pe_config(const TrainFlags& f)
{
    if (f.freq_pos < 0 || f.freq_norm < 0 || f.freq_pos > 16 || f.freq_norm > 16)
        throw InputError("encoding frequencies must be in [0, 16]");
    PositionalEncodingConfig pe;
    pe.freq_pos = f.freq_pos;
    pe.freq_norm = f.freq_norm;
    return pe;
}

std::string fmt_l1(double v) { return std::isnan(v) ? std::string("-") : std::to_string(v); }

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text;
    if (!out) throw DataError("write failed: '" + path.string() + "'");
}

// --- scene config -------------------------------------------------------------

struct SceneConfig {
    fs::path surface;
    Camera camera;
    Material material;
    std::optional<fs::path> envmap;
    std::array<double, 3> constant{1.0, 1.0, 1.0};
    std::optional<fs::path> model;
    std::optional<fs::path> clustered;
    std::size_t ref_rays = kDefaultBakeRays;
    std::uint64_t ref_seed = 1;
    std::optional<fs::path> tau_cache;
    std::size_t tau_samples = QuadratureSpec{}.count;
    std::uint64_t tau_seed = 1;
};

Vec3 vec3_of(const json& j, const std::string& name)
{
    if (!j.is_array() || j.size() != 3) throw FormatError("scene config: '" + name + "' must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::array<double, 3> rgb_of(const json& j, const std::string& name)
{
    const Vec3 v = vec3_of(j, name);
    return {v.x, v.y, v.z};
}

SceneConfig load_scene_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scene config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError("scene config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    const fs::path base = path.parent_path();
    auto resolve = [&](const json& v) {
        const fs::path p = v.get<std::string>();
        return p.is_absolute() ? p : base / p;
    };
    SceneConfig s;
    try {
        if (!j.contains("surface")) throw FormatError("scene config '" + path.string() + "' has no 'surface'");
        s.surface = resolve(j.at("surface"));
        if (j.contains("camera")) {
            const json& c = j["camera"];
            if (c.contains("eye")) s.camera.eye = vec3_of(c["eye"], "camera.eye");
            if (c.contains("look_at")) s.camera.look_at = vec3_of(c["look_at"], "camera.look_at");
            if (c.contains("up")) s.camera.up = vec3_of(c["up"], "camera.up");
            s.camera.fov_deg = c.value("fov", s.camera.fov_deg);
            s.camera.width = c.value("width", s.camera.width);
            s.camera.height = c.value("height", s.camera.height);
        }
        if (j.contains("material")) {
            const json& m = j["material"];
            const std::string type = m.value("type", std::string("diffuse"));
            const auto albedo = m.contains("albedo") ? rgb_of(m["albedo"], "material.albedo") : std::array<double, 3>{1, 1, 1};
            if (type == "diffuse") s.material = Material::diffuse(albedo);
            else if (type == "glossy") s.material = Material::glossy(albedo, m.value("exponent", 32.0));
            else throw FormatError("scene config: unknown material type '" + type + "'");
        }
        if (j.contains("light")) {
            const json& l = j["light"];
            if (l.contains("envmap")) s.envmap = resolve(l["envmap"]);
            else if (l.contains("constant")) s.constant = rgb_of(l["constant"], "light.constant");
            else throw FormatError("scene config: light needs 'envmap' or 'constant'");
        }
        if (j.contains("model")) s.model = resolve(j["model"]);
        if (j.contains("clustered")) s.clustered = resolve(j["clustered"]);
        if (j.contains("reference")) {
            s.ref_rays = j["reference"].value("rays", s.ref_rays);
            s.ref_seed = j["reference"].value("seed", s.ref_seed);
        }
        if (j.contains("tau")) {
            const json& t = j["tau"];
            if (t.contains("cache")) s.tau_cache = resolve(t["cache"]);
            s.tau_samples = t.value("samples", s.tau_samples);
            s.tau_seed = t.value("seed", s.tau_seed);
        }
    } catch (const json::exception& e) {
        throw FormatError("scene config '" + path.string() + "': " + e.what());
    }
    return s;
}

// --- subcommands ----------------------------------------------------------------

struct BakeFlags {
    std::string scene, out;
    std::size_t count = 100000;
    std::size_t rays = kDefaultBakeRays;
    int order = kDefaultShOrder;
    int grid_res = 128;
    std::uint64_t seed = 1;
};

int run_bake(const BakeFlags& f, std::ostream& out, std::ostream& err)
{
    if (f.count == 0) throw InputError("--count must be positive");
    if (f.rays < kMinBakeRays) throw InputError("--rays must be at least " + std::to_string(kMinBakeRays));
    if (f.order < 1 || f.order > kMaxShOrder) throw InputError("--order must be in [1, " + std::to_string(kMaxShOrder) + "]");
    const auto t0 = std::chrono::steady_clock::now();
    const Surface surface = Surface::load(f.scene);
    BakeConfig cfg;
    cfg.n_rays = f.rays;
    cfg.order = f.order;
    cfg.seed = f.seed;
    cfg.grid_res = f.grid_res;
    BakeReport report;
    TransferDataset ds = bake_dataset(surface, f.count, cfg, &report);
    ds.scene_id = fs::path(f.scene).filename().string();
    save_dataset(ds, f.out);
    if (report.warning())
        err << "warning: " << report.discarded << " of " << report.requested << " SDF samples could not be projected\n";
    out << "baked " << ds.records.size() << " points (" << f.rays << " rays, order " << f.order << ") in " << seconds_since(t0)
        << " s -> " << f.out << "\n";
    return 0;
}

struct TrainCmdFlags {
    std::string dataset, out;
    TrainFlags t;
};

int run_train(const TrainCmdFlags& f, std::ostream& out, std::ostream& err)
{
    const TransferDataset ds = load_dataset(f.dataset);
    const auto t0 = std::chrono::steady_clock::now();
    const int every = f.t.log_every;
    const TrainResult r = train(ds, mlp_config(f.t, ds.order), train_config(f.t), pe_config(f.t), [&](const EpochStats& s) {
        if (every > 0 && ((s.epoch + 1) % every == 0 || s.epoch + 1 == f.t.epochs))
            err << "epoch " << s.epoch + 1 << " train_l1 " << s.train_l1 << " val_l1 " << fmt_l1(s.val_l1) << "\n";
    });
    save_model(r.model, f.out);
    const double final_val = r.report.epochs.empty() ? NAN : r.report.epochs.back().val_l1;
    out << "trained on " << r.report.train_count << " points (" << r.report.val_count << " held out), "
        << r.model.parameter_count() << " parameters, val_l1 " << fmt_l1(final_val) << ", " << seconds_since(t0) << " s -> "
        << f.out << "\n";
    return 0;
}

struct PartitionFlags {
    std::string dataset, out, grid = "2x2x2";
    double delta = 0.1;
    double theta = 0.0;
    int min_clusters = 1;
    TrainFlags t;
};

int run_partition(const PartitionFlags& f, std::ostream& out, std::ostream& err)
{
    const TransferDataset ds = load_dataset(f.dataset);
    PartitionConfig cfg;
    cfg.dims = parse_grid_dims(f.grid);
    cfg.delta = f.delta;
    cfg.theta = f.theta;
    cfg.min_clusters = f.min_clusters;
    const int every = f.t.log_every;
    const ClusteredModel cm =
        train_clustered(ds, cfg, mlp_config(f.t, ds.order), train_config(f.t), pe_config(f.t), [&](int k, const EpochStats& s) {
            if (every > 0 && ((s.epoch + 1) % every == 0 || s.epoch + 1 == f.t.epochs))
                err << "cluster " << k << " epoch " << s.epoch + 1 << " train_l1 " << s.train_l1 << " val_l1 " << fmt_l1(s.val_l1) << "\n";
        });
    save_clustered(cm, f.out);
    out << cm.grid.cell_count() << " cells -> " << cm.models.size() << " clusters -> " << f.out << "\n";
    return 0;
}

struct ShaderFlags {
    std::string model, out;
    int glsl_version = 330;
    bool no_entry = false;
};

int run_export_shader(const ShaderFlags& f, std::ostream& out)
{
    const MlpModel m = load_model(f.model);
    ShaderOptions opts;
    opts.glsl_version = f.glsl_version;
    opts.shading_entry = !f.no_entry;
    write_text(f.out, emit_shader(m, opts));
    out << "wrote " << f.out << "\n";
    return 0;
}

struct TauFlags {
    std::string out, quadrature = "stratified";
    int order = kDefaultShOrder;
    std::size_t samples = QuadratureSpec{}.count;
    std::uint64_t seed = 1;
};

QuadratureSpec quadrature_spec(const std::string& kind, std::size_t samples, std::uint64_t seed)
{
    QuadratureSpec q;
    if (kind == "stratified") q.kind = QuadratureKind::StratifiedMonteCarlo;
    else if (kind == "mc") q.kind = QuadratureKind::MonteCarlo;
    else if (kind == "latlong") q.kind = QuadratureKind::LatLong;
    else throw InputError("unknown quadrature '" + kind + "' (stratified, mc or latlong)");
    q.count = samples;
    q.seed = seed;
    return q;
}

int run_tau(const TauFlags& f, std::ostream& out)
{
    if (f.order < 1 || f.order > kMaxShOrder) throw InputError("--order must be in [1, " + std::to_string(kMaxShOrder) + "]");
    if (f.samples == 0) throw InputError("--samples must be positive");
    const auto t0 = std::chrono::steady_clock::now();
    const TripleProductTensor tau = triple_product_tensor(f.order, quadrature_spec(f.quadrature, f.samples, f.seed));
    save_tau_cache(tau, f.out);
    out << "order " << f.order << ": " << tau.entries().size() << " non-zero entries in " << seconds_since(t0) << " s -> " << f.out
        << "\n";
    return 0;
}

struct CompareFlags {
    std::string a, b, out;
};

Image load_linear_image(const fs::path& p)
{
    std::string ext = p.extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (ext == ".pfm") return read_pfm(p);
    if (ext == ".hdr" || ext == ".rgbe") return read_rgbe(p);
    throw InputError("compare needs linear images (.pfm or .hdr), got '" + p.string() + "'");
}

int run_compare(const CompareFlags& f, std::ostream& out)
{
    const MetricsReport r = compare_images(load_linear_image(f.a), load_linear_image(f.b));
    const std::string text = r.to_json();
    if (!f.out.empty()) write_text(f.out, text + "\n");
    out << text << "\n";
    return 0;
}

struct RenderFlags {
    std::string scene, out, model, clustered, reference, reference_out, metrics_out, tau;
    int size = 0;
    int views = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> rays;
    double exposure = 1.0;
    double gamma = 2.2;
};

fs::path with_suffix(const fs::path& p, const std::string& suffix)
{
    return p.parent_path() / (p.stem().string() + suffix + p.extension().string());
}

int run_render(const RenderFlags& f, std::ostream& out, std::ostream& err)
{
    SceneConfig sc = load_scene_config(f.scene);
    if (!f.model.empty()) sc.model = f.model;
    if (!f.clustered.empty()) sc.clustered = f.clustered;
    if (!f.tau.empty()) sc.tau_cache = f.tau;
    if (f.seed) sc.ref_seed = *f.seed;
    if (f.rays) sc.ref_rays = *f.rays;
    if (f.size > 0) sc.camera.width = sc.camera.height = f.size;
    if (sc.model && sc.clustered) throw InputError("give either a model or a clustered model, not both");
    if (f.views < 1) throw InputError("--views must be at least 1");
    sc.camera.validate();
    sc.material.validate();

    const auto t0 = std::chrono::steady_clock::now();
    Surface surface = Surface::load(sc.surface);

    std::optional<MlpModel> model;
    std::optional<ClusteredModel> clustered;
    std::unique_ptr<TransferSource> learnt;
    if (sc.model) {
        model = load_model(*sc.model);
        learnt = std::make_unique<MlpTransfer>(*model);
    } else if (sc.clustered) {
        clustered = load_clustered(*sc.clustered);
        learnt = std::make_unique<ClusteredTransfer>(*clustered);
    }
    const int order = learnt ? learnt->order() : kDefaultShOrder;

    const bool want_reference = !f.reference.empty() || !learnt;
    const std::string ref_kind = f.reference.empty() ? "bruteforce" : f.reference;
    std::unique_ptr<TransferSource> reference;
    if (want_reference) {
        if (ref_kind == "bruteforce") {
            reference = std::make_unique<BruteForceTransfer>(surface, sc.ref_rays, order, sc.ref_seed);
        } else if (ref_kind == "vertex") {
            if (!surface.is_mesh()) throw InputError("the per-vertex reference needs a mesh surface (.obj)");
            BakeConfig bc;
            bc.n_rays = sc.ref_rays;
            bc.order = order;
            bc.seed = sc.ref_seed;
            TriangleMesh mesh = surface.mesh();
            if (!mesh.has_normals()) mesh.compute_vertex_normals();
            mesh.vertex_transfer = bake_vertex_transfer(surface, bc);
            surface = Surface::from_mesh(std::move(mesh));
            reference = std::make_unique<VertexTransfer>(surface.mesh());
        } else {
            throw InputError("unknown reference '" + ref_kind + "' (bruteforce or vertex)");
        }
    }

    EnvironmentLight light = sc.envmap ? project_envmap(load_envmap(*sc.envmap), order) : constant_light(sc.constant, order);
    std::optional<TripleProductTensor> tau;
    if (sc.material.kind == Material::Kind::Glossy) {
        tau = sc.tau_cache ? load_tau_cache(*sc.tau_cache) : triple_product_tensor(order, {QuadratureKind::StratifiedMonteCarlo, sc.tau_samples, sc.tau_seed});
        if (tau->order() != order) throw DataError("triple product cache has order " + std::to_string(tau->order()) + ", need " + std::to_string(order));
    }
    const TripleProductTensor* tau_ptr = tau ? &*tau : nullptr;

    const fs::path out_path = f.out;
    const fs::path ref_path = f.reference_out.empty() ? with_suffix(out_path, "_reference") : fs::path(f.reference_out);
    const std::vector<Camera> cams = orbit_cameras(sc.camera, f.views);
    std::vector<MetricsReport> reports;
    for (std::size_t v = 0; v < cams.size(); ++v) {
        const GBuffer g = trace_gbuffer(surface, cams[v]);
        const fs::path view_out = v == 0 ? out_path : with_suffix(out_path, "_v" + std::to_string(v));
        if (learnt && reference) {
            const CompareResult r = render_compare(g, *learnt, *reference, light, sc.material, tau_ptr);
            reports.push_back(r.metrics);
            tonemap_write(r.learnt, view_out, f.exposure, f.gamma);
            tonemap_write(r.reference, v == 0 ? ref_path : with_suffix(ref_path, "_v" + std::to_string(v)), f.exposure, f.gamma);
        } else {
            tonemap_write(shade(g, learnt ? *learnt : *reference, light, sc.material, tau_ptr), view_out, f.exposure, f.gamma);
        }
        if (cams.size() > 1) err << "view " << v + 1 << "/" << cams.size() << " done\n";
    }
    if (!reports.empty()) {
        const std::string text = average_reports(reports).to_json();
        if (!f.metrics_out.empty()) write_text(f.metrics_out, text + "\n");
        out << text << "\n";
    }
    err << "rendered " << cams.size() << " view(s) at " << sc.camera.width << "x" << sc.camera.height << " in " << seconds_since(t0)
        << " s -> " << out_path.string() << "\n";
    return 0;
}

}  // namespace

MetricsReport average_reports(const std::vector<MetricsReport>& reports)
{
    if (reports.empty()) throw InputError("no metrics to average");
    MetricsReport m;
    m.width = reports.front().width;
    m.height = reports.front().height;
    const double n = static_cast<double>(reports.size());
    for (const MetricsReport& r : reports) {
        m.mae += r.mae / n;
        m.psnr_db += r.psnr_db / n;
        m.ssim += r.ssim / n;
        for (int c = 0; c < 3; ++c) {
            m.channels[c].mae += r.channels[c].mae / n;
            m.channels[c].psnr_db += r.channels[c].psnr_db / n;
            m.channels[c].ssim += r.channels[c].ssim / n;
        }
    }
    if (reports.size() == 1) return reports.front();
    return m;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Neural precomputed radiance transfer toolkit"};
    app.name(args.empty() ? "nprt" : fs::path(args[0]).filename().string());
    app.require_subcommand(1, 1);

    BakeFlags bake;
    auto* c_bake = app.add_subcommand("bake", "bake transfer vectors at surface samples");
    c_bake->add_option("--scene", bake.scene, "surface file (.obj or .sdf)")->required();
    c_bake->add_option("--out", bake.out, "dataset file")->required();
    c_bake->add_option("--count", bake.count)->capture_default_str();
    c_bake->add_option("--rays", bake.rays)->capture_default_str();
    c_bake->add_option("--order", bake.order)->capture_default_str();
    c_bake->add_option("--grid-res", bake.grid_res, "marching-cubes resolution for SDF sampling")->capture_default_str();
    c_bake->add_option("--seed", bake.seed)->capture_default_str();

    TrainCmdFlags trn;
    auto* c_train = app.add_subcommand("train", "fit an MLP to a baked dataset");
    c_train->add_option("--dataset", trn.dataset)->required();
    c_train->add_option("--out", trn.out, "model JSON")->required();
    add_train_flags(c_train, trn.t);

    RenderFlags rnd;
    auto* c_render = app.add_subcommand("render", "render a scene config, optionally against a reference");
    c_render->add_option("--scene", rnd.scene, "scene config JSON")->required();
    c_render->add_option("--out", rnd.out, "image (.png, .ppm or .pfm)")->required();
    c_render->add_option("--model", rnd.model, "model JSON (overrides the config)");
    c_render->add_option("--clustered", rnd.clustered, "clustered model JSON (overrides the config)");
    c_render->add_option("--reference", rnd.reference, "bruteforce or vertex; renders and compares against it");
    c_render->add_option("--reference-out", rnd.reference_out, "reference image path");
    c_render->add_option("--metrics-out", rnd.metrics_out, "write the metrics JSON here too");
    c_render->add_option("--tau", rnd.tau, "triple product cache (glossy)");
    c_render->add_option("--size", rnd.size, "square image size (overrides the camera)");
    c_render->add_option("--views", rnd.views, "orbit views to average metrics over")->capture_default_str();
    c_render->add_option("--seed", rnd.seed, "reference bake seed");
    c_render->add_option("--rays", rnd.rays, "reference bake rays");
    c_render->add_option("--exposure", rnd.exposure)->capture_default_str();
    c_render->add_option("--gamma", rnd.gamma)->capture_default_str();

    CompareFlags cmp;
    auto* c_compare = app.add_subcommand("compare", "MAE / PSNR / SSIM of two linear images");
    c_compare->add_option("--a", cmp.a)->required();
    c_compare->add_option("--b", cmp.b)->required();
    c_compare->add_option("--out", cmp.out, "also write the JSON report here");

    PartitionFlags part;
    auto* c_part = app.add_subcommand("partition", "grid-partition a dataset and train one MLP per cluster");
    c_part->add_option("--dataset", part.dataset)->required();
    c_part->add_option("--out", part.out, "clustered model JSON")->required();
    c_part->add_option("--grid", part.grid, "cells per axis, e.g. 3x2x2")->capture_default_str();
    c_part->add_option("--delta", part.delta, "overlap margin as a fraction of the cell extent")->capture_default_str();
    c_part->add_option("--theta", part.theta, "merge threshold on total variance")->capture_default_str();
    c_part->add_option("--min-clusters", part.min_clusters)->capture_default_str();
    add_train_flags(c_part, part.t);

    ShaderFlags sh;
    auto* c_shader = app.add_subcommand("export-shader", "emit a GLSL fragment shader for a model");
    c_shader->add_option("--model", sh.model)->required();
    c_shader->add_option("--out", sh.out)->required();
    c_shader->add_option("--glsl-version", sh.glsl_version)->capture_default_str();
    c_shader->add_flag("--no-entry", sh.no_entry, "emit only encode() and transfer()");

    TauFlags tf;
    auto* c_tau = app.add_subcommand("tau", "compute and cache the triple product tensor");
    c_tau->add_option("--out", tf.out)->required();
    c_tau->add_option("--order", tf.order)->capture_default_str();
    c_tau->add_option("--samples", tf.samples)->capture_default_str();
    c_tau->add_option("--quadrature", tf.quadrature, "stratified, mc or latlong")->capture_default_str();
    c_tau->add_option("--seed", tf.seed)->capture_default_str();

    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    if (argv.empty()) argv.push_back("nprt");
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        if (c_bake->parsed()) return run_bake(bake, out, err);
        if (c_train->parsed()) return run_train(trn, out, err);
        if (c_render->parsed()) return run_render(rnd, out, err);
        if (c_compare->parsed()) return run_compare(cmp, out);
        if (c_part->parsed()) return run_partition(part, out, err);
        if (c_shader->parsed()) return run_export_shader(sh, out);
        if (c_tau->parsed()) return run_tau(tf, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    err << app.help();
    return 1;
}

int cli_main(int argc, const char* const* argv)
{
    std::vector<std::string> args(argv, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace nprt
