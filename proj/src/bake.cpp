#include "nprt/bake.hpp"

#include "nprt/binary_io.hpp"
#include "nprt/marching_cubes.hpp"

namespace nprt {

namespace {

constexpr std::uint32_t kDatasetVersion = 1;
constexpr double kNormMargin = 1e-3;

double f32r(double v) { return static_cast<double>(static_cast<float>(v)); }
Vec3 f32r(const Vec3& v) { return {f32r(v.x), f32r(v.y), f32r(v.z)}; }

}  // namespace

Normalization Normalization::from_bounds(const Aabb& b, double pad)
{
    if (b.empty()) throw InputError("cannot normalize an empty box");
    Normalization n;
    n.center = b.center();
    n.half_extent = 0.5 * max_component(b.extent()) + pad;
    if (!(n.half_extent > 0.0)) throw InputError("normalization box has zero extent");
    return n;
}

SHVector bake_transfer(const Surface& surface, const SurfaceSample& sample, std::size_t n_rays, int order,
                       std::uint64_t seed)
{
    if (n_rays < kMinBakeRays) throw InputError("bake needs at least 64 rays");
    if (order < 1 || order > kMaxShOrder) throw InputError("invalid SH order");
    Rng rng(seed);
    std::vector<Vec3> dirs;
    stratified_sphere_directions(n_rays, rng, dirs);

    double offset = surface.t_eps();
    if (surface.is_sdf()) offset += surface.sdf_params().hit_eps;
    const Vec3 origin = sample.position + sample.normal * offset;

    SHVector t(order);
    std::vector<double> y(static_cast<std::size_t>(sh_count(order)));
    for (const Vec3& d : dirs) {
        const double c = dot(d, sample.normal);
        if (c <= 0.0) continue;
        if (surface.occluded({origin, d})) continue;
        sh_basis_into(d, order, y);
        for (std::size_t i = 0; i < y.size(); ++i) t[i] += c * y[i];
    }
    t *= 4.0 * kPi / static_cast<double>(dirs.size());
    return t;
}

std::vector<SurfaceSample> sample_scene_points(const Surface& surface, std::size_t count, std::uint64_t seed, int grid_res,
                                               BakeReport* report)
{
    if (count == 0) throw InputError("sample count must be at least 1");
    if (report) *report = BakeReport{count, 0};
    if (surface.is_mesh()) return sample_surface(surface.mesh(), count, seed);

    const SdfScene& scene = surface.sdf();
    const TriangleMesh mc = marching_cubes(scene, grid_res, scene.bounds());
    const auto raw = sample_surface(mc, count, seed);
    std::vector<SurfaceSample> projected(raw.size());
    std::vector<char> ok(raw.size(), 0);
#pragma omp parallel for schedule(dynamic, 256)
    for (std::size_t i = 0; i < raw.size(); ++i) {
        try {
            projected[i] = project_to_sdf_surface(scene, raw[i].position, surface.sdf_params());
            ok[i] = 1;
        } catch (const DataError&) {
        }
    }
    std::vector<SurfaceSample> out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (ok[i]) out.push_back(projected[i]);
    if (report) report->discarded = raw.size() - out.size();
    return out;
}

Normalization scene_normalization(const Surface& surface, int grid_res)
{
    Aabb box;
    double pad = 0.0;
    if (surface.is_mesh()) {
        box = surface.mesh().bounds();
    } else {
        const SdfScene& scene = surface.sdf();
        box = marching_cubes(scene, grid_res, scene.bounds()).bounds();
        pad = max_component(scene.bounds().extent()) / grid_res;
    }
    Normalization n = Normalization::from_bounds(box, pad);
    n.half_extent *= 1.0 + kNormMargin;
    n.center = f32r(n.center);
    n.half_extent = f32r(n.half_extent);
    return n;
}

double dataset_scale(const std::vector<TransferRecord>& records)
{
    double s = 0.0;
    for (const auto& r : records)
        for (double c : r.transfer.coeffs()) s = std::max(s, std::abs(c));
    return s > 0.0 ? s : 1.0;
}

TransferDataset bake_points(const Surface& surface, const std::vector<SurfaceSample>& points, const Normalization& norm,
                            const BakeConfig& cfg)
{
    TransferDataset ds;
    ds.order = cfg.order;
    ds.norm = {f32r(norm.center), f32r(norm.half_extent)};
    ds.records.resize(points.size());
    const std::uint64_t ray_seed = derive_seed(cfg.seed, 1);
#pragma omp parallel for schedule(dynamic, 16)
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SurfaceSample& s = points[i];
        SHVector t = bake_transfer(surface, s, cfg.n_rays, cfg.order, derive_seed(ray_seed, i));
        for (double& c : t.coeffs()) c = f32r(c);
        ds.records[i] = {f32r(s.position), f32r(s.normal), std::move(t)};
    }
    ds.scale = f32r(dataset_scale(ds.records));
    return ds;
}

TransferDataset bake_dataset(const Surface& surface, std::size_t count, const BakeConfig& cfg, BakeReport* report)
{
    const auto points = sample_scene_points(surface, count, derive_seed(cfg.seed, 0), cfg.grid_res, report);
    return bake_points(surface, points, scene_normalization(surface, cfg.grid_res), cfg);
}

void save_dataset(const TransferDataset& ds, const std::filesystem::path& path)
{
    if (ds.order < 1 || ds.order > kMaxShOrder) throw InputError("dataset has invalid SH order");
    io::ByteWriter w;
    w.magic("NPRT");
    w.u32(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(ds.order));
    w.u64(ds.records.size());
    w.f32(static_cast<float>(ds.norm.center.x));
    w.f32(static_cast<float>(ds.norm.center.y));
    w.f32(static_cast<float>(ds.norm.center.z));
    w.f32(static_cast<float>(ds.norm.half_extent));
    w.f32(static_cast<float>(ds.scale));
    const auto n = static_cast<std::size_t>(sh_count(ds.order));
    for (const auto& r : ds.records) {
        if (r.transfer.size() != n) throw InputError("record transfer size does not match dataset order");
        for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(r.position[a]));
        for (int a = 0; a < 3; ++a) w.f32(static_cast<float>(r.normal[a]));
        for (double c : r.transfer.coeffs()) w.f32(static_cast<float>(c));
    }
    w.write_file(path);
}

TransferDataset load_dataset(const std::filesystem::path& path)
{
    auto r = io::ByteReader::from_file(path);
    if (!r.expect_magic("NPRT")) throw FormatError("'" + r.name() + "' is not a transfer dataset (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kDatasetVersion) throw FormatError("unsupported dataset version " + std::to_string(version));
    TransferDataset ds;
    ds.order = static_cast<int>(r.u32());
    if (ds.order < 1 || ds.order > kMaxShOrder) throw FormatError("dataset has invalid SH order " + std::to_string(ds.order));
    const std::uint64_t count = r.u64();
    ds.norm.center.x = r.f32();
    ds.norm.center.y = r.f32();
    ds.norm.center.z = r.f32();
    ds.norm.half_extent = r.f32();
    ds.scale = r.f32();
    if (!is_finite(ds.norm.center) || !(ds.norm.half_extent > 0.0) || !std::isfinite(ds.norm.half_extent))
        throw FormatError("dataset has invalid normalization");
    if (!(ds.scale > 0.0) || !std::isfinite(ds.scale)) throw FormatError("dataset has invalid scale");

    const auto n = static_cast<std::size_t>(sh_count(ds.order));
    const std::size_t record_bytes = 4 * (6 + n);
    if (count != r.remaining() / record_bytes || r.remaining() % record_bytes != 0)
        throw FormatError("dataset '" + r.name() + "' is truncated or has trailing bytes");
    ds.records.resize(count);
    for (auto& rec : ds.records) {
        for (int a = 0; a < 3; ++a) rec.position[a] = r.f32();
        for (int a = 0; a < 3; ++a) rec.normal[a] = r.f32();
        rec.transfer = SHVector(ds.order);
        for (auto& c : rec.transfer.coeffs()) c = r.f32();
        if (!is_finite(rec.position) || !is_finite(rec.normal) || !rec.transfer.all_finite())
            throw FormatError("dataset '" + r.name() + "' contains non-finite values");
    }
    return ds;
}

}  // namespace nprt
