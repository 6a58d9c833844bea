#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nprt/bake.hpp"
#include "nprt/marching_cubes.hpp"
#include "oracles.hpp"

using namespace nprt;
using namespace nprt::oracle;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "nprt_test_bake";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<char> file_bytes(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void add_quad(TriangleMesh& m, Vec3 a, Vec3 b, Vec3 c, Vec3 d)
{
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    m.vertices.insert(m.vertices.end(), {a, b, c, d});
    m.triangles.push_back({base, base + 1, base + 2});
    m.triangles.push_back({base, base + 2, base + 3});
}

TriangleMesh ground(double half)
{
    TriangleMesh m;
    add_quad(m, {-half, -half, 0}, {half, -half, 0}, {half, half, 0}, {-half, half, 0});
    return m;
}

Surface sphere_sdf(double r)
{
    return Surface::from_sdf(SdfScene::parse("sphere c=0,0,0 r=" + std::to_string(r) + "\nbounds min=-2,-2,-2 max=2,2,2\n"));
}

// Unoccluded clamped cosine around +z: zonal entries only.
std::array<double, 16> clamped_cosine_up()
{
    std::array<double, 16> t{};
    for (int l = 0; l < 4; ++l) t[static_cast<std::size_t>(l * (l + 1))] = clamped_cosine_zonal(l);
    return t;
}

}  // namespace

TEST_CASE("bake: unoccluded plane gives clamped-cosine zonal coefficients")
{
    const Surface s = Surface::from_mesh(ground(100.0));
    const auto expect = clamped_cosine_up();
    CHECK(std::abs(expect[0] - 0.886227) < 1e-6);
    CHECK(std::abs(expect[2] - 1.023327) < 1e-6);
    CHECK(std::abs(expect[6] - 0.495416) < 1e-6);
    for (std::size_t rays : {std::size_t{4096}, std::size_t{65536}}) {
        const SHVector t = bake_transfer(s, {{0.3, -0.2, 0}, {0, 0, 1}}, rays, 4, 5);
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(t[i] - expect[i]) < 0.02);
    }
    CHECK_THROWS_AS(bake_transfer(s, {{0, 0, 0}, {0, 0, 1}}, 63, 4, 1), InputError);

    // same on an SDF slab; grazing rays that exhaust their steps count as blocked
    const Surface slab = Surface::from_sdf(SdfScene::parse("box c=0,0,-0.1 h=3,3,0.1\nbounds min=-3.2,-3.2,-0.4 max=3.2,3.2,0.4\n"));
    const SHVector ts = bake_transfer(slab, {{0.3, -0.2, 0}, {0, 0, 1}}, 4096, 4, 5);
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(ts[i] - expect[i]) < 0.02);
}

TEST_CASE("bake: sealed point is fully occluded")
{
    TriangleMesh box;
    // cube [-1,1]^3, outward winding irrelevant for visibility
    add_quad(box, {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1});
    add_quad(box, {-1, -1, 1}, {-1, 1, 1}, {1, 1, 1}, {1, -1, 1});
    add_quad(box, {-1, -1, -1}, {-1, -1, 1}, {1, -1, 1}, {1, -1, -1});
    add_quad(box, {-1, 1, -1}, {1, 1, -1}, {1, 1, 1}, {-1, 1, 1});
    add_quad(box, {-1, -1, -1}, {-1, 1, -1}, {-1, 1, 1}, {-1, -1, 1});
    add_quad(box, {1, -1, -1}, {1, -1, 1}, {1, 1, 1}, {1, 1, -1});
    const Surface s = Surface::from_mesh(box);
    const SHVector t = bake_transfer(s, {{0.1, 0.2, -0.3}, normalize(Vec3{0.2, 0.1, 1})}, 4096, 4, 9);
    for (double c : t.coeffs()) CHECK(c == 0.0);

    const Surface hollow = Surface::from_sdf(SdfScene::parse(
        "box id=outer c=0,0,0 h=1,1,1\nbox id=inner c=0,0,0 h=0.8,0.8,0.8\nop subtraction a=outer b=inner\n"
        "bounds min=-1.5,-1.5,-1.5 max=1.5,1.5,1.5\n"));
    const SHVector ts = bake_transfer(hollow, {{0, 0, -0.8}, {0, 0, 1}}, 1024, 4, 9);
    for (double c : ts.coeffs()) CHECK(c == 0.0);
}

TEST_CASE("bake: half-space wall matches analytic visibility quadrature")
{
    // ground z=0 and a vertical wall x = d; from the origin every direction
    // with w.x > 0 (and w.z > 0) is blocked, independent of d
    for (double d : {0.5, 2.0}) {
        TriangleMesh m = ground(2000.0);
        add_quad(m, {d, -2000, -1}, {d, 2000, -1}, {d, 2000, 4000}, {d, -2000, 4000});
        const Surface s = Surface::from_mesh(m);
        const SHVector t = bake_transfer(s, {{0, 0, 0}, {0, 0, 1}}, 65536, 4, 21);

        // midpoint rule in (theta, phi) over the upper hemisphere
        std::array<double, 16> ref{};
        const int nt = 800, np = 1600;
        for (int a = 0; a < nt; ++a) {
            const double th = (a + 0.5) * (0.5 * kPi) / nt;
            for (int b = 0; b < np; ++b) {
                const double ph = (b + 0.5) * 2 * kPi / np;
                const Vec3 w{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
                if (w.x > 0) continue;
                const double dw = std::sin(th) * (0.5 * kPi / nt) * (2 * kPi / np);
                const auto y = closed_form_sh(w);
                for (std::size_t i = 0; i < 16; ++i) ref[i] += w.z * y[i] * dw;
            }
        }
        for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(t[i] - ref[i]) < 0.02);
    }
}

TEST_CASE("bake: irradiance under constant light is bounded")
{
    TriangleMesh m = ground(3.0);
    const Surface sph = sphere_sdf(0.5);
    // floor plus a floating sphere mesh from marching cubes
    TriangleMesh ball = marching_cubes(sph.sdf(), 32, sph.sdf().bounds());
    const auto base = static_cast<std::uint32_t>(m.vertices.size());
    for (const auto& v : ball.vertices) m.vertices.push_back(v + Vec3{0, 0, 0.8});
    for (auto t : ball.triangles) m.triangles.push_back({t[0] + base, t[1] + base, t[2] + base});
    const Surface s = Surface::from_mesh(m);

    SHVector light(4);
    light[0] = 2.0 * std::sqrt(kPi);  // L(w) = 1
    const auto pts = sample_surface(m, 200, 4);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const SHVector t = bake_transfer(s, pts[i], 4096, 4, 100 + i);
        const double e = diffuse_shade(t, light);
        CHECK(e >= 0.0);
        CHECK(e <= kPi * 1.05);
        CHECK(std::abs(t[0]) <= 0.886227 + 0.02);
    }
}

TEST_CASE("bake: Monte Carlo error shrinks at least as fast as 1/sqrt(N)")
{
    TriangleMesh m = ground(3.0);
    add_quad(m, {0.3, -1, 0.2}, {1.3, -1, 0.2}, {1.3, 1, 1.2}, {0.3, 1, 1.2});
    const Surface s = Surface::from_mesh(m);
    const SurfaceSample p{{0, 0, 0}, {0, 0, 1}};
    const SHVector ref = bake_transfer(s, p, 1000000, 4, 77);
    auto mean_dev = [&](std::size_t n) {
        double acc = 0.0;
        const int trials = 60;
        for (int k = 0; k < trials; ++k) {
            const SHVector t = bake_transfer(s, p, n, 4, 1000 + static_cast<std::uint64_t>(k));
            for (std::size_t i = 0; i < 16; ++i) acc += std::abs(t[i] - ref[i]);
        }
        return acc / (trials * 16);
    };
    const double ratio = mean_dev(2048) / mean_dev(1024);
    MESSAGE("error ratio for doubled rays: " << ratio);
    CHECK(ratio > (1.0 / std::sqrt(2.0)) / 1.5);
    CHECK(ratio < (1.0 / std::sqrt(2.0)) * 1.5);
}

TEST_CASE("bake: sdf sphere dataset")
{
    const Surface s = sphere_sdf(0.7);
    BakeConfig cfg;
    cfg.n_rays = 1024;
    cfg.seed = 3;
    cfg.grid_res = 64;
    BakeReport report;
    const TransferDataset ds = bake_dataset(s, 300, cfg, &report);
    CHECK(report.discarded == 0);
    CHECK_FALSE(report.warning());
    REQUIRE(ds.records.size() == 300);
    for (const auto& r : ds.records) {
        CHECK(std::abs(s.sdf().eval(r.position)) < 1e-3);
        CHECK(dot(r.normal, r.position) > 0.0);
        CHECK(std::abs(length(r.normal) - 1.0) < 1e-4);
        CHECK(std::abs(r.transfer[0] - 0.886227) < 0.02);
        const Vec3 q = ds.norm.apply(r.position);
        CHECK(std::max({std::abs(q.x), std::abs(q.y), std::abs(q.z)}) <= 1.0);
    }
    CHECK(ds.scale > 0.9);
    CHECK(ds.scale == doctest::Approx(dataset_scale(ds.records)));
}

TEST_CASE("bake: mesh dataset is deterministic and normalized")
{
    TriangleMesh m = ground(2.0);
    add_quad(m, {-0.5, -0.5, 0.5}, {0.5, -0.5, 0.5}, {0.5, 0.5, 0.5}, {-0.5, 0.5, 0.5});
    const Surface s = Surface::from_mesh(m);
    BakeConfig cfg;
    cfg.n_rays = 256;
    cfg.seed = 11;
    const auto a = temp_path("a.nprt"), b = temp_path("b.nprt");
    const TransferDataset ds = bake_dataset(s, 1000, cfg);
    save_dataset(ds, a);
    save_dataset(bake_dataset(s, 1000, cfg), b);
    CHECK(file_bytes(a) == file_bytes(b));
    for (const auto& r : ds.records) {
        const Vec3 q = ds.norm.apply(r.position);
        CHECK(std::max({std::abs(q.x), std::abs(q.y), std::abs(q.z)}) <= 1.0);
    }
    // under-occluded points on the small quad see less sky than the open floor
    cfg.seed = 12;
    CHECK(file_bytes(a) != [&] {
        save_dataset(bake_dataset(s, 1000, cfg), b);
        return file_bytes(b);
    }());
}

TEST_CASE("dataset: file round trip and corruption")
{
    TransferDataset ds;
    ds.norm = {{0.5, -0.25, 1.0}, 2.5};
    ds.scale = 1.25;
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        TransferRecord r{{static_cast<float>(rng.uniform()), 0.5, -0.125}, {0, 0, 1}, SHVector(4)};
        for (auto& c : r.transfer.coeffs()) c = static_cast<float>(rng.uniform(-1, 1));
        ds.records.push_back(r);
    }
    const auto p = temp_path("rt.nprt");
    save_dataset(ds, p);
    const auto bytes = file_bytes(p);
    CHECK(bytes.size() == 4 + 4 + 4 + 8 + 5 * 4 + 50 * (6 + 16) * 4);
    const TransferDataset back = load_dataset(p);
    CHECK(back.order == 4);
    CHECK(back.scale == 1.25);
    CHECK(back.norm.half_extent == 2.5);
    REQUIRE(back.records.size() == ds.records.size());
    for (std::size_t i = 0; i < ds.records.size(); ++i) {
        CHECK(back.records[i].position == ds.records[i].position);
        CHECK(back.records[i].normal == ds.records[i].normal);
        CHECK(back.records[i].transfer == ds.records[i].transfer);
    }

    auto corrupt = bytes;
    corrupt[0] = 'X';
    std::ofstream(temp_path("bad.nprt"), std::ios::binary).write(corrupt.data(), static_cast<std::streamsize>(corrupt.size()));
    CHECK_THROWS_AS(load_dataset(temp_path("bad.nprt")), FormatError);

    std::ofstream(temp_path("short.nprt"), std::ios::binary).write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 3));
    CHECK_THROWS_AS(load_dataset(temp_path("short.nprt")), FormatError);

    auto version = bytes;
    version[4] = 2;
    std::ofstream(temp_path("ver.nprt"), std::ios::binary).write(version.data(), static_cast<std::streamsize>(version.size()));
    CHECK_THROWS_AS(load_dataset(temp_path("ver.nprt")), FormatError);

    CHECK_THROWS_AS(load_dataset(temp_path("missing.nprt")), DataError);

    TransferDataset empty;
    save_dataset(empty, temp_path("empty.nprt"));
    const TransferDataset e = load_dataset(temp_path("empty.nprt"));
    CHECK(e.records.empty());
    CHECK(e.scale == 1.0);
}
