#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "nprt/bvh.hpp"
#include "nprt/marching_cubes.hpp"
#include "nprt/mesh.hpp"
#include "nprt/sdf.hpp"
#include "nprt/surface.hpp"

using namespace nprt;
namespace fs = std::filesystem;

namespace {

fs::path write_temp(const std::string& name, const std::string& text)
{
    const fs::path dir = fs::temp_directory_path() / "nprt_test_geometry";
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

TriangleMesh unit_square_pair(double half = 0.5)
{
    TriangleMesh m;
    m.vertices = {{-half, -half, 0}, {half, -half, 0}, {half, half, 0}, {-half, half, 0}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

Vec3 random_unit(Rng& rng)
{
    return square_to_sphere(rng.uniform(), rng.uniform());
}

SdfScene sphere_scene(double r, Vec3 c = {}, double extent = 2.0)
{
    std::vector<SdfNode> nodes(1);
    nodes[0].kind = SdfNode::Kind::Sphere;
    nodes[0].center = c;
    nodes[0].radius = r;
    Aabb b;
    b.expand(c - Vec3{extent, extent, extent});
    b.expand(c + Vec3{extent, extent, extent});
    return SdfScene(nodes, 0, b);
}

// Every undirected edge is shared by exactly two triangles that traverse it in
// opposite directions.
bool closed_and_oriented(const TriangleMesh& m)
{
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& t : m.triangles)
        for (int i = 0; i < 3; ++i) ++directed[{t[static_cast<std::size_t>(i)], t[static_cast<std::size_t>((i + 1) % 3)]}];
    for (const auto& [e, count] : directed) {
        if (count != 1) return false;
        auto it = directed.find({e.second, e.first});
        if (it == directed.end() || it->second != 1) return false;
    }
    return true;
}

double angle_deg(const Vec3& a, const Vec3& b)
{
    return std::acos(std::clamp(dot(normalize(a), normalize(b)), -1.0, 1.0)) * 180.0 / kPi;
}

}  // namespace

TEST_CASE("obj: cube quads are fan triangulated")
{
    const auto p = write_temp("cube.obj",
                              "# cube\n"
                              "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
                              "f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n");
    const TriangleMesh m = load_obj(p);
    CHECK(m.vertices.size() == 8);
    CHECK(m.triangles.size() == 12);
    CHECK(m.surface_area() == doctest::Approx(6.0).epsilon(1e-12));
    CHECK_FALSE(m.has_normals());
}

TEST_CASE("obj: index 0 is a parse error with line number")
{
    const auto p = write_temp("zero.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 0 1 2\n");
    try {
        load_obj(p);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find(":4:") != std::string::npos);
    }
    CHECK_THROWS_AS(load_obj(write_temp("oob.obj", "v 0 0 0\nf 1 2 3\n")), FormatError);
    CHECK_THROWS_AS(load_obj(write_temp("bad.obj", "v 0 x 0\n")), FormatError);
    CHECK_THROWS_AS(load_obj(fs::temp_directory_path() / "does_not_exist.obj"), DataError);
}

TEST_CASE("obj: two-triangle quad area and normals")
{
    const auto p = write_temp("quad.obj",
                              "v 0 0 0\nv 3 0 0\nv 3 2 0\nv 0 2 0\n"
                              "vn 0 0 2\n"
                              "f 1//1 2//1 3//1\nf 1//1 3//1 4//1\n");
    const TriangleMesh m = load_obj(p);
    CHECK(std::abs(m.surface_area() - 6.0) < 1e-6);
    REQUIRE(m.has_normals());
    for (const auto& n : m.normals) CHECK(std::abs(length(n) - 1.0) < 1e-12);

    // negative indices address from the end
    const TriangleMesh neg = load_obj(write_temp("neg.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n"));
    CHECK(neg.triangles.size() == 1);
    CHECK(std::abs(neg.surface_area() - 0.5) < 1e-12);
}

TEST_CASE("obj: save/load round trip")
{
    TriangleMesh m = unit_square_pair();
    m.compute_vertex_normals();
    const auto p = fs::temp_directory_path() / "nprt_test_geometry" / "rt.obj";
    fs::create_directories(p.parent_path());
    save_obj(m, p);
    const TriangleMesh r = load_obj(p);
    REQUIRE(r.vertices.size() == m.vertices.size());
    for (std::size_t i = 0; i < m.vertices.size(); ++i) CHECK(r.vertices[i] == m.vertices[i]);
    CHECK(r.triangles == m.triangles);
}

TEST_CASE("mesh: validation rejects degenerate and out-of-range triangles")
{
    TriangleMesh m = unit_square_pair();
    m.triangles.push_back({0, 1, 1});
    CHECK_THROWS_AS(m.validate(), DataError);
    m = unit_square_pair();
    m.triangles.push_back({0, 1, 9});
    CHECK_THROWS_AS(m.validate(), DataError);
    m = unit_square_pair();
    m.normals.assign(4, Vec3{0, 0, 1.1});
    CHECK_THROWS_AS(m.validate(), DataError);
}

TEST_CASE("bvh: analytic plane hit and miss")
{
    const TriangleMesh m = unit_square_pair();
    const Bvh bvh(m);
    const RayHit h = bvh.intersect({{0, 0, -5}, {0, 0, 1}}, 0.0, INFINITY);
    REQUIRE(h.hit);
    CHECK(h.t == doctest::Approx(5.0).epsilon(1e-14));
    CHECK(length(h.position) < 1e-12);
    CHECK(h.triangle == 0);  // shared diagonal: lowest index wins
    CHECK(std::abs(h.bary.x + h.bary.y + h.bary.z - 1.0) < 1e-12);

    CHECK_FALSE(bvh.intersect({{0, 0, -5}, {0, 0, -1}}, 0.0, INFINITY).hit);
    CHECK_FALSE(bvh.intersect({{0, 0, -5}, {0, 0, 1}}, 0.0, 4.0).hit);
    CHECK_FALSE(bvh.occluded({{0, 0, -5}, {0, 0, -1}}, 0.0, INFINITY));
    CHECK(bvh.occluded({{0.2, 0.1, -5}, {0, 0, 1}}, 0.0, INFINITY));
}

TEST_CASE("bvh: matches brute force on random rays")
{
    Rng rng(42);
    TriangleMesh m;
    for (int t = 0; t < 500; ++t) {
        const Vec3 c{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto base = static_cast<std::uint32_t>(m.vertices.size());
        for (int k = 0; k < 3; ++k) m.vertices.push_back(c + random_unit(rng) * rng.uniform(0.05, 0.4));
        m.triangles.push_back({base, base + 1, base + 2});
    }
    // exact duplicates exercise the equal-t tie-break
    for (std::uint32_t t = 0; t < 20; ++t) m.triangles.push_back(m.triangles[t * 7]);
    m.validate();

    const Bvh bvh(m);
    std::vector<TriangleRecord> recs;
    for (std::size_t t = 0; t < m.triangles.size(); ++t) recs.push_back(make_triangle_record(m, t));

    int hits = 0;
    for (int r = 0; r < 1000; ++r) {
        Ray ray;
        ray.origin = random_unit(rng) * 3.0;
        // aim roughly at the cloud so most rays hit something
        ray.dir = normalize(Vec3{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)} - ray.origin);
        const double t_max = r % 5 == 0 ? 3.0 : INFINITY;

        bool found = false;
        double best = t_max;
        std::uint32_t best_tri = 0;
        for (std::size_t t = 0; t < recs.size(); ++t) {
            double tt, u, v;
            if (!intersect_triangle(ray, recs[t], 0.0, t_max, tt, u, v)) continue;
            if (!found || tt < best) {
                found = true;
                best = tt;
                best_tri = static_cast<std::uint32_t>(t);
            }
        }
        const RayHit h = bvh.intersect(ray, 0.0, t_max);
        REQUIRE(h.hit == found);
        CHECK(bvh.occluded(ray, 0.0, t_max) == found);
        if (found) {
            ++hits;
            CHECK(h.t == best);
            CHECK(h.triangle == best_tri);
            CHECK(length(h.position - ray.at(h.t)) < 1e-9);
        }
    }
    CHECK(hits > 300);
}

TEST_CASE("sampling: area-proportional triangle choice")
{
    TriangleMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}, {5, 0, 0}, {2, 1, 0}};
    m.triangles = {{0, 1, 2}, {3, 4, 5}};  // areas 0.5 and 1.5
    const auto s = sample_surface_detailed(m, 40000, 7);
    std::size_t second = 0;
    for (const auto& x : s) {
        second += x.triangle == 1;
        CHECK(x.bary.x >= 0.0);
        CHECK(x.bary.y >= 0.0);
        CHECK(x.bary.z >= -1e-15);
        CHECK(std::abs(x.bary.x + x.bary.y + x.bary.z - 1.0) < 1e-6);
        CHECK(length(x.sample.position - m.point(x.triangle, x.bary)) < 1e-12);
        CHECK(std::abs(length(x.sample.normal) - 1.0) < 1e-4);
    }
    const double frac = static_cast<double>(second) / 40000.0;
    CHECK(frac > 0.74);
    CHECK(frac < 0.76);
}

TEST_CASE("sampling: deterministic for a seed")
{
    TriangleMesh m = unit_square_pair();
    const auto a = sample_surface(m, 5000, 99);
    const auto b = sample_surface(m, 5000, 99);
    const auto c = sample_surface(m, 5000, 100);
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(SurfaceSample)) == 0);
    CHECK(std::memcmp(a.data(), c.data(), a.size() * sizeof(SurfaceSample)) != 0);
    CHECK_THROWS_AS(sample_surface(m, 0, 1), InputError);
    CHECK_THROWS_AS(sample_surface(TriangleMesh{}, 10, 1), InputError);
}

TEST_CASE("sampling: chi-square against area for a 10-triangle fixture")
{
    Rng rng(5);
    TriangleMesh m;
    for (std::uint32_t t = 0; t < 10; ++t) {
        const double w = rng.uniform(0.2, 2.0), h = rng.uniform(0.2, 2.0);
        const Vec3 o{3.0 * t, 0, 0};
        m.vertices.push_back(o);
        m.vertices.push_back(o + Vec3{w, 0, 0});
        m.vertices.push_back(o + Vec3{0, h, 0});
        m.triangles.push_back({3 * t, 3 * t + 1, 3 * t + 2});
    }
    const std::size_t n = 100000;
    const auto s = sample_surface_detailed(m, n, 1234);
    std::array<double, 10> counts{};
    for (const auto& x : s) counts[x.triangle] += 1.0;
    const double total = m.surface_area();
    double chi2 = 0.0;
    for (std::size_t t = 0; t < 10; ++t) {
        const double expected = static_cast<double>(n) * m.triangle_area(t) / total;
        chi2 += (counts[t] - expected) * (counts[t] - expected) / expected;
    }
    // 0.999 quantile of chi-square with 9 degrees of freedom
    CHECK(chi2 < 27.877);
}

TEST_CASE("sampling: interpolated shading normals")
{
    TriangleMesh m = unit_square_pair();
    m.normals = {normalize(Vec3{-1, -1, 1}), normalize(Vec3{1, -1, 1}), normalize(Vec3{1, 1, 1}), normalize(Vec3{-1, 1, 1})};
    for (const auto& x : sample_surface_detailed(m, 200, 3)) {
        const Vec3 expect = normalize(m.normals[m.triangles[x.triangle][0]] * x.bary.x +
                                      m.normals[m.triangles[x.triangle][1]] * x.bary.y +
                                      m.normals[m.triangles[x.triangle][2]] * x.bary.z);
        CHECK(length(x.sample.normal - expect) < 1e-12);
    }
}

TEST_CASE("sdf: parser")
{
    const SdfScene s = SdfScene::parse(
        "# comment\n"
        "sphere id=ball c=0,0,1 r=0.5\n"
        "box c=0,0,-0.1 h=2,2,0.1   # floor\n"
        "op union id=all a=ball b=1\n"
        "bounds min=-2,-2,-1 max=2,2,2\n");
    CHECK(s.nodes().size() == 3);
    CHECK(s.root() == 2);
    CHECK(s.eval({0, 0, 2}) == doctest::Approx(0.5));
    CHECK(s.eval({1.5, 1.5, 0.5}) == doctest::Approx(0.5));
    CHECK_FALSE(s.has_blends());

    auto fails_on_line = [](const std::string& text, const std::string& line) {
        try {
            SdfScene::parse(text, "x.sdf");
        } catch (const FormatError& e) {
            return std::string(e.what()).find("x.sdf:" + line + ":") != std::string::npos;
        }
        return false;
    };
    CHECK(fails_on_line("sphere c=0,0,0 r=1\nop union a=0 b=7\n", "2"));
    CHECK(fails_on_line("sphere c=0,0 r=1\n", "1"));
    CHECK(fails_on_line("sphere c=0,0,0 r=1\ncone c=0,0,0\n", "2"));
    CHECK(fails_on_line("\nsphere c=0,0,0 r=-1\n", "2"));
    CHECK(fails_on_line("sphere id=a c=0,0,0 r=1\nsphere id=a c=0,0,0 r=1\n", "2"));
    CHECK_THROWS_AS(SdfScene::parse("sphere c=0,0,0 r=1\n"), FormatError);  // no bounds
    CHECK_THROWS_AS(SdfScene::parse("bounds min=-1,-1,-1 max=1,1,1\n"), FormatError);

    const SdfScene blend = SdfScene::parse("sphere c=-0.5,0,0 r=0.5\nsphere c=0.5,0,0 r=0.5\n"
                                           "op smooth_union k=0.2 a=0 b=1\nbounds min=-2,-2,-2 max=2,2,2\n");
    CHECK(blend.has_blends());
    CHECK(SdfParams::defaults_for(blend).step_scale == doctest::Approx(0.9));
    // the blend fills in the pinch between the spheres
    CHECK(blend.eval({0, 0, 0.05}) < std::min(length(Vec3{-0.5, 0, 0.05}), length(Vec3{0.5, 0, 0.05})) - 0.5);
}

TEST_CASE("sdf: primitive distances")
{
    const SdfScene s = sphere_scene(1.0);
    CHECK(sdf_eval(s, {2, 0, 0}) == doctest::Approx(1.0));
    CHECK(sdf_eval(s, {0, 0, 0}) == doctest::Approx(-1.0));
    CHECK_THROWS_AS(sdf_eval(s, {NAN, 0, 0}), InputError);

    const SdfScene box = SdfScene::parse("box c=0,0,0 h=1,2,3\nbounds min=-4,-4,-4 max=4,4,4\n");
    CHECK(box.eval({2, 0, 0}) == doctest::Approx(1.0));
    CHECK(box.eval({2, 3, 0}) == doctest::Approx(std::sqrt(2.0)));
    CHECK(box.eval({0, 0, 0}) == doctest::Approx(-1.0));

    const SdfScene torus = SdfScene::parse("torus c=0,0,0 R=1 r=0.25\nbounds min=-2,-2,-1 max=2,2,1\n");
    CHECK(torus.eval({1, 0, 0}) == doctest::Approx(-0.25));
    CHECK(torus.eval({0, 0, 0}) == doctest::Approx(0.75));
    CHECK(torus.eval({0, 2, 0.5}) == doctest::Approx(std::sqrt(1.25) - 0.25));

    const SdfScene rb = SdfScene::parse("roundbox c=0,0,0 h=1,1,1 r=0.2\nbounds min=-2,-2,-2 max=2,2,2\n");
    CHECK(rb.eval({2, 0, 0}) == doctest::Approx(1.0));
    // corner rounding: distance to the rounding sphere centred at (0.8,0.8,0.8)
    CHECK(rb.eval({2, 2, 2}) == doctest::Approx(std::sqrt(3.0) * 1.2 - 0.2));

    const SdfScene plane = SdfScene::parse("plane n=0,0,2 d=0.5\nbounds min=-1,-1,-1 max=1,1,1\n");
    CHECK(plane.eval({0.3, -0.2, 1.5}) == doctest::Approx(1.0));
}

TEST_CASE("sdf: normals match analytic gradients")
{
    const SdfScene s = sphere_scene(1.0);
    const SdfParams p = SdfParams::defaults_for(s);
    const Vec3 n = sdf_normal(s, {0, 0, 1}, p.normal_h);
    CHECK(length(n - Vec3{0, 0, 1}) < 1e-3);
    CHECK_THROWS_AS(sdf_normal(s, {0, 0, 0}, p.normal_h), DegenerateNormalError);

    Rng rng(17);
    const SdfScene torus = SdfScene::parse("torus c=0.1,0,0 R=1 r=0.3\nbounds min=-2,-2,-1 max=2,2,1\n");
    const SdfScene box = SdfScene::parse("box c=0,0,0 h=1,0.5,0.7\nbounds min=-2,-2,-2 max=2,2,2\n");
    const double h_t = 1e-4 * torus.diagonal(), h_b = 1e-4 * box.diagonal(), h_s = 1e-4 * s.diagonal();
    for (int i = 0; i < 2000; ++i) {
        const Vec3 d = random_unit(rng);
        // sphere
        const Vec3 ps = d * rng.uniform(0.5, 1.5);
        CHECK(angle_deg(sdf_normal(s, ps, h_s), d) < 0.1);
        // torus: gradient points from the ring circle
        const double phi = rng.uniform(0, 2 * kPi), th = rng.uniform(0, 2 * kPi), rho = rng.uniform(0.1, 0.6);
        const Vec3 ring{0.1 + std::cos(phi), std::sin(phi), 0};
        const Vec3 dir{std::cos(th) * std::cos(phi), std::cos(th) * std::sin(phi), std::sin(th)};
        CHECK(angle_deg(sdf_normal(torus, ring + dir * rho, h_t), dir) < 0.1);
        // box face region outside: gradient is the face normal
        const Vec3 pb{1.0 + rng.uniform(0.01, 0.5), rng.uniform(-0.45, 0.45), rng.uniform(-0.65, 0.65)};
        CHECK(angle_deg(sdf_normal(box, pb, h_b), {1, 0, 0}) < 0.1);
    }
}

TEST_CASE("sdf: subtraction matches a dense-grid distance oracle")
{
    const SdfScene s = SdfScene::parse("box id=b c=0,0,0 h=1,1,1\nsphere id=s c=1,1,1 r=0.8\n"
                                       "op subtraction a=b b=s\nbounds min=-1.5,-1.5,-1.5 max=1.5,1.5,1.5\n");
    auto solid = [](const Vec3& q) {
        const bool in_box = std::abs(q.x) <= 1 && std::abs(q.y) <= 1 && std::abs(q.z) <= 1;
        return in_box && length(q - Vec3{1, 1, 1}) >= 0.8;
    };
    const double g = 0.01;
    for (const Vec3 p : {Vec3{0.8, 0.8, 0.8}, Vec3{0.9, 0.7, 0.95}, Vec3{0.6, 0.95, 0.9}}) {
        REQUIRE_FALSE(solid(p));
        const double d = s.eval(p);
        CHECK(d > 0.0);
        double oracle = INFINITY;
        const int n = static_cast<int>(std::ceil((d + 0.1) / g));
        for (int i = -n; i <= n; ++i)
            for (int j = -n; j <= n; ++j)
                for (int k = -n; k <= n; ++k) {
                    const Vec3 q = p + Vec3{i * g, j * g, k * g};
                    if (solid(q)) oracle = std::min(oracle, length(q - p));
                }
        CHECK(std::abs(d - oracle) < 2 * g);
    }
}

TEST_CASE("sphere trace: analytic hits, misses and step exhaustion")
{
    const SdfScene s = sphere_scene(1.0);
    SdfParams p = SdfParams::defaults_for(s);
    const RayHit h = sphere_trace(s, {{-3, 0, 0}, {1, 0, 0}}, p);
    REQUIRE(h.hit);
    CHECK(std::abs(h.t - 2.0) <= p.hit_eps);
    CHECK(length(h.position - Vec3{-1, 0, 0}) <= 2 * p.hit_eps);
    CHECK(length(h.normal - Vec3{-1, 0, 0}) < 1e-3);

    CHECK_FALSE(sphere_trace(s, {{-3, 0, 0}, {-1, 0, 0}}, p).hit);
    CHECK_FALSE(sphere_trace(s, {{-3, 5, 0}, {1, 0, 0}}, p).hit);  // outside the bounds entirely

    SdfParams few = p;
    few.max_steps = 8;
    const Ray grazing{{-3, 1.0 + 2e-4, 0}, {1, 0, 0}};
    CHECK_FALSE(sphere_trace(s, grazing, few).hit);
}

TEST_CASE("sphere trace: random rays against the quadratic solve")
{
    const SdfScene s = sphere_scene(1.0, {0.2, -0.1, 0.3});
    const SdfParams p = SdfParams::defaults_for(s);
    const Vec3 c{0.2, -0.1, 0.3};
    Rng rng(8);
    int hits = 0;
    for (int i = 0; i < 10000; ++i) {
        Ray ray;
        ray.origin = c + random_unit(rng) * rng.uniform(1.2, 1.9);
        ray.dir = normalize(c + random_unit(rng) * 0.9 - ray.origin);
        if (i % 3 == 0) ray.dir = random_unit(rng);
        // |o + t d - c|^2 = 1
        const Vec3 oc = ray.origin - c;
        const double b = dot(oc, ray.dir), cc = dot(oc, oc) - 1.0;
        const double disc = b * b - cc;
        const bool analytic_hit = disc >= 0.0 && -b - std::sqrt(disc) > 0.0;
        const RayHit h = sphere_trace(s, ray, p);
        if (h.hit) {
            CHECK(s.eval(h.position) <= 2 * p.hit_eps);
            if (analytic_hit) {
                ++hits;
                CHECK(std::abs(h.t - (-b - std::sqrt(disc))) < 10 * p.hit_eps);
            } else {
                // only grazing misses may be reported as hits
                CHECK(disc > -1e-3);
            }
        } else if (analytic_hit) {
            // a miss on a true hit is only tolerated for near-tangent rays
            CHECK(disc < 1e-3);
        }
    }
    CHECK(hits > 4000);
}

TEST_CASE("marching cubes: sphere accuracy, orientation and closure")
{
    const SdfScene s = sphere_scene(0.8, {}, 1.0);
    const TriangleMesh m = marching_cubes(s, 64, s.bounds());
    const double cell_diag = s.diagonal() / 64.0;
    for (const auto& v : m.vertices) CHECK(std::abs(s.eval(v)) < cell_diag);
    CHECK(std::abs(m.surface_area() - 4 * kPi * 0.64) < 0.05 * 8.042);
    CHECK(closed_and_oriented(m));
    for (std::size_t t = 0; t < m.triangles.size(); ++t) CHECK(dot(m.geometric_normal(t), m.point(t, {1. / 3, 1. / 3, 1. / 3})) > 0.0);
    m.validate();
}

TEST_CASE("marching cubes: every case is closed under random fields")
{
    // many tiny blobs produce every ambiguous face configuration
    std::string text;
    Rng rng(3);
    for (int i = 0; i < 40; ++i) {
        text += "sphere c=" + std::to_string(rng.uniform(-0.7, 0.7)) + "," + std::to_string(rng.uniform(-0.7, 0.7)) + "," +
                std::to_string(rng.uniform(-0.7, 0.7)) + " r=" + std::to_string(rng.uniform(0.03, 0.2)) + "\n";
        if (i > 0) text += "op union a=" + std::to_string(2 * i - 1) + " b=" + std::to_string(2 * i) + "\n";
        if (i == 0) text += "op union a=0 b=0\n";
    }
    text += "bounds min=-1,-1,-1 max=1,1,1\n";
    const SdfScene s = SdfScene::parse(text);
    const TriangleMesh m = marching_cubes(s, 24, s.bounds());
    CHECK(closed_and_oriented(m));

    for (int c = 0; c < 256; ++c) {
        const auto& tris = mc_case(c);
        CHECK(tris.empty() == (c == 0 || c == 255));
    }
}

TEST_CASE("marching cubes: translation equivariance and errors")
{
    const double cell = 2.0 / 32.0;
    const Vec3 shift{8 * cell, -3 * cell, 5 * cell};
    const SdfScene a = sphere_scene(0.7, {}, 1.0);
    const SdfScene b = sphere_scene(0.7, shift, 1.0);
    const TriangleMesh ma = marching_cubes(a, 32, a.bounds());
    const TriangleMesh mb = marching_cubes(b, 32, b.bounds());
    REQUIRE(ma.vertices.size() == mb.vertices.size());
    CHECK(ma.triangles == mb.triangles);
    for (std::size_t i = 0; i < ma.vertices.size(); ++i) CHECK(length(mb.vertices[i] - shift - ma.vertices[i]) < 1e-9);

    CHECK_THROWS_AS(marching_cubes(a, 7, a.bounds()), InputError);
    CHECK_THROWS_AS(marching_cubes(a, 513, a.bounds()), InputError);
    Aabb far;
    far.expand({5, 5, 5});
    far.expand({6, 6, 6});
    CHECK_THROWS_AS(marching_cubes(a, 8, far), DataError);
}

TEST_CASE("projection: sphere fixed points")
{
    const SdfScene s = sphere_scene(1.0);
    const SdfParams p = SdfParams::defaults_for(s);
    const SurfaceSample x = project_to_sdf_surface(s, {1.5, 0, 0}, p);
    CHECK(length(x.position - Vec3{1, 0, 0}) < 1e-4);
    CHECK(length(x.normal - Vec3{1, 0, 0}) < 1e-3);
    const Vec3 on = normalize(Vec3{0.3, -0.4, 0.5});
    CHECK(length(project_to_sdf_surface(s, on, p).position - on) < p.hit_eps);
    CHECK_THROWS_AS(project_to_sdf_surface(s, {0, 0, 0}, p), DataError);
}

TEST_CASE("projection: torus marching-cubes vertices converge")
{
    const SdfScene t = SdfScene::parse("torus c=0,0,0 R=1 r=0.3\nbounds min=-1.5,-1.5,-0.5 max=1.5,1.5,0.5\n");
    const SdfParams p = SdfParams::defaults_for(t);
    const TriangleMesh m = marching_cubes(t, 64, t.bounds());
    std::size_t ok = 0;
    for (const auto& v : m.vertices) {
        try {
            const SurfaceSample x = project_to_sdf_surface(t, v, p);
            ok += std::abs(t.eval(x.position)) < 1e-4;
        } catch (const ProjectionError&) {
        }
    }
    CHECK(static_cast<double>(ok) >= 0.99 * static_cast<double>(m.vertices.size()));
}

TEST_CASE("surface: mesh and sdf dispatch")
{
    const auto sdf_path = write_temp("ball.sdf", "sphere c=0,0,0 r=1\nbounds min=-1.5,-1.5,-1.5 max=1.5,1.5,1.5\n");
    const Surface s = Surface::load(sdf_path);
    CHECK(s.is_sdf());
    const RayHit h = s.intersect({{-3, 0, 0}, {1, 0, 0}});
    CHECK(h.hit);
    CHECK(s.occluded({{-3, 0, 0}, {1, 0, 0}}));
    CHECK_FALSE(s.occluded({{-3, 0, 0}, {1, 0, 0}}, 1.5));

    const Surface m = Surface::from_mesh(unit_square_pair());
    CHECK(m.is_mesh());
    CHECK(m.intersect({{0.1, 0.1, 1}, {0, 0, -1}}).hit);
    CHECK(m.shading_normal(m.intersect({{0.1, 0.1, 1}, {0, 0, -1}})) == Vec3{0, 0, 1});
    CHECK_THROWS_AS(Surface::load(write_temp("x.ply", "")), InputError);
    CHECK_THROWS_AS(m.sdf(), InputError);
}
