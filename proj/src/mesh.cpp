#include "nprt/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

namespace nprt {

void TriangleMesh::validate() const
{
    const auto nv = vertices.size();
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        for (auto idx : triangles[t])
            if (idx >= nv) throw DataError("triangle " + std::to_string(t) + " references missing vertex " + std::to_string(idx));
        if (!(triangle_area(t) > 1e-12)) throw DataError("triangle " + std::to_string(t) + " is degenerate");
    }
    if (!normals.empty()) {
        if (normals.size() != nv) throw DataError("vertex normal count does not match vertex count");
        for (const auto& n : normals)
            if (std::abs(length(n) - 1.0) > 1e-4) throw DataError("vertex normal is not unit length");
    }
    if (!vertex_transfer.empty() && vertex_transfer.size() != nv)
        throw DataError("per-vertex transfer count does not match vertex count");
}

double TriangleMesh::triangle_area(std::size_t t) const
{
    const auto& tri = triangles[t];
    const Vec3 e1 = vertices[tri[1]] - vertices[tri[0]];
    const Vec3 e2 = vertices[tri[2]] - vertices[tri[0]];
    return 0.5 * length(cross(e1, e2));
}

Vec3 TriangleMesh::geometric_normal(std::size_t t) const
{
    const auto& tri = triangles[t];
    return normalize(cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]));
}

double TriangleMesh::surface_area() const
{
    double a = 0.0;
    for (std::size_t t = 0; t < triangles.size(); ++t) a += triangle_area(t);
    return a;
}

Aabb TriangleMesh::bounds() const
{
    Aabb b;
    for (const auto& v : vertices) b.expand(v);
    return b;
}

Vec3 TriangleMesh::shading_normal(std::size_t t, const Vec3& bary) const
{
    if (normals.empty()) return geometric_normal(t);
    const auto& tri = triangles[t];
    const Vec3 n = normals[tri[0]] * bary.x + normals[tri[1]] * bary.y + normals[tri[2]] * bary.z;
    const double len = length(n);
    return len > 1e-12 ? n / len : geometric_normal(t);
}

Vec3 TriangleMesh::point(std::size_t t, const Vec3& bary) const
{
    const auto& tri = triangles[t];
    return vertices[tri[0]] * bary.x + vertices[tri[1]] * bary.y + vertices[tri[2]] * bary.z;
}

void TriangleMesh::compute_vertex_normals()
{
    normals.assign(vertices.size(), Vec3{});
    for (const auto& tri : triangles) {
        // cross product length is twice the area: area weighting for free
        const Vec3 n = cross(vertices[tri[1]] - vertices[tri[0]], vertices[tri[2]] - vertices[tri[0]]);
        for (auto idx : tri) normals[idx] += n;
    }
    for (auto& n : normals) {
        const double len = length(n);
        n = len > 0.0 ? n / len : Vec3{0, 0, 1};
    }
}

// --- OBJ -----------------------------------------------------------------------

namespace {

[[noreturn]] void obj_error(const std::filesystem::path& path, int line, const std::string& what)
{
    throw FormatError(path.string() + ":" + std::to_string(line) + ": " + what);
}

double parse_double(std::string_view tok, const std::filesystem::path& path, int line)
{
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        obj_error(path, line, "invalid number '" + std::string(tok) + "'");
    return v;
}

long parse_index(std::string_view tok, std::size_t count, const std::filesystem::path& path, int line)
{
    long v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size()) obj_error(path, line, "invalid index '" + std::string(tok) + "'");
    if (v == 0) obj_error(path, line, "index 0 is invalid (OBJ indices are 1-based)");
    const long resolved = v > 0 ? v - 1 : static_cast<long>(count) + v;
    if (resolved < 0 || resolved >= static_cast<long>(count)) obj_error(path, line, "index " + std::to_string(v) + " out of range");
    return resolved;
}

}  // namespace

TriangleMesh load_obj(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open OBJ file '" + path.string() + "'");

    std::vector<Vec3> positions, file_normals;
    struct Corner {
        long v, vn;  // vn = -1 when absent
    };
    std::vector<std::vector<Corner>> faces;

    std::string text;
    int line_no = 0;
    while (std::getline(in, text)) {
        ++line_no;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        std::istringstream ls(text);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v" || tag == "vn") {
            std::string a, b, c;
            if (!(ls >> a >> b >> c)) obj_error(path, line_no, "expected three coordinates");
            const Vec3 p{parse_double(a, path, line_no), parse_double(b, path, line_no), parse_double(c, path, line_no)};
            (tag == "v" ? positions : file_normals).push_back(p);
        } else if (tag == "f") {
            std::vector<Corner> face;
            std::string tok;
            while (ls >> tok) {
                const auto s1 = tok.find('/');
                const std::string_view all(tok);
                Corner c{parse_index(all.substr(0, s1), positions.size(), path, line_no), -1};
                if (s1 != std::string::npos) {
                    const auto s2 = tok.find('/', s1 + 1);
                    if (s2 != std::string::npos && s2 + 1 < tok.size())
                        c.vn = parse_index(all.substr(s2 + 1), file_normals.size(), path, line_no);
                }
                face.push_back(c);
            }
            if (face.size() < 3) obj_error(path, line_no, "face needs at least three vertices");
            faces.push_back(std::move(face));
        }
        // other records (vt, o, g, s, usemtl, mtllib) are ignored
    }
    if (faces.empty()) throw FormatError(path.string() + ": no faces");

    bool all_normals = !file_normals.empty();
    for (const auto& f : faces)
        for (const auto& c : f)
            if (c.vn < 0) all_normals = false;

    TriangleMesh mesh;
    std::vector<std::uint32_t> corner_vertex;
    if (all_normals) {
        std::map<std::pair<long, long>, std::uint32_t> remap;
        for (const auto& f : faces) {
            for (const auto& c : f) {
                auto [it, inserted] = remap.try_emplace({c.v, c.vn}, static_cast<std::uint32_t>(mesh.vertices.size()));
                if (inserted) {
                    mesh.vertices.push_back(positions[static_cast<std::size_t>(c.v)]);
                    const Vec3 n = file_normals[static_cast<std::size_t>(c.vn)];
                    const double len = length(n);
                    if (!(len > 1e-12)) throw FormatError(path.string() + ": zero-length vertex normal");
                    mesh.normals.push_back(n / len);
                }
                corner_vertex.push_back(it->second);
            }
        }
    } else {
        mesh.vertices = positions;
        for (const auto& f : faces)
            for (const auto& c : f) corner_vertex.push_back(static_cast<std::uint32_t>(c.v));
    }

    std::size_t k = 0;
    for (const auto& f : faces) {
        for (std::size_t i = 1; i + 1 < f.size(); ++i)
            mesh.triangles.push_back({corner_vertex[k], corner_vertex[k + i], corner_vertex[k + i + 1]});
        k += f.size();
    }
    mesh.validate();
    return mesh;
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path)
{
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out.precision(17);
    for (const auto& v : mesh.vertices) out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
    for (const auto& n : mesh.normals) out << "vn " << n.x << ' ' << n.y << ' ' << n.z << '\n';
    for (const auto& t : mesh.triangles) {
        out << 'f';
        for (auto idx : t) {
            out << ' ' << idx + 1;
            if (mesh.has_normals()) out << "//" << idx + 1;
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: '" + path.string() + "'");
}

// --- sampling ------------------------------------------------------------------

std::vector<MeshSample> sample_surface_detailed(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed)
{
    if (mesh.triangles.empty()) throw InputError("cannot sample an empty mesh");
    if (count == 0) throw InputError("sample count must be at least 1");

    std::vector<double> cdf(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        total += mesh.triangle_area(t);
        cdf[t] = total;
    }

    std::vector<MeshSample> out(count);
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < count; ++s) {
        Rng rng(derive_seed(seed, s));
        const double pick = rng.uniform() * total;
        auto it = std::upper_bound(cdf.begin(), cdf.end(), pick);
        const auto t = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
        const double su = std::sqrt(rng.uniform());
        const double v = rng.uniform();
        const double b0 = 1.0 - su;
        const double b1 = v * su;
        const Vec3 bary{b0, b1, 1.0 - b0 - b1};
        out[s] = {{mesh.point(t, bary), mesh.shading_normal(t, bary)}, static_cast<std::uint32_t>(t), bary};
    }
    return out;
}

std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed)
{
    const auto detailed = sample_surface_detailed(mesh, count, seed);
    std::vector<SurfaceSample> out;
    out.reserve(detailed.size());
    for (const auto& d : detailed) out.push_back(d.sample);
    return out;
}

}  // namespace nprt
