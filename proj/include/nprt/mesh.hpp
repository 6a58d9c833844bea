#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "nprt/common.hpp"
#include "nprt/geometry_types.hpp"
#include "nprt/sh.hpp"

namespace nprt {

class TriangleMesh {
public:
    using Triangle = std::array<std::uint32_t, 3>;

    std::vector<Vec3> vertices;
    std::vector<Triangle> triangles;
    std::vector<Vec3> normals;              // empty, or one unit normal per vertex
    std::vector<SHVector> vertex_transfer;  // empty, or one baked vector per vertex

    bool has_normals() const { return !normals.empty(); }
    bool has_vertex_transfer() const { return !vertex_transfer.empty(); }

    // Throws DataError on out-of-range indices, degenerate triangles
    // (area <= 1e-12) or non-unit vertex normals.
    void validate() const;

    double triangle_area(std::size_t t) const;
    Vec3 geometric_normal(std::size_t t) const;  // unit, from winding
    double surface_area() const;
    Aabb bounds() const;

    // Barycentric-interpolated, renormalized shading normal; falls back to the
    // geometric normal when the mesh has no vertex normals.
    Vec3 shading_normal(std::size_t t, const Vec3& bary) const;
    Vec3 point(std::size_t t, const Vec3& bary) const;

    // Area-weighted per-vertex normals.
    void compute_vertex_normals();
};

// ASCII OBJ with v/vn/f records. Polygons are fan-triangulated. When every face
// corner carries a normal index, each distinct (position, normal) pair becomes
// a mesh vertex and normals are renormalized; otherwise normals are ignored
// and vertices map 1:1 to `v` records. Errors carry the line number.
TriangleMesh load_obj(const std::filesystem::path& path);
void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

struct MeshSample {
    SurfaceSample sample;
    std::uint32_t triangle = 0;
    Vec3 bary;  // weights of the triangle's vertices 0, 1, 2
};

// Area-proportional triangle choice (CDF inversion) and a uniform point in
// the triangle via the square-root warp. Deterministic for a given seed.
std::vector<MeshSample> sample_surface_detailed(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);
std::vector<SurfaceSample> sample_surface(const TriangleMesh& mesh, std::size_t count, std::uint64_t seed);

}  // namespace nprt
