#pragma once

#include <cstdint>
#include <vector>

#include "nprt/geometry_types.hpp"
#include "nprt/mesh.hpp"

namespace nprt {

// Precomputed edge form of one triangle. Built the same way for the BVH and
// for brute-force reference loops, so both see bit-identical arithmetic.
struct TriangleRecord {
    Vec3 v0, e1, e2;
};

TriangleRecord make_triangle_record(const TriangleMesh& mesh, std::size_t t);

// Moller-Trumbore. On a hit with t in (t_min, t_max) writes t and the
// barycentric weights (u, v) of vertices 1 and 2.
bool intersect_triangle(const Ray& ray, const TriangleRecord& tri, double t_min, double t_max, double& t, double& u,
                        double& v);

class Bvh {
public:
    Bvh() = default;
    explicit Bvh(const TriangleMesh& mesh);

    // Nearest hit with t in (t_min, t_max). Equal t resolves to the lowest
    // triangle index. Fills triangle, t, bary and the geometric normal.
    RayHit intersect(const Ray& ray, double t_min, double t_max) const;

    // Any hit with t in (t_min, t_max).
    bool occluded(const Ray& ray, double t_min, double t_max) const;

    std::size_t node_count() const { return nodes_.size(); }
    const Aabb& bounds() const { return bounds_; }

private:
    struct Node {
        Vec3 lo, hi;
        std::uint32_t first = 0;  // leaf: first primitive; inner: right child
        std::uint32_t count = 0;  // 0 for inner nodes
        std::uint8_t axis = 0;
    };

    std::uint32_t build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids,
                        std::vector<Aabb>& boxes);

    std::vector<Node> nodes_;
    std::vector<std::uint32_t> order_;      // primitive order within leaves
    std::vector<TriangleRecord> records_;   // in leaf order
    std::vector<Vec3> normals_;             // geometric normal per triangle (mesh order)
    Aabb bounds_;
};

}  // namespace nprt
