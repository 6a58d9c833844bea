#pragma once

#include <filesystem>
#include <memory>

#include "nprt/bvh.hpp"
#include "nprt/mesh.hpp"
#include "nprt/sdf.hpp"

namespace nprt {

// A scene surface: either a triangle mesh with its BVH or an analytic SDF.
// Cheap to copy; the underlying geometry is shared and immutable.
class Surface {
public:
    Surface() = default;
    static Surface from_mesh(TriangleMesh mesh);
    static Surface from_sdf(SdfScene scene);
    static Surface from_sdf(SdfScene scene, const SdfParams& params);

    // Picks the representation from the extension: .obj or .sdf.
    static Surface load(const std::filesystem::path& path);

    bool is_mesh() const { return mesh_ != nullptr; }
    bool is_sdf() const { return sdf_ != nullptr; }
    const TriangleMesh& mesh() const;
    const SdfScene& sdf() const;
    const SdfParams& sdf_params() const { return params_; }

    Aabb bounds() const { return bounds_; }
    double diagonal() const { return bounds_.diagonal(); }
    // Secondary-ray origin offset.
    double t_eps() const { return 1e-4 * diagonal(); }

    // Nearest hit with t in (0, t_max) for meshes, or the sphere-trace hit.
    RayHit intersect(const Ray& ray, double t_max = INFINITY) const;
    bool occluded(const Ray& ray, double t_max = INFINITY) const;

    // Normal used for shading at a hit: interpolated vertex normal on meshes,
    // the SDF gradient direction otherwise.
    Vec3 shading_normal(const RayHit& hit) const;

private:
    std::shared_ptr<const TriangleMesh> mesh_;
    std::shared_ptr<const Bvh> bvh_;
    std::shared_ptr<const SdfScene> sdf_;
    SdfParams params_;
    Aabb bounds_;
};

}  // namespace nprt
