#include "nprt/surface.hpp"

namespace nprt {

Surface Surface::from_mesh(TriangleMesh mesh)
{
    mesh.validate();
    if (mesh.triangles.empty()) throw DataError("mesh has no triangles");
    Surface s;
    auto m = std::make_shared<const TriangleMesh>(std::move(mesh));
    s.bvh_ = std::make_shared<const Bvh>(*m);
    s.bounds_ = m->bounds();
    s.mesh_ = std::move(m);
    return s;
}

Surface Surface::from_sdf(SdfScene scene)
{
    const SdfParams params = SdfParams::defaults_for(scene);
    return from_sdf(std::move(scene), params);
}

Surface Surface::from_sdf(SdfScene scene, const SdfParams& params)
{
    Surface s;
    s.bounds_ = scene.bounds();
    s.sdf_ = std::make_shared<const SdfScene>(std::move(scene));
    s.params_ = params;
    return s;
}

Surface Surface::load(const std::filesystem::path& path)
{
    const auto ext = path.extension().string();
    if (ext == ".obj" || ext == ".OBJ") return from_mesh(load_obj(path));
    if (ext == ".sdf" || ext == ".SDF") return from_sdf(SdfScene::load(path));
    throw InputError("unknown scene type '" + ext + "' (expected .obj or .sdf)");
}

const TriangleMesh& Surface::mesh() const
{
    if (!mesh_) throw InputError("surface is not a mesh");
    return *mesh_;
}

const SdfScene& Surface::sdf() const
{
    if (!sdf_) throw InputError("surface is not an SDF");
    return *sdf_;
}

RayHit Surface::intersect(const Ray& ray, double t_max) const
{
    if (mesh_) return bvh_->intersect(ray, 0.0, t_max);
    if (sdf_) {
        SdfParams p = params_;
        p.t_max = std::min(p.t_max, t_max);
        return sphere_trace(*sdf_, ray, p);
    }
    return {};
}

bool Surface::occluded(const Ray& ray, double t_max) const
{
    if (mesh_) return bvh_->occluded(ray, 0.0, t_max);
    if (sdf_) {
        SdfParams p = params_;
        p.t_max = std::min(p.t_max, t_max);
        return sphere_trace_occluded(*sdf_, ray, p);
    }
    return false;
}

Vec3 Surface::shading_normal(const RayHit& hit) const
{
    if (mesh_) return mesh_->shading_normal(hit.triangle, hit.bary);
    return hit.normal;
}

}  // namespace nprt
