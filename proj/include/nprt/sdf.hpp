#pragma once

// Analytic signed distance scenes built from primitives and CSG operators.
//
// Scene files are line oriented; '#' starts a comment. Every node line may
// carry `id=<name>`; nodes can also be referenced by their 0-based definition
// index. Vectors are comma separated without spaces.
//
//   sphere    [id=..] c=x,y,z r=R
//   box       [id=..] c=x,y,z h=hx,hy,hz
//   roundbox  [id=..] c=x,y,z h=hx,hy,hz r=R      (h includes the rounding)
//   torus     [id=..] c=x,y,z R=major r=minor      (ring in the xy plane)
//   plane     [id=..] n=x,y,z d=D                  (points with n.p = D)
//   op union|intersection|subtraction [id=..] a=<ref> b=<ref>
//   op smooth_union [id=..] k=K a=<ref> b=<ref>
//   root <ref>                                     (default: last node)
//   bounds min=x,y,z max=x,y,z                     (required)
//
// subtraction is a minus b.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nprt/common.hpp"
#include "nprt/geometry_types.hpp"

namespace nprt {

class DegenerateNormalError : public NumericError {
public:
    using NumericError::NumericError;
};

class ProjectionError : public DataError {
public:
    using DataError::DataError;
};

struct SdfNode {
    enum class Kind { Sphere, Box, RoundBox, Torus, Plane, Union, Intersection, Subtraction, SmoothUnion };

    Kind kind = Kind::Sphere;
    Vec3 center;
    Vec3 half;           // box half-extents
    Vec3 normal;         // plane
    double radius = 0;   // sphere / roundbox rounding / torus minor radius
    double major = 0;    // torus
    double offset = 0;   // plane
    double k = 0;        // smooth union blend width
    int a = -1, b = -1;  // operator operands
};

class SdfScene {
public:
    SdfScene() = default;
    SdfScene(std::vector<SdfNode> nodes, int root, Aabb bounds);

    static SdfScene parse(const std::string& text, const std::string& source_name = "<string>");
    static SdfScene load(const std::filesystem::path& path);

    double eval(const Vec3& p) const { return eval_node(root_, p); }
    const Aabb& bounds() const { return bounds_; }
    double diagonal() const { return bounds_.diagonal(); }
    bool has_blends() const { return has_blends_; }
    const std::vector<SdfNode>& nodes() const { return nodes_; }
    int root() const { return root_; }

private:
    double eval_node(int index, const Vec3& p) const;

    std::vector<SdfNode> nodes_;
    int root_ = -1;
    Aabb bounds_;
    bool has_blends_ = false;
};

// Tracing/normal parameters. Defaults scale with the scene diagonal.
struct SdfParams {
    double hit_eps = 1e-4;
    int max_steps = 256;
    double t_max = 4.0;
    double normal_h = 1e-4;     // central-difference step
    double project_eps = 1e-6;  // |sdf| tolerance for surface projection
    double step_scale = 1.0;    // < 1 when the scene has smooth blends

    static SdfParams defaults_for(const SdfScene& scene);
};

double sdf_eval(const SdfScene& scene, const Vec3& p);

// normalize(grad sdf) by central differences with step h. Throws
// DegenerateNormalError when |grad| < 1e-9.
Vec3 sdf_normal(const SdfScene& scene, const Vec3& p, double h);

// March t += step_scale * sdf(origin + t dir) until sdf < hit_eps (hit), t > t_max
// or the step budget runs out (both misses). Marching is clipped to the scene
// bounds, which contain the whole zero level set.
RayHit sphere_trace(const SdfScene& scene, const Ray& ray, const SdfParams& params);

// Visibility test. Unlike sphere_trace, running out of steps counts as
// blocked: grazing rays in cavities would otherwise leak.
bool sphere_trace_occluded(const SdfScene& scene, const Ray& ray, const SdfParams& params);

// Newton-style projection p <- p - sdf(p) * normalize(grad sdf(p)) until
// |sdf| < params.project_eps. Throws ProjectionError after `iters` steps.
SurfaceSample project_to_sdf_surface(const SdfScene& scene, const Vec3& p, const SdfParams& params, int iters = 32);

}  // namespace nprt
