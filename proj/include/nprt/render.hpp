#pragma once

// Deferred CPU renderer: primary-ray G-buffer, fragment packing, PRT shading
// with any transfer source, and learnt-vs-reference comparison.
//
// Environment maps are equirectangular with +z up: pixel (u, v) of a W x H
// map looks along theta = pi (v + 0.5) / H from +z and phi = 2 pi (u + 0.5) / W
// from +x towards +y.

#include <array>
#include <span>

#include "nprt/bake.hpp"
#include "nprt/image.hpp"
#include "nprt/metrics.hpp"
#include "nprt/mlp.hpp"
#include "nprt/surface.hpp"

namespace nprt {

struct Camera {
    Vec3 eye{0, -4, 2};
    Vec3 look_at{0, 0, 0.5};
    Vec3 up{0, 0, 1};
    double fov_deg = 45.0;  // vertical
    int width = 256;
    int height = 256;

    // FOV in (1, 179) degrees, positive size, up not parallel to the view.
    void validate() const;
    // Ray through the centre of pixel (x, y); row 0 is the top.
    Ray primary_ray(int x, int y) const;
};

// n cameras orbiting the look-at point about the up axis, starting at `base`
// and stepping 2 pi / n; height above the look-at point and distance are kept.
std::vector<Camera> orbit_cameras(const Camera& base, int n);

struct EnvironmentLight {
    std::array<SHVector, 3> rgb;

    int order() const { return rgb[0].order(); }
};

Vec3 equirect_direction(double u, double v, int width, int height);

// L_j = sum over pixels of L(w) y_j(w) (2pi / W)(pi / H) sin(theta).
EnvironmentLight project_envmap(const Image& env, int order);

// Uniform radiance c per channel: L_0 = 2 sqrt(pi) c, everything else 0.
EnvironmentLight constant_light(const std::array<double, 3>& c, int order);

struct Material {
    enum class Kind { Diffuse, Glossy };
    Kind kind = Kind::Diffuse;
    std::array<double, 3> albedo{1.0, 1.0, 1.0};
    double exponent = 32.0;  // Glossy only

    static Material diffuse(const std::array<double, 3>& albedo) { return {Kind::Diffuse, albedo, 0.0}; }
    static Material glossy(const std::array<double, 3>& albedo, double exponent) { return {Kind::Glossy, albedo, exponent}; }
    void validate() const;
};

struct GBufferPixel {
    bool hit = false;
    Vec3 position;
    Vec3 normal;  // unit shading normal
    Vec3 wo;      // unit, towards the eye
    std::uint32_t triangle = 0;
    Vec3 bary;
};

struct GBuffer {
    int width = 0;
    int height = 0;
    std::vector<GBufferPixel> pixels;  // row-major

    std::size_t hit_count() const;
};

GBuffer trace_gbuffer(const Surface& surface, const Camera& camera);

// Covered pixels in row-major order, structure-of-arrays.
struct Fragments {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> pixel;
    std::vector<Vec3> position;
    std::vector<Vec3> normal;
    std::vector<Vec3> wo;
    std::vector<std::uint32_t> triangle;
    std::vector<Vec3> bary;

    std::size_t size() const { return pixel.size(); }
};

Fragments pack_fragments(const GBuffer& gbuffer);

// Scatters `stride` values per fragment back to a width x height x stride
// frame; uncovered pixels get `fill`. Throws InputError on a length mismatch.
std::vector<double> unpack_fragments(std::span<const double> values, std::size_t stride, const Fragments& frags,
                                     double fill = 0.0);

// Where shading gets its transfer vectors from.
class TransferSource {
public:
    virtual ~TransferSource() = default;
    virtual int order() const = 0;
    // out: row-major frags.size() x order^2.
    virtual void evaluate(const Fragments& frags, std::vector<double>& out) const = 0;
};

class MlpTransfer : public TransferSource {
public:
    explicit MlpTransfer(const MlpModel& model) : model_(model) {}
    int order() const override { return model_.order; }
    void evaluate(const Fragments& frags, std::vector<double>& out) const override;

private:
    const MlpModel& model_;
};

// Bakes every fragment on the fly (the ground-truth reference). Fragment i
// uses ray seed derive_seed(seed, pixel index).
class BruteForceTransfer : public TransferSource {
public:
    BruteForceTransfer(const Surface& surface, std::size_t n_rays, int order, std::uint64_t seed)
        : surface_(surface), n_rays_(n_rays), order_(order), seed_(seed)
    {
    }
    int order() const override { return order_; }
    void evaluate(const Fragments& frags, std::vector<double>& out) const override;

private:
    const Surface& surface_;
    std::size_t n_rays_;
    int order_;
    std::uint64_t seed_;
};

// Classic PRT baseline: per-vertex baked transfer interpolated with the hit
// barycentrics. The mesh must be the one the G-buffer was traced against.
class VertexTransfer : public TransferSource {
public:
    // Throws DataError when the mesh carries no per-vertex bake.
    explicit VertexTransfer(const TriangleMesh& mesh);
    int order() const override { return mesh_.vertex_transfer.front().order(); }
    void evaluate(const Fragments& frags, std::vector<double>& out) const override;

private:
    const TriangleMesh& mesh_;
};

// Bakes one transfer vector per vertex of a mesh surface, using the vertex
// normals (computed when the mesh has none).
std::vector<SHVector> bake_vertex_transfer(const Surface& mesh_surface, const BakeConfig& cfg);

// Calls source.evaluate once and checks the result size.
std::vector<double> evaluate_transfer(const TransferSource& source, const Fragments& frags);

// Shades fragments from precomputed transfer; touches nothing but its
// arguments. Diffuse: albedo / pi * sum_i T_i L_i. Glossy: H = tau(T, L),
// zonal convolution with the Phong lobe scaled by (e + 1) / 2pi, evaluated at
// the reflection of wo, times albedo. Negative radiance is clamped to 0 and
// uncovered pixels are black. `tau` may be null for diffuse materials.
Image shade_fragments(const Fragments& frags, std::span<const double> transfer, int order, const EnvironmentLight& light,
                      const Material& material, const TripleProductTensor* tau);

Image shade(const GBuffer& gbuffer, const TransferSource& source, const EnvironmentLight& light, const Material& material,
            const TripleProductTensor* tau);

struct CompareResult {
    Image learnt;
    Image reference;
    MetricsReport metrics;
};

CompareResult render_compare(const GBuffer& gbuffer, const TransferSource& learnt, const TransferSource& reference,
                             const EnvironmentLight& light, const Material& material, const TripleProductTensor* tau);

}  // namespace nprt
