#include "nprt/render.hpp"

namespace nprt {

void Camera::validate() const
{
    if (!(fov_deg > 1.0 && fov_deg < 179.0)) throw InputError("camera FOV must be in (1, 179) degrees");
    if (width < 1 || height < 1) throw InputError("image size must be positive");
    if (!is_finite(eye) || !is_finite(look_at) || !is_finite(up)) throw InputError("camera vectors must be finite");
    const Vec3 f = look_at - eye;
    if (length(f) < 1e-12) throw InputError("camera eye and look-at coincide");
    if (length(up) < 1e-12 || length(cross(normalize(f), normalize(up))) < 1e-6)
        throw InputError("camera up vector is parallel to the view direction");
}

Ray Camera::primary_ray(int x, int y) const
{
    const Vec3 f = normalize(look_at - eye);
    const Vec3 r = normalize(cross(f, up));
    const Vec3 u = cross(r, f);
    const double th = std::tan(0.5 * fov_deg * kPi / 180.0);
    const double aspect = static_cast<double>(width) / static_cast<double>(height);
    const double sx = (2.0 * (x + 0.5) / width - 1.0) * th * aspect;
    const double sy = (1.0 - 2.0 * (y + 0.5) / height) * th;
    return {eye, normalize(f + r * sx + u * sy)};
}

std::vector<Camera> orbit_cameras(const Camera& base, int n)
{
    base.validate();
    if (n < 1) throw InputError("orbit needs at least one view");
    const Vec3 axis = normalize(base.up);
    const Vec3 d = base.eye - base.look_at;
    const Vec3 along = axis * dot(d, axis);
    const Vec3 r0 = d - along;
    const Vec3 r1 = cross(axis, r0);
    std::vector<Camera> out;
    for (int i = 0; i < n; ++i) {
        const double a = 2.0 * kPi * i / n;
        Camera c = base;
        c.eye = base.look_at + along + r0 * std::cos(a) + r1 * std::sin(a);
        out.push_back(c);
    }
    return out;
}

Vec3 equirect_direction(double u, double v, int width, int height)
{
    const double theta = kPi * (v + 0.5) / height;
    const double phi = 2.0 * kPi * (u + 0.5) / width;
    return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

EnvironmentLight project_envmap(const Image& env, int order)
{
    if (env.width < 1 || env.height < 1) throw InputError("environment map has no pixels");
    if (order < 1 || order > kMaxShOrder) throw InputError("invalid SH order");
    if (!env.all_finite()) throw DataError("environment map has non-finite pixels");
    EnvironmentLight light{{SHVector(order), SHVector(order), SHVector(order)}};
    std::vector<double> y(static_cast<std::size_t>(sh_count(order)));
    const double dA = (2.0 * kPi / env.width) * (kPi / env.height);
    for (int v = 0; v < env.height; ++v) {
        const double dw = dA * std::sin(kPi * (v + 0.5) / env.height);
        for (int u = 0; u < env.width; ++u) {
            sh_basis_into(equirect_direction(u, v, env.width, env.height), order, y);
            const float* px = env.at(u, v);
            for (int c = 0; c < 3; ++c)
                for (std::size_t j = 0; j < y.size(); ++j) light.rgb[static_cast<std::size_t>(c)][j] += px[c] * y[j] * dw;
        }
    }
    return light;
}

EnvironmentLight constant_light(const std::array<double, 3>& c, int order)
{
    EnvironmentLight light{{SHVector(order), SHVector(order), SHVector(order)}};
    for (std::size_t i = 0; i < 3; ++i) light.rgb[i][0] = 2.0 * std::sqrt(kPi) * c[i];
    return light;
}

void Material::validate() const
{
    for (double a : albedo)
        if (!(a >= 0.0 && a <= 1.0)) throw InputError("albedo must be in [0, 1]");
    if (kind == Kind::Glossy && !(exponent > 0.0 && std::isfinite(exponent)))
        throw InputError("Phong exponent must be positive and finite");
}

std::size_t GBuffer::hit_count() const
{
    return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](const GBufferPixel& p) { return p.hit; }));
}

GBuffer trace_gbuffer(const Surface& surface, const Camera& camera)
{
    camera.validate();
    GBuffer g;
    g.width = camera.width;
    g.height = camera.height;
    g.pixels.resize(static_cast<std::size_t>(g.width) * static_cast<std::size_t>(g.height));
    const long long n = static_cast<long long>(g.pixels.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long long i = 0; i < n; ++i) {
        const int x = static_cast<int>(i % g.width), y = static_cast<int>(i / g.width);
        const Ray ray = camera.primary_ray(x, y);
        const RayHit hit = surface.intersect(ray);
        GBufferPixel& px = g.pixels[static_cast<std::size_t>(i)];
        if (!hit.hit) continue;
        px.hit = true;
        px.position = hit.position;
        px.normal = surface.shading_normal(hit);
        px.wo = -ray.dir;
        px.triangle = hit.triangle;
        px.bary = hit.bary;
    }
    return g;
}

Fragments pack_fragments(const GBuffer& g)
{
    Fragments f;
    f.width = g.width;
    f.height = g.height;
    const std::size_t n = g.hit_count();
    f.pixel.reserve(n);
    f.position.reserve(n);
    f.normal.reserve(n);
    f.wo.reserve(n);
    f.triangle.reserve(n);
    f.bary.reserve(n);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) {
        const GBufferPixel& p = g.pixels[i];
        if (!p.hit) continue;
        f.pixel.push_back(static_cast<std::uint32_t>(i));
        f.position.push_back(p.position);
        f.normal.push_back(p.normal);
        f.wo.push_back(p.wo);
        f.triangle.push_back(p.triangle);
        f.bary.push_back(p.bary);
    }
    return f;
}

std::vector<double> unpack_fragments(std::span<const double> values, std::size_t stride, const Fragments& frags, double fill)
{
    if (values.size() != frags.size() * stride) throw InputError("fragment value count does not match the fragment list");
    std::vector<double> out(static_cast<std::size_t>(frags.width) * static_cast<std::size_t>(frags.height) * stride, fill);
    for (std::size_t i = 0; i < frags.size(); ++i)
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * stride), stride,
                    out.begin() + static_cast<std::ptrdiff_t>(frags.pixel[i] * stride));
    return out;
}

void MlpTransfer::evaluate(const Fragments& frags, std::vector<double>& out) const
{
    forward_batch(model_, frags.position, frags.normal, out);
}

void BruteForceTransfer::evaluate(const Fragments& frags, std::vector<double>& out) const
{
    const auto nc = static_cast<std::size_t>(sh_count(order_));
    out.assign(frags.size() * nc, 0.0);
    const long long n = static_cast<long long>(frags.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (long long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const SHVector t = bake_transfer(surface_, {frags.position[k], frags.normal[k]}, n_rays_, order_,
                                         derive_seed(seed_, frags.pixel[k]));
        std::copy(t.coeffs().begin(), t.coeffs().end(), out.begin() + static_cast<std::ptrdiff_t>(k * nc));
    }
}

VertexTransfer::VertexTransfer(const TriangleMesh& mesh) : mesh_(mesh)
{
    if (!mesh.has_vertex_transfer() || mesh.vertex_transfer.size() != mesh.vertices.size())
        throw DataError("mesh has no per-vertex transfer bake");
}

void VertexTransfer::evaluate(const Fragments& frags, std::vector<double>& out) const
{
    const auto nc = static_cast<std::size_t>(sh_count(order()));
    out.assign(frags.size() * nc, 0.0);
    for (std::size_t i = 0; i < frags.size(); ++i) {
        if (frags.triangle[i] >= mesh_.triangles.size()) throw InputError("fragment triangle index is out of range");
        const auto& tri = mesh_.triangles[frags.triangle[i]];
        for (int v = 0; v < 3; ++v) {
            const SHVector& t = mesh_.vertex_transfer[tri[static_cast<std::size_t>(v)]];
            const double w = frags.bary[i][v];
            for (std::size_t c = 0; c < nc; ++c) out[i * nc + c] += w * t[c];
        }
    }
}

std::vector<SHVector> bake_vertex_transfer(const Surface& surface, const BakeConfig& cfg)
{
    TriangleMesh mesh = surface.mesh();
    if (!mesh.has_normals()) mesh.compute_vertex_normals();
    std::vector<SHVector> out(mesh.vertices.size(), SHVector(cfg.order));
    const long long n = static_cast<long long>(mesh.vertices.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (long long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        out[k] = bake_transfer(surface, {mesh.vertices[k], mesh.normals[k]}, cfg.n_rays, cfg.order, derive_seed(cfg.seed, k));
    }
    return out;
}

std::vector<double> evaluate_transfer(const TransferSource& source, const Fragments& frags)
{
    std::vector<double> out;
    source.evaluate(frags, out);
    if (out.size() != frags.size() * static_cast<std::size_t>(sh_count(source.order())))
        throw DataError("transfer source returned the wrong number of coefficients");
    return out;
}

Image shade_fragments(const Fragments& frags, std::span<const double> transfer, int order, const EnvironmentLight& light,
                      const Material& material, const TripleProductTensor* tau)
{
    material.validate();
    const auto nc = static_cast<std::size_t>(sh_count(order));
    if (transfer.size() != frags.size() * nc) throw InputError("transfer buffer does not match the fragments");
    if (light.order() != order) throw InputError("light and transfer SH orders differ");
    const bool glossy = material.kind == Material::Kind::Glossy;

    std::array<std::vector<double>, 3> light_mats;
    ZonalCoeffs lobe;
    if (glossy) {
        if (!tau || tau->order() != order) throw InputError("glossy shading needs a triple product tensor of the transfer order");
        for (std::size_t c = 0; c < 3; ++c) light_mats[c] = light_matrix(light.rgb[c], *tau);
        lobe = phong_zonal_coeffs(material.exponent, order);
        for (double& h : lobe.values) h *= (material.exponent + 1.0) / (2.0 * kPi);
    }

    Image img(frags.width, frags.height);
    const long long n = static_cast<long long>(frags.size());
#pragma omp parallel for schedule(static)
    for (long long ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double* t = transfer.data() + i * nc;
        float* px = img.rgb.data() + 3 * static_cast<std::size_t>(frags.pixel[i]);
        if (!glossy) {
            for (std::size_t c = 0; c < 3; ++c) {
                double s = 0;
                for (std::size_t k = 0; k < nc; ++k) s += t[k] * light.rgb[c][k];
                px[c] = static_cast<float>(std::max(0.0, material.albedo[c] / kPi * s));
            }
            continue;
        }
        const Vec3& nrm = frags.normal[i];
        const Vec3& wo = frags.wo[i];
        const Vec3 r = normalize(nrm * (2.0 * dot(nrm, wo)) - wo);
        for (std::size_t c = 0; c < 3; ++c) {
            SHVector h(order);
            const std::vector<double>& m = light_mats[c];
            for (std::size_t a = 0; a < nc; ++a) {
                if (t[a] == 0.0) continue;
                for (std::size_t k = 0; k < nc; ++k) h[k] += t[a] * m[a * nc + k];
            }
            const double v = sh_eval_expansion(zonal_convolve(h, lobe), r) * material.albedo[c];
            px[c] = static_cast<float>(std::max(0.0, v));
        }
    }
    return img;
}

Image shade(const GBuffer& gbuffer, const TransferSource& source, const EnvironmentLight& light, const Material& material,
            const TripleProductTensor* tau)
{
    const Fragments frags = pack_fragments(gbuffer);
    const std::vector<double> t = evaluate_transfer(source, frags);
    return shade_fragments(frags, t, source.order(), light, material, tau);
}

CompareResult render_compare(const GBuffer& gbuffer, const TransferSource& learnt, const TransferSource& reference,
                             const EnvironmentLight& light, const Material& material, const TripleProductTensor* tau)
{
    const Fragments frags = pack_fragments(gbuffer);
    CompareResult r;
    r.learnt = shade_fragments(frags, evaluate_transfer(learnt, frags), learnt.order(), light, material, tau);
    r.reference = shade_fragments(frags, evaluate_transfer(reference, frags), reference.order(), light, material, tau);
    r.metrics = compare_images(r.learnt, r.reference);
    return r;
}

}  // namespace nprt
