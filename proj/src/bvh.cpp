#include "nprt/bvh.hpp"

#include <algorithm>
#include <array>
#include <numeric>

namespace nprt {

TriangleRecord make_triangle_record(const TriangleMesh& mesh, std::size_t t)
{
    const auto& tri = mesh.triangles[t];
    const Vec3 v0 = mesh.vertices[tri[0]];
    return {v0, mesh.vertices[tri[1]] - v0, mesh.vertices[tri[2]] - v0};
}

bool intersect_triangle(const Ray& ray, const TriangleRecord& tri, double t_min, double t_max, double& t, double& u,
                        double& v)
{
    const Vec3 p = cross(ray.dir, tri.e2);
    const double det = dot(tri.e1, p);
    if (std::abs(det) < 1e-300) return false;
    const double inv = 1.0 / det;
    const Vec3 s = ray.origin - tri.v0;
    const double uu = dot(s, p) * inv;
    if (uu < 0.0 || uu > 1.0) return false;
    const Vec3 q = cross(s, tri.e1);
    const double vv = dot(ray.dir, q) * inv;
    if (vv < 0.0 || uu + vv > 1.0) return false;
    const double tt = dot(tri.e2, q) * inv;
    if (!(tt > t_min && tt < t_max)) return false;
    t = tt;
    u = uu;
    v = vv;
    return true;
}

namespace {

constexpr std::uint32_t kLeafSize = 4;
constexpr int kBins = 16;

// Slab test; returns entry distance or +inf on miss.
inline double slab(const Vec3& lo, const Vec3& hi, const Vec3& origin, const Vec3& inv_dir, double t_min,
                   double t_max)
{
    double t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double tn = (lo[a] - origin[a]) * inv_dir[a];
        double tf = (hi[a] - origin[a]) * inv_dir[a];
        if (tn > tf) std::swap(tn, tf);
        // NaN (0 * inf) comparisons fall through and keep the current interval
        t0 = tn > t0 ? tn : t0;
        t1 = tf < t1 ? tf : t1;
        if (t0 > t1) return INFINITY;
    }
    return t0;
}

}  // namespace

Bvh::Bvh(const TriangleMesh& mesh)
{
    const auto n = static_cast<std::uint32_t>(mesh.triangles.size());
    if (n == 0) return;
    std::vector<Aabb> boxes(n);
    std::vector<Vec3> centroids(n);
    normals_.resize(n);
    for (std::uint32_t t = 0; t < n; ++t) {
        for (auto idx : mesh.triangles[t]) boxes[t].expand(mesh.vertices[idx]);
        centroids[t] = boxes[t].center();
        normals_[t] = mesh.geometric_normal(t);
        bounds_.expand(boxes[t]);
    }
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * n);
    build(0, n, centroids, boxes);
    records_.reserve(n);
    for (auto t : order_) records_.push_back(make_triangle_record(mesh, t));
}

std::uint32_t Bvh::build(std::uint32_t begin, std::uint32_t end, std::vector<Vec3>& centroids, std::vector<Aabb>& boxes)
{
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Aabb box, cbox;
    for (std::uint32_t i = begin; i < end; ++i) {
        box.expand(boxes[order_[i]]);
        cbox.expand(centroids[order_[i]]);
    }
    nodes_[index].lo = box.lo;
    nodes_[index].hi = box.hi;

    const std::uint32_t count = end - begin;
    auto make_leaf = [&] {
        nodes_[index].first = begin;
        nodes_[index].count = count;
        return index;
    };
    if (count <= kLeafSize) return make_leaf();

    const Vec3 ext = cbox.extent();
    int axis = 0;
    if (ext.y > ext[axis]) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    if (!(ext[axis] > 0.0)) return make_leaf();

    // Binned SAH along the widest centroid axis.
    std::array<Aabb, kBins> bin_box;
    std::array<std::uint32_t, kBins> bin_count{};
    const double scale = kBins / ext[axis];
    auto bin_of = [&](std::uint32_t prim) {
        const int b = static_cast<int>((centroids[prim][axis] - cbox.lo[axis]) * scale);
        return std::clamp(b, 0, kBins - 1);
    };
    for (std::uint32_t i = begin; i < end; ++i) {
        const int b = bin_of(order_[i]);
        ++bin_count[static_cast<std::size_t>(b)];
        bin_box[static_cast<std::size_t>(b)].expand(boxes[order_[i]]);
    }
    std::array<double, kBins - 1> cost{};
    Aabb acc;
    std::uint32_t acc_n = 0;
    for (int b = 0; b < kBins - 1; ++b) {
        acc.expand(bin_box[static_cast<std::size_t>(b)]);
        acc_n += bin_count[static_cast<std::size_t>(b)];
        cost[static_cast<std::size_t>(b)] = acc_n * acc.surface_area();
    }
    acc = Aabb{};
    acc_n = 0;
    for (int b = kBins - 1; b > 0; --b) {
        acc.expand(bin_box[static_cast<std::size_t>(b)]);
        acc_n += bin_count[static_cast<std::size_t>(b)];
        cost[static_cast<std::size_t>(b - 1)] += acc_n * acc.surface_area();
    }
    int best = 0;
    for (int b = 1; b < kBins - 1; ++b)
        if (cost[static_cast<std::size_t>(b)] < cost[static_cast<std::size_t>(best)]) best = b;

    auto mid_it = std::partition(order_.begin() + begin, order_.begin() + end,
                                 [&](std::uint32_t prim) { return bin_of(prim) <= best; });
    auto mid = static_cast<std::uint32_t>(mid_it - order_.begin());
    if (mid == begin || mid == end) {
        // all centroids in one bin: split by median index
        mid = begin + count / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return centroids[a][axis] < centroids[b][axis] ||
                                    (centroids[a][axis] == centroids[b][axis] && a < b);
                         });
    }

    nodes_[index].axis = static_cast<std::uint8_t>(axis);
    build(begin, mid, centroids, boxes);
    const std::uint32_t right = build(mid, end, centroids, boxes);
    nodes_[index].first = right;
    nodes_[index].count = 0;
    return index;
}

RayHit Bvh::intersect(const Ray& ray, double t_min, double t_max) const
{
    RayHit best;
    if (nodes_.empty()) return best;
    const Vec3 inv{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
    double best_t = t_max;
    std::uint32_t best_slot = 0;
    std::uint32_t best_prim = 0;
    double best_u = 0.0, best_v = 0.0;
    bool found = false;

    std::array<std::uint32_t, 128> stack;
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        // `>` rather than `>=`: boxes touching best_t may still hold an
        // equal-t triangle with a lower index.
        const double entry = slab(node.lo, node.hi, ray.origin, inv, t_min, best_t);
        if (entry == INFINITY || entry > best_t) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                double t, u, v;
                if (!intersect_triangle(ray, records_[i], t_min, found ? std::nextafter(best_t, INFINITY) : t_max, t, u, v))
                    continue;
                const std::uint32_t prim = order_[i];
                if (!found || t < best_t || (t == best_t && prim < best_prim)) {
                    found = true;
                    best_t = t;
                    best_slot = i;
                    best_prim = prim;
                    best_u = u;
                    best_v = v;
                }
            }
        } else {
            const std::uint32_t self = static_cast<std::uint32_t>(&node - nodes_.data());
            std::uint32_t near = self + 1, far = node.first;
            if (ray.dir[node.axis] < 0.0) std::swap(near, far);
            stack[sp++] = far;
            stack[sp++] = near;
        }
    }
    if (!found) return best;
    best.hit = true;
    best.t = best_t;
    best.triangle = best_prim;
    best.bary = {1.0 - best_u - best_v, best_u, best_v};
    const TriangleRecord& rec = records_[best_slot];
    best.position = rec.v0 + rec.e1 * best_u + rec.e2 * best_v;
    best.normal = normals_[best_prim];
    return best;
}

bool Bvh::occluded(const Ray& ray, double t_min, double t_max) const
{
    if (nodes_.empty()) return false;
    const Vec3 inv{1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z};
    std::array<std::uint32_t, 128> stack;
    int sp = 0;
    stack[sp++] = 0;
    while (sp > 0) {
        const Node& node = nodes_[stack[--sp]];
        if (slab(node.lo, node.hi, ray.origin, inv, t_min, t_max) == INFINITY) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                double t, u, v;
                if (intersect_triangle(ray, records_[i], t_min, t_max, t, u, v)) return true;
            }
        } else {
            const std::uint32_t self = static_cast<std::uint32_t>(&node - nodes_.data());
            std::uint32_t near = self + 1, far = node.first;
            if (ray.dir[node.axis] < 0.0) std::swap(near, far);
            stack[sp++] = far;
            stack[sp++] = near;
        }
    }
    return false;
}

}  // namespace nprt
