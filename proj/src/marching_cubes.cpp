#include "nprt/marching_cubes.hpp"

#include <array>
#include <unordered_map>

namespace nprt {

namespace {

struct CaseTable {
    std::array<McEdge, 12> edges{};
    std::array<std::array<int, 8>, 8> edge_of{};  // corner pair -> edge id, -1 if not an edge
    std::array<std::vector<std::array<std::uint8_t, 3>>, 256> cases;

    CaseTable()
    {
        for (auto& row : edge_of) row.fill(-1);
        int id = 0;
        for (int axis = 0; axis < 3; ++axis) {
            for (int c = 0; c < 8; ++c) {
                if (c >> axis & 1) continue;
                const int d = c | 1 << axis;
                edges[static_cast<std::size_t>(id)] = {c, d};
                edge_of[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] = id;
                edge_of[static_cast<std::size_t>(d)][static_cast<std::size_t>(c)] = id;
                ++id;
            }
        }

        // Faces as corner cycles, counter-clockwise seen from outside the cube.
        std::array<std::array<int, 4>, 6> faces{};
        for (int axis = 0; axis < 3; ++axis) {
            const int u = (axis + 1) % 3, v = (axis + 2) % 3;
            for (int side = 0; side < 2; ++side) {
                std::array<int, 4> f{};
                const int uv[4][2] = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
                for (int i = 0; i < 4; ++i) f[static_cast<std::size_t>(i)] = side << axis | uv[i][0] << u | uv[i][1] << v;
                if (side == 0) std::swap(f[1], f[3]);
                faces[static_cast<std::size_t>(axis * 2 + side)] = f;
            }
        }

        for (int cs = 0; cs < 256; ++cs) cases[static_cast<std::size_t>(cs)] = build_case(cs, faces);

        // One global winding decision: with only corner 0 inside, the normal
        // must point away from it.
        const auto& single = cases[1];
        const Vec3 mid[3] = {{0.5, 0, 0}, {0, 0.5, 0}, {0, 0, 0.5}};
        auto pos = [&](int e) {
            const auto& ed = edges[static_cast<std::size_t>(e)];
            const int axis = ed.corner_b == 1 ? 0 : ed.corner_b == 2 ? 1 : 2;
            return mid[axis];
        };
        const auto& t = single.at(0);
        const Vec3 n = cross(pos(t[1]) - pos(t[0]), pos(t[2]) - pos(t[0]));
        if (dot(n, Vec3{1, 1, 1}) < 0.0)
            for (auto& c : cases)
                for (auto& tri : c) std::swap(tri[1], tri[2]);
    }

    // Bit (2 * axis + side) is set for each cube face containing the edge.
    int face_mask(int e) const
    {
        const McEdge& ed = edges[static_cast<std::size_t>(e)];
        int m = 0;
        for (int axis = 0; axis < 3; ++axis)
            for (int side = 0; side < 2; ++side)
                if ((ed.corner_a >> axis & 1) == side && (ed.corner_b >> axis & 1) == side) m |= 1 << (axis * 2 + side);
        return m;
    }

    std::vector<std::array<std::uint8_t, 3>> build_case(int cs, const std::array<std::array<int, 4>, 6>& faces) const
    {
        auto inside = [cs](int c) { return (cs >> c & 1) != 0; };
        std::array<int, 12> next;
        next.fill(-1);
        for (const auto& f : faces) {
            // Each run of inside corners along the cycle is cut off by one
            // segment from its exit crossing to its entry crossing; runs never
            // merge, so diagonal inside corners stay separated on every face.
            int start = -1;
            for (int i = 0; i < 4; ++i)
                if (!inside(f[static_cast<std::size_t>(i)]) && inside(f[static_cast<std::size_t>((i + 1) % 4)])) start = i;
            if (start < 0) continue;
            int entry = -1;
            for (int s = 0; s < 4; ++s) {
                const int i = (start + s) % 4;
                const int a = f[static_cast<std::size_t>(i)], b = f[static_cast<std::size_t>((i + 1) % 4)];
                if (inside(a) == inside(b)) continue;
                const int e = edge_of[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
                if (!inside(a)) {
                    entry = e;
                } else {
                    next[static_cast<std::size_t>(e)] = entry;
                }
            }
        }

        std::vector<std::array<std::uint8_t, 3>> tris;
        std::array<bool, 12> used{};
        for (int e = 0; e < 12; ++e) {
            if (next[static_cast<std::size_t>(e)] < 0 || used[static_cast<std::size_t>(e)]) continue;
            std::vector<int> loop;
            for (int cur = e; !used[static_cast<std::size_t>(cur)]; cur = next[static_cast<std::size_t>(cur)]) {
                used[static_cast<std::size_t>(cur)] = true;
                loop.push_back(cur);
            }
            // Fan from an apex whose diagonals never join two crossings on the
            // same cube face; such a diagonal would also be emitted by the
            // neighbouring cell and make the edge non-manifold.
            const std::size_t n = loop.size();
            std::size_t apex = n;
            for (std::size_t a = 0; a < n && apex == n; ++a) {
                bool ok = true;
                for (std::size_t k = 2; k + 1 < n; ++k)
                    if (face_mask(loop[a]) & face_mask(loop[(a + k) % n])) ok = false;
                if (ok) apex = a;
            }
            if (apex == n) throw std::logic_error("marching cubes: no valid fan for case " + std::to_string(cs));
            for (std::size_t i = 1; i + 1 < n; ++i)
                tris.push_back({static_cast<std::uint8_t>(loop[apex]), static_cast<std::uint8_t>(loop[(apex + i) % n]),
                                static_cast<std::uint8_t>(loop[(apex + i + 1) % n])});
        }
        return tris;
    }
};

const CaseTable& table()
{
    static const CaseTable t;
    return t;
}

}  // namespace

const McEdge& mc_edge(int edge) { return table().edges.at(static_cast<std::size_t>(edge)); }

const std::vector<std::array<std::uint8_t, 3>>& mc_case(int case_index)
{
    return table().cases.at(static_cast<std::size_t>(case_index));
}

TriangleMesh marching_cubes(const SdfScene& scene, int grid_res, const Aabb& bounds)
{
    if (grid_res < 8 || grid_res > 512) throw InputError("grid resolution must be in [8, 512]");
    if (bounds.empty() || !(bounds.extent().x > 0 && bounds.extent().y > 0 && bounds.extent().z > 0))
        throw InputError("marching cubes needs non-degenerate bounds");
    const CaseTable& tab = table();
    const int n = grid_res + 1;
    const Vec3 cell = bounds.extent() / static_cast<double>(grid_res);
    auto grid_point = [&](int i, int j, int k) {
        return Vec3{bounds.lo.x + i * cell.x, bounds.lo.y + j * cell.y, bounds.lo.z + k * cell.z};
    };
    const auto slice_size = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    auto eval_slice = [&](int k, std::vector<double>& out) {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                out[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)] =
                    scene.eval(grid_point(i, j, k));
    };

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> vertex_of_edge;
    std::vector<double> lower(slice_size), upper(slice_size);
    eval_slice(0, lower);

    for (int k = 0; k < grid_res; ++k) {
        eval_slice(k + 1, upper);
        for (int j = 0; j < grid_res; ++j) {
            for (int i = 0; i < grid_res; ++i) {
                std::array<double, 8> f{};
                int cs = 0;
                for (int c = 0; c < 8; ++c) {
                    const int ci = i + (c & 1), cj = j + (c >> 1 & 1);
                    const auto& sl = (c >> 2 & 1) ? upper : lower;
                    f[static_cast<std::size_t>(c)] =
                        sl[static_cast<std::size_t>(cj) * static_cast<std::size_t>(n) + static_cast<std::size_t>(ci)];
                    if (f[static_cast<std::size_t>(c)] < 0.0) cs |= 1 << c;
                }
                const auto& tris = tab.cases[static_cast<std::size_t>(cs)];
                if (tris.empty()) continue;

                std::array<std::uint32_t, 12> vid{};
                auto vertex = [&](int e) {
                    const McEdge& ed = tab.edges[static_cast<std::size_t>(e)];
                    const int a = ed.corner_a;
                    const int axis = (ed.corner_b ^ a) == 1 ? 0 : (ed.corner_b ^ a) == 2 ? 1 : 2;
                    const int gi = i + (a & 1), gj = j + (a >> 1 & 1), gk = k + (a >> 2 & 1);
                    const std::uint64_t key =
                        ((static_cast<std::uint64_t>(gk) * static_cast<std::uint64_t>(n) + static_cast<std::uint64_t>(gj)) *
                             static_cast<std::uint64_t>(n) +
                         static_cast<std::uint64_t>(gi)) * 3 + static_cast<std::uint64_t>(axis);
                    auto [it, inserted] = vertex_of_edge.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
                    if (inserted) {
                        const double fa = f[static_cast<std::size_t>(a)], fb = f[static_cast<std::size_t>(ed.corner_b)];
                        const double t = fa / (fa - fb);
                        const Vec3 pa = grid_point(gi, gj, gk);
                        Vec3 pb = pa;
                        pb[axis] += cell[axis];
                        mesh.vertices.push_back(pa + (pb - pa) * t);
                    }
                    return it->second;
                };
                std::array<bool, 12> have{};
                for (const auto& t : tris) {
                    std::array<std::uint32_t, 3> tri{};
                    for (int v = 0; v < 3; ++v) {
                        const int e = t[static_cast<std::size_t>(v)];
                        if (!have[static_cast<std::size_t>(e)]) {
                            vid[static_cast<std::size_t>(e)] = vertex(e);
                            have[static_cast<std::size_t>(e)] = true;
                        }
                        tri[static_cast<std::size_t>(v)] = vid[static_cast<std::size_t>(e)];
                    }
                    mesh.triangles.push_back(tri);
                    // Crossings that land on lattice points can collapse a triangle.
                    if (!(mesh.triangle_area(mesh.triangles.size() - 1) > 1e-12)) mesh.triangles.pop_back();
                }
            }
        }
        std::swap(lower, upper);
    }
    if (mesh.triangles.empty()) throw DataError("marching cubes found no zero crossing (empty mesh)");

    // Drop vertices orphaned by collapsed triangles.
    std::vector<std::uint32_t> remap(mesh.vertices.size(), UINT32_MAX);
    std::vector<Vec3> kept;
    for (auto& tri : mesh.triangles)
        for (auto& idx : tri) {
            if (remap[idx] == UINT32_MAX) {
                remap[idx] = static_cast<std::uint32_t>(kept.size());
                kept.push_back(mesh.vertices[idx]);
            }
            idx = remap[idx];
        }
    mesh.vertices = std::move(kept);
    return mesh;
}

}  // namespace nprt
