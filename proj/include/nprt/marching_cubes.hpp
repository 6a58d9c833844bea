#pragma once

#include "nprt/mesh.hpp"
#include "nprt/sdf.hpp"

namespace nprt {

// Zero isosurface of `scene` on a grid_res^3 cell lattice spanning `bounds`.
// Vertices are shared between neighbouring cells (one per crossed lattice
// edge) and triangles are wound so geometric normals point towards sdf > 0.
// Throws InputError for grid_res outside [8, 512] and DataError when the
// lattice has no zero crossing.
TriangleMesh marching_cubes(const SdfScene& scene, int grid_res, const Aabb& bounds);

inline constexpr int kDefaultMcResolution = 128;

// Triangles (as lattice-edge ids 0..11) for each of the 256 inside/outside
// corner patterns. Corner c sits at offset (c & 1, c >> 1 & 1, c >> 2 & 1);
// bit c of the case index is set when corner c is inside (sdf < 0).
struct McEdge {
    int corner_a, corner_b;
};
const McEdge& mc_edge(int edge);
const std::vector<std::array<std::uint8_t, 3>>& mc_case(int case_index);

}  // namespace nprt
