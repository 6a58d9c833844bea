#pragma once

// Ground-truth transfer vectors (visibility x clamped cosine, projected to SH)
// at surface points, and the binary dataset format used for training.
//
// Dataset file (little endian):
//   "NPRT" u32 version=1 u32 sh_order u64 count
//   f32x3 center  f32 half_extent  f32 scale
//   count x { f32x3 position  f32x3 normal  f32 x sh_order^2 transfer }

#include <filesystem>
#include <string>
#include <vector>

#include "nprt/sh.hpp"
#include "nprt/surface.hpp"

namespace nprt {

inline constexpr std::size_t kDefaultBakeRays = 4096;
inline constexpr std::size_t kMinBakeRays = 64;

// Maps scene positions into [-1, 1]^3.
struct Normalization {
    Vec3 center;
    double half_extent = 1.0;

    Vec3 apply(const Vec3& p) const { return (p - center) / half_extent; }
    // Cube centred on the box with half its largest extent, widened by `pad`.
    static Normalization from_bounds(const Aabb& b, double pad = 0.0);
};

struct TransferRecord {
    Vec3 position;
    Vec3 normal;
    SHVector transfer;
};

struct TransferDataset {
    int order = kDefaultShOrder;
    std::string scene_id;  // informational; not stored in the file
    Normalization norm;
    double scale = 1.0;  // max |coefficient| over all records (1 when all are zero)
    std::vector<TransferRecord> records;
};

struct BakeConfig {
    std::size_t n_rays = kDefaultBakeRays;
    int order = kDefaultShOrder;
    std::uint64_t seed = 1;
    int grid_res = 128;  // marching-cubes bootstrap for SDF scenes
};

struct BakeReport {
    std::size_t requested = 0;
    std::size_t discarded = 0;  // SDF samples whose projection failed

    double discard_fraction() const { return requested ? static_cast<double>(discarded) / static_cast<double>(requested) : 0.0; }
    bool warning() const { return discard_fraction() > 0.05; }
};

// T_i = 4pi/N sum_r V(w_r) max(w_r . n, 0) y_i(w_r) over a stratified set of N
// uniform directions. Occlusion rays leave from p offset along n by the
// surface's t_eps (plus hit_eps for SDFs, whose tracer would otherwise stop
// at the start point). Deterministic for a seed.
SHVector bake_transfer(const Surface& surface, const SurfaceSample& sample, std::size_t n_rays, int order,
                       std::uint64_t seed);

// Surface points for baking. Meshes: area-weighted sampling. SDFs: samples on
// the marching-cubes mesh projected onto the zero set, normals from the SDF
// gradient; failed projections are dropped and counted in `report`.
std::vector<SurfaceSample> sample_scene_points(const Surface& surface, std::size_t count, std::uint64_t seed,
                                               int grid_res, BakeReport* report = nullptr);

// Normalization box for a surface: mesh bounds, or the marching-cubes mesh
// bounds padded by one cell for SDFs. A small relative margin keeps f32-rounded
// positions inside [-1, 1].
Normalization scene_normalization(const Surface& surface, int grid_res);

// Bakes the given points in parallel; record r uses a ray seed derived from
// (seed, r). Positions, normals, transfer, normalization and scale are
// rounded to f32 so the in-memory dataset equals its file form.
TransferDataset bake_points(const Surface& surface, const std::vector<SurfaceSample>& points, const Normalization& norm,
                            const BakeConfig& cfg);

TransferDataset bake_dataset(const Surface& surface, std::size_t count, const BakeConfig& cfg,
                             BakeReport* report = nullptr);

void save_dataset(const TransferDataset& ds, const std::filesystem::path& path);
TransferDataset load_dataset(const std::filesystem::path& path);

// Largest |coefficient| over records, or 1 if there is none.
double dataset_scale(const std::vector<TransferRecord>& records);

}  // namespace nprt
