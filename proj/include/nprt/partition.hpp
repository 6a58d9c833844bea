#pragma once

// Large-scene handling: a regular grid over the scene, overlapping per-cell
// training sets, variance-driven merging of neighbouring cells into clusters,
// one MLP per cluster, and routing by containing cell at shading time.
//
// Clustered model file (JSON):
//   {grid: {aabb: {min, max}, dims: [nx, ny, nz], delta},
//    clusters: [{cells: [...], model: <model object>}, ...]}

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "nprt/render.hpp"
#include "nprt/train.hpp"

namespace nprt {

class PartitionError : public DataError {
public:
    using DataError::DataError;
};

struct PartitionGrid {
    Aabb aabb;
    std::array<int, 3> dims{1, 1, 1};
    double delta = 0.1;  // overlap margin, fraction of the cell extent

    // Finite non-degenerate box, dims >= 1, delta in [0, 0.5). Throws InputError.
    void validate() const;
    int cell_count() const { return dims[0] * dims[1] * dims[2]; }
    // Cell index = x + nx (y + ny z).
    int cell_index(int x, int y, int z) const { return x + dims[0] * (y + dims[1] * z); }
    std::array<int, 3> cell_coords(int cell) const;
    Aabb cell_box(int cell) const;
    // Cell box grown by delta * cell extent on every side, clipped to the grid box.
    Aabb expanded_box(int cell) const;
    // Containing cell with half-open intervals [min, max); the far faces of the
    // grid box belong to the last cells. Throws PartitionError outside the box.
    int locate(const Vec3& p) const;
    // Face-adjacent cells in increasing index order.
    std::vector<int> neighbours(int cell) const;
};

// Parses "3x2x2" (or a single "N" for N x 1 x 1). Throws InputError.
std::array<int, 3> parse_grid_dims(const std::string& text);

// Grid over the normalization cube of a dataset.
PartitionGrid grid_for_dataset(const TransferDataset& ds, const std::array<int, 3>& dims, double delta);

// Record indices per cell: the containing cell plus every cell whose expanded
// box contains the sample. Throws PartitionError for samples outside the grid.
std::vector<std::vector<std::size_t>> assign_samples(const TransferDataset& ds, const PartitionGrid& grid);

// Dataset made of the given records, normalized to `box` and rescaled.
TransferDataset subset_dataset(const TransferDataset& ds, const std::vector<std::size_t>& indices, const Aabb& box);

// Running moments of transfer vectors (Welford updates, Chan merges); total
// variance is the trace of the covariance, population form. Identical vectors
// give exactly 0.
struct TransferStats {
    std::size_t count = 0;
    std::vector<double> mean;
    double m2 = 0;  // sum of squared deviations from the mean, all coefficients

    void add(const SHVector& t);
    void merge(const TransferStats& o);
    double total_variance() const;
};

// Statistics per cell over the containing-cell samples only (no overlap).
std::vector<TransferStats> cell_statistics(const TransferDataset& ds, const PartitionGrid& grid);

struct MergeStep {
    int cluster_a = 0;  // lowest cell index of each side before merging
    int cluster_b = 0;
    double variance = 0;  // total variance of the merged cluster
};

struct Clustering {
    std::vector<int> cell_cluster;  // cluster ids numbered by lowest member cell
    int cluster_count = 0;
    std::vector<MergeStep> merges;

    std::vector<std::vector<int>> members() const;
};

// Greedy merging: repeatedly join the face-adjacent pair with the smallest
// merged total variance while it is <= theta and more than min_clusters
// clusters remain. Ties go to the pair with the lowest (min cell, min cell).
Clustering cluster_cells(const std::vector<TransferStats>& stats, const PartitionGrid& grid, double theta, int min_clusters);

struct ClusteredModel {
    PartitionGrid grid;
    std::vector<int> cell_cluster;
    std::vector<MlpModel> models;  // one per cluster

    int order() const { return models.front().order; }
    // Throws FormatError on a broken cell map or model set.
    void validate() const;
};

struct PartitionConfig {
    std::array<int, 3> dims{1, 1, 1};
    double delta = 0.1;
    double theta = 0.0;
    int min_clusters = 1;
};

// Per-cluster training sets after clustering (overlap-inclusive, no
// duplicates), with clusters that would be empty folded into their
// lowest-index non-empty neighbour.
struct ClusterDatasets {
    PartitionGrid grid;
    Clustering clustering;
    std::vector<TransferDataset> datasets;
};

ClusterDatasets prepare_clusters(const TransferDataset& ds, const PartitionConfig& cfg);

using ClusterCallback = std::function<void(int cluster, const EpochStats&)>;

// Every cluster is trained with the same TrainConfig (and seed).
ClusteredModel train_clustered(const TransferDataset& ds, const PartitionConfig& cfg, const MlpConfig& mlp,
                               const TrainConfig& train_cfg, const PositionalEncodingConfig& pe = {},
                               const ClusterCallback& on_epoch = {});

// Routes p to its cell's cluster model. Throws PartitionError outside the grid.
SHVector predict(const ClusteredModel& cm, const Vec3& p, const Vec3& n);

void save_clustered(const ClusteredModel& cm, const std::filesystem::path& path);
ClusteredModel load_clustered(const std::filesystem::path& path);
std::string clustered_to_json(const ClusteredModel& cm);
ClusteredModel clustered_from_json(const std::string& text, const std::string& source = "<string>");

class ClusteredTransfer : public TransferSource {
public:
    explicit ClusteredTransfer(const ClusteredModel& cm) : cm_(cm) {}
    int order() const override { return cm_.order(); }
    void evaluate(const Fragments& frags, std::vector<double>& out) const override;

private:
    const ClusteredModel& cm_;
};

}  // namespace nprt
