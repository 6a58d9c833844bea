#include "nprt/partition.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace nprt {

namespace {

double boundary(const PartitionGrid& g, int axis, int i)
{
    if (i >= g.dims[static_cast<std::size_t>(axis)]) return g.aabb.hi[axis];
    return g.aabb.lo[axis] + (g.aabb.hi[axis] - g.aabb.lo[axis]) * i / g.dims[static_cast<std::size_t>(axis)];
}

Aabb unite(const Aabb& a, const Aabb& b)
{
    Aabb r = a;
    r.expand(b);
    return r;
}

std::vector<int> renumber(const std::vector<int>& labels)
{
    std::map<int, int> ids;
    std::vector<int> out(labels.size());
    for (std::size_t c = 0; c < labels.size(); ++c) {
        auto it = ids.find(labels[c]);
        if (it == ids.end()) it = ids.emplace(labels[c], static_cast<int>(ids.size())).first;
        out[c] = it->second;
    }
    return out;
}

}  // namespace

void PartitionGrid::validate() const
{
    for (int d : dims)
        if (d < 1 || d > 64) throw InputError("grid dimensions must be in [1, 64]");
    if (!(delta >= 0.0 && delta < 0.5)) throw InputError("delta must be in [0, 0.5)");
    if (!is_finite(aabb.lo) || !is_finite(aabb.hi)) throw InputError("grid box must be finite");
    const Vec3 e = aabb.extent();
    if (!(e.x > 0 && e.y > 0 && e.z > 0)) throw InputError("grid box must have positive extent on every axis");
}

std::array<int, 3> PartitionGrid::cell_coords(int cell) const
{
    if (cell < 0 || cell >= cell_count()) throw InputError("cell index out of range");
    return {cell % dims[0], (cell / dims[0]) % dims[1], cell / (dims[0] * dims[1])};
}

Aabb PartitionGrid::cell_box(int cell) const
{
    const auto c = cell_coords(cell);
    Aabb b;
    for (int a = 0; a < 3; ++a) {
        b.lo[a] = boundary(*this, a, c[static_cast<std::size_t>(a)]);
        b.hi[a] = boundary(*this, a, c[static_cast<std::size_t>(a)] + 1);
    }
    return b;
}

Aabb PartitionGrid::expanded_box(int cell) const
{
    Aabb b = cell_box(cell);
    const Vec3 m = b.extent() * delta;
    b.lo = vmax(b.lo - m, aabb.lo);
    b.hi = vmin(b.hi + m, aabb.hi);
    return b;
}

int PartitionGrid::locate(const Vec3& p) const
{
    if (!is_finite(p) || !aabb.contains(p)) throw PartitionError("point lies outside the partition grid");
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
        const int n = dims[static_cast<std::size_t>(a)];
        int i = std::clamp(static_cast<int>(std::floor((p[a] - aabb.lo[a]) / (aabb.hi[a] - aabb.lo[a]) * n)), 0, n - 1);
        // Settle against the exact boundaries so faces go to the upper cell.
        while (i > 0 && p[a] < boundary(*this, a, i)) --i;
        while (i < n - 1 && p[a] >= boundary(*this, a, i + 1)) ++i;
        c[static_cast<std::size_t>(a)] = i;
    }
    return cell_index(c[0], c[1], c[2]);
}

std::vector<int> PartitionGrid::neighbours(int cell) const
{
    const auto c = cell_coords(cell);
    std::vector<int> out;
    for (int a = 0; a < 3; ++a)
        for (int s : {-1, 1}) {
            auto n = c;
            n[static_cast<std::size_t>(a)] += s;
            if (n[static_cast<std::size_t>(a)] < 0 || n[static_cast<std::size_t>(a)] >= dims[static_cast<std::size_t>(a)]) continue;
            out.push_back(cell_index(n[0], n[1], n[2]));
        }
    std::sort(out.begin(), out.end());
    return out;
}

std::array<int, 3> parse_grid_dims(const std::string& text)
{
    std::array<int, 3> d{1, 1, 1};
    std::istringstream in(text);
    std::string part;
    int k = 0;
    while (std::getline(in, part, 'x')) {
        if (k >= 3) throw InputError("grid '" + text + "' has more than three dimensions");
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(part, &used);
        } catch (const std::logic_error&) {
            used = 0;
        }
        if (used == 0 || used != part.size() || v < 1) throw InputError("bad grid dimensions '" + text + "' (expected e.g. 3x2x2)");
        d[static_cast<std::size_t>(k++)] = v;
    }
    if (k == 0) throw InputError("empty grid dimensions");
    return d;
}

PartitionGrid grid_for_dataset(const TransferDataset& ds, const std::array<int, 3>& dims, double delta)
{
    PartitionGrid g;
    const Vec3 h{ds.norm.half_extent, ds.norm.half_extent, ds.norm.half_extent};
    g.aabb.lo = ds.norm.center - h;
    g.aabb.hi = ds.norm.center + h;
    g.dims = dims;
    g.delta = delta;
    g.validate();
    return g;
}

std::vector<std::vector<std::size_t>> assign_samples(const TransferDataset& ds, const PartitionGrid& grid)
{
    grid.validate();
    const int n = grid.cell_count();
    std::vector<Aabb> boxes;
    for (int c = 0; c < n; ++c) boxes.push_back(grid.expanded_box(c));
    std::vector<std::vector<std::size_t>> cells(static_cast<std::size_t>(n));
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        const Vec3& p = ds.records[r].position;
        int home = 0;
        try {
            home = grid.locate(p);
        } catch (const PartitionError&) {
            throw PartitionError("sample " + std::to_string(r) + " lies outside the partition grid");
        }
        for (int c = 0; c < n; ++c)
            if (c == home || boxes[static_cast<std::size_t>(c)].contains(p)) cells[static_cast<std::size_t>(c)].push_back(r);
    }
    return cells;
}

TransferDataset subset_dataset(const TransferDataset& ds, const std::vector<std::size_t>& indices, const Aabb& box)
{
    TransferDataset out;
    out.order = ds.order;
    out.scene_id = ds.scene_id;
    out.norm = Normalization::from_bounds(box);
    out.records.reserve(indices.size());
    for (std::size_t i : indices) out.records.push_back(ds.records.at(i));
    out.scale = dataset_scale(out.records);
    return out;
}

void TransferStats::add(const SHVector& t)
{
    if (mean.empty()) mean.assign(t.size(), 0.0);
    ++count;
    double d2 = 0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double d = t[i] - mean[i];
        mean[i] += d / static_cast<double>(count);
        d2 += d * (t[i] - mean[i]);
    }
    m2 += d2;
}

void TransferStats::merge(const TransferStats& o)
{
    if (o.count == 0) return;
    if (count == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(count), nb = static_cast<double>(o.count), n = na + nb;
    double d2 = 0;
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double d = o.mean[i] - mean[i];
        d2 += d * d;
        mean[i] += d * nb / n;
    }
    m2 += o.m2 + d2 * na * nb / n;
    count += o.count;
}

double TransferStats::total_variance() const { return count ? std::max(0.0, m2 / static_cast<double>(count)) : 0.0; }

std::vector<TransferStats> cell_statistics(const TransferDataset& ds, const PartitionGrid& grid)
{
    grid.validate();
    std::vector<TransferStats> stats(static_cast<std::size_t>(grid.cell_count()));
    for (std::size_t r = 0; r < ds.records.size(); ++r) {
        int c = 0;
        try {
            c = grid.locate(ds.records[r].position);
        } catch (const PartitionError&) {
            throw PartitionError("sample " + std::to_string(r) + " lies outside the partition grid");
        }
        stats[static_cast<std::size_t>(c)].add(ds.records[r].transfer);
    }
    return stats;
}

std::vector<std::vector<int>> Clustering::members() const
{
    std::vector<std::vector<int>> m(static_cast<std::size_t>(cluster_count));
    for (std::size_t c = 0; c < cell_cluster.size(); ++c) m[static_cast<std::size_t>(cell_cluster[c])].push_back(static_cast<int>(c));
    return m;
}

Clustering cluster_cells(const std::vector<TransferStats>& stats, const PartitionGrid& grid, double theta, int min_clusters)
{
    grid.validate();
    const int n = grid.cell_count();
    if (static_cast<int>(stats.size()) != n) throw InputError("one statistics entry per cell is required");
    if (min_clusters < 1) throw InputError("min_clusters must be at least 1");

    // Clusters are keyed by their lowest cell index.
    std::vector<int> label(static_cast<std::size_t>(n));
    std::map<int, TransferStats> live;
    for (int c = 0; c < n; ++c) {
        label[static_cast<std::size_t>(c)] = c;
        live.emplace(c, stats[static_cast<std::size_t>(c)]);
    }
    Clustering out;
    while (static_cast<int>(live.size()) > min_clusters) {
        bool found = false;
        int best_a = 0, best_b = 0;
        double best_v = 0;
        TransferStats best_stats;
        for (int c = 0; c < n; ++c)
            for (int nb : grid.neighbours(c)) {
                const int a = std::min(label[static_cast<std::size_t>(c)], label[static_cast<std::size_t>(nb)]);
                const int b = std::max(label[static_cast<std::size_t>(c)], label[static_cast<std::size_t>(nb)]);
                if (a == b) continue;
                TransferStats s = live.at(a);
                s.merge(live.at(b));
                const double v = s.total_variance();
                if (!found || v < best_v || (v == best_v && std::pair(a, b) < std::pair(best_a, best_b))) {
                    found = true;
                    best_a = a;
                    best_b = b;
                    best_v = v;
                    best_stats = std::move(s);
                }
            }
        if (!found || best_v > theta) break;
        for (int& l : label)
            if (l == best_b) l = best_a;
        live.erase(best_b);
        live.at(best_a) = std::move(best_stats);
        out.merges.push_back({best_a, best_b, best_v});
    }
    out.cell_cluster = renumber(label);
    out.cluster_count = static_cast<int>(live.size());
    return out;
}

ClusterDatasets prepare_clusters(const TransferDataset& ds, const PartitionConfig& cfg)
{
    ClusterDatasets out;
    out.grid = grid_for_dataset(ds, cfg.dims, cfg.delta);
    if (!(cfg.theta >= 0.0)) throw InputError("theta must be non-negative");
    out.clustering = cluster_cells(cell_statistics(ds, out.grid), out.grid, cfg.theta, cfg.min_clusters);
    const auto cells = assign_samples(ds, out.grid);

    // Fold clusters without any samples into a non-empty neighbour.
    std::vector<int> label = out.clustering.cell_cluster;
    auto cluster_samples = [&](int k) {
        std::size_t s = 0;
        for (std::size_t c = 0; c < label.size(); ++c)
            if (label[c] == k) s += cells[c].size();
        return s;
    };
    if (ds.records.empty()) throw PartitionError("dataset has no samples to partition");
    for (bool changed = true; changed;) {
        changed = false;
        for (int k = 0; k <= *std::max_element(label.begin(), label.end()); ++k) {
            bool present = std::find(label.begin(), label.end(), k) != label.end();
            if (!present || cluster_samples(k) > 0) continue;
            int target = -1;
            for (std::size_t c = 0; c < label.size() && target < 0; ++c) {
                if (label[c] != k) continue;
                for (int nb : out.grid.neighbours(static_cast<int>(c))) {
                    const int l = label[static_cast<std::size_t>(nb)];
                    if (l != k && cluster_samples(l) > 0 && (target < 0 || l < target)) target = l;
                }
            }
            if (target < 0) continue;
            for (int& l : label)
                if (l == k) l = target;
            changed = true;
        }
    }
    out.clustering.cell_cluster = renumber(label);
    out.clustering.cluster_count = *std::max_element(out.clustering.cell_cluster.begin(), out.clustering.cell_cluster.end()) + 1;

    for (const auto& member : out.clustering.members()) {
        std::vector<std::size_t> idx;
        Aabb box;
        for (int c : member) {
            idx.insert(idx.end(), cells[static_cast<std::size_t>(c)].begin(), cells[static_cast<std::size_t>(c)].end());
            box = unite(box, out.grid.expanded_box(c));
        }
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        out.datasets.push_back(subset_dataset(ds, idx, box));
        // The grid is the dataset's own cube, so a whole-grid cluster keeps
        // the dataset normalization bit for bit.
        if (static_cast<int>(member.size()) == out.grid.cell_count()) out.datasets.back().norm = ds.norm;
    }
    return out;
}

ClusteredModel train_clustered(const TransferDataset& ds, const PartitionConfig& cfg, const MlpConfig& mlp,
                               const TrainConfig& train_cfg, const PositionalEncodingConfig& pe, const ClusterCallback& on_epoch)
{
    const ClusterDatasets cd = prepare_clusters(ds, cfg);
    ClusteredModel cm;
    cm.grid = cd.grid;
    cm.cell_cluster = cd.clustering.cell_cluster;
    for (std::size_t k = 0; k < cd.datasets.size(); ++k) {
        EpochCallback cb;
        if (on_epoch) cb = [&, k](const EpochStats& s) { on_epoch(static_cast<int>(k), s); };
        cm.models.push_back(train(cd.datasets[k], mlp, train_cfg, pe, cb).model);
    }
    return cm;
}

void ClusteredModel::validate() const
{
    try {
        grid.validate();
    } catch (const InputError& e) {
        throw FormatError(std::string("clustered model grid: ") + e.what());
    }
    if (static_cast<int>(cell_cluster.size()) != grid.cell_count()) throw FormatError("clustered model must map every cell");
    if (models.empty()) throw FormatError("clustered model has no cluster models");
    std::vector<bool> used(models.size(), false);
    for (int k : cell_cluster) {
        if (k < 0 || k >= static_cast<int>(models.size())) throw FormatError("cell maps to a cluster without a model");
        used[static_cast<std::size_t>(k)] = true;
    }
    if (std::find(used.begin(), used.end(), false) != used.end()) throw FormatError("clustered model has a cluster with no cells");
    for (const MlpModel& m : models) {
        m.validate();
        if (m.order != models.front().order) throw FormatError("cluster models disagree on the SH order");
    }
}

SHVector predict(const ClusteredModel& cm, const Vec3& p, const Vec3& n)
{
    return forward(cm.models[static_cast<std::size_t>(cm.cell_cluster[static_cast<std::size_t>(cm.grid.locate(p))])], p, n);
}

void ClusteredTransfer::evaluate(const Fragments& frags, std::vector<double>& out) const
{
    const auto nc = static_cast<std::size_t>(sh_count(order()));
    out.assign(frags.size() * nc, 0.0);
    std::vector<std::vector<std::size_t>> groups(cm_.models.size());
    for (std::size_t i = 0; i < frags.size(); ++i)
        groups[static_cast<std::size_t>(cm_.cell_cluster[static_cast<std::size_t>(cm_.grid.locate(frags.position[i]))])].push_back(i);
    std::vector<Vec3> pos, nrm;
    std::vector<double> vals;
    for (std::size_t k = 0; k < groups.size(); ++k) {
        if (groups[k].empty()) continue;
        pos.clear();
        nrm.clear();
        for (std::size_t i : groups[k]) {
            pos.push_back(frags.position[i]);
            nrm.push_back(frags.normal[i]);
        }
        forward_batch(cm_.models[k], pos, nrm, vals);
        for (std::size_t j = 0; j < groups[k].size(); ++j)
            std::copy_n(vals.begin() + static_cast<std::ptrdiff_t>(j * nc), nc, out.begin() + static_cast<std::ptrdiff_t>(groups[k][j] * nc));
    }
}

std::string clustered_to_json(const ClusteredModel& cm)
{
    cm.validate();
    nlohmann::ordered_json j;
    j["grid"]["aabb"]["min"] = {cm.grid.aabb.lo.x, cm.grid.aabb.lo.y, cm.grid.aabb.lo.z};
    j["grid"]["aabb"]["max"] = {cm.grid.aabb.hi.x, cm.grid.aabb.hi.y, cm.grid.aabb.hi.z};
    j["grid"]["dims"] = cm.grid.dims;
    j["grid"]["delta"] = cm.grid.delta;
    j["clusters"] = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < cm.models.size(); ++k) {
        nlohmann::ordered_json c;
        c["cells"] = nlohmann::ordered_json::array();
        for (std::size_t cell = 0; cell < cm.cell_cluster.size(); ++cell)
            if (cm.cell_cluster[cell] == static_cast<int>(k)) c["cells"].push_back(cell);
        c["model"] = nlohmann::ordered_json::parse(model_to_json(cm.models[k]));
        j["clusters"].push_back(std::move(c));
    }
    return j.dump(1);
}

ClusteredModel clustered_from_json(const std::string& text, const std::string& source)
{
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError("'" + source + "' is not valid JSON: " + e.what());
    }
    ClusteredModel cm;
    try {
        const auto& g = j.at("grid");
        const auto lo = g.at("aabb").at("min").get<std::array<double, 3>>();
        const auto hi = g.at("aabb").at("max").get<std::array<double, 3>>();
        cm.grid.aabb.lo = {lo[0], lo[1], lo[2]};
        cm.grid.aabb.hi = {hi[0], hi[1], hi[2]};
        cm.grid.dims = g.at("dims").get<std::array<int, 3>>();
        cm.grid.delta = g.at("delta").get<double>();
        const auto& clusters = j.at("clusters");
        if (!clusters.is_array()) throw FormatError("'" + source + "': clusters must be an array");
        const long long cells = static_cast<long long>(cm.grid.dims[0]) * cm.grid.dims[1] * cm.grid.dims[2];
        if (cells <= 0 || cells > 64 * 64 * 64) throw FormatError("'" + source + "': bad grid dimensions");
        cm.cell_cluster.assign(static_cast<std::size_t>(cells), -1);
        for (std::size_t k = 0; k < clusters.size(); ++k) {
            for (long long c : clusters[k].at("cells").get<std::vector<long long>>()) {
                if (c < 0 || c >= cells) throw FormatError("'" + source + "': cell index out of range");
                if (cm.cell_cluster[static_cast<std::size_t>(c)] >= 0) throw FormatError("'" + source + "': cell listed twice");
                cm.cell_cluster[static_cast<std::size_t>(c)] = static_cast<int>(k);
            }
            cm.models.push_back(model_from_json(clusters[k].at("model").dump(), source + " cluster " + std::to_string(k)));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("'" + source + "': malformed clustered model: " + e.what());
    }
    cm.validate();
    return cm;
}

void save_clustered(const ClusteredModel& cm, const std::filesystem::path& path)
{
    const std::string text = clustered_to_json(cm);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << text << '\n';
    if (!out) throw DataError("write failed: '" + path.string() + "'");
}

ClusteredModel load_clustered(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open clustered model '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return clustered_from_json(ss.str(), path.string());
}

}  // namespace nprt
