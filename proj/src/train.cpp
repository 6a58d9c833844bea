#include "nprt/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mlp_eigen.hpp"

namespace nprt {

namespace {

using detail::bias_of;
using detail::weights_of;

struct Batch {
    Eigen::MatrixXd x;  // input_dim x count
    Eigen::MatrixXd y;  // output_dim x count, divided by scale
};

double backprop(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, ModelGradients* grads,
                std::vector<Eigen::MatrixXd>& acts)
{
    detail::forward_columns(model, x, acts);
    const Eigen::MatrixXd diff = acts.back() - y;
    const double denom = static_cast<double>(diff.size());
    const double loss = diff.cwiseAbs().sum() / denom;
    if (!grads) return loss;

    const std::size_t L = model.layers.size();
    grads->resize(L);
    Eigen::MatrixXd d = diff.unaryExpr([denom](double v) { return v > 0.0 ? 1.0 / denom : (v < 0.0 ? -1.0 / denom : 0.0); });
    for (std::size_t i = L; i-- > 0;) {
        const Eigen::MatrixXd& a = acts[i + 1];
        if (i + 1 == L) {
            if (model.output == OutputActivation::Tanh) d.array() *= 1.0 - a.array().square();
        } else {
            const double alpha = model.alpha;
            d.array() *= a.unaryExpr([alpha](double v) { return v > 0.0 ? 1.0 : alpha; }).array();
        }
        const DenseLayer& l = model.layers[i];
        DenseLayer& g = (*grads)[i];
        g.rows = l.rows;
        g.cols = l.cols;
        g.weights.resize(l.weights.size());
        g.bias.resize(l.bias.size());
        // Products land in aligned storage first; writing them straight into
        // std::vector memory rounds differently with the heap address.
        const detail::RowMatrix gw = d * acts[i].transpose();
        const Eigen::VectorXd gb = d.rowwise().sum();
        Eigen::Map<detail::RowMatrix>(g.weights.data(), l.rows, l.cols) = gw;
        Eigen::Map<Eigen::VectorXd>(g.bias.data(), l.rows) = gb;
        if (i > 0) d = (weights_of(l).transpose() * d).eval();
    }
    return loss;
}

bool record_less(const TransferRecord& a, const TransferRecord& b)
{
    for (int k = 0; k < 3; ++k)
        if (a.position[k] != b.position[k]) return a.position[k] < b.position[k];
    for (int k = 0; k < 3; ++k)
        if (a.normal[k] != b.normal[k]) return a.normal[k] < b.normal[k];
    return std::lexicographical_compare(a.transfer.coeffs().begin(), a.transfer.coeffs().end(),
                                        b.transfer.coeffs().begin(), b.transfer.coeffs().end());
}

void shuffle(std::vector<std::size_t>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

void encode_records(const MlpModel& model, const std::vector<const TransferRecord*>& recs, Batch& out)
{
    const auto in = static_cast<Eigen::Index>(model.input_dim());
    const auto no = static_cast<Eigen::Index>(model.output_dim());
    const auto n = static_cast<Eigen::Index>(recs.size());
    out.x.resize(in, n);
    out.y.resize(no, n);
    for (Eigen::Index s = 0; s < n; ++s) {
        const TransferRecord& r = *recs[static_cast<std::size_t>(s)];
        if (static_cast<Eigen::Index>(r.transfer.size()) != no)
            throw InputError("dataset SH order does not match the model");
        positional_encode(model.norm.apply(r.position), r.normal, model.pe,
                          std::span<double>(out.x.col(s).data(), static_cast<std::size_t>(in)));
        for (Eigen::Index c = 0; c < no; ++c) out.y(c, s) = r.transfer[static_cast<std::size_t>(c)] / model.scale;
    }
}

double batched_l1(const MlpModel& model, const Batch& data)
{
    constexpr Eigen::Index kChunk = 4096;
    std::vector<Eigen::MatrixXd> acts;
    double sum = 0.0;
    for (Eigen::Index b = 0; b < data.x.cols(); b += kChunk) {
        const Eigen::Index n = std::min(kChunk, data.x.cols() - b);
        const double l = backprop(model, data.x.middleCols(b, n), data.y.middleCols(b, n), nullptr, acts);
        sum += l * static_cast<double>(n);
    }
    return data.x.cols() > 0 ? sum / static_cast<double>(data.x.cols()) : std::numeric_limits<double>::quiet_NaN();
}

struct Adam {
    std::vector<std::vector<double>> m, v;
    long long t = 0;

    explicit Adam(const MlpModel& model)
    {
        for (const auto& l : model.layers) {
            m.emplace_back(l.weights.size() + l.bias.size(), 0.0);
            v.emplace_back(l.weights.size() + l.bias.size(), 0.0);
        }
    }

    void step(MlpModel& model, const ModelGradients& g, const TrainConfig& cfg)
    {
        ++t;
        const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < model.layers.size(); ++i) {
            DenseLayer& l = model.layers[i];
            const std::size_t nw = l.weights.size();
            auto update = [&](double& p, double grad, std::size_t k) {
                m[i][k] = cfg.beta1 * m[i][k] + (1.0 - cfg.beta1) * grad;
                v[i][k] = cfg.beta2 * v[i][k] + (1.0 - cfg.beta2) * grad * grad;
                p -= cfg.lr * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + cfg.eps);
            };
            for (std::size_t k = 0; k < nw; ++k) update(l.weights[k], g[i].weights[k], k);
            for (std::size_t k = 0; k < l.bias.size(); ++k) update(l.bias[k], g[i].bias[k], nw + k);
        }
    }
};

}  // namespace

void TrainConfig::validate() const
{
    if (batch == 0) throw InputError("batch size must be positive");
    if (epochs < 0) throw InputError("epoch count must be non-negative");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InputError("learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw InputError("Adam betas must be in [0, 1)");
    if (!(eps > 0.0)) throw InputError("Adam epsilon must be positive");
    if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw InputError("validation fraction must be in [0, 1)");
}

double loss_and_grad(const MlpModel& model, std::span<const double> encoded, std::span<const double> targets,
                     std::size_t batch, ModelGradients* grads)
{
    const auto in = static_cast<std::size_t>(model.input_dim());
    const auto no = static_cast<std::size_t>(model.output_dim());
    if (batch == 0) throw InputError("loss_and_grad: empty batch");
    if (encoded.size() != batch * in || targets.size() != batch * no)
        throw InputError("loss_and_grad: buffer sizes do not match the batch");
    // Row-major batch x dim is column-major dim x batch.
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(encoded.data(), static_cast<Eigen::Index>(in),
                                                                static_cast<Eigen::Index>(batch));
    const Eigen::MatrixXd y = Eigen::Map<const Eigen::MatrixXd>(targets.data(), static_cast<Eigen::Index>(no),
                                                                static_cast<Eigen::Index>(batch));
    std::vector<Eigen::MatrixXd> acts;
    return backprop(model, x, y, grads, acts);
}

TrainReport fit(MlpModel& model, const TransferDataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch)
{
    cfg.validate();
    model.validate();
    if (ds.order != model.order) throw InputError("dataset SH order does not match the model");
    if (ds.records.empty()) throw InputError("cannot train on an empty dataset");

    std::vector<const TransferRecord*> sorted;
    sorted.reserve(ds.records.size());
    for (const auto& r : ds.records) sorted.push_back(&r);
    std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return record_less(*a, *b); });

    std::vector<std::size_t> order(sorted.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng split_rng(derive_seed(cfg.seed, 0));
    shuffle(order, split_rng);
    const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(sorted.size())));
    if (n_val >= sorted.size()) throw InputError("validation split leaves no training data");

    std::vector<const TransferRecord*> train_recs, val_recs;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_val ? val_recs : train_recs).push_back(sorted[order[i]]);

    Batch train_set, val_set;
    encode_records(model, train_recs, train_set);
    encode_records(model, val_recs, val_set);

    TrainReport report;
    report.train_count = train_recs.size();
    report.val_count = val_recs.size();

    const auto n = static_cast<Eigen::Index>(train_recs.size());
    const auto bs = static_cast<Eigen::Index>(std::min<std::size_t>(cfg.batch, train_recs.size()));
    Adam adam(model);
    ModelGradients grads;
    std::vector<Eigen::MatrixXd> acts;
    std::vector<std::size_t> perm(train_recs.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(cfg.seed, 1));
    Batch batch;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(perm, shuffle_rng);
        double sum = 0.0;
        EpochStats st;
        try {
            for (Eigen::Index b = 0; b < n; b += bs) {
                const Eigen::Index count = std::min(bs, n - b);
                batch.x.resize(train_set.x.rows(), count);
                batch.y.resize(train_set.y.rows(), count);
                for (Eigen::Index s = 0; s < count; ++s) {
                    const auto src = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(b + s)]);
                    batch.x.col(s) = train_set.x.col(src);
                    batch.y.col(s) = train_set.y.col(src);
                }
                const double loss = backprop(model, batch.x, batch.y, &grads, acts);
                if (!std::isfinite(loss)) throw NumericError("non-finite loss");
                adam.step(model, grads, cfg);
                sum += loss * static_cast<double>(count);
            }
            for (const auto& l : model.layers)
                for (double w : l.weights)
                    if (!std::isfinite(w)) throw NumericError("non-finite weight");
            st.val_l1 = batched_l1(model, val_set);
        } catch (const NumericError& e) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        }
        st.epoch = epoch;
        st.train_l1 = sum / static_cast<double>(n);
        report.epochs.push_back(st);
        if (on_epoch) on_epoch(st);
    }
    return report;
}

TrainResult train(const TransferDataset& ds, const MlpConfig& mlp, const TrainConfig& cfg,
                  const PositionalEncodingConfig& pe, const EpochCallback& on_epoch)
{
    if (mlp.order != ds.order) throw InputError("MLP order does not match the dataset");
    TrainResult r{init_model(mlp, pe, ds.norm, ds.scale, derive_seed(cfg.seed, 2)), {}};
    r.report = fit(r.model, ds, cfg, on_epoch);
    return r;
}

double evaluate_l1(const MlpModel& model, const std::vector<TransferRecord>& records)
{
    std::vector<const TransferRecord*> recs;
    recs.reserve(records.size());
    for (const auto& r : records) recs.push_back(&r);
    Batch data;
    encode_records(model, recs, data);
    return batched_l1(model, data);
}

}  // namespace nprt
