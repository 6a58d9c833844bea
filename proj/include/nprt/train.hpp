#pragma once

#include <functional>

#include "nprt/mlp.hpp"

namespace nprt {

struct TrainConfig {
    std::size_t batch = 8192;
    int epochs = 200;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t seed = 1;
    double val_fraction = 0.05;

    void validate() const;
};

struct EpochStats {
    int epoch = 0;  // 0-based
    double train_l1 = 0.0;  // mean over the epoch's batches, in units of the target scale
    double val_l1 = 0.0;    // NaN when there is no validation split
};

struct TrainReport {
    std::size_t train_count = 0;
    std::size_t val_count = 0;
    std::vector<EpochStats> epochs;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Gradient buffers share the layer shapes of the model.
using ModelGradients = std::vector<DenseLayer>;

// Mean |pred - target| over batch and coefficients, pred = network output
// before scaling and targets already divided by the scale. `encoded` is
// row-major batch x input_dim, `targets` batch x output_dim. Fills `grads`
// (reverse mode; sign(0) = 0) when given.
double loss_and_grad(const MlpModel& model, std::span<const double> encoded, std::span<const double> targets,
                     std::size_t batch, ModelGradients* grads);

// Trains `model` in place on `ds` with Adam and the l1 loss. Records are put
// in a canonical order first, so the result does not depend on the order of
// ds.records. A seeded validation split is held out up front and batches are
// reshuffled every epoch. Throws NumericError naming the epoch on divergence.
TrainReport fit(MlpModel& model, const TransferDataset& ds, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct TrainResult {
    MlpModel model;
    TrainReport report;
};

// init_model with the dataset normalization and scale, then fit.
TrainResult train(const TransferDataset& ds, const MlpConfig& mlp, const TrainConfig& cfg,
                  const PositionalEncodingConfig& pe = {}, const EpochCallback& on_epoch = {});

// Mean l1 of model predictions against records, in units of the model scale.
double evaluate_l1(const MlpModel& model, const std::vector<TransferRecord>& records);

}  // namespace nprt
