#pragma once

// Batched MLP kernels shared by inference and training. Samples are columns.

#include <Eigen/Dense>

#include "nprt/mlp.hpp"

namespace nprt::detail {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const RowMatrix> weights_of(const DenseLayer& l)
{
    return {l.weights.data(), l.rows, l.cols};
}

inline Eigen::Map<const Eigen::VectorXd> bias_of(const DenseLayer& l)
{
    return {l.bias.data(), l.rows};
}

// acts[0] = x, acts[i + 1] = output of layer i. Throws NumericError naming the
// first layer that produces a non-finite value.
inline void forward_columns(const MlpModel& model, const Eigen::MatrixXd& x, std::vector<Eigen::MatrixXd>& acts)
{
    acts.resize(model.layers.size() + 1);
    acts[0] = x;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const DenseLayer& l = model.layers[i];
        Eigen::MatrixXd& z = acts[i + 1];
        z.noalias() = weights_of(l) * acts[i];
        z.colwise() += bias_of(l);
        if (i + 1 < model.layers.size()) {
            const double a = model.alpha;
            z = z.unaryExpr([a](double v) { return v > 0.0 ? v : a * v; });
        } else if (model.output == OutputActivation::Tanh) {
            z = z.array().tanh();
        }
        if (!z.allFinite()) throw NumericError("non-finite activation in layer " + std::to_string(i));
    }
}

}  // namespace nprt::detail
