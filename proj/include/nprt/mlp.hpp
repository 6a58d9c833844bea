#pragma once

// Positional-encoded MLP mapping (position, normal) to SH transfer, plus its
// JSON model format:
//   {version, sh_order, pe:{freq_pos,freq_norm,include_raw},
//    norm:{center,half_extent}, scale,
//    layers:[{rows, cols, weights:[row-major], bias:[...]}],
//    hidden_activation:{type:"leaky_relu", alpha}, output_activation:"tanh"}

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nprt/bake.hpp"
#include "nprt/sh.hpp"

namespace nprt {

struct PositionalEncodingConfig {
    int freq_pos = 6;
    int freq_norm = 4;
    bool include_raw = true;

    int dim() const
    {
        const int raw = include_raw ? 1 : 0;
        return 3 * (raw + 2 * freq_pos) + 3 * (raw + 2 * freq_norm);
    }
};

// [p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^(F-1) pi p), cos(..), n, ladder(n)].
// Each sin/cos entry is a 3-vector, component-wise. p must already be
// normalized into [-1, 1]^3 (InputError otherwise).
void positional_encode(const Vec3& p, const Vec3& n, const PositionalEncodingConfig& cfg, std::span<double> out);
std::vector<double> positional_encode(const Vec3& p, const Vec3& n, const PositionalEncodingConfig& cfg);

struct MlpConfig {
    int width = 64;  // k
    int depth = 4;   // l: l-1 hidden layers plus the output layer
    double alpha = 0.01;
    int order = kDefaultShOrder;

    // k in [16, 512], l >= 2.
    void validate() const;
};

enum class OutputActivation { Tanh, Identity };

struct DenseLayer {
    int rows = 0;  // outputs
    int cols = 0;  // inputs
    std::vector<double> weights;  // row-major rows x cols
    std::vector<double> bias;
};

struct MlpModel {
    int order = kDefaultShOrder;
    PositionalEncodingConfig pe;
    Normalization norm;
    double scale = 1.0;
    double alpha = 0.01;
    OutputActivation output = OutputActivation::Tanh;
    std::vector<DenseLayer> layers;

    int input_dim() const { return pe.dim(); }
    int output_dim() const { return sh_count(order); }
    std::size_t parameter_count() const;

    // Dimension chain, finiteness, scale > 0. Throws FormatError.
    void validate() const;
};

// Layers sized for `cfg` with PyTorch-style U(-1/sqrt(in), 1/sqrt(in)) weights
// and biases.
MlpModel init_model(const MlpConfig& cfg, const PositionalEncodingConfig& pe, const Normalization& norm, double scale,
                    std::uint64_t seed);

// Network output before the scale factor, from an encoded input. Writes every
// layer's activation into `trace` when given (trace[i] = output of layer i).
void forward_encoded(const MlpModel& model, std::span<const double> encoded, std::span<double> out,
                     std::vector<std::vector<double>>* trace = nullptr);

// Batched form of forward_encoded through the same kernel training uses.
// `encoded` is row-major batch x input_dim, out batch x output_dim.
void forward_encoded_batch(const MlpModel& model, std::span<const double> encoded, std::size_t batch,
                           std::vector<double>& out);

// Full prediction for a world-space point: normalize, encode, run, times scale.
SHVector forward(const MlpModel& model, const Vec3& p, const Vec3& n);

// Batched forward for many points; out is row-major count x output_dim.
void forward_batch(const MlpModel& model, std::span<const Vec3> positions, std::span<const Vec3> normals,
                   std::vector<double>& out);

void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);
std::string model_to_json(const MlpModel& model);
MlpModel model_from_json(const std::string& text, const std::string& source = "<string>");

}  // namespace nprt
