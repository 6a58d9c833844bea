#pragma once

// Packs MLP weights into 4x4 blocks and emits a GLSL fragment shader that
// evaluates the network per fragment and shades with the result.
//
// Block layout: a layer with R outputs and C inputs is padded to multiples of
// 4 and cut into ceil(R/4) x ceil(C/4) blocks, stored row block by row block.
// Each block is column-major (GLSL mat4 order, m[4*col + row]) and acts on
// column vectors: y_r += B(r, c) * x_c.

#include <array>
#include <string>
#include <vector>

#include "nprt/mlp.hpp"

namespace nprt {

class CodegenError : public InputError {
public:
    using InputError::InputError;
};

inline constexpr int kMaxShaderWidth = 128;

using Block4 = std::array<double, 16>;

struct PackedLayer {
    int rows = 0;  // unpadded
    int cols = 0;
    int row_blocks = 0;
    int col_blocks = 0;
    std::vector<Block4> blocks;
    std::vector<double> bias;  // padded to 4 * row_blocks

    const Block4& block(int r, int c) const { return blocks[static_cast<std::size_t>(r * col_blocks + c)]; }
    Block4& block(int r, int c) { return blocks[static_cast<std::size_t>(r * col_blocks + c)]; }
};

struct PackedModel {
    int order = kDefaultShOrder;
    PositionalEncodingConfig pe;
    Normalization norm;
    double scale = 1.0;
    double alpha = 0.01;
    OutputActivation output = OutputActivation::Tanh;
    std::vector<PackedLayer> layers;
};

PackedLayer pack_layer(const DenseLayer& layer);
PackedModel pack_model(const MlpModel& model);

// Row-major rows x cols weights and the unpadded bias.
DenseLayer unpack_layer(const PackedLayer& packed);

// Sets every padding slot (weights and bias) back to 0.
void zero_padding(PackedLayer& packed);

// forward() in f32 using only 4-wide block operations, in the order the
// emitted shader performs them.
SHVector reference_eval_packed(const PackedModel& packed, const Vec3& p, const Vec3& n);

struct ShaderOptions {
    int glsl_version = 330;
    // Adds inputs, uniforms and main() for diffuse / glossy shading. Without
    // it only the constants, encode() and transfer() are emitted.
    bool shading_entry = true;
};

// Throws CodegenError when a layer is wider than kMaxShaderWidth, or when
// shading_entry is set and the SH order is not 4.
std::string emit_shader(const MlpModel& model, const ShaderOptions& opts = {});

// GLSL float literal that parses back to exactly float(v).
std::string glsl_float(double v);

// Uniform values for the shading entry point. light[c] holds channel c;
// light_matrix[c] is transpose(light_matrix(light[c], tau)) cut into 4x4
// column-major blocks, block (kb, ib) at index 4 * kb + ib.
struct ShaderLightUniforms {
    std::array<std::array<float, 16>, 3> light{};
    std::array<std::array<std::array<float, 16>, 16>, 3> light_matrix{};
};

ShaderLightUniforms shader_light_uniforms(const std::array<SHVector, 3>& light, const TripleProductTensor& tau);

}  // namespace nprt
