#include "nprt/shader_codegen.hpp"

#include <cmath>
#include <cstdio>

namespace nprt {

namespace {

int blocks_for(int n) { return (n + 3) / 4; }

std::string layer_name(std::size_t layer) { return "L" + std::to_string(layer); }

void append_vec4(std::string& s, const double* v)
{
    s += "vec4(";
    for (int i = 0; i < 4; ++i) {
        if (i) s += ", ";
        s += glsl_float(v[i]);
    }
    s += ")";
}

void check_emittable(const MlpModel& model, const ShaderOptions& opts)
{
    model.validate();
    for (std::size_t i = 0; i + 1 < model.layers.size(); ++i)
        if (model.layers[i].rows > kMaxShaderWidth)
            throw CodegenError("layer " + std::to_string(i) + " has " + std::to_string(model.layers[i].rows) +
                               " units; shaders support at most " + std::to_string(kMaxShaderWidth));
    if (opts.shading_entry && model.order != 4) throw CodegenError("the shading entry point needs SH order 4");
    if (opts.glsl_version < 130) throw CodegenError("GLSL version must be at least 130 (tanh, out arrays)");
}

void emit_encode(std::string& s, const PositionalEncodingConfig& pe)
{
    const int dim = pe.dim();
    const int nb = blocks_for(dim);
    s += "vec3 half_turns(vec3 t) { return t - 2.0 * floor(0.5 * t + 0.5); }\n\n";
    s += "void encode(vec3 p, vec3 n, out vec4 x[" + std::to_string(nb) + "])\n{\n";
    s += "    float e[" + std::to_string(4 * nb) + "];\n";
    s += "    vec3 a, sa, ca;\n";
    int k = 0;
    auto put = [&](const std::string& v) {
        for (const char* c : {".x", ".y", ".z"}) s += "    e[" + std::to_string(k++) + "] = " + v + c + ";\n";
    };
    auto ladder = [&](const char* v, int freqs) {
        if (pe.include_raw) put(v);
        double f = 1.0;
        for (int i = 0; i < freqs; ++i, f *= 2.0) {
            s += "    a = PI * half_turns(" + glsl_float(f) + " * " + v + ");\n";
            s += "    sa = sin(a);\n    ca = cos(a);\n";
            put("sa");
            put("ca");
        }
    };
    ladder("p", pe.freq_pos);
    ladder("n", pe.freq_norm);
    while (k < 4 * nb) s += "    e[" + std::to_string(k++) + "] = 0.0;\n";
    s += "    for (int j = 0; j < " + std::to_string(nb) + "; ++j)\n";
    s += "        x[j] = vec4(e[4 * j], e[4 * j + 1], e[4 * j + 2], e[4 * j + 3]);\n}\n\n";
}

void emit_constants(std::string& s, const PackedModel& pm)
{
    for (std::size_t li = 0; li < pm.layers.size(); ++li) {
        const PackedLayer& l = pm.layers[li];
        const std::string name = layer_name(li);
        s += "// " + name + ": " + std::to_string(l.rows) + " x " + std::to_string(l.cols) + ", " +
             std::to_string(l.row_blocks) + " x " + std::to_string(l.col_blocks) + " blocks\n";
        for (int r = 0; r < l.row_blocks; ++r) {
            for (int c = 0; c < l.col_blocks; ++c) {
                s += "const mat4 " + name + "_W" + std::to_string(r) + "_" + std::to_string(c) + " = mat4(";
                const Block4& b = l.block(r, c);
                for (int i = 0; i < 16; ++i) {
                    if (i) s += ", ";
                    s += glsl_float(b[static_cast<std::size_t>(i)]);
                }
                s += ");\n";
            }
            s += "const vec4 " + name + "_B" + std::to_string(r) + " = ";
            append_vec4(s, l.bias.data() + 4 * r);
            s += ";\n";
        }
        s += "\n";
    }
}

void emit_transfer(std::string& s, const PackedModel& pm)
{
    const int out_blocks = pm.layers.back().row_blocks;
    s += "void transfer(vec3 pos, vec3 n, out vec4 t[" + std::to_string(out_blocks) + "])\n{\n";
    s += "    vec4 x0[" + std::to_string(pm.layers.front().col_blocks) + "];\n";
    s += "    encode((pos - NORM_CENTER) / NORM_HALF_EXTENT, n, x0);\n";
    for (std::size_t li = 0; li < pm.layers.size(); ++li) {
        const PackedLayer& l = pm.layers[li];
        const bool last = li + 1 == pm.layers.size();
        const std::string name = layer_name(li);
        const std::string in = "x" + std::to_string(li);
        const std::string out = last ? "t" : "x" + std::to_string(li + 1);
        if (!last) s += "    vec4 " + out + "[" + std::to_string(l.row_blocks) + "];\n";
        for (int r = 0; r < l.row_blocks; ++r) {
            std::string sum = name + "_B" + std::to_string(r);
            for (int c = 0; c < l.col_blocks; ++c)
                sum += " + " + name + "_W" + std::to_string(r) + "_" + std::to_string(c) + " * " + in + "[" +
                       std::to_string(c) + "]";
            std::string expr;
            if (!last) expr = "leaky(" + sum + ")";
            else if (pm.output == OutputActivation::Tanh) expr = "tanh(" + sum + ") * SCALE";
            else expr = "(" + sum + ") * SCALE";
            s += "    " + out + "[" + std::to_string(r) + "] = " + expr + ";\n";
        }
    }
    s += "}\n";
}

const char* kShadingEntry = R"(
in vec3 vPosition;  // world space
in vec3 vNormal;
out vec4 fragColor;

uniform vec3 uEye;
uniform vec4 uLight[12];        // channel c, coefficients 4j..4j+3 at uLight[4 * c + j]
uniform mat4 uLightMatrix[48];  // channel c, block (kb, ib) of transpose(M_c) at 16 * c + 4 * kb + ib,
                                // M_c[i][k] = sum_j tau_ijk L_c,j
uniform vec4 uZonal;            // per band: sqrt(4 pi / (2l + 1)) h_l of the normalized Phong lobe
uniform vec3 uAlbedo;
uniform bool uGlossy;

void sh_basis(vec3 d, out vec4 y[4])
{
    float x = d.x, yy = d.y, z = d.z;
    y[0] = vec4(0.282094792, 0.488602512 * yy, 0.488602512 * z, 0.488602512 * x);
    y[1] = vec4(1.09254843 * x * yy, 1.09254843 * yy * z, 0.315391565 * (3.0 * z * z - 1.0), 1.09254843 * x * z);
    y[2] = vec4(0.546274215 * (x * x - yy * yy), 0.59004359 * yy * (3.0 * x * x - yy * yy),
                2.89061144 * x * yy * z, 0.457045799 * yy * (5.0 * z * z - 1.0));
    y[3] = vec4(0.373176333 * z * (5.0 * z * z - 3.0), 0.457045799 * x * (5.0 * z * z - 1.0),
                1.44530572 * z * (x * x - yy * yy), 0.59004359 * x * (x * x - 3.0 * yy * yy));
}

void main()
{
    vec3 n = normalize(vNormal);
    vec4 t[4];
    transfer(vPosition, n, t);
    vec3 color;
    if (!uGlossy) {
        for (int c = 0; c < 3; ++c)
            color[c] = dot(t[0], uLight[4 * c]) + dot(t[1], uLight[4 * c + 1]) + dot(t[2], uLight[4 * c + 2]) +
                       dot(t[3], uLight[4 * c + 3]);
        color *= uAlbedo / PI;
    } else {
        vec3 wo = normalize(uEye - vPosition);
        vec3 r = 2.0 * dot(n, wo) * n - wo;
        vec4 y[4];
        sh_basis(r, y);
        vec4 zb[4] = vec4[4](vec4(uZonal.x, uZonal.yyy), vec4(uZonal.z), vec4(uZonal.z, uZonal.www), vec4(uZonal.w));
        for (int c = 0; c < 3; ++c) {
            float acc = 0.0;
            for (int kb = 0; kb < 4; ++kb) {
                vec4 h = vec4(0.0);
                for (int ib = 0; ib < 4; ++ib) h += uLightMatrix[16 * c + 4 * kb + ib] * t[ib];
                acc += dot(h * zb[kb], y[kb]);
            }
            color[c] = acc;
        }
        color *= uAlbedo;
    }
    fragColor = vec4(max(color, vec3(0.0)), 1.0);
}
)";

}  // namespace

std::string glsl_float(double v)
{
    const float f = static_cast<float>(v);
    if (!std::isfinite(f)) throw CodegenError("value " + std::to_string(v) + " is not representable as a finite float");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(f));
    std::string s = buf;
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

PackedLayer pack_layer(const DenseLayer& layer)
{
    PackedLayer p;
    p.rows = layer.rows;
    p.cols = layer.cols;
    p.row_blocks = blocks_for(layer.rows);
    p.col_blocks = blocks_for(layer.cols);
    p.blocks.assign(static_cast<std::size_t>(p.row_blocks * p.col_blocks), Block4{});
    for (int r = 0; r < layer.rows; ++r)
        for (int c = 0; c < layer.cols; ++c)
            p.block(r / 4, c / 4)[static_cast<std::size_t>(4 * (c % 4) + r % 4)] =
                layer.weights[static_cast<std::size_t>(r) * static_cast<std::size_t>(layer.cols) + static_cast<std::size_t>(c)];
    p.bias.assign(static_cast<std::size_t>(4 * p.row_blocks), 0.0);
    std::copy(layer.bias.begin(), layer.bias.end(), p.bias.begin());
    return p;
}

PackedModel pack_model(const MlpModel& model)
{
    model.validate();
    PackedModel pm;
    pm.order = model.order;
    pm.pe = model.pe;
    pm.norm = model.norm;
    pm.scale = model.scale;
    pm.alpha = model.alpha;
    pm.output = model.output;
    for (const auto& l : model.layers) pm.layers.push_back(pack_layer(l));
    return pm;
}

DenseLayer unpack_layer(const PackedLayer& p)
{
    DenseLayer l;
    l.rows = p.rows;
    l.cols = p.cols;
    l.weights.resize(static_cast<std::size_t>(p.rows) * static_cast<std::size_t>(p.cols));
    for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < p.cols; ++c)
            l.weights[static_cast<std::size_t>(r) * static_cast<std::size_t>(p.cols) + static_cast<std::size_t>(c)] =
                p.block(r / 4, c / 4)[static_cast<std::size_t>(4 * (c % 4) + r % 4)];
    l.bias.assign(p.bias.begin(), p.bias.begin() + p.rows);
    return l;
}

void zero_padding(PackedLayer& p)
{
    for (int r = 0; r < 4 * p.row_blocks; ++r)
        for (int c = 0; c < 4 * p.col_blocks; ++c)
            if (r >= p.rows || c >= p.cols) p.block(r / 4, c / 4)[static_cast<std::size_t>(4 * (c % 4) + r % 4)] = 0.0;
    for (std::size_t i = static_cast<std::size_t>(p.rows); i < p.bias.size(); ++i) p.bias[i] = 0.0;
}

SHVector reference_eval_packed(const PackedModel& pm, const Vec3& p, const Vec3& n)
{
    using F4 = std::array<float, 4>;
    if (pm.layers.empty()) throw InputError("packed model has no layers");
    const float pi = static_cast<float>(kPi);

    // encode
    const PositionalEncodingConfig& pe = pm.pe;
    const int dim = pe.dim();
    std::vector<float> e(static_cast<std::size_t>(4 * blocks_for(dim)), 0.0f);
    const float half = static_cast<float>(pm.norm.half_extent);
    float pn[3], nn[3];
    for (int a = 0; a < 3; ++a) {
        pn[a] = (static_cast<float>(p[a]) - static_cast<float>(pm.norm.center[a])) / half;
        nn[a] = static_cast<float>(n[a]);
    }
    std::size_t k = 0;
    auto ladder = [&](const float* v, int freqs) {
        if (pe.include_raw)
            for (int a = 0; a < 3; ++a) e[k++] = v[a];
        float f = 1.0f;
        for (int i = 0; i < freqs; ++i, f *= 2.0f) {
            float ang[3];
            for (int a = 0; a < 3; ++a) {
                const float t = f * v[a];
                ang[a] = pi * (t - 2.0f * std::floor(0.5f * t + 0.5f));
            }
            for (int a = 0; a < 3; ++a) e[k++] = std::sin(ang[a]);
            for (int a = 0; a < 3; ++a) e[k++] = std::cos(ang[a]);
        }
    };
    ladder(pn, pe.freq_pos);
    ladder(nn, pe.freq_norm);

    std::vector<F4> x(e.size() / 4), y;
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = {e[4 * j], e[4 * j + 1], e[4 * j + 2], e[4 * j + 3]};

    const float alpha = static_cast<float>(pm.alpha);
    const float scale = static_cast<float>(pm.scale);
    for (std::size_t li = 0; li < pm.layers.size(); ++li) {
        const PackedLayer& l = pm.layers[li];
        if (static_cast<std::size_t>(l.col_blocks) != x.size()) throw InputError("packed layer dimensions do not chain");
        const bool last = li + 1 == pm.layers.size();
        y.assign(static_cast<std::size_t>(l.row_blocks), F4{});
        for (int r = 0; r < l.row_blocks; ++r) {
            F4 acc;
            for (int i = 0; i < 4; ++i) acc[static_cast<std::size_t>(i)] = static_cast<float>(l.bias[static_cast<std::size_t>(4 * r + i)]);
            for (int c = 0; c < l.col_blocks; ++c) {
                const Block4& b = l.block(r, c);
                const F4& v = x[static_cast<std::size_t>(c)];
                for (int row = 0; row < 4; ++row) {
                    float dot = 0.0f;
                    for (int col = 0; col < 4; ++col)
                        dot += static_cast<float>(b[static_cast<std::size_t>(4 * col + row)]) * v[static_cast<std::size_t>(col)];
                    acc[static_cast<std::size_t>(row)] += dot;
                }
            }
            for (float& a : acc) {
                if (!last) a = std::max(a, 0.0f) + alpha * std::min(a, 0.0f);
                else a = (pm.output == OutputActivation::Tanh ? std::tanh(a) : a) * scale;
            }
            y[static_cast<std::size_t>(r)] = acc;
        }
        x.swap(y);
    }
    SHVector out(pm.order);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i / 4][i % 4];
    return out;
}

std::string emit_shader(const MlpModel& model, const ShaderOptions& opts)
{
    check_emittable(model, opts);
    const PackedModel pm = pack_model(model);

    std::string s;
    s += "#version " + std::to_string(opts.glsl_version) + "\n";
    s += "// Transfer network: " + std::to_string(model.input_dim());
    for (const auto& l : model.layers) s += " -> " + std::to_string(l.rows);
    s += "\n// Hidden layers use leaky relu, the output ";
    s += model.output == OutputActivation::Tanh ? "tanh" : "no activation";
    s += " followed by SCALE.\n";
    s += "// mat4 constants are column-major and multiply column vectors (y = W * x).\n";
    s += "// LK_Wr_c is block (r, c) of layer K: output rows 4r..4r+3, inputs 4c..4c+3,\n";
    s += "// listed row block by row block. Padding entries are 0.\n\n";

    s += "const float PI = " + glsl_float(kPi) + ";\n";
    s += "const vec3 NORM_CENTER = vec3(" + glsl_float(model.norm.center.x) + ", " + glsl_float(model.norm.center.y) +
         ", " + glsl_float(model.norm.center.z) + ");\n";
    s += "const float NORM_HALF_EXTENT = " + glsl_float(model.norm.half_extent) + ";\n";
    s += "const float SCALE = " + glsl_float(model.scale) + ";\n";
    s += "const float ALPHA = " + glsl_float(model.alpha) + ";\n\n";
    s += "vec4 leaky(vec4 v) { return max(v, 0.0) + ALPHA * min(v, 0.0); }\n\n";

    emit_encode(s, model.pe);
    emit_constants(s, pm);
    emit_transfer(s, pm);
    if (opts.shading_entry) s += kShadingEntry;
    return s;
}

ShaderLightUniforms shader_light_uniforms(const std::array<SHVector, 3>& light, const TripleProductTensor& tau)
{
    if (tau.order() != 4) throw InputError("shader uniforms need an order-4 triple product tensor");
    ShaderLightUniforms u;
    for (std::size_t c = 0; c < 3; ++c) {
        if (light[c].order() != 4) throw InputError("shader uniforms need order-4 light coefficients");
        for (std::size_t i = 0; i < 16; ++i) u.light[c][i] = static_cast<float>(light[c][i]);
        const std::vector<double> m = light_matrix(light[c], tau);
        for (int kb = 0; kb < 4; ++kb)
            for (int ib = 0; ib < 4; ++ib) {
                auto& block = u.light_matrix[c][static_cast<std::size_t>(4 * kb + ib)];
                for (int r = 0; r < 4; ++r)
                    for (int col = 0; col < 4; ++col)
                        block[static_cast<std::size_t>(4 * col + r)] =
                            static_cast<float>(m[static_cast<std::size_t>((4 * ib + col) * 16 + 4 * kb + r)]);
            }
    }
    return u;
}

}  // namespace nprt
