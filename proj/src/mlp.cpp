#include "nprt/mlp.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mlp_eigen.hpp"

namespace nprt {

using nlohmann::json;

void positional_encode(const Vec3& p, const Vec3& n, const PositionalEncodingConfig& cfg, std::span<double> out)
{
    if (out.size() != static_cast<std::size_t>(cfg.dim())) throw InputError("encoding buffer has the wrong size");
    constexpr double kRangeTol = 1e-9;
    if (!is_finite(p) || std::max({std::abs(p.x), std::abs(p.y), std::abs(p.z)}) > 1.0 + kRangeTol)
        throw InputError("positional_encode: position outside [-1,1]^3 (normalization bug?)");
    std::size_t k = 0;
    auto ladder = [&](const Vec3& v, int freqs) {
        if (cfg.include_raw)
            for (int a = 0; a < 3; ++a) out[k++] = v[a];
        double f = kPi;
        for (int i = 0; i < freqs; ++i, f *= 2.0) {
            for (int a = 0; a < 3; ++a) out[k++] = std::sin(f * v[a]);
            for (int a = 0; a < 3; ++a) out[k++] = std::cos(f * v[a]);
        }
    };
    ladder(p, cfg.freq_pos);
    ladder(n, cfg.freq_norm);
}

std::vector<double> positional_encode(const Vec3& p, const Vec3& n, const PositionalEncodingConfig& cfg)
{
    std::vector<double> out(static_cast<std::size_t>(cfg.dim()));
    positional_encode(p, n, cfg, out);
    return out;
}

void MlpConfig::validate() const
{
    if (width < 16 || width > 512) throw InputError("MLP width must be in [16, 512]");
    if (depth < 2) throw InputError("MLP depth must be at least 2");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw InputError("leaky-relu slope must be in [0, 1)");
    if (order < 1 || order > kMaxShOrder) throw InputError("invalid SH order");
}

std::size_t MlpModel::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

void MlpModel::validate() const
{
    if (order < 1 || order > kMaxShOrder) throw FormatError("model has invalid SH order");
    if (pe.freq_pos < 0 || pe.freq_norm < 0 || pe.dim() == 0) throw FormatError("model has invalid positional encoding");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw FormatError("model scale must be positive");
    if (!(norm.half_extent > 0.0) || !is_finite(norm.center)) throw FormatError("model has invalid normalization");
    if (!std::isfinite(alpha)) throw FormatError("model has invalid leaky-relu slope");
    if (layers.empty()) throw FormatError("model has no layers");
    int in = input_dim();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const DenseLayer& l = layers[i];
        const std::string where = "layer " + std::to_string(i);
        if (l.cols != in) throw FormatError(where + " expects " + std::to_string(l.cols) + " inputs but receives " + std::to_string(in));
        if (l.rows < 1) throw FormatError(where + " has no outputs");
        if (l.weights.size() != static_cast<std::size_t>(l.rows) * static_cast<std::size_t>(l.cols))
            throw FormatError(where + " weight count does not match rows x cols");
        if (l.bias.size() != static_cast<std::size_t>(l.rows)) throw FormatError(where + " bias size does not match rows");
        for (double w : l.weights)
            if (!std::isfinite(w)) throw FormatError(where + " has a non-finite weight");
        for (double b : l.bias)
            if (!std::isfinite(b)) throw FormatError(where + " has a non-finite bias");
        in = l.rows;
    }
    if (in != output_dim()) throw FormatError("last layer has " + std::to_string(in) + " outputs, expected " + std::to_string(output_dim()));
}

MlpModel init_model(const MlpConfig& cfg, const PositionalEncodingConfig& pe, const Normalization& norm, double scale,
                    std::uint64_t seed)
{
    cfg.validate();
    MlpModel m;
    m.order = cfg.order;
    m.pe = pe;
    m.norm = norm;
    m.scale = scale;
    m.alpha = cfg.alpha;
    Rng rng(seed);
    int in = pe.dim();
    for (int i = 0; i < cfg.depth; ++i) {
        DenseLayer l;
        l.cols = in;
        l.rows = i + 1 < cfg.depth ? cfg.width : m.output_dim();
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        l.weights.resize(static_cast<std::size_t>(l.rows) * static_cast<std::size_t>(l.cols));
        for (double& w : l.weights) w = rng.uniform(-bound, bound);
        l.bias.resize(static_cast<std::size_t>(l.rows));
        for (double& b : l.bias) b = rng.uniform(-bound, bound);
        in = l.rows;
        m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
}

void forward_encoded(const MlpModel& model, std::span<const double> encoded, std::span<double> out,
                     std::vector<std::vector<double>>* trace)
{
    if (encoded.size() != static_cast<std::size_t>(model.input_dim())) throw InputError("encoded input has the wrong size");
    if (out.size() != static_cast<std::size_t>(model.output_dim())) throw InputError("output buffer has the wrong size");
    std::vector<double> cur(encoded.begin(), encoded.end()), next;
    if (trace) trace->clear();
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const DenseLayer& l = model.layers[i];
        next.assign(l.bias.begin(), l.bias.end());
        for (int r = 0; r < l.rows; ++r) {
            const double* w = l.weights.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(l.cols);
            double acc = 0.0;
            for (int c = 0; c < l.cols; ++c) acc += w[c] * cur[static_cast<std::size_t>(c)];
            next[static_cast<std::size_t>(r)] += acc;
        }
        const bool last = i + 1 == model.layers.size();
        for (double& v : next) {
            if (!last) v = v > 0.0 ? v : model.alpha * v;
            else if (model.output == OutputActivation::Tanh) v = std::tanh(v);
            if (!std::isfinite(v)) throw NumericError("non-finite activation in layer " + std::to_string(i));
        }
        if (trace) trace->push_back(next);
        cur.swap(next);
    }
    std::copy(cur.begin(), cur.end(), out.begin());
}

void forward_encoded_batch(const MlpModel& model, std::span<const double> encoded, std::size_t batch,
                           std::vector<double>& out)
{
    const auto in = static_cast<Eigen::Index>(model.input_dim());
    const auto no = static_cast<Eigen::Index>(model.output_dim());
    if (encoded.size() != batch * static_cast<std::size_t>(in)) throw InputError("encoded batch has the wrong size");
    const Eigen::MatrixXd x = Eigen::Map<const Eigen::MatrixXd>(encoded.data(), in, static_cast<Eigen::Index>(batch));
    std::vector<Eigen::MatrixXd> acts;
    detail::forward_columns(model, x, acts);
    out.resize(batch * static_cast<std::size_t>(no));
    Eigen::Map<Eigen::MatrixXd>(out.data(), no, static_cast<Eigen::Index>(batch)) = acts.back();
}

SHVector forward(const MlpModel& model, const Vec3& p, const Vec3& n)
{
    const auto enc = positional_encode(model.norm.apply(p), n, model.pe);
    SHVector t(model.order);
    forward_encoded(model, enc, t.coeffs());
    t *= model.scale;
    return t;
}

void forward_batch(const MlpModel& model, std::span<const Vec3> positions, std::span<const Vec3> normals,
                   std::vector<double>& out)
{
    if (positions.size() != normals.size()) throw InputError("forward_batch: positions and normals differ in length");
    const auto in = static_cast<std::size_t>(model.input_dim());
    const auto no = static_cast<std::size_t>(model.output_dim());
    out.resize(positions.size() * no);
    constexpr std::size_t kChunk = 2048;
    std::vector<Eigen::MatrixXd> acts;
    Eigen::MatrixXd x;
    for (std::size_t begin = 0; begin < positions.size(); begin += kChunk) {
        const std::size_t count = std::min(kChunk, positions.size() - begin);
        x.resize(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(count));
        for (std::size_t s = 0; s < count; ++s)
            positional_encode(model.norm.apply(positions[begin + s]), normals[begin + s], model.pe,
                              std::span<double>(x.col(static_cast<Eigen::Index>(s)).data(), in));
        detail::forward_columns(model, x, acts);
        const Eigen::MatrixXd& y = acts.back();
        for (std::size_t s = 0; s < count; ++s)
            for (std::size_t c = 0; c < no; ++c)
                out[(begin + s) * no + c] = model.scale * y(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s));
    }
}

// --- JSON ------------------------------------------------------------------------

std::string model_to_json(const MlpModel& model)
{
    json j;
    j["version"] = 1;
    j["sh_order"] = model.order;
    j["pe"] = {{"freq_pos", model.pe.freq_pos}, {"freq_norm", model.pe.freq_norm}, {"include_raw", model.pe.include_raw}};
    j["norm"] = {{"center", {model.norm.center.x, model.norm.center.y, model.norm.center.z}},
                 {"half_extent", model.norm.half_extent}};
    j["scale"] = model.scale;
    j["hidden_activation"] = {{"type", "leaky_relu"}, {"alpha", model.alpha}};
    j["output_activation"] = model.output == OutputActivation::Tanh ? "tanh" : "identity";
    json layers = json::array();
    for (const auto& l : model.layers)
        layers.push_back({{"rows", l.rows}, {"cols", l.cols}, {"weights", l.weights}, {"bias", l.bias}});
    j["layers"] = std::move(layers);
    return j.dump(1);
}

namespace {

const json& field(const json& j, const char* key, const std::string& path)
{
    if (!j.is_object()) throw FormatError("model JSON: '" + path + "' is not an object");
    auto it = j.find(key);
    if (it == j.end()) throw FormatError("model JSON is missing field '" + (path.empty() ? "" : path + ".") + key + "'");
    return *it;
}

template <typename T>
T get_as(const json& j, const char* key, const std::string& path)
{
    const json& v = field(j, key, path);
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw FormatError("model JSON field '" + (path.empty() ? "" : path + ".") + key + "' has the wrong type");
    }
}

}  // namespace

MlpModel model_from_json(const std::string& text, const std::string& source)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw FormatError(source + ": invalid JSON: " + e.what());
    }
    MlpModel m;
    const int version = get_as<int>(j, "version", "");
    if (version != 1) throw FormatError(source + ": unsupported model version " + std::to_string(version));
    m.order = get_as<int>(j, "sh_order", "");
    const json& pe = field(j, "pe", "");
    m.pe.freq_pos = get_as<int>(pe, "freq_pos", "pe");
    m.pe.freq_norm = get_as<int>(pe, "freq_norm", "pe");
    m.pe.include_raw = get_as<bool>(pe, "include_raw", "pe");
    const json& norm = field(j, "norm", "");
    const auto c = get_as<std::vector<double>>(norm, "center", "norm");
    if (c.size() != 3) throw FormatError("model JSON field 'norm.center' must have 3 entries");
    m.norm.center = {c[0], c[1], c[2]};
    m.norm.half_extent = get_as<double>(norm, "half_extent", "norm");
    m.scale = get_as<double>(j, "scale", "");
    const json& hidden = field(j, "hidden_activation", "");
    if (get_as<std::string>(hidden, "type", "hidden_activation") != "leaky_relu")
        throw FormatError("unsupported hidden activation");
    m.alpha = get_as<double>(hidden, "alpha", "hidden_activation");
    const auto out = get_as<std::string>(j, "output_activation", "");
    if (out == "tanh") m.output = OutputActivation::Tanh;
    else if (out == "identity") m.output = OutputActivation::Identity;
    else throw FormatError("unsupported output activation '" + out + "'");
    const json& layers = field(j, "layers", "");
    if (!layers.is_array()) throw FormatError("model JSON field 'layers' must be an array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string path = "layers[" + std::to_string(i) + "]";
        DenseLayer l;
        l.rows = get_as<int>(layers[i], "rows", path);
        l.cols = get_as<int>(layers[i], "cols", path);
        l.weights = get_as<std::vector<double>>(layers[i], "weights", path);
        l.bias = get_as<std::vector<double>>(layers[i], "bias", path);
        m.layers.push_back(std::move(l));
    }
    m.validate();
    return m;
}

void save_model(const MlpModel& model, const std::filesystem::path& path)
{
    model.validate();
    std::ofstream out(path);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    out << model_to_json(model) << '\n';
    if (!out) throw DataError("write failed: '" + path.string() + "'");
}

MlpModel load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str(), path.string());
}

}  // namespace nprt
