#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "nprt/surface.hpp"
#include "nprt/train.hpp"

using namespace nprt;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "nprt_test_mlp";
    fs::create_directories(dir);
    return dir / name;
}

const char* kToyScene = R"(box id=floor c=0,0,-0.05 h=2,2,0.05
sphere id=ball c=0,0,1 r=0.75
op union a=floor b=ball
bounds min=-2.2,-2.2,-0.3 max=2.2,2.2,2
)";

const TransferDataset& toy_dataset_100()
{
    static const TransferDataset ds = [] {
        const Surface s = Surface::from_sdf(SdfScene::parse(kToyScene));
        BakeConfig cfg;
        cfg.n_rays = 1024;
        cfg.grid_res = 64;
        cfg.seed = 7;
        return bake_dataset(s, 100, cfg);
    }();
    return ds;
}

// Hand-built model with arbitrary layer widths; MlpConfig would reject k < 16.
MlpModel random_model(const std::vector<int>& widths, std::uint64_t seed, OutputActivation out = OutputActivation::Tanh)
{
    MlpModel m;
    m.output = out;
    m.norm.half_extent = 2.0;
    m.scale = 1.3;
    Rng rng(seed);
    int in = m.input_dim();
    std::vector<int> rows = widths;
    rows.push_back(m.output_dim());
    for (int r : rows) {
        DenseLayer l;
        l.rows = r;
        l.cols = in;
        for (int i = 0; i < r * in; ++i) l.weights.push_back(rng.uniform(-1, 1) / std::sqrt(in));
        for (int i = 0; i < r; ++i) l.bias.push_back(rng.uniform(-0.3, 0.3));
        m.layers.push_back(l);
        in = r;
    }
    m.validate();
    return m;
}

Vec3 random_unit(Rng& rng)
{
    return square_to_sphere(rng.uniform(), rng.uniform());
}

// Row-major batch x input_dim encodings of random points.
std::vector<double> random_encodings(const MlpModel& m, std::size_t batch, Rng& rng)
{
    std::vector<double> out;
    for (std::size_t s = 0; s < batch; ++s) {
        const Vec3 p{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const auto e = positional_encode(p, random_unit(rng), m.pe);
        out.insert(out.end(), e.begin(), e.end());
    }
    return out;
}

std::vector<double> predictions(const MlpModel& m, const std::vector<double>& enc, std::size_t batch)
{
    std::vector<double> out;
    forward_encoded_batch(m, enc, batch, out);
    return out;
}

}  // namespace

TEST_CASE("positional encoding: origin has zero sines and unit cosines")
{
    PositionalEncodingConfig cfg;
    CHECK(cfg.dim() == 66);
    const auto e = positional_encode({0, 0, 0}, {0, 0, 1}, cfg);
    REQUIRE(e.size() == 66);
    for (int a = 0; a < 3; ++a) CHECK(e[static_cast<std::size_t>(a)] == 0.0);
    for (int f = 0; f < cfg.freq_pos; ++f) {
        const std::size_t base = 3 + 6 * static_cast<std::size_t>(f);
        for (std::size_t a = 0; a < 3; ++a) {
            CHECK(e[base + a] == 0.0);
            CHECK(e[base + 3 + a] == 1.0);
        }
    }
    // normal block starts with the raw normal
    CHECK(e[39] == 0.0);
    CHECK(e[40] == 0.0);
    CHECK(e[41] == 1.0);
}

TEST_CASE("positional encoding: integer multiples of pi")
{
    const auto e = positional_encode({1, 0, 0}, {1, 0, 0}, {});
    CHECK(e[0] == 1.0);
    CHECK(std::abs(e[3]) < 1e-12);
    CHECK(e[6] == doctest::Approx(-1.0));
    for (int f = 1; f < 6; ++f) CHECK(e[static_cast<std::size_t>(3 + 6 * f + 3)] == doctest::Approx(1.0));
}

TEST_CASE("positional encoding: dimension formula and range check")
{
    for (int fp = 0; fp < 9; ++fp)
        for (int fn = 0; fn < 6; ++fn)
            for (bool raw : {false, true}) {
                PositionalEncodingConfig cfg{fp, fn, raw};
                const int r = raw ? 1 : 0;
                if (cfg.dim() == 0) continue;
                CHECK(positional_encode({0.3, -0.2, 0.9}, {0, 1, 0}, cfg).size() ==
                      static_cast<std::size_t>(3 * (r + 2 * fp) + 3 * (r + 2 * fn)));
            }
    CHECK_THROWS_AS(positional_encode({1.01, 0, 0}, {0, 0, 1}, {}), InputError);
    CHECK_THROWS_AS(positional_encode({0, std::nan(""), 0}, {0, 0, 1}, {}), InputError);
}

TEST_CASE("forward: zero weights give a zero vector")
{
    MlpModel m = init_model({}, {}, Normalization{{0, 0, 0}, 2.0}, 1.7, 3);
    for (auto& l : m.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.bias.begin(), l.bias.end(), 0.0);
    }
    const SHVector t = forward(m, {0.4, -1.1, 0.2}, {0, 0, 1});
    REQUIRE(t.size() == 16);
    for (double c : t.coeffs()) CHECK(c == 0.0);
}

TEST_CASE("forward: identity first layer reproduces the encoding")
{
    MlpModel m = random_model({66}, 5);
    DenseLayer& l = m.layers[0];
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
    for (int i = 0; i < 66; ++i) l.weights[static_cast<std::size_t>(i * 66 + i)] = 1.0;

    const auto enc = positional_encode({0, 0, 0}, {0, 0, 1}, m.pe);
    std::vector<double> out(16);
    std::vector<std::vector<double>> trace;
    forward_encoded(m, enc, out, &trace);
    REQUIRE(trace.size() == 2);
    for (std::size_t i = 0; i < enc.size(); ++i) {
        // sin(2^k pi) rounds to +-1e-16 and cos(pi) = -1: leaky-relu only leaves
        // non-negative entries untouched.
        const double expect = enc[i] >= 0.0 ? enc[i] : m.alpha * enc[i];
        CHECK(trace[0][i] == expect);
    }
    const auto pos_block = std::span<const double>(enc).first(39);
    CHECK(std::all_of(pos_block.begin(), pos_block.end(), [](double v) { return v >= 0.0; }));
    for (std::size_t i = 0; i < 39; ++i) CHECK(trace[0][i] == enc[i]);
}

TEST_CASE("forward: output bounded by the scale")
{
    MlpModel m = random_model({32, 32}, 11);
    for (auto& l : m.layers)
        for (double& w : l.weights) w *= 40.0;  // saturate tanh
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const SHVector t = forward(m, p, random_unit(rng));
        for (double c : t.coeffs()) CHECK(std::abs(c) <= m.scale);
    }
}

TEST_CASE("forward: batched matches single-point evaluation")
{
    const MlpModel m = random_model({24, 24}, 12);
    Rng rng(4);
    std::vector<Vec3> ps, ns;
    for (int i = 0; i < 3000; ++i) {
        ps.push_back({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
        ns.push_back(random_unit(rng));
    }
    std::vector<double> out;
    forward_batch(m, ps, ns, out);
    double worst = 0;
    for (std::size_t i = 0; i < ps.size(); i += 97) {
        const SHVector t = forward(m, ps[i], ns[i]);
        for (std::size_t c = 0; c < 16; ++c) worst = std::max(worst, std::abs(t[c] - out[i * 16 + c]));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("forward: non-finite activation names the layer")
{
    MlpModel m = random_model({16, 16}, 13);
    m.layers[1].weights[0] = 1e308;
    m.layers[1].weights[1] = 1e308;
    const auto enc = positional_encode({0.5, 0.5, 0.5}, {0, 0, 1}, m.pe);
    std::vector<double> out(16);
    // force layer 0 activations large and positive
    for (double& b : m.layers[0].bias) b = 1e10;
    try {
        forward_encoded(m, enc, out);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
    }
}

TEST_CASE("loss_and_grad: prediction equal to target gives zero loss and gradient")
{
    const MlpModel m = random_model({8, 8}, 21);
    Rng rng(1);
    const auto enc = random_encodings(m, 16, rng);
    const auto target = predictions(m, enc, 16);
    ModelGradients g;
    CHECK(loss_and_grad(m, enc, target, 16, &g) == 0.0);
    for (const auto& l : g) {
        for (double v : l.weights) CHECK(v == 0.0);
        for (double v : l.bias) CHECK(v == 0.0);
    }
}

TEST_CASE("loss_and_grad: analytic gradient matches central differences")
{
    MlpModel m = random_model({8, 8}, 31);
    constexpr std::size_t kBatch = 32;
    Rng rng(9);
    const auto enc = random_encodings(m, kBatch, rng);
    auto target = predictions(m, enc, kBatch);
    // keep every residual well clear of the |x| kink
    for (double& t : target) t += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 0.6);

    ModelGradients g;
    loss_and_grad(m, enc, target, kBatch, &g);
    REQUIRE(g.size() == m.layers.size());

    constexpr double h = 1e-4;
    double worst = 0.0;
    std::size_t checked = 0;
    auto check_param = [&](double& p, double analytic) {
        const double keep = p;
        p = keep + h;
        const double up = loss_and_grad(m, enc, target, kBatch, nullptr);
        p = keep - h;
        const double down = loss_and_grad(m, enc, target, kBatch, nullptr);
        p = keep;
        const double numeric = (up - down) / (2 * h);
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
        ++checked;
    };
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        for (std::size_t k = 0; k < m.layers[i].weights.size(); ++k) check_param(m.layers[i].weights[k], g[i].weights[k]);
        for (std::size_t k = 0; k < m.layers[i].bias.size(); ++k) check_param(m.layers[i].bias[k], g[i].bias[k]);
    }
    CHECK(checked == m.parameter_count());
    CHECK(worst < 1e-4);
}

TEST_CASE("loss_and_grad: scaling targets and scale together leaves the loss unchanged")
{
    MlpModel m = random_model({8, 8}, 41);
    Rng rng(3);
    TransferDataset ds;
    ds.norm = m.norm;
    for (int i = 0; i < 50; ++i) {
        TransferRecord r;
        r.position = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
        r.normal = random_unit(rng);
        r.transfer = SHVector(4);
        for (double& c : r.transfer.coeffs()) c = rng.uniform(-1.2, 1.2);
        ds.records.push_back(r);
    }
    const double base = evaluate_l1(m, ds.records);
    for (auto& r : ds.records) r.transfer *= 4.0;
    m.scale *= 4.0;
    CHECK(evaluate_l1(m, ds.records) == doctest::Approx(base).epsilon(1e-14));
}

TEST_CASE("train: overfits a 100-point dataset")
{
    const TransferDataset& ds = toy_dataset_100();
    REQUIRE(ds.records.size() == 100);
    TrainConfig cfg;
    cfg.epochs = 500;
    cfg.val_fraction = 0.0;
    const TrainResult r = train(ds, {}, cfg);
    REQUIRE(r.report.epochs.size() == 500);
    const double final_l1 = evaluate_l1(r.model, ds.records);
    MESSAGE("final train l1 = " << final_l1);
    CHECK(final_l1 < 0.01);
    CHECK(r.model.scale == ds.scale);
    CHECK(r.model.norm.half_extent == ds.norm.half_extent);

    // a training point is predicted close to its baked target
    const TransferRecord& rec = ds.records[17];
    const SHVector pred = forward(r.model, rec.position, rec.normal);
    double l1 = 0;
    for (std::size_t c = 0; c < 16; ++c) l1 += std::abs(pred[c] - rec.transfer[c]);
    CHECK(l1 / 16.0 / ds.scale < 0.05);
}

TEST_CASE("train: fixed seed is deterministic and record order does not matter")
{
    TransferDataset ds = toy_dataset_100();
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch = 32;
    cfg.seed = 99;
    const TrainResult a = train(ds, {}, cfg);
    const TrainResult b = train(ds, {}, cfg);
    std::reverse(ds.records.begin(), ds.records.end());
    std::swap(ds.records[3], ds.records[60]);
    const TrainResult c = train(ds, {}, cfg);
    for (std::size_t i = 0; i < a.model.layers.size(); ++i) {
        CHECK(a.model.layers[i].weights == b.model.layers[i].weights);
        CHECK(a.model.layers[i].bias == b.model.layers[i].bias);
        CHECK(a.model.layers[i].weights == c.model.layers[i].weights);
    }
    CHECK(a.report.val_count == 5);
    CHECK(a.report.train_count == 95);
    CHECK(std::isfinite(a.report.epochs.back().val_l1));
    const Vec3 p{0.3, 0.2, 1.8}, n{0, 0.6, 0.8};
    const SHVector pa = forward(a.model, p, n), pc = forward(c.model, p, n);
    for (std::size_t k = 0; k < 16; ++k) CHECK(pa[k] == pc[k]);
}

TEST_CASE("train: loss is non-increasing on a linear model")
{
    // One affine layer without activations: a convex l1 problem.
    MlpModel m = random_model({}, 51, OutputActivation::Identity);
    m.pe = {2, 1, true};
    m.layers.clear();
    DenseLayer l;
    l.rows = 16;
    l.cols = m.input_dim();
    l.weights.assign(static_cast<std::size_t>(l.rows * l.cols), 0.0);
    l.bias.assign(16, 0.0);
    m.layers.push_back(l);
    m.scale = 1.0;
    m.validate();

    Rng rng(8);
    TransferDataset ds;
    ds.norm = m.norm;
    for (int i = 0; i < 400; ++i) {
        TransferRecord r;
        r.position = {rng.uniform(-1.8, 1.8), rng.uniform(-1.8, 1.8), rng.uniform(-1.8, 1.8)};
        r.normal = random_unit(rng);
        r.transfer = SHVector(4);
        for (std::size_t c = 0; c < 16; ++c)
            r.transfer[c] = 0.3 * r.position[static_cast<int>(c % 3)] + 0.2 * r.normal.z + rng.uniform(-0.1, 0.1);
        ds.records.push_back(r);
    }
    TrainConfig cfg;
    cfg.epochs = 150;
    cfg.batch = ds.records.size();  // full batch
    cfg.val_fraction = 0.0;
    const TrainReport rep = fit(m, ds, cfg);
    for (std::size_t e = 1; e < rep.epochs.size(); ++e) CHECK(rep.epochs[e].train_l1 <= rep.epochs[e - 1].train_l1 + 1e-12);
    CHECK(rep.epochs.back().train_l1 < 0.5 * rep.epochs.front().train_l1);
}

TEST_CASE("train: divergence reports the epoch")
{
    // Adam steps are about lr in size, so an absurd lr overflows the
    // activations within a couple of epochs.
    const TransferDataset& ds = toy_dataset_100();
    try {
        train(ds, {}, TrainConfig{.epochs = 10, .lr = 1e200});
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("diverged at epoch ") != std::string::npos);
    }
}

TEST_CASE("train: rejects bad configuration")
{
    const TransferDataset& ds = toy_dataset_100();
    CHECK_THROWS_AS(train(ds, {}, TrainConfig{.batch = 0}), InputError);
    CHECK_THROWS_AS(train(ds, MlpConfig{.width = 8}, TrainConfig{}), InputError);
    CHECK_THROWS_AS(train(ds, MlpConfig{.depth = 1}, TrainConfig{}), InputError);
    TransferDataset empty = ds;
    empty.records.clear();
    CHECK_THROWS_AS(train(empty, {}, TrainConfig{}), InputError);
}

TEST_CASE("model file: round trip is bit-identical")
{
    const MlpModel m = init_model({}, {}, Normalization{{0.1, -0.3, 0.7}, 2.345}, 1.0227, 17);
    const fs::path path = temp_path("model.json");
    save_model(m, path);
    const MlpModel r = load_model(path);
    CHECK(r.order == m.order);
    CHECK(r.scale == m.scale);
    CHECK(r.norm.half_extent == m.norm.half_extent);
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-1.5, 3)};
        const Vec3 n = random_unit(rng);
        const SHVector a = forward(m, p, n), b = forward(r, p, n);
        for (std::size_t k = 0; k < 16; ++k) CHECK(a[k] == b[k]);
    }
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("\"output_activation\": \"tanh\"") != std::string::npos);
    CHECK(text.find("\"leaky_relu\"") != std::string::npos);
}

TEST_CASE("model file: broken dimension chain and missing scale are rejected")
{
    const MlpModel m = init_model({.width = 16, .depth = 3}, {}, Normalization{}, 1.0, 1);
    std::string text = model_to_json(m);

    MlpModel broken = m;
    broken.layers[1].cols = 17;
    broken.layers[1].weights.resize(16 * 17, 0.0);
    CHECK_THROWS_AS(model_from_json(model_to_json(broken)), FormatError);

    const auto pos = text.find("\"scale\"");
    REQUIRE(pos != std::string::npos);
    const auto end = text.find('\n', pos);
    std::string no_scale = text.substr(0, pos) + text.substr(end + 1);
    try {
        model_from_json(no_scale);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("'scale'") != std::string::npos);
    }
    CHECK_THROWS_AS(model_from_json("{not json"), FormatError);
    CHECK_THROWS_AS(load_model(temp_path("does_not_exist.json")), DataError);
}
