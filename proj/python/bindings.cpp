#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <iostream>

#include "json.hpp"
#include "nprt/bake.hpp"
#include "nprt/cli.hpp"
#include "nprt/image.hpp"
#include "nprt/metrics.hpp"
#include "nprt/mlp.hpp"
#include "nprt/shader_codegen.hpp"
#include "nprt/sh.hpp"
#include "nprt/surface.hpp"
#include "nprt/train.hpp"

namespace py = pybind11;
using namespace nprt;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

std::vector<Vec3> to_vec3s(const F64Array& a, const char* name)
{
    if (a.ndim() != 2 || a.shape(1) != 3) throw InputError(std::string(name) + " must have shape (n, 3)");
    const auto r = a.unchecked<2>();
    std::vector<Vec3> out(static_cast<std::size_t>(a.shape(0)));
    for (py::ssize_t i = 0; i < a.shape(0); ++i) out[static_cast<std::size_t>(i)] = Vec3{r(i, 0), r(i, 1), r(i, 2)};
    return out;
}

Vec3 to_vec3(const std::array<double, 3>& v) { return Vec3{v[0], v[1], v[2]}; }

py::array_t<double> matrix(const std::vector<double>& data, std::size_t rows, std::size_t cols)
{
    py::array_t<double> out({rows, cols});
    std::copy(data.begin(), data.end(), out.mutable_data());
    return out;
}

Image to_image(const F32Array& a)
{
    if (a.ndim() != 3 || a.shape(2) != 3) throw InputError("image must have shape (height, width, 3)");
    Image img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + a.size(), img.rgb.begin());
    return img;
}

py::array_t<float> from_image(const Image& img)
{
    py::array_t<float> out({static_cast<std::size_t>(img.height), static_cast<std::size_t>(img.width), std::size_t{3}});
    std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
    return out;
}

py::dict report_dict(const MetricsReport& r) { return py::module_::import("json").attr("loads")(r.to_json()); }

QuadratureKind quadrature_kind(const std::string& name)
{
    if (name == "stratified") return QuadratureKind::StratifiedMonteCarlo;
    if (name == "mc") return QuadratureKind::MonteCarlo;
    if (name == "latlong") return QuadratureKind::LatLong;
    throw InputError("unknown quadrature '" + name + "' (stratified, mc, latlong)");
}

}  // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Neural precomputed radiance transfer core";

    static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
    static py::exception<DataError> data_error(m, "DataError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InputError& e) {
            input_error(e.what());
        } catch (const DataError& e) {
            data_error(e.what());
        }
    });

    m.def("sh_count", &sh_count, py::arg("order"));
    m.def(
        "sh_basis",
        [](const std::array<double, 3>& dir, int order) { return sh_basis_eval(to_vec3(dir), order); },
        py::arg("direction"), py::arg("order") = kDefaultShOrder, "Real SH basis values y_i(direction).");

    py::class_<TripleProductTensor>(m, "TripleProductTensor")
        .def_property_readonly("order", &TripleProductTensor::order)
        .def_property_readonly("nnz", [](const TripleProductTensor& t) { return t.entries().size(); })
        .def("at", &TripleProductTensor::at, py::arg("i"), py::arg("j"), py::arg("k"))
        .def("save", [](const TripleProductTensor& t, const std::filesystem::path& p) { save_tau_cache(t, p); });
    m.def(
        "triple_product_tensor",
        [](int order, std::size_t samples, const std::string& quadrature, std::uint64_t seed) {
            py::gil_scoped_release release;
            return triple_product_tensor(order, QuadratureSpec{quadrature_kind(quadrature), samples, seed});
        },
        py::arg("order") = kDefaultShOrder, py::arg("samples") = 262144, py::arg("quadrature") = "stratified",
        py::arg("seed") = 1);
    m.def("load_tau", &load_tau_cache, py::arg("path"));

    py::class_<TransferDataset>(m, "Dataset")
        .def_readonly("order", &TransferDataset::order)
        .def_readonly("scale", &TransferDataset::scale)
        .def("__len__", [](const TransferDataset& d) { return d.records.size(); })
        .def_property_readonly("center",
                               [](const TransferDataset& d) {
                                   return std::array<double, 3>{d.norm.center.x, d.norm.center.y, d.norm.center.z};
                               })
        .def_property_readonly("half_extent", [](const TransferDataset& d) { return d.norm.half_extent; })
        .def_property_readonly("positions",
                               [](const TransferDataset& d) {
                                   std::vector<double> v;
                                   for (const auto& r : d.records) v.insert(v.end(), {r.position.x, r.position.y, r.position.z});
                                   return matrix(v, d.records.size(), 3);
                               })
        .def_property_readonly("normals",
                               [](const TransferDataset& d) {
                                   std::vector<double> v;
                                   for (const auto& r : d.records) v.insert(v.end(), {r.normal.x, r.normal.y, r.normal.z});
                                   return matrix(v, d.records.size(), 3);
                               })
        .def_property_readonly("transfer",
                               [](const TransferDataset& d) {
                                   std::vector<double> v;
                                   for (const auto& r : d.records) v.insert(v.end(), r.transfer.coeffs().begin(), r.transfer.coeffs().end());
                                   return matrix(v, d.records.size(), sh_count(d.order));
                               })
        .def("save", [](const TransferDataset& d, const std::filesystem::path& p) { save_dataset(d, p); });
    m.def("load_dataset", &load_dataset, py::arg("path"));
    m.def(
        "bake",
        [](const std::filesystem::path& scene, std::size_t count, std::size_t rays, int order, std::uint64_t seed,
           int grid_res) {
            if (count == 0) throw InputError("count must be positive");
            py::gil_scoped_release release;
            const Surface surface = Surface::load(scene);
            return bake_dataset(surface, count, BakeConfig{rays, order, seed, grid_res});
        },
        py::arg("scene"), py::arg("count") = 100000, py::arg("rays") = kDefaultBakeRays, py::arg("order") = kDefaultShOrder,
        py::arg("seed") = 1, py::arg("grid_res") = 128, "Bakes transfer vectors at surface points of a .obj or .sdf scene.");

    py::class_<MlpModel>(m, "Model")
        .def_readonly("order", &MlpModel::order)
        .def_readonly("scale", &MlpModel::scale)
        .def_property_readonly("width", [](const MlpModel& mdl) { return mdl.layers.empty() ? 0 : mdl.layers.front().rows; })
        .def_property_readonly("depth", [](const MlpModel& mdl) { return mdl.layers.size(); })
        .def_property_readonly("parameter_count", &MlpModel::parameter_count)
        .def(
            "predict",
            [](const MlpModel& mdl, const F64Array& positions, const F64Array& normals) {
                const auto p = to_vec3s(positions, "positions");
                const auto n = to_vec3s(normals, "normals");
                if (p.size() != n.size()) throw InputError("positions and normals differ in length");
                std::vector<double> out;
                {
                    py::gil_scoped_release release;
                    forward_batch(mdl, p, n, out);
                }
                return matrix(out, p.size(), static_cast<std::size_t>(mdl.output_dim()));
            },
            py::arg("positions"), py::arg("normals"), "Transfer vectors, shape (n, sh_count(order)).")
        .def("to_json", &model_to_json)
        .def("save", [](const MlpModel& mdl, const std::filesystem::path& p) { save_model(mdl, p); })
        .def(
            "emit_shader",
            [](const MlpModel& mdl, int glsl_version, bool shading_entry) {
                return emit_shader(mdl, ShaderOptions{glsl_version, shading_entry});
            },
            py::arg("glsl_version") = 330, py::arg("shading_entry") = true);
    m.def("load_model", &load_model, py::arg("path"));
    m.def("model_from_json", &model_from_json, py::arg("text"), py::arg("source") = "<string>");
    m.def(
        "train",
        [](const TransferDataset& ds, int width, int depth, int epochs, std::size_t batch, double lr, double val_fraction,
           std::uint64_t seed, int freq_pos, int freq_norm) {
            MlpConfig mc;
            mc.width = width;
            mc.depth = depth;
            mc.order = ds.order;
            TrainConfig tc;
            tc.epochs = epochs;
            tc.batch = batch;
            tc.lr = lr;
            tc.val_fraction = val_fraction;
            tc.seed = seed;
            PositionalEncodingConfig pe;
            pe.freq_pos = freq_pos;
            pe.freq_norm = freq_norm;
            py::gil_scoped_release release;
            return train(ds, mc, tc, pe).model;
        },
        py::arg("dataset"), py::arg("width") = 64, py::arg("depth") = 4, py::arg("epochs") = 200, py::arg("batch") = 8192,
        py::arg("lr") = 1e-3, py::arg("val_fraction") = 0.05, py::arg("seed") = 1, py::arg("freq_pos") = 6,
        py::arg("freq_norm") = 4);

    m.def(
        "read_image", [](const std::filesystem::path& p) { return from_image(load_envmap(p)); }, py::arg("path"),
        "Reads a .pfm or .hdr file as a float32 (height, width, 3) array.");
    m.def(
        "write_pfm", [](const F32Array& a, const std::filesystem::path& p) { write_pfm(to_image(a), p); }, py::arg("image"),
        py::arg("path"));
    m.def(
        "compare", [](const F32Array& a, const F32Array& b) { return report_dict(compare_images(to_image(a), to_image(b))); },
        py::arg("a"), py::arg("b"), "MAE, PSNR and SSIM, overall and per channel.");

    m.def(
        "cli",
        [](std::vector<std::string> args) {
            args.insert(args.begin(), "nprt");
            return cli_main(args, std::cout, std::cerr);
        },
        py::arg("args"), "Runs the command-line tool in-process and returns its exit code.");
}
