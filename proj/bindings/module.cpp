#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <utility>

#include "mega/checkpoint.hpp"
#include "mega/dataset.hpp"
#include "mega/ga.hpp"
#include "mega/genome.hpp"
#include "mega/merge.hpp"
#include "mega/model.hpp"

namespace py = pybind11;
using namespace mega;

namespace {

py::array_t<double> matrix_to_array(const Matrix& m) {
    py::array_t<double> arr({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), arr.mutable_data());
    return arr;
}

template <typename T>
py::array_t<T> vector_to_array(const std::vector<T>& v) {
    py::array_t<T> arr(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), arr.mutable_data());
    return arr;
}

std::span<const std::uint32_t> partition_of(const Dataset& ds,
                                            const std::string& name) {
    if (name == "train") return ds.partition.train;
    if (name == "val") return ds.partition.val;
    if (name == "test") return ds.partition.test;
    throw ConfigError("unknown partition '" + name +
                      "' (expected train, val, or test)");
}

double genome_accuracy(const Genome& g, const Dataset& ds,
                       const std::string& partition) {
    const ModelSpec spec = spec_from_manifest(g.manifest);
    const auto idx = partition_of(ds, partition);
    if (idx.empty()) throw DataError(partition + " partition is empty");
    auto [X, y] = subset(ds, idx);
    return accuracy(unflatten(g), spec, X, y);
}

FitnessFn accuracy_fitness(const Dataset& ds, const ModelSpec& spec) {
    if (ds.partition.val.empty()) {
        throw DataError("dataset has no validation partition; call split first");
    }
    auto data = std::make_shared<std::pair<Matrix, std::vector<std::int32_t>>>(
        subset(ds, ds.partition.val));
    return [spec, data](const Genome& g) {
        return accuracy(unflatten(g), spec, data->first, data->second);
    };
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Genetic-algorithm weight merging for identically shaped "
              "feedforward networks";

    py::register_exception<ConfigError>(m, "MegaConfigError", PyExc_ValueError);
    py::register_exception<DataError>(m, "MegaDataError", PyExc_RuntimeError);
    py::register_exception<NumericError>(m, "MegaNumericError",
                                         PyExc_ArithmeticError);

    py::class_<ModelSpec>(m, "ModelSpec")
        .def(py::init([](std::vector<std::uint32_t> widths) {
                 ModelSpec spec;
                 spec.layer_widths = std::move(widths);
                 spec.validate();
                 return spec;
             }),
             py::arg("layer_widths"))
        .def_readonly("layer_widths", &ModelSpec::layer_widths)
        .def_property_readonly("parameter_count", &ModelSpec::parameter_count)
        .def("__repr__", [](const ModelSpec& s) {
            std::string r = "ModelSpec([";
            for (std::size_t i = 0; i < s.layer_widths.size(); ++i) {
                if (i) r += ", ";
                r += std::to_string(s.layer_widths[i]);
            }
            return r + "])";
        });

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("epochs", &TrainConfig::epochs)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("adam_beta1", &TrainConfig::adam_beta1)
        .def_readwrite("adam_beta2", &TrainConfig::adam_beta2)
        .def_readwrite("adam_epsilon", &TrainConfig::adam_epsilon)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<GaConfig>(m, "GaConfig")
        .def(py::init<>())
        .def_readwrite("population_size", &GaConfig::population_size)
        .def_readwrite("generations", &GaConfig::generations)
        .def_readwrite("parents_per_generation", &GaConfig::parents_per_generation)
        .def_readwrite("mutation_rate", &GaConfig::mutation_rate)
        .def_readwrite("mutation_sigma", &GaConfig::mutation_sigma)
        .def_readwrite("tournament_size", &GaConfig::tournament_size)
        .def_readwrite("elite_count", &GaConfig::elite_count)
        .def_readwrite("seed", &GaConfig::seed)
        .def_readwrite("seed_endpoints", &GaConfig::seed_endpoints);

    py::class_<Dataset>(m, "Dataset")
        .def_property_readonly("n", &Dataset::size)
        .def_property_readonly("dim", &Dataset::dim)
        .def_readonly("num_classes", &Dataset::num_classes)
        .def_property_readonly("X",
                               [](const Dataset& d) { return matrix_to_array(d.X); })
        .def_property_readonly(
            "y", [](const Dataset& d) { return vector_to_array(d.y); })
        .def_property_readonly("partition_sizes", [](const Dataset& d) {
            return py::make_tuple(d.partition.train.size(), d.partition.val.size(),
                                  d.partition.test.size());
        });

    py::class_<Genome>(m, "Genome")
        .def(py::init([](py::array_t<double, py::array::c_style> values,
                         std::vector<std::pair<std::uint32_t, std::uint32_t>>
                             layer_shapes) {
                 Genome g;
                 for (auto [rows, cols] : layer_shapes) {
                     g.manifest.layers.push_back({rows, cols});
                 }
                 g.values.assign(values.data(), values.data() + values.size());
                 if (g.values.size() != g.manifest.total_len()) {
                     throw ShapeError("value count does not match layer shapes");
                 }
                 return g;
             }),
             py::arg("values"), py::arg("layer_shapes"))
        .def_property_readonly(
            "values", [](const Genome& g) { return vector_to_array(g.values); })
        .def_property_readonly("layer_shapes",
                               [](const Genome& g) {
                                   std::vector<std::pair<std::uint32_t,
                                                         std::uint32_t>>
                                       shapes;
                                   for (const auto& l : g.manifest.layers) {
                                       shapes.emplace_back(l.rows, l.cols);
                                   }
                                   return shapes;
                               })
        .def("__len__", [](const Genome& g) { return g.values.size(); })
        .def("__eq__",
             [](const Genome& a, const Genome& b) { return a == b; },
             py::is_operator());

    py::class_<GenerationRecord>(m, "GenerationRecord")
        .def_readonly("generation", &GenerationRecord::generation)
        .def_readonly("best_fitness", &GenerationRecord::best_fitness)
        .def_readonly("mean_fitness", &GenerationRecord::mean_fitness)
        .def_readonly("best_individual_id", &GenerationRecord::best_individual_id)
        .def("__repr__", [](const GenerationRecord& r) {
            return "GenerationRecord(generation=" + std::to_string(r.generation) +
                   ", best_fitness=" + std::to_string(r.best_fitness) + ")";
        });

    m.def(
        "gen_synthetic",
        [](const std::string& kind, std::size_t n, double noise,
           std::uint64_t seed) {
            return gen_synthetic(parse_synthetic_kind(kind), n, noise, seed);
        },
        py::arg("kind"), py::arg("n"), py::arg("noise"), py::arg("seed"),
        "Deterministic 2-D toy dataset: two_moons, gaussian_blobs, or "
        "concentric_rings.");

    m.def("load_csv", &load_csv, py::arg("path"), py::arg("label_column"),
          "Load a numeric CSV with a header row.");

    m.def("split", &split, py::arg("dataset"), py::arg("val_fraction"),
          py::arg("test_fraction"), py::arg("seed"),
          "Seeded shuffle, then contiguous train/val/test slices.");

    m.def(
        "train",
        [](const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg) {
            py::gil_scoped_release release;
            return flatten(train(spec, ds, cfg));
        },
        py::arg("spec"), py::arg("dataset"), py::arg("config"),
        "Train a model with Adam; returns the flattened genome.");

    m.def("accuracy", &genome_accuracy, py::arg("genome"), py::arg("dataset"),
          py::arg("partition") = "val",
          "Classification accuracy of a genome on a dataset partition.");

    m.def(
        "merge",
        [](const Genome& a, const Genome& b, const GaConfig& cfg,
           const Dataset& ds, unsigned threads) {
            const ModelSpec spec = spec_from_manifest(a.manifest);
            const FitnessFn fn = accuracy_fitness(ds, spec);
            py::gil_scoped_release release;
            MegaResult result = run_mega(a, b, cfg, fn, threads);
            return std::make_pair(std::move(result.best),
                                  std::move(result.history));
        },
        py::arg("a"), py::arg("b"), py::arg("config"), py::arg("dataset"),
        py::arg("threads") = 1,
        "Merge two genomes by maximizing validation accuracy; returns "
        "(best_genome, history).");

    m.def(
        "merge_tree",
        [](const std::vector<Genome>& leaves, const GaConfig& cfg,
           const Dataset& ds, unsigned threads) {
            if (leaves.empty()) throw ConfigError("merge_tree needs genomes");
            const ModelSpec spec = spec_from_manifest(leaves[0].manifest);
            const FitnessFn fn = accuracy_fitness(ds, spec);
            py::gil_scoped_release release;
            MergePlan plan = build_merge_plan(leaves, cfg);
            MergeOutcome outcome = execute_merge_plan(plan, fn, nullptr, threads);
            const std::string report = report_to_json(outcome.report).dump(2);
            return std::make_pair(std::move(outcome.final), report);
        },
        py::arg("genomes"), py::arg("config"), py::arg("dataset"),
        py::arg("threads") = 1,
        "Hierarchically merge 2^k genomes; returns (final_genome, report_json).");

    m.def(
        "weight_average",
        [](const std::vector<Genome>& genomes) {
            return weight_average(genomes);
        },
        py::arg("genomes"), "Coordinate-wise mean of compatible genomes.");

    m.def("save_checkpoint", &save_checkpoint, py::arg("genome"), py::arg("path"),
          "Write a genome to a checkpoint file (f32 values, CRC-protected).");

    m.def("load_checkpoint", &load_checkpoint, py::arg("path"),
          "Read and validate a checkpoint file.");

    m.attr("__version__") = "0.1.0";
}
