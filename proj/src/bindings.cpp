#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "unihssl/experiment.hpp"
#include "unihssl/mixup.hpp"

namespace py = pybind11;
using namespace unihssl;

PYBIND11_MODULE(unihssl, m) {
    m.doc() = "Heterogeneous semi-supervised learning over a doubled label space: "
              "WMA pseudo-labeling, cross-domain prototype alignment, progressive mixup";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<ValidationError>(m, "ValidationError");

    py::class_<Hyperparams>(m, "Hyperparams")
        .def(py::init<>())
        .def_readwrite("lambda_pl", &Hyperparams::lambda_pl)
        .def_readwrite("lambda_pa", &Hyperparams::lambda_pa)
        .def_readwrite("lambda_mixup", &Hyperparams::lambda_mixup)
        .def_readwrite("tau", &Hyperparams::tau)
        .def_readwrite("epsilon", &Hyperparams::epsilon)
        .def_readwrite("beta", &Hyperparams::beta)
        .def_readwrite("alpha", &Hyperparams::alpha)
        .def_readwrite("lr0", &Hyperparams::lr0)
        .def_readwrite("momentum", &Hyperparams::momentum)
        .def_readwrite("weight_decay", &Hyperparams::weight_decay)
        .def_readwrite("batch_size", &Hyperparams::batch_size)
        .def_readwrite("pretrain_epochs", &Hyperparams::pretrain_epochs)
        .def_readwrite("train_epochs", &Hyperparams::train_epochs)
        .def_readwrite("hidden_dims", &Hyperparams::hidden_dims)
        .def_readwrite("jitter_sigma", &Hyperparams::jitter_sigma)
        .def_readwrite("include_positive_pair", &Hyperparams::include_positive_pair)
        .def("validate", &Hyperparams::validate);

    py::class_<SyntheticRecipe>(m, "SyntheticRecipe")
        .def(py::init<>())
        .def_readwrite("class_count", &SyntheticRecipe::class_count)
        .def_readwrite("input_dim", &SyntheticRecipe::input_dim)
        .def_readwrite("n_labeled", &SyntheticRecipe::n_labeled)
        .def_readwrite("n_unlabeled", &SyntheticRecipe::n_unlabeled)
        .def_readwrite("n_test", &SyntheticRecipe::n_test)
        .def_readwrite("geometry_seed", &SyntheticRecipe::geometry_seed)
        .def_readwrite("mean_scale", &SyntheticRecipe::mean_scale)
        .def_readwrite("shift_norm", &SyntheticRecipe::shift_norm)
        .def_readwrite("cov_scale_l", &SyntheticRecipe::cov_scale_l)
        .def_readwrite("cov_scale_u", &SyntheticRecipe::cov_scale_u)
        .def_readwrite("label_dist_l", &SyntheticRecipe::label_dist_l)
        .def_readwrite("label_dist_u", &SyntheticRecipe::label_dist_u)
        .def_readwrite("powerlaw_exponent", &SyntheticRecipe::powerlaw_exponent)
        .def_readwrite("test_unlabeled_fraction", &SyntheticRecipe::test_unlabeled_fraction);

    py::class_<CsvSource>(m, "CsvSource")
        .def(py::init<>())
        .def_readwrite("train_csv", &CsvSource::train_csv)
        .def_readwrite("test_csv", &CsvSource::test_csv)
        .def_readwrite("class_count", &CsvSource::class_count)
        .def_readwrite("split_fraction", &CsvSource::split_fraction);

    py::class_<ExperimentConfig>(m, "ExperimentConfig")
        .def(py::init<>())
        .def_readwrite("synthetic", &ExperimentConfig::synthetic)
        .def_readwrite("csv", &ExperimentConfig::csv)
        .def_readwrite("hp", &ExperimentConfig::hp)
        .def_property(
            "variant",
            [](const ExperimentConfig& c) { return to_string(c.variant); },
            [](ExperimentConfig& c, const std::string& v) { c.variant = variant_from_string(v); })
        .def_readwrite("sweep_axis", &ExperimentConfig::sweep_axis)
        .def_readwrite("sweep_grid", &ExperimentConfig::sweep_grid)
        .def_readwrite("seeds", &ExperimentConfig::seeds)
        .def_readwrite("out_dir", &ExperimentConfig::out_dir)
        .def("validate", &ExperimentConfig::validate);

    py::class_<EvalMetrics>(m, "EvalMetrics")
        .def_readonly("overall", &EvalMetrics::overall)
        .def_readonly("domain_l", &EvalMetrics::domain_l)
        .def_readonly("domain_u", &EvalMetrics::domain_u)
        .def_readonly("domain_id", &EvalMetrics::domain_id)
        .def_readonly("per_class", &EvalMetrics::per_class)
        .def_readonly("n_test", &EvalMetrics::n_test);

    py::class_<SeedOutcome>(m, "SeedOutcome")
        .def_readonly("seed", &SeedOutcome::seed)
        .def_readonly("model", &SeedOutcome::model)
        .def_readonly("baseline", &SeedOutcome::baseline)
        .def_readonly("history_file", &SeedOutcome::history_file);

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("runs", &RunReport::runs)
        .def_readonly("mean_overall", &RunReport::mean_overall)
        .def_readonly("std_overall", &RunReport::std_overall)
        .def_readonly("baseline_mean", &RunReport::baseline_mean)
        .def_readonly("baseline_std", &RunReport::baseline_std);

    m.def("default_config", &default_config, "the flagship synthetic experiment");
    m.def("load_config", &load_config, py::arg("path"));
    m.def("run", &run, py::arg("config"), "full experiment; writes report files to out_dir");
    m.def("schedule_psi", &schedule_psi, py::arg("t"), py::arg("total_iterations"));
    m.def("cosine_lr", &cosine_lr, py::arg("t"), py::arg("total_iterations"), py::arg("lr0"));
    m.def(
        "expand_labeled",
        [](const std::vector<double>& one_hot) { return expand_labeled(one_hot).probs; },
        py::arg("one_hot"));
    m.def(
        "expand_initial_pseudo",
        [](const std::vector<double>& simplex) { return expand_initial_pseudo(simplex).probs; },
        py::arg("simplex"));
    m.def(
        "ablate",
        [](const ExperimentConfig& config) {
            std::vector<std::pair<std::string, RunReport>> rows;
            for (auto& row : ablate(config)) rows.emplace_back(row.variant, std::move(row.report));
            return rows;
        },
        py::arg("config"));
    m.def(
        "sweep",
        [](const ExperimentConfig& config) {
            std::vector<std::pair<double, RunReport>> points;
            for (auto& p : sweep(config)) points.emplace_back(p.value, std::move(p.report));
            return points;
        },
        py::arg("config"));
}
