#include <collabopt/bounds.hpp>
#include <collabopt/config.hpp>
#include <collabopt/csv.hpp>
#include <collabopt/figures.hpp>
#include <collabopt/schedules.hpp>
#include <collabopt/simulator.hpp>

#include <pybind11/pybind11.h>
#include <pybind11/operators.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace collabopt;

#define COLLABOPT_STR2(x) #x
#define COLLABOPT_STR(x) COLLABOPT_STR2(x)

PYBIND11_MODULE(_core, m) {
    m.doc() = "Collaborative SGD simulator core";

    py::enum_<Aggregator>(m, "Aggregator")
        .value("Alone", Aggregator::Alone)
        .value("WGA", Aggregator::WGA)
        .value("BC", Aggregator::BC)
        .value("OracleBC", Aggregator::OracleBC);

    py::class_<QuadraticTask>(m, "QuadraticTask")
        .def(py::init([](Vec curvature, Vec optimum, double noise_std, double noise_scale) {
                 QuadraticTask t{std::move(curvature), std::move(optimum), noise_std, noise_scale};
                 t.validate();
                 return t;
             }),
             py::arg("curvature"), py::arg("optimum"), py::arg("noise_std") = 0.0, py::arg("noise_scale") = 0.0)
        .def_readwrite("curvature", &QuadraticTask::curvature)
        .def_readwrite("optimum", &QuadraticTask::optimum)
        .def_readwrite("noise_std", &QuadraticTask::noise_std)
        .def_readwrite("noise_scale", &QuadraticTask::noise_scale)
        .def("loss", [](const QuadraticTask& t, const Vec& x) { return eval_loss(t, x); })
        .def("gradient", [](const QuadraticTask& t, const Vec& x) { return true_gradient(t, x); })
        .def(py::self == py::self);

    py::class_<SimilarityParams>(m, "SimilarityParams")
        .def_readonly("smoothness", &SimilarityParams::smoothness)
        .def_readonly("pl_constant", &SimilarityParams::pl_constant)
        .def_readonly("grad_scale_mismatch", &SimilarityParams::grad_scale_mismatch)
        .def_readonly("grad_offset_sq", &SimilarityParams::grad_offset_sq)
        .def_readonly("hessian_dissimilarity", &SimilarityParams::hessian_dissimilarity);
    m.def("similarity_params",
          [](const QuadraticTask& main, const std::vector<QuadraticTask>& cols, const Vec& tau) {
              return similarity_params(main, cols, tau);
          },
          py::arg("main"), py::arg("collaborators"), py::arg("tau"));

    py::class_<CollaborationWeights>(m, "CollaborationWeights")
        .def(py::init([](double alpha, Vec tau, double beta) { return CollaborationWeights{alpha, std::move(tau), beta}; }),
             py::arg("alpha") = 0.0, py::arg("tau") = Vec{}, py::arg("beta") = 1.0)
        .def_readwrite("alpha", &CollaborationWeights::alpha)
        .def_readwrite("tau", &CollaborationWeights::tau)
        .def_readwrite("beta", &CollaborationWeights::beta);

    py::class_<StepSize>(m, "StepSize")
        .def_static("constant", &StepSize::constant)
        .def("at", &StepSize::at)
        .def_readonly("eta", &StepSize::eta);

    py::class_<C0Policy>(m, "C0Policy")
        .def_static("parse", &c0_policy_from_string)
        .def("__str__", [](const C0Policy& p) { return to_string(p); });

    py::class_<RunConfig>(m, "RunConfig")
        .def(py::init<>())
        .def_readwrite("main", &RunConfig::main)
        .def_readwrite("collaborators", &RunConfig::collaborators)
        .def_readwrite("aggregator", &RunConfig::aggregator)
        .def_readwrite("weights", &RunConfig::weights)
        .def_readwrite("step", &RunConfig::step)
        .def_readwrite("horizon", &RunConfig::horizon)
        .def_readwrite("x0", &RunConfig::x0)
        .def_readwrite("seed", &RunConfig::seed)
        .def_readwrite("c0", &RunConfig::c0)
        .def_readwrite("oracle_v", &RunConfig::oracle_v)
        .def_readwrite("snapshot_stride", &RunConfig::snapshot_stride)
        .def("validate", &RunConfig::validate);

    py::class_<Trace>(m, "Trace")
        .def_readonly("test_loss", &Trace::test_loss)
        .def_readonly("grad_norm_sq", &Trace::grad_norm_sq)
        .def_readonly("final_iterate", &Trace::final_iterate)
        .def_readonly("diverged", &Trace::diverged)
        .def_readonly("steps_completed", &Trace::steps_completed)
        .def_property_readonly("final_gap", &Trace::final_gap)
        .def_property_readonly("plateau_loss", &Trace::plateau_loss);

    py::class_<Stat>(m, "Stat")
        .def_readonly("mean", &Stat::mean)
        .def_readonly("se", &Stat::se)
        .def_readonly("n", &Stat::n);

    py::class_<RunResult>(m, "RunResult")
        .def_readonly("final_gap", &RunResult::final_gap)
        .def_readonly("plateau_loss", &RunResult::plateau_loss)
        .def_readonly("avg_grad_norm_sq", &RunResult::avg_grad_norm_sq)
        .def_readonly("mean_test_loss", &RunResult::mean_test_loss)
        .def_readonly("diverged_seeds", &RunResult::diverged_seeds);

    m.def("run", &run, py::arg("config"), py::call_guard<py::gil_scoped_release>());
    m.def("run_replicated",
          [](const RunConfig& c, const std::vector<std::uint64_t>& seeds, unsigned threads) {
              return run_replicated(c, seeds, {threads, false});
          },
          py::arg("config"), py::arg("seeds"), py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>());
    m.def("wga_fixed_point", &wga_fixed_point);
    m.def("mean_dynamics_oracle", &mean_dynamics_oracle);

    m.def("tau_qp", [](const Vec& s, const Vec& z, double coeff) { return tau_qp(s, z, coeff); });
    m.def("tau_qp_coeff", &tau_qp_coeff);
    m.def("alpha_opt_wga_m0", &alpha_opt_wga_m0);
    m.def("alpha_opt_oracle", &alpha_opt_oracle);
    m.def("speedup_factor", &speedup_factor);
    m.def("wga_speedup", &wga_speedup);
    m.def("mean_estimation_bound", &mean_estimation_bound, py::arg("mu0"), py::arg("mu1"), py::arg("sigma0"),
          py::arg("sigma1"), py::arg("alpha"), py::arg("horizon"), py::arg("x0"), py::arg("eta"));
    m.def("format_number", &format_number);
    m.def("dump_config", [](const std::string& text) { return dump_config(parse_config(text)); });

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.attr("__version__") = COLLABOPT_STR(VERSION_INFO);
}
