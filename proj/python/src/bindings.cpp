// Python bindings for the respalloc core. JSON documents (configs, reports,
// scenario descriptions) cross the boundary as strings and are parsed by the
// Python package.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "respalloc/checkpoint.hpp"
#include "respalloc/trajectory_io.hpp"
#include "respalloc/training.hpp"

namespace py = pybind11;
using namespace respalloc;

namespace {

std::vector<double> to_std(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Responsibility allocation for multi-agent CBF safety filters";

  py::register_exception<FilterError>(m, "FilterError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<TrajectoryFormatError>(m, "TrajectoryFormatError", PyExc_ValueError);

  // --- filter -------------------------------------------------------------
  py::class_<CbfLinearConstraint>(m, "CbfLinearConstraint")
      .def(py::init<>())
      .def(py::init([](std::vector<Vec> coefficients, double offset) {
             CbfLinearConstraint c;
             c.coefficients = std::move(coefficients);
             c.offset = offset;
             return c;
           }),
           py::arg("coefficients"), py::arg("offset"))
      .def_readwrite("coefficients", &CbfLinearConstraint::coefficients)
      .def_readwrite("offset", &CbfLinearConstraint::offset)
      .def("evaluate", &CbfLinearConstraint::evaluate, py::arg("u"));

  py::class_<FilterWeights>(m, "FilterWeights")
      .def(py::init<>())
      .def(py::init([](double beta1, double beta2) { return FilterWeights{beta1, beta2}; }),
           py::arg("beta1"), py::arg("beta2"))
      .def_readwrite("beta1", &FilterWeights::beta1)
      .def_readwrite("beta2", &FilterWeights::beta2);

  py::class_<FilterProblem>(m, "FilterProblem")
      .def(py::init<>())
      .def_readwrite("desired", &FilterProblem::desired)
      .def_readwrite("gamma", &FilterProblem::gamma)
      .def_readwrite("control_dims", &FilterProblem::control_dims)
      .def_readwrite("weights", &FilterProblem::weights)
      .def_readwrite("constraint", &FilterProblem::constraint)
      .def_readwrite("lower", &FilterProblem::lower)
      .def_readwrite("upper", &FilterProblem::upper)
      .def("validate", &FilterProblem::validate);

  py::class_<FilterSolution>(m, "FilterSolution")
      .def_readonly("controls", &FilterSolution::controls)
      .def_readonly("slack", &FilterSolution::slack)
      .def_readonly("cbf_dual", &FilterSolution::cbf_dual)
      .def_readonly("slack_dual", &FilterSolution::slack_dual)
      .def_readonly("lower_dual", &FilterSolution::lower_dual)
      .def_readonly("upper_dual", &FilterSolution::upper_dual)
      .def_readonly("objective", &FilterSolution::objective)
      .def_readonly("kkt_residual", &FilterSolution::kkt_residual)
      .def_readonly("iterations", &FilterSolution::iterations)
      .def_property_readonly("cbf_binding", &FilterSolution::cbf_binding);

  py::class_<FilterJacobians>(m, "FilterJacobians")
      .def_readonly("du_dgamma", &FilterJacobians::du_dgamma)
      .def_readonly("du_ddesired", &FilterJacobians::du_ddesired)
      .def_readonly("dslack_dgamma", &FilterJacobians::dslack_dgamma)
      .def_readonly("dslack_ddesired", &FilterJacobians::dslack_ddesired)
      .def_readonly("degenerate", &FilterJacobians::degenerate);

  m.def("solve_filter", [](const FilterProblem& p) { return solve_filter(p); }, py::arg("problem"));
  m.def("differentiate_filter", &differentiate_filter, py::arg("problem"), py::arg("solution"));
  m.def("kkt_residual", [](const FilterProblem& p, const FilterSolution& s) { return kkt_residuals(p, s).max(); },
        py::arg("problem"), py::arg("solution"));

  // --- scenarios and data ---------------------------------------------------
  py::class_<Scenario>(m, "Scenario")
      .def(py::init([](const std::string& doc) { return Scenario::from_json(nlohmann::json::parse(doc)); }),
           py::arg("json"))
      .def_property_readonly("name", [](const Scenario& s) { return std::string(s.name()); })
      .def_property_readonly("n_agents", &Scenario::n_agents)
      .def_property_readonly("control_dim", &Scenario::control_dim)
      .def_property_readonly("joint_state_dim", &Scenario::joint_state_dim)
      .def_property_readonly("context_axes", &Scenario::context_axes)
      .def("context", &Scenario::context, py::arg("x"))
      .def("state_with_context", &Scenario::state_with_context, py::arg("anchor"), py::arg("context"))
      .def("barrier_value", &Scenario::barrier_value, py::arg("x"))
      .def("constraint", &Scenario::constraint, py::arg("x"))
      .def("problem", &Scenario::problem, py::arg("x"), py::arg("desired"), py::arg("gamma"))
      .def("desired_controls", &Scenario::desired_controls, py::arg("x"))
      .def("to_json", [](const Scenario& s) { return s.to_json().dump(); });

  py::class_<InteractionSample>(m, "InteractionSample")
      .def(py::init<>())
      .def_readwrite("trajectory_id", &InteractionSample::trajectory_id)
      .def_readwrite("t", &InteractionSample::t)
      .def_readwrite("x", &InteractionSample::x)
      .def_readwrite("u", &InteractionSample::u)
      .def_readwrite("u_des", &InteractionSample::u_des)
      .def_readwrite("gamma", &InteractionSample::gamma);

  m.def(
      "generate_synthetic",
      [](const Scenario& sc, const Vec& gamma, int n, double noise_variance, std::uint64_t seed) {
        SyntheticConfig cfg;
        cfg.n_samples = n;
        cfg.noise_variance = noise_variance;
        cfg.seed = seed;
        return generate_synthetic(cfg, sc, constant_schedule(gamma));
      },
      py::arg("scenario"), py::arg("gamma"), py::arg("n") = 128, py::arg("noise_variance") = 0.1,
      py::arg("seed") = 0);
  m.def(
      "generate_weaving",
      [](const std::string& kind, int count, std::uint64_t seed, double truth_gain) {
        const WeavingConfig wc;
        const auto sc = make_weaving_scenario(wc);
        return py::make_tuple(sc, generate_weaving_trajectories(weaving_kind_from_string(kind), count, seed,
                                                                wc, sc, make_speed_advantage_truth(truth_gain)));
      },
      py::arg("kind"), py::arg("count") = 1, py::arg("seed") = 0, py::arg("truth_gain") = 0.5,
      "Returns (scenario, samples).");
  m.def(
      "augment",
      [](const std::vector<InteractionSample>& s, const std::string& kind) {
        return augment(s, augmentation_from_string(kind));
      },
      py::arg("samples"), py::arg("kind"));
  m.def(
      "active_fraction",
      [](const std::vector<InteractionSample>& s, const Scenario& sc) { return active_fraction(s, sc); },
      py::arg("samples"), py::arg("scenario"));
  m.def(
      "save_trajectories",
      [](const std::string& path, const Scenario& sc, const std::vector<InteractionSample>& s) {
        save_trajectories(path, make_header(sc, {{"scenario", sc.to_json()}}), s);
      },
      py::arg("path"), py::arg("scenario"), py::arg("samples"));
  m.def(
      "load_trajectories",
      [](const std::string& path) {
        auto file = load_trajectories(path);
        return py::make_tuple(file.header.config.dump(), file.header.scenario, std::move(file.samples));
      },
      py::arg("path"), "Returns (header config JSON, scenario name, samples).");

  // --- models -----------------------------------------------------------------
  py::class_<ResponsibilityModel>(m, "ResponsibilityModel")
      .def_property_readonly("kind", [](const ResponsibilityModel& r) { return std::string(to_string(r.kind())); })
      .def_property_readonly("n_agents", &ResponsibilityModel::n_agents)
      .def_property_readonly("context_dim", &ResponsibilityModel::context_dim)
      .def_property(
          "parameters", [](const ResponsibilityModel& r) { return to_std(r.parameters()); },
          [](ResponsibilityModel& r, const std::vector<double>& p) {
            if (p.size() != r.parameter_count())
              throw std::invalid_argument("expected " + std::to_string(r.parameter_count()) + " parameters");
            std::copy(p.begin(), p.end(), r.parameters().begin());
          })
      .def("gamma", &ResponsibilityModel::gamma, py::arg("context"))
      .def("gamma_jacobian", &ResponsibilityModel::gamma_jacobian, py::arg("context"));

  m.def(
      "init_model",
      [](const std::string& kind, int n_agents, int context_dim, int hidden_width, int hidden_layers,
         std::uint64_t seed) {
        ModelSpec spec;
        spec.kind = model_kind_from_string(kind);
        spec.n_agents = n_agents;
        spec.context_dim = context_dim;
        spec.hidden_width = hidden_width;
        spec.hidden_layers = hidden_layers;
        return init_model(spec, seed);
      },
      py::arg("kind"), py::arg("n_agents") = 2, py::arg("context_dim") = 1, py::arg("hidden_width") = 16,
      py::arg("hidden_layers") = 3, py::arg("seed") = 0);
  m.def(
      "save_checkpoint",
      [](const ResponsibilityModel& model, const std::string& path) { save_checkpoint(model, path); },
      py::arg("model"), py::arg("path"));
  m.def("load_checkpoint", [](const std::string& path) { return load_checkpoint(path); }, py::arg("path"));

  // --- training ---------------------------------------------------------------
  m.def(
      "train_config",
      [](const std::string& overrides) { return to_json(train_config_from_json(nlohmann::json::parse(overrides))).dump(); },
      py::arg("overrides") = "{}", "Complete a partial TrainConfig JSON with defaults.");
  m.def(
      "loss",
      [](const std::vector<InteractionSample>& batch, const ResponsibilityModel& model, const Scenario& sc,
         const std::string& config) {
        return loss(batch, model, sc, train_config_from_json(nlohmann::json::parse(config)));
      },
      py::arg("batch"), py::arg("model"), py::arg("scenario"), py::arg("config") = "{}");
  m.def(
      "loss_and_gradient",
      [](const std::vector<InteractionSample>& batch, const ResponsibilityModel& model, const Scenario& sc,
         const std::string& config) {
        const auto lg = loss_and_gradient(batch, model, sc, train_config_from_json(nlohmann::json::parse(config)));
        return py::make_tuple(lg.loss, lg.gradient);
      },
      py::arg("batch"), py::arg("model"), py::arg("scenario"), py::arg("config") = "{}");
  m.def(
      "fit",
      [](const std::vector<InteractionSample>& data, ResponsibilityModel& model, const Scenario& sc,
         const std::string& config) {
        TrainReport report;
        {
          py::gil_scoped_release release;
          report = fit(data, model, sc, train_config_from_json(nlohmann::json::parse(config)));
        }
        return report.to_json().dump();
      },
      py::arg("data"), py::arg("model"), py::arg("scenario"), py::arg("config") = "{}",
      "Trains `model` in place and returns the report as JSON.");
}
