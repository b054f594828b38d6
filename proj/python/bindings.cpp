// Python module over the core solvers and certificates. Matrices cross the
// boundary as numpy arrays via Eigen; configs and specs are thin mirrors of
// the C++ structs with the same defaults.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dlm/certify.hpp"
#include "dlm/harness.hpp"
#include "dlm/incremental.hpp"
#include "dlm/model.hpp"

#include <optional>
#include <variant>

namespace py = pybind11;
using namespace dlm;

PYBIND11_MODULE(dlmopt, m) {
  m.doc() = "dictionary learning models: batch and incremental solvers, "
            "proximal operators, and global-optimality certificates";

  py::register_exception<invalid_input>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<unsupported_kind>(m, "UnsupportedKind", PyExc_NotImplementedError);
  py::register_exception<numerical_failure>(m, "NumericalFailure", PyExc_RuntimeError);

  py::enum_<RegKind>(m, "RegKind")
      .value("SquaredL2", RegKind::SquaredL2)
      .value("SquaredL1", RegKind::SquaredL1)
      .value("ElasticNetSq", RegKind::ElasticNetSq)
      .value("PseudoHuberSq", RegKind::PseudoHuberSq)
      .value("WeightedSquaredL2", RegKind::WeightedSquaredL2)
      .value("NonNormElasticNet", RegKind::NonNormElasticNet)
      .value("CoupledRowsL1Sq", RegKind::CoupledRowsL1Sq)
      .value("CoupledRowsL2", RegKind::CoupledRowsL2)
      .value("PartitionedMax", RegKind::PartitionedMax);

  py::class_<RegularizerSpec>(m, "RegularizerSpec")
      .def_readonly("kind", &RegularizerSpec::kind)
      .def_readonly("nu", &RegularizerSpec::nu)
      .def_readonly("mu", &RegularizerSpec::mu)
      .def("induced", &RegularizerSpec::induced)
      .def("smooth", &RegularizerSpec::smooth)
      .def_static("squared_l2", &RegularizerSpec::squared_l2)
      .def_static("squared_l1", &RegularizerSpec::squared_l1, py::arg("unsquared") = false)
      .def_static("elastic_net_sq", &RegularizerSpec::elastic_net_sq, py::arg("nu"))
      .def_static("pseudo_huber_sq", &RegularizerSpec::pseudo_huber_sq, py::arg("mu"))
      .def_static("weighted_squared_l2", &RegularizerSpec::weighted_squared_l2,
                  py::arg("lambda_"))
      .def_static("non_norm_elastic_net", &RegularizerSpec::non_norm_elastic_net, py::arg("nu"),
                  py::arg("lambda_diag"))
      .def_static("coupled_rows_l1sq", &RegularizerSpec::coupled_rows_l1sq)
      .def_static("coupled_rows_l2", &RegularizerSpec::coupled_rows_l2);

  py::class_<LossSpec>(m, "LossSpec")
      .def_readonly("alpha_s", &LossSpec::alpha_s)
      .def_static("half_squared", &LossSpec::half_squared)
      .def_static("cross_entropy_sigmoid", &LossSpec::cross_entropy_sigmoid)
      .def_static("masked_half_squared", &LossSpec::masked_half_squared)
      .def_static("robust_half_squared", &LossSpec::robust_half_squared, py::arg("alpha_s"));

  py::class_<ProblemSpec>(m, "ProblemSpec")
      .def(py::init<>())
      .def_readwrite("loss", &ProblemSpec::loss)
      .def_readwrite("regD", &ProblemSpec::regD)
      .def_readwrite("regH", &ProblemSpec::regH)
      .def_readwrite("alpha", &ProblemSpec::alpha)
      .def_readwrite("s", &ProblemSpec::s)
      .def_readwrite("k", &ProblemSpec::k)
      .def_readwrite("averaged", &ProblemSpec::averaged)
      .def("validate", &ProblemSpec::validate);

  m.def("subspace_spec", &subspace_spec, py::arg("alpha"), py::arg("k"),
        py::arg("averaged") = true);
  m.def("sparse_coding_spec", &sparse_coding_spec, py::arg("alpha"), py::arg("k"),
        py::arg("averaged") = true);
  m.def("elastic_net_spec", &elastic_net_spec, py::arg("alpha"), py::arg("nu_D"),
        py::arg("nu_H"), py::arg("k"), py::arg("unsquared_h") = false);
  m.def("matrix_completion_spec", &matrix_completion_spec, py::arg("alpha"), py::arg("k"),
        py::arg("d"));

  py::class_<Factorization>(m, "Factorization")
      .def(py::init<>())
      .def(py::init<Mat, Mat>(), py::arg("D"), py::arg("H"))
      .def_readwrite("D", &Factorization::D)
      .def_readwrite("H", &Factorization::H)
      .def("product", &Factorization::product);

  py::class_<ObservedMatrix>(m, "ObservedMatrix")
      .def(py::init([](const Mat& values, const Eigen::MatrixXd& mask) {
             return ObservedMatrix(values, mask.array() != 0.0);
           }),
           py::arg("values"), py::arg("mask"))
      .def_readonly("values", &ObservedMatrix::values)
      .def_property_readonly(
          "mask", [](const ObservedMatrix& m_) { return Eigen::MatrixXd(m_.mask.cast<double>()); })
      .def("observed_count", &ObservedMatrix::observed_count);

  py::class_<Certificate>(m, "Certificate")
      .def_readonly("grad_D_norm", &Certificate::grad_D_norm)
      .def_readonly("grad_H_norm", &Certificate::grad_H_norm)
      .def_readonly("dual_sigma_max", &Certificate::dual_sigma_max)
      .def_readonly("alpha", &Certificate::alpha)
      .def_readonly("globally_optimal", &Certificate::globally_optimal)
      .def_readonly("hessian_min_eig", &Certificate::hessian_min_eig);

  py::class_<TrialReport>(m, "TrialReport")
      .def_readonly("final_objective", &TrialReport::final_objective)
      .def_readonly("objective_trace", &TrialReport::objective_trace)
      .def_readonly("iterations", &TrialReport::iterations)
      .def_readonly("converged", &TrialReport::converged)
      .def_readonly("certificate", &TrialReport::certificate)
      .def_readonly("seed", &TrialReport::seed);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &SolverConfig::max_iters)
      .def_readwrite("tol", &SolverConfig::tol)
      .def_readwrite("step_D", &SolverConfig::step_D)
      .def_readwrite("step_H", &SolverConfig::step_H)
      .def_readwrite("inner_prox_iters", &SolverConfig::inner_prox_iters)
      .def_readwrite("seed", &SolverConfig::seed)
      .def_readwrite("exact_alternation", &SolverConfig::exact_alternation)
      .def_readwrite("allow_subgradient", &SolverConfig::allow_subgradient)
      .def_readwrite("full_refresh", &SolverConfig::full_refresh);

  py::enum_<ScheduleKind>(m, "ScheduleKind")
      .value("Type1", ScheduleKind::Type1)
      .value("Type2", ScheduleKind::Type2)
      .value("Type3", ScheduleKind::Type3);

  py::class_<IncrementalConfig>(m, "IncrementalConfig")
      .def(py::init<>())
      .def_readwrite("schedule", &IncrementalConfig::schedule)
      .def_readwrite("eta0", &IncrementalConfig::eta0)
      .def_readwrite("momentum_beta", &IncrementalConfig::momentum_beta)
      .def_readwrite("accelerate", &IncrementalConfig::accelerate)
      .def_readwrite("epochs", &IncrementalConfig::epochs)
      .def_readwrite("eval_every", &IncrementalConfig::eval_every)
      .def_readwrite("inner_tol", &IncrementalConfig::inner_tol)
      .def_readwrite("max_inner", &IncrementalConfig::max_inner)
      .def_readwrite("seed", &IncrementalConfig::seed);

  m.def(
      "solve",
      [](const Mat& X, const ProblemSpec& spec, const SolverConfig& config,
         std::optional<Factorization> init) {
        SolveResult res = am_dlm_solve(X, spec, config, std::move(init));
        return py::make_tuple(std::move(res.fact), std::move(res.report));
      },
      py::arg("X"), py::arg("spec"), py::arg("config") = SolverConfig{},
      py::arg("init") = std::nullopt,
      "Alternating batch solve; returns (factorization, report).");
  m.def(
      "solve_observed",
      [](const ObservedMatrix& X, const ProblemSpec& spec, const SolverConfig& config,
         std::optional<Factorization> init) {
        SolveResult res = am_dlm_solve(X, spec, config, std::move(init));
        return py::make_tuple(std::move(res.fact), std::move(res.report));
      },
      py::arg("X"), py::arg("spec"), py::arg("config") = SolverConfig{},
      py::arg("init") = std::nullopt);
  m.def(
      "sgd_solve",
      [](const Mat& X, const ProblemSpec& spec, const IncrementalConfig& config) {
        IncrementalResult res = sgd_am_dlm(X, spec, config);
        return py::make_tuple(std::move(res.D), std::move(res.report));
      },
      py::arg("X"), py::arg("spec"), py::arg("config") = IncrementalConfig{},
      "Stochastic subgradient alternation; returns (D, report).");
  m.def(
      "online_solve",
      [](const Mat& X, const ProblemSpec& spec, const IncrementalConfig& config) {
        IncrementalResult res = online_am_dlm(X, spec, config);
        return py::make_tuple(std::move(res.D), std::move(res.report));
      },
      py::arg("X"), py::arg("spec"), py::arg("config") = IncrementalConfig{},
      "Quadratic-surrogate online pass; returns (D, report).");

  m.def("objective_value",
        py::overload_cast<const Factorization&, const Mat&, const ProblemSpec&>(&objective_value),
        py::arg("fact"), py::arg("X"), py::arg("spec"));
  m.def("objective_value_observed",
        py::overload_cast<const Factorization&, const ObservedMatrix&, const ProblemSpec&>(
            &objective_value),
        py::arg("fact"), py::arg("X"), py::arg("spec"));
  m.def(
      "full_objective_given_d",
      [](const Mat& D, const Mat& X, const ProblemSpec& spec) {
        return full_objective_given_d(D, X, spec);
      },
      py::arg("D"), py::arg("X"), py::arg("spec"),
      "Objective at D with every coefficient column re-solved exactly.");
  m.def(
      "prox_sql1",
      [](const Vec& u, double lambda) {
        ProxResult res = prox_sql1(u, lambda);
        return py::make_tuple(std::move(res.z), res.threshold_used, res.support_size);
      },
      py::arg("u"), py::arg("lambda_"),
      "Proximal map of lambda * ||.||_1^2; returns (z, threshold, support size).");
  m.def(
      "solve_h_given_d",
      [](const Mat& D, const Vec& x, const ProblemSpec& spec) {
        return solve_h_given_d(D, x, spec);
      },
      py::arg("D"), py::arg("x"), py::arg("spec"));

  m.def("stationarity_residual", &stationarity_residual, py::arg("fact"), py::arg("X"),
        py::arg("spec"), "Scaled partial-gradient norms (D, H).");
  m.def("global_certificate", &global_certificate, py::arg("fact"), py::arg("X"), py::arg("spec"),
        py::arg("tol"));
  m.def("hessian_min_eigenvalue", &hessian_min_eigenvalue, py::arg("fact"), py::arg("X"),
        py::arg("spec"), py::arg("fd_step") = 0.0);
  m.def(
      "induced_reg_estimate",
      [](const Mat& Z, const RegularizerSpec& regD, const RegularizerSpec& regH, int k) {
        return induced_reg_estimate(Z, regD, regH, k);
      },
      py::arg("Z"), py::arg("regD"), py::arg("regH"), py::arg("k"),
      "Homotopy estimate of the induced regularizer value at Z.");
  m.def("convexity_probe", &convexity_probe, py::arg("regD"), py::arg("regH"), py::arg("k"),
        py::arg("rows"), py::arg("cols"), py::arg("n_segments"), py::arg("seed"),
        "Largest midpoint-convexity violation of the induced objective.");

  py::enum_<RebalanceDirection>(m, "RebalanceDirection")
      .value("SummedToProducted", RebalanceDirection::SummedToProducted)
      .value("ProductedToSummed", RebalanceDirection::ProductedToSummed);
  m.def("rebalance_factors", &rebalance_factors, py::arg("fact"), py::arg("regD"),
        py::arg("regH"), py::arg("direction"));
  m.def("scaling_transport", &scaling_transport, py::arg("fact"), py::arg("s"));

  m.def(
      "gen_gaussian",
      [](Index d, Index T, double mean, double sd, std::uint64_t seed) {
        return gen_gaussian(d, T, mean, sd, seed).m;
      },
      py::arg("d"), py::arg("T"), py::arg("mean"), py::arg("sd"), py::arg("seed"));
  m.def(
      "read_matrix_csv",
      [](const std::string& path) -> py::object {
        auto loaded = read_matrix_csv(path);
        if (std::holds_alternative<DenseMatrix>(loaded))
          return py::cast(Mat(std::get<DenseMatrix>(std::move(loaded)).m));
        return py::cast(std::get<ObservedMatrix>(std::move(loaded)));
      },
      py::arg("path"), "Dense matrices load as arrays, masked ones as ObservedMatrix.");
  m.def("write_matrix_csv",
        py::overload_cast<const Mat&, const std::string&>(&write_matrix_csv), py::arg("m"),
        py::arg("path"));
}
