#include "ftcbf/io.hpp"
#include "ftcbf/optimizer.hpp"
#include "ftcbf/runner.hpp"
#include "ftcbf/verifier.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace ftcbf;

namespace {

std::vector<ConstraintRow> stack_rows(const Mat& A, const Vec& b) {
  if (A.rows() != b.size()) throw ContractViolation("row count of A and length of b differ");
  std::vector<ConstraintRow> rows(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    rows[i].row = A.row(i).transpose();
    rows[i].bound = b(i);
  }
  return rows;
}

py::dict summary_dict(const RunSummary& s) {
  py::dict d;
  d["seed"] = s.seed;
  d["min_h"] = s.min_h;
  d["first_violation_step"] = s.first_violation_step;
  d["reach_time"] = s.reach_time ? py::cast(*s.reach_time) : py::none();
  d["final_norm"] = s.final_norm;
  d["infeasible_steps"] = s.infeasible_steps;
  d["step2_steps"] = s.step2_steps;
  d["step3_steps"] = s.step3_steps;
  d["removal_counts"] = s.removal_counts;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ftcbf, m) {
  m.doc() = "Fault-tolerant stochastic control barrier functions";

  static py::exception<Error> error(m, "Error");
  py::register_exception<ContractViolation>(m, "ContractViolation", error.ptr());
  py::register_exception<ScenarioValidationError>(m, "ScenarioValidationError", error.ptr());
  py::register_exception<SolverError>(m, "SolverError", error.ptr());

  py::class_<Scenario>(m, "Scenario")
      .def_static("from_json", &scenario_from_json_text, py::arg("text"))
      .def_static("load", &load_scenario, py::arg("path"))
      .def_static("wmr", [] { return build_wmr_scenario(); })
      .def_static("boeing", [] { return build_boeing_scenario(); })
      .def("to_json", &scenario_to_json_text)
      .def("save", &save_scenario, py::arg("path"))
      .def_readwrite("seeds", &Scenario::seeds)
      .def_property_readonly("n", [](const Scenario& s) { return s.model.n; })
      .def_property_readonly("p", [](const Scenario& s) { return s.model.p; })
      .def_property_readonly("q", [](const Scenario& s) { return s.model.q; });

  m.def(
      "run",
      [](const Scenario& s, std::uint64_t seed, bool with_csv) {
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_closed_loop(prepare(s), seed, with_csv);
        }
        Mat states(static_cast<Eigen::Index>(r.states.size()), s.model.n);
        for (std::size_t k = 0; k < r.states.size(); ++k) states.row(k) = r.states[k].transpose();
        py::dict d = summary_dict(r.summary);
        d["states"] = states;
        d["csv"] = r.csv;
        return d;
      },
      py::arg("scenario"), py::arg("seed"), py::arg("with_csv") = false);

  m.def(
      "metrics",
      [](const Scenario& s, const std::vector<std::uint64_t>& seeds, int threads) {
        std::vector<RunSummary> sums;
        {
          py::gil_scoped_release release;
          for (auto& r : run_sweep(prepare(s), seeds, false, threads)) sums.push_back(r.summary);
        }
        return metrics_json(s, sums);
      },
      py::arg("scenario"), py::arg("seeds"), py::arg("threads") = 0);

  m.def(
      "calibrate",
      [](const Scenario& s, int runs, double epsilon) {
        py::gil_scoped_release release;
        return calibration_json(calibrate_scenario(s, runs, epsilon), runs, epsilon);
      },
      py::arg("scenario"), py::arg("runs"), py::arg("epsilon") = 0.05);

  m.def(
      "verify",
      [](const Scenario& s, long budget, std::optional<std::uint64_t> seed, int threads) {
        py::gil_scoped_release release;
        SamplerOptions o;
        o.seed = seed.value_or(s.verify.seed);
        o.box_lo = s.verify.box_lo;
        o.box_hi = s.verify.box_hi;
        o.boundary_fraction = s.verify.boundary_fraction;
        o.threads = threads;
        return report_json(falsify_region(prepare(s), budget, o));
      },
      py::arg("scenario"), py::arg("budget") = 10000, py::arg("seed") = py::none(), py::arg("threads") = 0);

  m.def(
      "solve_qp",
      [](const Mat& R, const Mat& A, const Vec& b, const std::optional<Vec>& reference) {
        QpProblem prob{R, stack_rows(A, b), reference.value_or(Vec())};
        const QpResult r = solve_qp(prob);
        py::dict d;
        d["feasible"] = r.feasible();
        d["u"] = r.u;
        d["objective"] = r.objective;
        d["active"] = r.active;
        d["certificate"] = r.certificate ? py::cast(*r.certificate) : py::none();
        return d;
      },
      py::arg("R"), py::arg("A"), py::arg("b"), py::arg("reference") = py::none(),
      "Minimise (u - reference)^T R (u - reference) subject to A u >= b.");

  m.def("farkas_certificate", &farkas_certificate, py::arg("A"), py::arg("Xi"),
        "y >= 0 with A^T y = 0 and Xi^T y = -1 when A u <= Xi has no solution, else None.");
}
