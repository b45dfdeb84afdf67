#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bilsyn/analysis.hpp"
#include "bilsyn/controller.hpp"
#include "bilsyn/lfr.hpp"
#include "bilsyn/model.hpp"
#include "bilsyn/report.hpp"
#include "bilsyn/synthesis.hpp"

namespace py = pybind11;
using namespace bilsyn;

namespace {

SynthesisOptions MakeOptions(const std::string& mode, const std::string& multiplier) {
  SynthesisOptions opts;
  opts.mode = ParseMode(mode);
  opts.multiplier = ParseMultiplier(multiplier);
  return opts;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Region-of-attraction and gain-scheduled controller synthesis for "
            "discrete-time bilinear systems";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InfeasibleError>(m, "InfeasibleError", PyExc_RuntimeError);
  py::register_exception<SingularMatrixError>(m, "SingularMatrixError",
                                              PyExc_ArithmeticError);
  py::register_exception<CertificateError>(m, "CertificateError", PyExc_RuntimeError);

  m.def("kron", &bilsyn::Kron, py::arg("a"), py::arg("b"));

  py::class_<BilinearSystem>(m, "BilinearSystem")
      .def_readonly("A", &BilinearSystem::A)
      .def_readonly("B0", &BilinearSystem::B0)
      .def_readonly("B", &BilinearSystem::B)
      .def_property_readonly("N", &BilinearSystem::N)
      .def_property_readonly("m", &BilinearSystem::m)
      .def("btilde", &BilinearSystem::Btilde)
      .def("step", &BilinearSystem::Step, py::arg("z"), py::arg("u"));

  py::class_<RegionSpec>(m, "RegionSpec")
      .def_static("create", &RegionSpec::Create, py::arg("Qz"), py::arg("Sz"),
                  py::arg("Rz"))
      .def_static("ball", &RegionSpec::Ball, py::arg("N"), py::arg("radius_sq"))
      .def_property_readonly("Qz", &RegionSpec::Qz)
      .def_property_readonly("Sz", &RegionSpec::Sz)
      .def_property_readonly("Rz", &RegionSpec::Rz)
      .def("full", &RegionSpec::Full)
      .def("full_inverse", &RegionSpec::FullInverse)
      .def("contains", &RegionSpec::Contains, py::arg("z"), py::arg("tol") = 0.0);

  py::class_<ProblemData>(m, "Problem")
      .def_readonly("name", &ProblemData::name)
      .def_readonly("system", &ProblemData::system)
      .def_readonly("region", &ProblemData::region)
      .def_property_readonly("has_performance", &ProblemData::has_performance)
      .def("with_gain", &ProblemData::WithGain, py::arg("gamma"))
      .def("with_region", &ProblemData::WithRegion, py::arg("region"))
      .def("to_json", [](const ProblemData& p) { return SerializeProblem(p); });

  m.def("load_problem", &LoadProblem, py::arg("path"));
  m.def("parse_problem", &ParseProblem, py::arg("text"));
  m.def("region_at_level", &RegionAtLevel, py::arg("problem"), py::arg("level"));

  py::class_<SynthesisResult>(m, "SynthesisResult")
      .def_property_readonly("status",
                             [](const SynthesisResult& r) { return ToString(r.status); })
      .def_readonly("message", &SynthesisResult::message)
      .def_property_readonly("accepted", &SynthesisResult::accepted)
      .def_property_readonly("mode",
                             [](const SynthesisResult& r) { return ToString(r.mode); })
      .def_property_readonly(
          "multiplier", [](const SynthesisResult& r) { return ToString(r.multiplier); })
      .def_readonly("objective", &SynthesisResult::objective)
      .def_readonly("gamma", &SynthesisResult::gamma)
      .def_readonly("margins", &SynthesisResult::margins)
      .def_property_readonly("P", [](const SynthesisResult& r) { return r.vars.P; })
      .def_property_readonly("L", [](const SynthesisResult& r) { return r.vars.L; })
      .def_property_readonly("Lw", [](const SynthesisResult& r) { return r.vars.Lw; })
      .def_property_readonly("LambdaTilde",
                             [](const SynthesisResult& r) { return r.vars.LambdaTilde; })
      .def_property_readonly("nu", [](const SynthesisResult& r) { return r.vars.nu; })
      .def_property_readonly("lambda_tilde",
                             [](const SynthesisResult& r) { return r.vars.lambda_tilde; });

  m.def(
      "synthesize_stability",
      [](const ProblemData& p, const std::string& mode, const std::string& mult) {
        return SynthesizeStability(p, MakeOptions(mode, mult));
      },
      py::arg("problem"), py::arg("mode") = "gs", py::arg("multiplier") = "full");
  m.def(
      "synthesize_performance",
      [](const ProblemData& p, std::optional<double> gamma, const std::string& mode,
         const std::string& mult) {
        const SynthesisOptions opts = MakeOptions(mode, mult);
        return gamma ? SynthesizePerformance(p, *gamma, opts)
                     : SynthesizePerformance(p, opts);
      },
      py::arg("problem"), py::arg("gamma") = std::nullopt, py::arg("mode") = "gs",
      py::arg("multiplier") = "full");
  m.def(
      "minimize_gamma",
      [](const ProblemData& p, double target_P, const std::string& mode,
         const std::string& mult, double rel_tol) {
        GammaSearch search;
        search.rel_tol = rel_tol;
        const GammaResult g = MinimizeGamma(p, target_P, MakeOptions(mode, mult), search);
        return py::make_tuple(g.gamma, g.result);
      },
      py::arg("problem"), py::arg("target_P"), py::arg("mode") = "gs",
      py::arg("multiplier") = "full", py::arg("rel_tol") = 1e-3,
      "Returns (gamma_star, result).");
  m.def(
      "sweep_gamma_vs_p",
      [](const ProblemData& p, const std::vector<double>& grid, const std::string& mode,
         const std::string& mult) {
        std::vector<std::tuple<double, std::optional<double>, std::string>> rows;
        for (const auto& pt : SweepGammaVsP(p, grid, MakeOptions(mode, mult))) {
          rows.emplace_back(pt.P, pt.gamma, pt.status);
        }
        return rows;
      },
      py::arg("problem"), py::arg("grid"), py::arg("mode") = "gs",
      py::arg("multiplier") = "full", "Rows of (P, gamma or None, status).");
  m.def(
      "max_feasible_region",
      [](const ProblemData& p, double lo, double hi, double step,
         const std::string& mode, std::optional<double> gamma) {
        return MaxFeasibleRegion(p, lo, hi, step, MakeOptions(mode, "full"), gamma).best;
      },
      py::arg("problem"), py::arg("lo"), py::arg("hi"), py::arg("step"),
      py::arg("mode") = "gs", py::arg("gamma") = std::nullopt);

  py::class_<RationalController>(m, "Controller")
      .def_readonly("K", &RationalController::K)
      .def_readonly("Kw", &RationalController::Kw)
      .def_readonly("P", &RationalController::P)
      .def_property_readonly("mode",
                             [](const RationalController& c) { return ToString(c.mode); })
      .def("__call__", &RationalController::Evaluate, py::arg("z"))
      .def("condition", &RationalController::Condition, py::arg("z"))
      .def("to_json", [](const RationalController& c) { return ControllerToJson(c); });
  m.def("extract_controller", &ExtractController, py::arg("result"),
        py::arg("region"));
  m.def("load_controller", &LoadController, py::arg("path"));

  m.def(
      "simulate",
      [](const ProblemData& p, const RationalController& c, const Vector& z0, int steps,
         const std::vector<Vector>& wp) {
        const PerformanceChannel* ch =
            p.performance ? &p.performance->channel : nullptr;
        const Trajectory t = Simulate(p.system, c, z0, wp, steps, ch);
        py::dict out;
        out["z"] = t.z;
        out["u"] = t.u;
        out["zp"] = t.zp;
        out["V"] = t.V;
        out["truncated"] = t.truncated;
        out["error"] = t.error;
        out["csv"] = TrajectoryToCsv(t);
        return out;
      },
      py::arg("problem"), py::arg("controller"), py::arg("z0"), py::arg("steps") = 200,
      py::arg("wp") = std::vector<Vector>{});

  m.def(
      "verify",
      [](const SynthesisResult& r, const ProblemData& p, int samples,
         std::uint64_t seed) {
        const VerificationSummary s = VerifyAll(r, p, {samples, seed});
        py::dict out;
        out["passed"] = s.passed();
        py::list checks;
        for (const auto& c : s.checks) {
          checks.append(py::make_tuple(c.name, ToString(c.outcome), c.detail));
        }
        out["checks"] = checks;
        if (s.certificate) {
          out["xi_max_eig"] = s.certificate->xi_max_eig;
          out["rho"] = s.certificate->rho;
          out["eps"] = s.certificate->eps;
          out["delta"] = s.certificate->delta;
        }
        return out;
      },
      py::arg("result"), py::arg("problem"), py::arg("samples") = 10000,
      py::arg("seed") = 1);

  m.def(
      "estimate_l2_gain",
      [](const ProblemData& p, const RationalController& c, double delta, int samples,
         int horizon, std::uint64_t seed) {
        if (!p.performance) throw ValidationError("problem has no performance channel");
        return EstimateL2Gain(p.system, p.performance->channel, c, delta, samples,
                              horizon, seed)
            .gamma_lb;
      },
      py::arg("problem"), py::arg("controller"), py::arg("delta"),
      py::arg("samples") = 10000, py::arg("horizon") = 200, py::arg("seed") = 1);

  m.def(
      "report_json",
      [](const ProblemData& p, const SynthesisResult& r, bool verify, int samples) {
        std::optional<VerificationSummary> s;
        if (verify && r.accepted()) s = VerifyAll(r, p, {samples, 1});
        return ReportToJson(MakeReport(p, r, s));
      },
      py::arg("problem"), py::arg("result"), py::arg("verify") = true,
      py::arg("samples") = 10000);

  m.attr("__version__") = VERSION_INFO_STR;
}
