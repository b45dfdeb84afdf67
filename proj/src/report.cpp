#include "bilsyn/report.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json_util.hpp"

namespace bilsyn {

using internal::Json;
using internal::MatrixFromJson;
using internal::MatrixToJson;
using internal::RequireField;

std::string ToString(CheckResult::Outcome outcome) {
  switch (outcome) {
    case CheckResult::Outcome::kPass:
      return "pass";
    case CheckResult::Outcome::kFail:
      return "fail";
    case CheckResult::Outcome::kSkipped:
      return "skipped";
  }
  return "unknown";
}

bool VerificationSummary::passed() const {
  for (const auto& c : checks) {
    if (c.outcome == CheckResult::Outcome::kFail) return false;
  }
  return true;
}

std::vector<std::string> VerificationSummary::failures() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (c.outcome == CheckResult::Outcome::kFail) {
      out.push_back(fmt::format("{}: {}", c.name, c.detail));
    }
  }
  return out;
}

VerificationSummary VerifyAll(const SynthesisResult& result,
                              const ProblemData& problem,
                              const VerifyOptions& options) {
  using Outcome = CheckResult::Outcome;
  VerificationSummary sum;
  auto add = [&](std::string name, bool ok, std::string detail) {
    sum.checks.push_back(
        {std::move(name), ok ? Outcome::kPass : Outcome::kFail, std::move(detail)});
  };
  auto skip = [&](std::string name, std::string detail) {
    sum.checks.push_back({std::move(name), Outcome::kSkipped, std::move(detail)});
  };

  const ProblemData certified = result.gamma && problem.performance
                                    ? problem.WithGain(*result.gamma)
                                    : problem;
  const double scale = ProblemScale(certified);

  std::map<std::string, double> margins;
  try {
    margins = EvaluateSynthesisMargins(certified, result.vars, result.mode);
  } catch (const Error& e) {
    add("lmi_margins", false, e.what());
    return sum;
  }
  double strict = std::numeric_limits<double>::infinity();
  std::string weakest;
  for (const auto& [name, value] : margins) {
    if (name != "invariance" && value < strict) {
      strict = value;
      weakest = name;
    }
  }
  add("lmi_margins", strict > 0.0,
      fmt::format("min strict margin {:.3e} ({})", strict, weakest));
  const double inv = margins.at("invariance");
  add("invariance_lmi", inv <= 1e-7 * scale,
      fmt::format("max eigenvalue {:.3e}", inv));
  if (!(strict > 0.0)) return sum;

  RationalController ctrl;
  try {
    ctrl = ExtractController(result, certified.region);
  } catch (const Error& e) {
    add("controller", false, e.what());
    return sum;
  }
  {
    // The loop must be well posed on all of Z_RoA.
    const Eigen::LLT<Matrix> chol(InverseSpd(result.vars.P));
    double worst = 1.0;
    std::string error;
    for (int k = 0; k < 1000 && error.empty(); ++k) {
      auto rng = SampleEngine(options.seed ^ 0x5deece66dULL,
                              static_cast<std::uint64_t>(k));
      const Vector z = chol.matrixU().solve(SampleBall(certified.system.N(), rng));
      try {
        ctrl.Evaluate(z);
        worst = std::max(worst, ctrl.Condition(z));
      } catch (const Error& e) {
        error = e.what();
      }
    }
    add("controller", error.empty(),
        error.empty() ? fmt::format("well posed on 1000 samples of Z_RoA, "
                                    "max condition {:.3e}",
                                    worst)
                      : error);
  }

  try {
    Certificate cert = VerifyCertificate(result, certified);
    add("xi_negative_definite", true,
        fmt::format("max eigenvalue {:.3e}, rho {:.3e}, eps {:.3e}, delta {:.3e}",
                    cert.xi_max_eig, cert.rho, cert.eps, cert.delta));
    sum.certificate = std::move(cert);
  } catch (const Error& e) {
    add("xi_negative_definite", false, e.what());
  }

  const RoaReport roa =
      VerifyRoaInclusion(result, certified.region, 1000, options.seed);
  add("roa_inclusion", roa.ok,
      fmt::format("matrix margin {:.3e}, min boundary value {:.3e}{}",
                  roa.matrix_margin, roa.min_boundary_value,
                  roa.message.empty() ? "" : "; " + roa.message));

  const LyapunovReport lyap = VerifyLyapunovDecrease(
      result.vars.P, certified.system, ctrl, options.samples, options.seed);
  add("lyapunov_decrease", lyap.violations == 0,
      fmt::format("{} violations in {} samples, worst dV/V {:.3e}",
                  lyap.violations, lyap.samples, lyap.worst_ratio));

  if (result.has_performance() && sum.certificate) {
    const InvarianceReport ri =
        VerifyRobustInvariance(certified, result.vars.P, ctrl, *sum.certificate,
                               options.samples, options.seed);
    add("robust_invariance", ri.invariance_violations == 0,
        fmt::format("{} violations in {} samples, max V(z+) {:.12g}",
                    ri.invariance_violations, ri.samples, ri.worst_V));
    add("dissipation", ri.dissipation_violations == 0,
        fmt::format("{} violations in {} samples, worst gap {:.3e}",
                    ri.dissipation_violations, ri.samples,
                    ri.worst_dissipation_gap));
  } else if (!result.has_performance()) {
    skip("robust_invariance", "no performance channel in this design");
    skip("dissipation", "no performance channel in this design");
  } else {
    skip("robust_invariance", "no certificate to take delta from");
    skip("dissipation", "no certificate to take delta from");
  }
  return sum;
}

std::string ProblemDigest(const ProblemData& problem) {
  const std::string text = internal::ProblemToJson(problem).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return fmt::format("{:016x}", h);
}

RunReport MakeReport(const ProblemData& problem, const SynthesisResult& result,
                     std::optional<VerificationSummary> verification) {
  RunReport rep;
  rep.problem_name = problem.name;
  rep.problem_digest = ProblemDigest(problem);
  rep.result = result;
  if (result.accepted()) {
    const ProblemData certified = result.gamma && problem.performance
                                      ? problem.WithGain(*result.gamma)
                                      : problem;
    rep.controller = ExtractController(result, certified.region);
  }
  rep.verification = std::move(verification);
  return rep;
}

std::string ReportToJson(const RunReport& report) {
  const SynthesisResult& r = report.result;
  Json j;
  j["problem"] = {{"name", report.problem_name},
                  {"digest", report.problem_digest}};
  j["mode"] = ToString(r.mode);
  j["multiplier_structure"] = ToString(r.multiplier);
  j["status"] = ToString(r.status);
  if (!r.message.empty()) j["message"] = r.message;
  j["P"] = MatrixToJson(r.vars.P);
  j["trace_P"] = r.objective;
  if (r.gamma) j["gamma"] = *r.gamma;

  Json vars;
  vars["L"] = MatrixToJson(r.vars.L);
  vars["Lw"] = MatrixToJson(r.vars.Lw);
  vars["LambdaTilde"] = MatrixToJson(r.vars.LambdaTilde);
  vars["nu"] = r.vars.nu;
  if (r.vars.lambda_tilde) vars["lambda_tilde"] = *r.vars.lambda_tilde;
  j["variables"] = std::move(vars);

  Json margins = Json::object();
  for (const auto& [name, value] : r.margins) margins[name] = value;
  j["margins"] = std::move(margins);
  j["solver"] = {{"iterations", r.iterations},
                 {"strict_epsilon", r.strict_epsilon},
                 {"feasibility_margin", r.feasibility_margin}};

  if (report.controller) {
    j["controller"] = Json::parse(ControllerToJson(*report.controller));
  }
  if (report.verification) {
    Json cert;
    const auto& v = *report.verification;
    cert["passed"] = v.passed();
    if (v.certificate) {
      cert["xi_max_eig"] = v.certificate->xi_max_eig;
      cert["rho"] = v.certificate->rho;
      cert["eps"] = v.certificate->eps;
      cert["delta"] = v.certificate->delta;
    }
    Json checks = Json::array();
    for (const auto& c : v.checks) {
      checks.push_back({{"name", c.name},
                        {"outcome", ToString(c.outcome)},
                        {"detail", c.detail}});
    }
    cert["checks"] = std::move(checks);
    j["certificate"] = std::move(cert);
  }
  return j.dump(2);
}

namespace {

RunReport ReportFromJsonObject(const Json& j) {
  if (!j.is_object()) throw ValidationError("report: top level must be an object");
  RunReport rep;
  if (j.contains("problem")) {
    rep.problem_name = j["problem"].value("name", "");
    rep.problem_digest = j["problem"].value("digest", "");
  }
  SynthesisResult& r = rep.result;
  r.mode = ParseMode(RequireField(j, "mode", "report").get<std::string>());
  r.multiplier = ParseMultiplier(
      RequireField(j, "multiplier_structure", "report").get<std::string>());
  const std::string status = RequireField(j, "status", "report").get<std::string>();
  r.status = status == "feasible" ? SynthesisStatus::kFeasible
             : status == "infeasible" ? SynthesisStatus::kInfeasible
             : status == "unbounded"  ? SynthesisStatus::kUnbounded
                                      : SynthesisStatus::kNumericalError;
  r.vars.P = MatrixFromJson(RequireField(j, "P", "report"), "P");
  if (j.contains("gamma")) r.gamma = j["gamma"].get<double>();
  const Json& vars = RequireField(j, "variables", "report");
  r.vars.L = MatrixFromJson(RequireField(vars, "L", "variables"), "variables.L");
  r.vars.Lw = MatrixFromJson(RequireField(vars, "Lw", "variables"), "variables.Lw");
  r.vars.LambdaTilde = MatrixFromJson(
      RequireField(vars, "LambdaTilde", "variables"), "variables.LambdaTilde");
  r.vars.nu = RequireField(vars, "nu", "variables").get<double>();
  if (vars.contains("lambda_tilde")) {
    r.vars.lambda_tilde = vars["lambda_tilde"].get<double>();
  }
  r.objective = r.vars.P.trace();
  if (j.contains("message")) r.message = j["message"].get<std::string>();
  if (j.contains("margins")) {
    for (const auto& [name, value] : j["margins"].items()) {
      r.margins[name] = value.get<double>();
    }
  }
  if (j.contains("solver")) {
    const Json& solver = j["solver"];
    r.iterations = solver.value("iterations", 0);
    r.strict_epsilon = solver.value("strict_epsilon", 0.0);
    r.feasibility_margin = solver.value("feasibility_margin", 0.0);
  }
  if (j.contains("controller") && !j["controller"].is_null()) {
    rep.controller = ControllerFromJson(j["controller"].dump());
  }
  return rep;
}

}  // namespace

RunReport ReportFromJson(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("JSON parse error: ") + e.what());
  }
  try {
    return ReportFromJsonObject(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("report schema: ") + e.what());
  }
}

RunReport LoadReport(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ReportFromJson(ss.str());
}

}  // namespace bilsyn
