#include "commands.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "bilsyn/analysis.hpp"
#include "bilsyn/controller.hpp"
#include "bilsyn/model.hpp"
#include "bilsyn/report.hpp"
#include "bilsyn/synthesis.hpp"

namespace bilsyn::cli {

namespace {

template <typename F>
int Guard(F&& body) {
  try {
    return body();
  } catch (const ValidationError& e) {
    fmt::print(stderr, "validation error: {}\n", e.what());
    return kValidation;
  } catch (const InfeasibleError& e) {
    fmt::print(stderr, "infeasible: {}\n", e.what());
    return kInfeasible;
  } catch (const CertificateError& e) {
    fmt::print(stderr, "certificate failure: {}\n", e.what());
    return kCertificate;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kRuntime;
  }
}

std::string FormatMatrix(const Matrix& m) {
  std::string out = "[";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += i == 0 ? "[" : ", [";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      out += fmt::format("{}{:.6g}", j == 0 ? "" : ", ", m(i, j));
    }
    out += "]";
  }
  return out + "]";
}

double ParseNumber(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) {
    throw ValidationError(fmt::format("{}: cannot parse \"{}\"", what, text));
  }
  return v;
}

Vector ParseVector(const std::string& text, const std::string& what) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) values.push_back(ParseNumber(item, what));
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path.string()));
  out << text;
}

SynthesisOptions MakeOptions(const std::string& mode,
                             const std::string& multiplier) {
  SynthesisOptions opts;
  opts.mode = ParseMode(mode);
  opts.multiplier = ParseMultiplier(multiplier);
  return opts;
}

void PrintChecks(const VerificationSummary& summary) {
  for (const auto& c : summary.checks) {
    fmt::print("  {:<22} {:<7} {}\n", c.name, ToString(c.outcome), c.detail);
  }
}

}  // namespace

std::vector<double> ParseGrid(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> parts;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(ParseNumber(item, "grid"));
    if (parts.size() != 3 || !(parts[2] > 0.0)) {
      throw ValidationError("grid must be a:b:step with step > 0");
    }
    const double count = std::floor((parts[1] - parts[0]) / parts[2] + 1e-9);
    for (int k = 0; k <= static_cast<int>(count); ++k) {
      out.push_back(std::round((parts[0] + k * parts[2]) * 1e12) / 1e12);
    }
    return out;
  }
  const Vector v = ParseVector(text, "grid");
  return {v.data(), v.data() + v.size()};
}

int RunValidate(const std::string& path) {
  return Guard([&] {
    const ProblemData problem = LoadProblem(path);
    fmt::print("valid: {} (N={}, m={}{})\n",
               problem.name.empty() ? path : problem.name, problem.system.N(),
               problem.system.m(),
               problem.performance
                   ? fmt::format(", p={}, q={}", problem.performance->channel.p(),
                                 problem.performance->channel.q())
                   : std::string());
    return static_cast<int>(kOk);
  });
}

int RunSynthesize(const SynthesizeArgs& args) {
  return Guard([&] {
    const ProblemData problem = LoadProblem(args.problem);
    const SynthesisOptions opts = MakeOptions(args.mode, args.multiplier);

    SynthesisResult result;
    if (args.gamma) {
      if (!problem.performance) {
        throw ValidationError("--gamma needs a performance channel");
      }
      if (*args.gamma == "bisect") {
        result = MinimizeGamma(problem, args.target_P, opts).result;
      } else {
        result = SynthesizePerformance(problem, ParseNumber(*args.gamma, "--gamma"),
                                       opts);
      }
    } else if (problem.performance) {
      result = SynthesizePerformance(problem, opts);
    } else {
      result = SynthesizeStability(problem, opts);
    }

    std::optional<VerificationSummary> summary;
    if (result.accepted() && !args.no_verify) {
      summary = VerifyAll(result, problem, {args.samples, args.seed});
    }
    const RunReport report = MakeReport(problem, result, summary);
    const std::filesystem::path dir(args.out);
    std::filesystem::create_directories(dir);
    WriteFile(dir / "report.json", ReportToJson(report) + "\n");
    if (report.controller) {
      WriteFile(dir / "controller.json", ControllerToJson(*report.controller) + "\n");
    }

    fmt::print("status: {}\n", ToString(result.status));
    if (!result.message.empty()) fmt::print("message: {}\n", result.message);
    fmt::print("mode: {}, multiplier: {}\n", ToString(result.mode),
               ToString(result.multiplier));
    if (!result.accepted()) {
      return static_cast<int>(result.status == SynthesisStatus::kInfeasible
                                  ? kInfeasible
                                  : kRuntime);
    }
    if (result.gamma) fmt::print("gamma: {:.6g}\n", *result.gamma);
    fmt::print("trace(P): {:.9g}\nP: {}\n", result.objective,
               FormatMatrix(result.vars.P));
    fmt::print("K: {}\nKw: {}\n", FormatMatrix(report.controller->K),
               FormatMatrix(report.controller->Kw));
    if (!summary) {
      fmt::print("verification: skipped\n");
      return static_cast<int>(kOk);
    }
    fmt::print("verification: {}\n", summary->passed() ? "pass" : "FAIL");
    PrintChecks(*summary);
    return static_cast<int>(summary->passed() ? kOk : kCertificate);
  });
}

int RunSweep(const SweepArgs& args) {
  return Guard([&] {
    const ProblemData problem = LoadProblem(args.problem);
    if (!problem.performance) {
      throw ValidationError("sweep needs a performance channel");
    }
    const std::vector<double> grid = ParseGrid(args.grid);
    const auto points =
        SweepGammaVsP(problem, grid, MakeOptions(args.mode, args.multiplier));
    std::string csv = "P,gamma,status\n";
    for (const auto& pt : points) {
      csv += fmt::format("{:.10g},{},{}\n", pt.P,
                         pt.gamma ? fmt::format("{:.8g}", *pt.gamma) : "",
                         pt.status);
      if (pt.status != "ok") {
        fmt::print(stderr, "P = {:.10g}: {}\n", pt.P, pt.status);
      }
    }
    if (args.out) {
      const std::filesystem::path dir(*args.out);
      std::filesystem::create_directories(dir);
      WriteFile(dir / "sweep.csv", csv);
    } else {
      fmt::print("{}", csv);
    }
    return static_cast<int>(kOk);
  });
}

int RunSimulate(const SimulateArgs& args) {
  return Guard([&] {
    const ProblemData problem = LoadProblem(args.problem);
    const RationalController ctrl = LoadController(args.controller);
    const int n = problem.system.N();
    if (ctrl.N() != n || ctrl.m() != problem.system.m()) {
      throw ValidationError(fmt::format(
          "controller is for N={}, m={}; problem has N={}, m={}", ctrl.N(),
          ctrl.m(), n, problem.system.m()));
    }
    const Vector z0 = ParseVector(args.z0, "--z0");
    if (z0.size() != n) {
      throw ValidationError(fmt::format("--z0 needs {} entries", n));
    }
    if (args.steps < 0) throw ValidationError("--steps must be >= 0");

    const PerformanceChannel* channel =
        problem.performance ? &problem.performance->channel : nullptr;
    std::vector<Vector> wp;
    const std::string uniform = "uniform:";
    if (args.wp.rfind(uniform, 0) == 0) {
      if (!channel) throw ValidationError("--wp needs a performance channel");
      const double delta = ParseNumber(args.wp.substr(uniform.size()), "--wp");
      if (!(delta >= 0.0)) throw ValidationError("--wp delta must be >= 0");
      for (int k = 0; k < args.steps; ++k) {
        auto rng = SampleEngine(args.seed, static_cast<std::uint64_t>(k));
        wp.push_back(std::sqrt(delta) * SampleBall(channel->q(), rng));
      }
    } else {
      Vector w = ParseVector(args.wp, "--wp");
      if (!channel) {
        if (w.cwiseAbs().maxCoeff() != 0.0) {
          throw ValidationError("--wp needs a performance channel");
        }
      } else {
        if (w.size() == 1 && channel->q() > 1) {
          w = Vector::Constant(channel->q(), w(0));
        }
        if (w.size() != channel->q()) {
          throw ValidationError(fmt::format("--wp needs {} entries", channel->q()));
        }
        wp.assign(args.steps, w);
      }
    }

    const Trajectory traj =
        Simulate(problem.system, ctrl, z0, wp, args.steps, channel);
    if (!traj.V.empty() && std::isfinite(traj.V.front()) && traj.V.front() > 1.0) {
      fmt::print(stderr, "warning: z0 lies outside Z_RoA (V(z0) = {:.6g})\n",
                 traj.V.front());
    }
    const std::string csv = TrajectoryToCsv(traj);
    if (args.out) {
      const std::filesystem::path dir(*args.out);
      std::filesystem::create_directories(dir);
      WriteFile(dir / "trajectory.csv", csv);
    } else {
      fmt::print("{}", csv);
    }
    double max_v = 0.0;
    for (double v : traj.V) {
      if (std::isfinite(v)) max_v = std::max(max_v, v);
    }
    fmt::print(stderr, "steps: {}, final |z|: {:.6g}, max V: {:.6g}\n",
               traj.z.size() - 1, traj.z.back().norm(), max_v);
    if (traj.truncated) {
      fmt::print(stderr, "error: trajectory truncated: {}\n", traj.error);
      return static_cast<int>(kRuntime);
    }
    return static_cast<int>(kOk);
  });
}

int RunVerify(const VerifyArgs& args) {
  return Guard([&] {
    const ProblemData problem = LoadProblem(args.problem);
    const RunReport report = LoadReport(args.report);
    if (!report.problem_digest.empty() &&
        report.problem_digest != ProblemDigest(problem)) {
      fmt::print(stderr, "warning: report was produced for a different problem "
                         "file (digest mismatch)\n");
    }
    if (!report.result.accepted()) {
      fmt::print("report status is {}; nothing to verify\n",
                 ToString(report.result.status));
      return static_cast<int>(kCertificate);
    }
    VerificationSummary summary =
        VerifyAll(report.result, problem, {args.samples, args.seed});

    CheckResult gain{"empirical_gain", CheckResult::Outcome::kSkipped, ""};
    if (!report.result.has_performance()) {
      gain.detail = "no performance channel in this design";
    } else if (!report.result.gamma) {
      gain.detail = "index is not an L2-gain bound";
    } else if (!summary.certificate || !(summary.certificate->delta > 0.0)) {
      gain.detail = "no certified disturbance bound";
    } else {
      const ProblemData certified = problem.WithGain(*report.result.gamma);
      const RationalController ctrl =
          ExtractController(report.result, certified.region);
      const GainEstimate est = EstimateL2Gain(
          certified.system, certified.performance->channel, ctrl,
          summary.certificate->delta, args.samples, args.horizon, args.seed);
      const bool ok = est.gamma_lb <= *report.result.gamma + 1e-6;
      gain.outcome = ok ? CheckResult::Outcome::kPass : CheckResult::Outcome::kFail;
      gain.detail = fmt::format("gamma_lb {:.6g} <= gamma {:.6g} ({} samples, "
                                "horizon {})",
                                est.gamma_lb, *report.result.gamma, est.samples,
                                est.horizon);
    }
    summary.checks.push_back(gain);

    fmt::print("verification: {}\n", summary.passed() ? "pass" : "FAIL");
    PrintChecks(summary);
    if (!summary.passed()) {
      for (const auto& f : summary.failures()) {
        fmt::print(stderr, "failed: {}\n", f);
      }
      return static_cast<int>(kCertificate);
    }
    return static_cast<int>(kOk);
  });
}

}  // namespace bilsyn::cli
