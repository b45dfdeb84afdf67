#include "bilsyn/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace bilsyn {

using sdp::AffineExpr;

std::string ToString(Mode mode) {
  return mode == Mode::kLinear ? "linear" : "gain_scheduled";
}

std::string ToString(Multiplier multiplier) {
  return multiplier == Multiplier::kFull ? "full" : "scaled_identity";
}

Mode ParseMode(const std::string& text) {
  if (text == "linear") return Mode::kLinear;
  if (text == "gs" || text == "gain_scheduled") return Mode::kGainScheduled;
  throw ValidationError(fmt::format("unknown mode \"{}\" (linear|gs)", text));
}

Multiplier ParseMultiplier(const std::string& text) {
  if (text == "full") return Multiplier::kFull;
  if (text == "scaled" || text == "scaled_identity") {
    return Multiplier::kScaledIdentity;
  }
  throw ValidationError(
      fmt::format("unknown multiplier \"{}\" (full|scaled)", text));
}

std::string ToString(SynthesisStatus status) {
  switch (status) {
    case SynthesisStatus::kFeasible:
      return "feasible";
    case SynthesisStatus::kInfeasible:
      return "infeasible";
    case SynthesisStatus::kUnbounded:
      return "unbounded";
    case SynthesisStatus::kNumericalError:
      return "numerical_error";
  }
  return "unknown";
}

SymbolicVars SymbolicVars::FromValues(const DecisionVars& vars) {
  const Eigen::Index m = vars.L.rows();
  const Eigen::Index n = vars.L.cols();
  SymbolicVars v;
  v.P = AffineExpr(vars.P);
  v.L = AffineExpr(vars.L);
  v.Lw = vars.Lw.size() == 0 ? AffineExpr::Zero(m, n * m) : AffineExpr(vars.Lw);
  v.LambdaTilde = AffineExpr(vars.LambdaTilde);
  v.nu = AffineExpr(Matrix::Constant(1, 1, vars.nu));
  v.lambda_tilde =
      AffineExpr(Matrix::Constant(1, 1, vars.lambda_tilde.value_or(0.0)));
  return v;
}

namespace {

using Grid = std::vector<std::vector<AffineExpr>>;

// The 4×4 block grid of Q, with the gain-scheduling terms when `gs`.
Grid CoreGrid(const SymbolicVars& v, const BilinearSystem& system,
              const RegionSpec& region, bool gs) {
  const int n = system.N();
  const int m = system.m();
  const Matrix bt = system.Btilde();
  const AffineExpr lam_s = Kron(v.LambdaTilde, region.Sz_tilde());
  const AffineExpr lam_q = Kron(v.LambdaTilde, region.Qz_tilde());
  const AffineExpr lam_r = Kron(v.LambdaTilde, region.Rz_tilde());

  AffineExpr b12 = -(bt * lam_s);
  AffineExpr b13 = system.A * v.P + system.B0 * v.L;
  AffineExpr b14 = bt * lam_q;
  AffineExpr b22 = lam_r;
  AffineExpr b24 = AffineExpr::Zero(m, n * m);
  if (gs) {
    const Matrix i_shat = Kron(Matrix::Identity(m, m), region.Sz_hat());
    const AffineExpr lw_s = v.Lw * i_shat;
    b12 -= system.B0 * lw_s;
    b22 -= lw_s + lw_s.transpose();
    b14 += system.B0 * v.Lw;
    b24 += v.Lw;
  }
  return {
      {v.P, b12, b13, b14},
      {b12.transpose(), b22, v.L, b24},
      {b13.transpose(), v.L.transpose(), v.P, AffineExpr::Zero(n, n * m)},
      {b14.transpose(), b24.transpose(), AffineExpr::Zero(n * m, n),
       -lam_q},
  };
}

}  // namespace

AffineExpr BuildQ(const SymbolicVars& v, const BilinearSystem& system,
                  const RegionSpec& region) {
  return sdp::Blocks(CoreGrid(v, system, region, false));
}

AffineExpr BuildQGS(const SymbolicVars& v, const BilinearSystem& system,
                    const RegionSpec& region) {
  return sdp::Blocks(CoreGrid(v, system, region, true));
}

AffineExpr BuildInvariance(const SymbolicVars& v, const RegionSpec& region) {
  const AffineExpr minus_nu_s = -Kron(v.nu, region.Sz_tilde());
  return sdp::Blocks({
      {Kron(v.nu, region.Qz_tilde()) + v.P, minus_nu_s},
      {minus_nu_s.transpose(),
       Kron(v.nu, region.Rz_tilde()) - AffineExpr(Matrix::Identity(1, 1))},
  });
}

AffineExpr BuildPerformance(const SymbolicVars& v, const BilinearSystem& system,
                            const RegionSpec& region,
                            const PerformanceProblem& perf) {
  const PerformanceChannel& ch = perf.channel;
  const PerformanceSpec& idx = perf.index;
  const int m = system.m();
  const Matrix& qp = idx.Qp_tilde();
  const Matrix& sp = idx.Sp_tilde();
  const Matrix& rp = idx.Rp_tilde();
  const Matrix i_shat = Kron(Matrix::Identity(m, m), region.Sz_hat());

  Grid grid = CoreGrid(v, system, region, true);
  grid[0][0] += Kron(v.lambda_tilde, Matrix(ch.Bp * qp * ch.Bp.transpose()));

  const AffineExpr c1 =
      Kron(v.lambda_tilde, Matrix(ch.Bp * (qp * ch.Dpw.transpose() - sp)));
  const AffineExpr c2 = -(ch.Dpuz * Kron(v.LambdaTilde, region.Sz_tilde()) +
                          ch.Dpu * v.Lw * i_shat)
                             .transpose();
  const AffineExpr c3 = (ch.Cp * v.P + ch.Dpu * v.L).transpose();
  const AffineExpr c4 =
      (ch.Dpuz * Kron(v.LambdaTilde, region.Qz_tilde()) + ch.Dpu * v.Lw)
          .transpose();
  const Matrix c5 = rp - ch.Dpw * sp - sp.transpose() * ch.Dpw.transpose() +
                    ch.Dpw * qp * ch.Dpw.transpose();

  const std::vector<AffineExpr> column = {c1, c2, c3, c4};
  std::vector<AffineExpr> last_row;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i].push_back(column[i]);
    last_row.push_back(column[i].transpose());
  }
  last_row.push_back(Kron(v.lambda_tilde, c5));
  grid.push_back(std::move(last_row));
  return sdp::Blocks(grid);
}

Matrix BuildQ(const DecisionVars& v, const BilinearSystem& system,
              const RegionSpec& region) {
  return BuildQ(SymbolicVars::FromValues(v), system, region).constant();
}

Matrix BuildQGS(const DecisionVars& v, const BilinearSystem& system,
                const RegionSpec& region) {
  return BuildQGS(SymbolicVars::FromValues(v), system, region).constant();
}

Matrix BuildInvariance(const DecisionVars& v, const RegionSpec& region) {
  return BuildInvariance(SymbolicVars::FromValues(v), region).constant();
}

Matrix BuildPerformance(const DecisionVars& v, const BilinearSystem& system,
                        const RegionSpec& region,
                        const PerformanceProblem& perf) {
  if (!v.lambda_tilde) {
    throw ValidationError("performance matrix needs lambda_tilde");
  }
  return BuildPerformance(SymbolicVars::FromValues(v), system, region, perf)
      .constant();
}

double ProblemScale(const ProblemData& problem) {
  double scale = 1.0;
  auto absorb = [&](const Matrix& m) {
    if (m.size() > 0) scale = std::max(scale, m.cwiseAbs().maxCoeff());
  };
  absorb(problem.system.A);
  absorb(problem.system.B0);
  absorb(problem.system.Btilde());
  absorb(problem.region.Full());
  absorb(problem.region.FullInverse());
  if (problem.performance) {
    const auto& ch = problem.performance->channel;
    absorb(ch.Bp);
    absorb(ch.Cp);
    absorb(ch.Dpu);
    absorb(ch.Dpuz);
    absorb(ch.Dpw);
  }
  return scale;
}

std::map<std::string, double> EvaluateSynthesisMargins(
    const ProblemData& problem, const DecisionVars& vars, Mode mode) {
  std::map<std::string, double> out;
  const auto& sys = problem.system;
  const auto& region = problem.region;
  if (vars.lambda_tilde) {
    if (!problem.performance) {
      throw ValidationError("performance margins need a performance channel");
    }
    out["performance"] =
        MinEig(BuildPerformance(vars, sys, region, *problem.performance));
    out["lambda_tilde"] = *vars.lambda_tilde;
  } else if (mode == Mode::kLinear) {
    out["Q"] = MinEig(BuildQ(vars, sys, region));
  } else {
    out["Q_GS"] = MinEig(BuildQGS(vars, sys, region));
  }
  out["P"] = MinEig(vars.P);
  out["LambdaTilde"] = MinEig(vars.LambdaTilde);
  out["nu"] = vars.nu;
  out["invariance"] = MaxEig(BuildInvariance(vars, region));
  return out;
}

namespace {

struct Layout {
  sdp::Problem problem;
  SymbolicVars vars;
  std::vector<std::pair<std::string, AffineExpr>> strict;
  int num_design = 0;
};

Layout Declare(const ProblemData& problem, const SynthesisOptions& options,
               bool with_perf) {
  Layout lay;
  sdp::Problem& pr = lay.problem;
  SymbolicVars& v = lay.vars;
  const int n = problem.system.N();
  const int m = problem.system.m();
  const bool gs = options.mode == Mode::kGainScheduled;

  v.P = pr.AddSymmetric("P", n);
  v.L = pr.AddMatrix("L", m, n);
  v.Lw = gs ? pr.AddMatrix("Lw", m, n * m) : AffineExpr::Zero(m, n * m);
  AffineExpr lambda_block;
  if (options.multiplier == Multiplier::kFull) {
    v.LambdaTilde = pr.AddSymmetric("LambdaTilde", m);
    lambda_block = v.LambdaTilde;
  } else {
    lambda_block = pr.AddScalar("mu");
    v.LambdaTilde = Kron(lambda_block, Matrix::Identity(m, m));
  }
  v.nu = pr.AddScalar("nu");
  if (with_perf) {
    v.lambda_tilde = pr.AddScalar("lambda_tilde");
  } else {
    v.lambda_tilde = AffineExpr::Zero(1, 1);
  }
  lay.num_design = pr.num_scalars();

  if (with_perf) {
    lay.strict.emplace_back(
        "performance", BuildPerformance(v, problem.system, problem.region,
                                        *problem.performance));
  } else if (gs) {
    lay.strict.emplace_back("Q_GS",
                            BuildQGS(v, problem.system, problem.region));
  } else {
    lay.strict.emplace_back("Q", BuildQ(v, problem.system, problem.region));
  }
  lay.strict.emplace_back("P", v.P);
  lay.strict.emplace_back("LambdaTilde", lambda_block);
  lay.strict.emplace_back("nu", v.nu);
  if (with_perf) lay.strict.emplace_back("lambda_tilde", v.lambda_tilde);
  return lay;
}

// Strict constraints shifted by `shift`·I, the invariance LMI, and a ball
// bound on the design variables.
void AddConstraints(Layout& lay, const ProblemData& problem,
                    const AffineExpr& shift, double bound) {
  sdp::Problem& pr = lay.problem;
  for (const auto& [name, expr] : lay.strict) {
    pr.AddConstraint(name, expr - Kron(shift, Matrix::Identity(expr.rows(),
                                                               expr.rows())));
  }
  pr.AddConstraint("invariance", BuildInvariance(lay.vars, problem.region),
                   sdp::Sense::kNsd);

  const int n = lay.num_design;
  AffineExpr x = AffineExpr::Zero(n, 1);
  for (int i = 0; i < n; ++i) {
    Matrix e = Matrix::Zero(n, 1);
    e(i, 0) = 1.0;
    x.AddTerm(i, e);
  }
  pr.AddConstraint(
      "bound", sdp::Blocks({{AffineExpr(Matrix::Constant(1, 1, bound)),
                             x.transpose()},
                            {x, AffineExpr(bound * Matrix::Identity(n, n))}}));
}

DecisionVars ExtractVars(const sdp::Solution& sol, const ProblemData& problem,
                         const SynthesisOptions& options, bool with_perf) {
  const int n = problem.system.N();
  const int m = problem.system.m();
  DecisionVars v;
  v.P = Symmetrize(sol.values.at("P"));
  v.L = sol.values.at("L");
  v.Lw = options.mode == Mode::kGainScheduled ? sol.values.at("Lw")
                                              : Matrix::Zero(m, n * m);
  if (options.multiplier == Multiplier::kFull) {
    v.LambdaTilde = Symmetrize(sol.values.at("LambdaTilde"));
  } else {
    v.LambdaTilde = sol.values.at("mu")(0, 0) * Matrix::Identity(m, m);
  }
  v.nu = sol.values.at("nu")(0, 0);
  if (with_perf) v.lambda_tilde = sol.values.at("lambda_tilde")(0, 0);
  return v;
}

double MinStrict(const std::map<std::string, double>& margins) {
  double out = std::numeric_limits<double>::infinity();
  for (const auto& [name, value] : margins) {
    if (name != "invariance") out = std::min(out, value);
  }
  return out;
}

SynthesisResult Synthesize(const ProblemData& problem,
                           const SynthesisOptions& options, bool with_perf) {
  const double scale = ProblemScale(problem);
  const double eps = options.strict_factor * scale;
  const double inv_tol = 1e-7 * scale;
  const double bound = options.variable_bound * scale;
  const sdp::InteriorPointSolver default_solver(options.settings);
  const sdp::Solver& solver =
      options.solver ? *options.solver
                     : static_cast<const sdp::Solver&>(default_solver);

  SynthesisResult res;
  res.mode = options.mode;
  res.multiplier = options.multiplier;
  res.strict_epsilon = eps;
  if (with_perf) res.gamma = problem.performance->index.gamma();

  auto valid = [&](const std::map<std::string, double>& margins,
                   double floor) {
    return MinStrict(margins) >= floor && margins.at("invariance") <= inv_tol;
  };

  // Phase I: largest uniform margin t on the strict constraints.
  Layout phase1 = Declare(problem, options, with_perf);
  const AffineExpr t = phase1.problem.AddScalar("t");
  AddConstraints(phase1, problem, t, bound);
  phase1.problem.SetObjective(t);
  const sdp::Solution sol1 = solver.Solve(phase1.problem);
  res.iterations = sol1.iterations;
  if (sol1.status == sdp::Status::kUnbounded) {
    res.status = SynthesisStatus::kUnbounded;
    res.message = "feasibility phase unbounded";
    return res;
  }
  res.vars = ExtractVars(sol1, problem, options, with_perf);
  res.margins = EvaluateSynthesisMargins(problem, res.vars, options.mode);
  res.feasibility_margin = MinStrict(res.margins);
  res.objective = res.vars.P.trace();
  if (!valid(res.margins, eps)) {
    res.status = SynthesisStatus::kInfeasible;
    res.message = fmt::format(
        "no point with strict margin {:.3g} (best margin {:.3g}, invariance "
        "{:.3g}, solver {})",
        eps, res.feasibility_margin, res.margins.at("invariance"),
        sdp::ToString(sol1.status));
    return res;
  }

  // Phase II: maximize tr(P) with the strict constraints ⪰ eps·I.
  Layout phase2 = Declare(problem, options, with_perf);
  AddConstraints(phase2, problem, AffineExpr(Matrix::Constant(1, 1, eps)),
                 bound);
  phase2.problem.SetObjective(phase2.vars.P.Trace());
  const sdp::Solution sol2 = solver.Solve(phase2.problem);
  res.iterations += sol2.iterations;
  if (sol2.status != sdp::Status::kInfeasible &&
      sol2.status != sdp::Status::kUnbounded) {
    DecisionVars vars = ExtractVars(sol2, problem, options, with_perf);
    auto margins = EvaluateSynthesisMargins(problem, vars, options.mode);
    if (valid(margins, 0.0)) {
      res.vars = std::move(vars);
      res.margins = std::move(margins);
      res.objective = res.vars.P.trace();
      res.status = SynthesisStatus::kFeasible;
      if (sol2.status != sdp::Status::kOptimal) {
        res.message = fmt::format("tr(P) not certified maximal (solver {})",
                                  sdp::ToString(sol2.status));
      }
      return res;
    }
  }
  // The Phase I point is feasible but the optimization failed.
  res.status = SynthesisStatus::kNumericalError;
  res.message = fmt::format("objective phase failed (solver {})",
                            sdp::ToString(sol2.status));
  return res;
}

}  // namespace

SynthesisResult SynthesizeStability(const ProblemData& problem,
                                    const SynthesisOptions& options) {
  return Synthesize(problem, options, false);
}

SynthesisResult SynthesizePerformance(const ProblemData& problem,
                                      const SynthesisOptions& options) {
  if (!problem.performance) {
    throw ValidationError("performance synthesis needs a performance channel");
  }
  return Synthesize(problem, options, true);
}

SynthesisResult SynthesizePerformance(const ProblemData& problem, double gamma,
                                      const SynthesisOptions& options) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ValidationError(fmt::format("gamma must be > 0, got {}", gamma));
  }
  if (!problem.performance) {
    throw ValidationError("performance synthesis needs a performance channel");
  }
  return Synthesize(problem.WithGain(gamma), options, true);
}

GammaResult MinimizeGamma(const ProblemData& problem, double target_P,
                          const SynthesisOptions& options,
                          const GammaSearch& search) {
  GammaResult out;
  auto feasible = [&](double gamma) -> std::optional<SynthesisResult> {
    SynthesisResult r = SynthesizePerformance(problem, gamma, options);
    const bool ok =
        r.accepted() && r.objective >= target_P - search.target_tol;
    out.log.emplace_back(gamma, ok);
    if (ok) return r;
    return std::nullopt;
  };

  double hi = search.gamma_hi_start;
  std::optional<SynthesisResult> best = feasible(hi);
  double lo = search.gamma_lo;
  while (!best) {
    lo = hi;
    hi *= 2.0;
    if (hi > search.gamma_hi_max) {
      throw InfeasibleError(fmt::format(
          "no feasible gamma in [{}, {}] for target tr(P) = {} "
          "({} evaluations)",
          search.gamma_lo, search.gamma_hi_max, target_P, out.log.size()));
    }
    best = feasible(hi);
  }
  if (lo == search.gamma_lo) {
    if (auto r = feasible(lo)) {
      out.gamma = lo;
      out.result = std::move(*r);
      return out;
    }
  }
  while (hi - lo > search.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (auto r = feasible(mid)) {
      hi = mid;
      best = std::move(r);
    } else {
      lo = mid;
    }
  }
  out.gamma = hi;
  out.result = std::move(*best);
  return out;
}

ProblemData RegionAtLevel(const ProblemData& problem, double level) {
  if (!(level > 0.0)) {
    throw ValidationError(fmt::format("region level must be > 0, got {}", level));
  }
  const RegionSpec& r = problem.region;
  if (r.Sz().cwiseAbs().maxCoeff() != 0.0) {
    throw ValidationError("region rescaling needs Sz = 0");
  }
  return problem.WithRegion(
      RegionSpec::Create(r.Qz(), r.Sz(), Matrix::Constant(1, 1, level)));
}

double TraceAtLevel(const ProblemData& problem, double level) {
  return level * InverseChecked(-problem.region.Qz()).trace();
}

std::vector<SweepPoint> SweepGammaVsP(const ProblemData& problem,
                                      const std::vector<double>& grid,
                                      const SynthesisOptions& options,
                                      const GammaSearch& search) {
  std::vector<SweepPoint> out;
  for (double level : grid) {
    SweepPoint pt;
    pt.P = level;
    try {
      const GammaResult g =
          MinimizeGamma(RegionAtLevel(problem, level),
                        TraceAtLevel(problem, level), options, search);
      pt.gamma = g.gamma;
      pt.status = "ok";
    } catch (const InfeasibleError&) {
      pt.status = "infeasible";
    } catch (const Error& e) {
      pt.status = fmt::format("error: {}", e.what());
    }
    out.push_back(std::move(pt));
  }
  return out;
}

}  // namespace bilsyn
