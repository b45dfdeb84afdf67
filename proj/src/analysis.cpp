#include "bilsyn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "bilsyn/lfr.hpp"

namespace bilsyn {

namespace {

Matrix BlockDiag(const std::vector<Matrix>& blocks) {
  Eigen::Index n = 0;
  for (const auto& b : blocks) n += b.rows();
  Matrix out = Matrix::Zero(n, n);
  Eigen::Index k = 0;
  for (const auto& b : blocks) {
    out.block(k, k, b.rows(), b.cols()) = b;
    k += b.rows();
  }
  return out;
}

// The problem whose performance index matches the one the result was
// certified for.
ProblemData CertifiedProblem(const SynthesisResult& result,
                             const ProblemData& problem) {
  if (result.gamma && problem.performance) return problem.WithGain(*result.gamma);
  return problem;
}

// Largest s in [lo, hi] with MaxEig(base + s·shift) ≤ 0, given that lo
// satisfies it.
double LargestShift(const Matrix& base, const Matrix& shift, double lo,
                    double hi) {
  if (MaxEig(base + hi * shift) <= 0.0) return hi;
  for (int it = 0; it < 200 && hi - lo > 1e-9 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (MaxEig(base + mid * shift) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

// Lower-bound coefficient a with s(wp, zp) ≥ −a‖wp‖² for all zp.
double SupplyBound(const PerformanceSpec& index) {
  if (index.gamma()) return *index.gamma() * *index.gamma();
  if (index.Sp().cwiseAbs().maxCoeff() == 0.0) return MaxEig(-index.Qp());
  if (!IsPositiveDefinite(index.Rp())) {
    throw CertificateError(
        "supply rate has no quadratic lower bound (Sp != 0, Rp singular)");
  }
  return MaxEig(Symmetrize(index.Sp() * SolveSpd(index.Rp(), index.Sp().transpose()) -
                           index.Qp()));
}

Matrix LowerCholesky(const Matrix& P) {
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("P is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace

Vector SampleSphere(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  do {
    for (int i = 0; i < n; ++i) v(i) = normal(rng);
  } while (v.norm() == 0.0);
  return v / v.norm();
}

Vector SampleBall(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const Vector dir = SampleSphere(n, rng);
  return std::pow(unif(rng), 1.0 / n) * dir;
}

std::mt19937_64 SampleEngine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

Matrix BuildXi(const BilinearSystem& system, const RegionSpec& region,
               const RationalController& ctrl, const Matrix& Ptilde,
               const Matrix& Lambda, const PerformanceProblem* perf,
               double lambda) {
  const int n = system.N();
  const int m = system.m();
  const int nm = n * m;
  const int q = perf ? perf->channel.q() : 0;
  const int p = perf ? perf->channel.p() : 0;
  const int cols = n + nm + q;

  Matrix f = Matrix::Zero(2 * n + nm + m + q + p, cols);
  f.block(0, 0, n, n).setIdentity();
  f.block(n, 0, n, n) = system.A + system.B0 * ctrl.K;
  f.block(n, n, n, nm) = system.Btilde() + system.B0 * ctrl.Kw;
  f.block(2 * n, n, nm, nm).setIdentity();
  f.block(2 * n + nm, 0, m, n) = ctrl.K;
  f.block(2 * n + nm, n, m, nm) = ctrl.Kw;

  std::vector<Matrix> middle = {-Ptilde, Ptilde, PiDelta(region, Lambda)};
  if (perf) {
    const PerformanceChannel& ch = perf->channel;
    const int r = 2 * n + nm + m;
    f.block(n, n + nm, n, q) = ch.Bp;
    f.block(r, n + nm, q, q).setIdentity();
    f.block(r + q, 0, p, n) = ch.Cp + ch.Dpu * ctrl.K;
    f.block(r + q, n, p, nm) = ch.Dpuz + ch.Dpu * ctrl.Kw;
    f.block(r + q, n + nm, p, q) = ch.Dpw;
    middle.push_back(lambda * perf->index.Full());
  }
  return Symmetrize(f.transpose() * BlockDiag(middle) * f);
}

Matrix BuildXi(const SynthesisResult& result, const ProblemData& problem) {
  const ProblemData certified = CertifiedProblem(result, problem);
  const RationalController ctrl = ExtractController(result, certified.region);
  const Matrix ptilde = InverseSpd(result.vars.P);
  const Matrix lam = InverseSpd(result.vars.LambdaTilde);
  if (result.has_performance()) {
    if (!certified.performance) {
      throw ValidationError("result has performance data, problem has none");
    }
    if (!(*result.vars.lambda_tilde > 0.0)) {
      throw SingularMatrixError("lambda_tilde must be positive");
    }
    return BuildXi(certified.system, certified.region, ctrl, ptilde, lam,
                   &*certified.performance, 1.0 / *result.vars.lambda_tilde);
  }
  return BuildXi(certified.system, certified.region, ctrl, ptilde, lam);
}

Certificate VerifyCertificate(const SynthesisResult& result,
                              const ProblemData& problem) {
  const ProblemData certified = CertifiedProblem(result, problem);
  Certificate cert;
  cert.Ptilde = InverseSpd(result.vars.P);
  cert.Lambda = InverseSpd(result.vars.LambdaTilde);
  if (result.has_performance()) cert.lambda = 1.0 / *result.vars.lambda_tilde;
  cert.Xi = BuildXi(result, certified);
  cert.xi_max_eig = MaxEig(cert.Xi);
  if (!(cert.xi_max_eig < 0.0)) {
    throw CertificateError(fmt::format(
        "Xi is not negative definite (max eigenvalue {:.3e})", cert.xi_max_eig));
  }

  const int n = certified.system.N();
  const Eigen::Index dim = cert.Xi.rows();
  Matrix ez = Matrix::Zero(dim, dim);
  ez.topLeftCorner(n, n).setIdentity();
  const double rho_hi = -MaxEig(Matrix(cert.Xi.topLeftCorner(n, n)));
  const double rho_max = LargestShift(cert.Xi, ez, -cert.xi_max_eig, rho_hi);
  cert.rho = 0.5 * rho_max;

  if (cert.lambda) {
    const PerformanceSpec& index = certified.performance->index;
    const int q = certified.performance->channel.q();
    Matrix ew = Matrix::Zero(dim, dim);
    ew.bottomRightCorner(q, q).setIdentity();
    const Matrix base = cert.Xi + cert.rho * ez;
    const double eps_hi = -MaxEig(Matrix(base.bottomRightCorner(q, q)));
    cert.eps = LargestShift(base, ew, 0.0, eps_hi);
    cert.alpha = SupplyBound(index);
    cert.delta =
        cert.rho / (*cert.lambda * cert.alpha * MaxEig(cert.Ptilde));
  }
  return cert;
}

RoaReport VerifyRoaInclusion(const SynthesisResult& result,
                             const RegionSpec& region, int samples,
                             std::uint64_t seed) {
  RoaReport rep;
  const int n = region.N();
  const Matrix ptilde = InverseSpd(result.vars.P);
  Matrix scaled = Matrix::Zero(n + 1, n + 1);
  scaled.topLeftCorner(n, n) = -ptilde;
  scaled(n, n) = 1.0;
  const Matrix full = region.Full();
  rep.matrix_margin = MinEig(Symmetrize(full - result.vars.nu * scaled));
  const double tol =
      1e-7 * std::max({1.0, full.cwiseAbs().maxCoeff(),
                       std::abs(result.vars.nu) * ptilde.cwiseAbs().maxCoeff()});

  const Matrix c = LowerCholesky(result.vars.P);
  rep.min_boundary_value = std::numeric_limits<double>::infinity();
  for (int i = 0; i < samples; ++i) {
    auto rng = SampleEngine(seed, static_cast<std::uint64_t>(i));
    const Vector z = c * SampleSphere(n, rng);
    rep.min_boundary_value =
        std::min(rep.min_boundary_value, region.QuadraticForm(z));
  }
  rep.samples = samples;
  const bool matrix_ok = rep.matrix_margin >= -tol;
  const bool samples_ok = samples == 0 || rep.min_boundary_value >= -tol;
  rep.ok = matrix_ok && samples_ok;
  if (!matrix_ok) {
    rep.message = fmt::format("S-procedure matrix margin {:.3e}", rep.matrix_margin);
  } else if (!samples_ok) {
    rep.message = fmt::format("boundary sample outside region ({:.3e})",
                              rep.min_boundary_value);
  }
  return rep;
}

LyapunovReport VerifyLyapunovDecrease(const Matrix& P,
                                      const BilinearSystem& system,
                                      const RationalController& ctrl,
                                      int samples, std::uint64_t seed) {
  LyapunovReport rep;
  const int n = system.N();
  const Matrix c = LowerCholesky(P);
  const Matrix ptilde = InverseSpd(P);
  for (int i = 0; i < samples; ++i) {
    auto rng = SampleEngine(seed, static_cast<std::uint64_t>(i));
    Vector z;
    do {
      z = c * SampleBall(n, rng);
    } while (z.squaredNorm() == 0.0);
    const double v = z.dot(ptilde * z);
    double ratio;
    try {
      const Vector zn = ClosedLoopStep(system, ctrl, z).z_next;
      ratio = (zn.dot(ptilde * zn) - v) / v;
    } catch (const ControllerSingularityError&) {
      ratio = std::numeric_limits<double>::infinity();
    }
    ++rep.samples;
    if (ratio > rep.worst_ratio) rep.worst_ratio = ratio;
    if (!(ratio < 0.0)) {
      if (rep.violations == 0) rep.offending_z = z;
      ++rep.violations;
    }
  }
  return rep;
}

InvarianceReport VerifyRobustInvariance(const ProblemData& problem,
                                        const Matrix& P,
                                        const RationalController& ctrl,
                                        const Certificate& cert, int samples,
                                        std::uint64_t seed) {
  InvarianceReport rep;
  const int n = problem.system.N();
  const Matrix c = LowerCholesky(P);
  const Matrix& ptilde = cert.Ptilde;
  const PerformanceProblem* perf =
      cert.lambda && problem.performance ? &*problem.performance : nullptr;
  const int q = perf ? perf->channel.q() : 0;
  const double radius = std::sqrt(std::max(cert.delta, 0.0));
  const double tol = 1e-8 * ProblemScale(problem);
  auto disturbance = [&](std::mt19937_64& rng) {
    return perf ? Vector(radius * SampleBall(q, rng)) : Vector();
  };

  for (int i = 0; i < samples; ++i) {
    auto rng = SampleEngine(seed, static_cast<std::uint64_t>(i));
    ++rep.samples;

    // Boundary state, admissible disturbance: V(z₊) ≤ 1.
    const Vector zb = c * SampleSphere(n, rng);
    const Vector wb = disturbance(rng);
    try {
      const StepResult s = ClosedLoopStep(problem.system, ctrl, zb,
                                          perf ? &perf->channel : nullptr,
                                          perf ? &wb : nullptr);
      const double v = s.z_next.dot(ptilde * s.z_next);
      rep.worst_V = std::max(rep.worst_V, v);
      if (v > 1.0 + 1e-9) ++rep.invariance_violations;
    } catch (const ControllerSingularityError&) {
      ++rep.invariance_violations;
    }

    // Interior state: sampled dissipation inequality.
    const Vector z = c * SampleBall(n, rng);
    const Vector w = disturbance(rng);
    try {
      const StepResult s = ClosedLoopStep(problem.system, ctrl, z,
                                          perf ? &perf->channel : nullptr,
                                          perf ? &w : nullptr);
      double rhs = cert.rho * z.squaredNorm();
      if (perf) {
        rhs += cert.eps * w.squaredNorm() +
               *cert.lambda * perf->index.Supply(w, *s.zp);
      }
      const double dv = s.z_next.dot(ptilde * s.z_next) - z.dot(ptilde * z);
      const double gap = dv + rhs;
      rep.worst_dissipation_gap = std::max(rep.worst_dissipation_gap, gap);
      if (gap > tol) ++rep.dissipation_violations;
    } catch (const ControllerSingularityError&) {
      ++rep.dissipation_violations;
    }
  }
  return rep;
}

Trajectory Simulate(const BilinearSystem& system,
                    const RationalController& ctrl, const Vector& z0,
                    const std::vector<Vector>& wp, int steps,
                    const PerformanceChannel* channel) {
  if (z0.size() != system.N()) {
    throw ValidationError(fmt::format("z0 must have {} entries, got {}",
                                      system.N(), z0.size()));
  }
  if (steps < 0) throw ValidationError("steps must be >= 0");
  Trajectory traj;
  traj.inputs = system.m();
  traj.outputs = channel != nullptr ? channel->p() : 0;
  std::optional<Matrix> ptilde;
  if (ctrl.P.size() > 0) ptilde = InverseSpd(ctrl.P);
  auto lyap = [&](const Vector& z) {
    return ptilde ? z.dot(*ptilde * z) : std::nan("");
  };
  traj.z.push_back(z0);
  traj.V.push_back(lyap(z0));
  for (int k = 0; k < steps; ++k) {
    const Vector* w = k < static_cast<int>(wp.size()) ? &wp[k] : nullptr;
    Vector zero;
    if (channel != nullptr && w == nullptr) {
      zero = Vector::Zero(channel->q());
      w = &zero;
    }
    try {
      StepResult s = ClosedLoopStep(system, ctrl, traj.z.back(), channel, w);
      traj.u.push_back(s.u);
      if (s.zp) traj.zp.push_back(*s.zp);
      traj.z.push_back(s.z_next);
      traj.V.push_back(lyap(s.z_next));
    } catch (const ControllerSingularityError& e) {
      traj.truncated = true;
      traj.error = e.what();
      break;
    }
  }
  return traj;
}

std::string TrajectoryToCsv(const Trajectory& traj) {
  std::ostringstream out;
  const Eigen::Index n = traj.z.empty() ? 0 : traj.z.front().size();
  const Eigen::Index m = traj.inputs;
  const Eigen::Index p = traj.outputs;
  out << "k";
  for (Eigen::Index i = 0; i < n; ++i) out << ",z" << i + 1;
  for (Eigen::Index i = 0; i < m; ++i) out << ",u" << i + 1;
  for (Eigen::Index i = 0; i < p; ++i) out << ",zp" << i + 1;
  out << ",V\n";
  for (std::size_t k = 0; k < traj.z.size(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < n; ++i) out << fmt::format(",{:.17g}", traj.z[k](i));
    for (Eigen::Index i = 0; i < m; ++i) {
      out << (k < traj.u.size() ? fmt::format(",{:.17g}", traj.u[k](i)) : ",");
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      out << (k < traj.zp.size() ? fmt::format(",{:.17g}", traj.zp[k](i)) : ",");
    }
    out << fmt::format(",{:.17g}\n", traj.V[k]);
  }
  return out.str();
}

std::string ToString(DisturbanceShape shape) {
  switch (shape) {
    case DisturbanceShape::kIid:
      return "iid";
    case DisturbanceShape::kImpulse:
      return "impulse";
    case DisturbanceShape::kConstant:
      return "constant";
    case DisturbanceShape::kSinusoid:
      return "sinusoid";
  }
  return "unknown";
}

GainEstimate EstimateL2Gain(const BilinearSystem& system,
                            const PerformanceChannel& channel,
                            const RationalController& ctrl, double delta,
                            int samples, int horizon, std::uint64_t seed) {
  if (!(delta > 0.0)) throw ValidationError("delta must be > 0");
  if (samples < 1 || horizon < 1) {
    throw ValidationError("samples and horizon must be >= 1");
  }
  GainEstimate est;
  est.samples = samples;
  est.horizon = horizon;
  est.seed = seed;
  const int q = channel.q();
  const double radius = std::sqrt(delta);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  for (int i = 0; i < samples; ++i) {
    auto rng = SampleEngine(seed, static_cast<std::uint64_t>(i));
    const auto shape = static_cast<DisturbanceShape>(i % 4);
    std::vector<Vector> wp(horizon, Vector::Zero(q));
    switch (shape) {
      case DisturbanceShape::kIid:
        for (auto& w : wp) w = radius * SampleBall(q, rng);
        break;
      case DisturbanceShape::kImpulse: {
        const int k0 = std::min(horizon - 1, static_cast<int>(unif(rng) * horizon));
        wp[k0] = radius * SampleSphere(q, rng);
        break;
      }
      case DisturbanceShape::kConstant: {
        const Vector w = radius * unif(rng) * SampleSphere(q, rng);
        for (auto& x : wp) x = w;
        break;
      }
      case DisturbanceShape::kSinusoid: {
        const Vector dir = SampleSphere(q, rng);
        const double amp = radius * unif(rng);
        const double omega = M_PI * unif(rng);
        const double phase = 2.0 * M_PI * unif(rng);
        for (int k = 0; k < horizon; ++k) {
          wp[k] = amp * std::sin(omega * k + phase) * dir;
        }
        break;
      }
    }
    double in = 0.0;
    for (const auto& w : wp) in += w.squaredNorm();
    if (in == 0.0) {
      ++est.skipped;
      continue;
    }
    double out = 0.0;
    Vector z = Vector::Zero(system.N());
    bool ok = true;
    for (int k = 0; k < horizon; ++k) {
      try {
        const StepResult s = ClosedLoopStep(system, ctrl, z, &channel, &wp[k]);
        out += s.zp->squaredNorm();
        z = s.z_next;
      } catch (const ControllerSingularityError&) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      ++est.skipped;
      continue;
    }
    const double ratio = std::sqrt(out / in);
    if (ratio > est.gamma_lb) {
      est.gamma_lb = ratio;
      est.worst_shape = shape;
      est.worst_case_input = std::move(wp);
    }
  }
  return est;
}

namespace {

SynthesisResult SynthesizeAt(const ProblemData& problem, double level,
                             const SynthesisOptions& options,
                             std::optional<double> gamma) {
  const ProblemData at = RegionAtLevel(problem, level);
  return gamma ? SynthesizePerformance(at, *gamma, options)
               : SynthesizeStability(at, options);
}

// Accepted and, with `fill`, Z_RoA filling the region at this level.
bool ReachesLevel(const ProblemData& problem, double level,
                  const SynthesisResult& r, bool fill) {
  if (!fill) return r.accepted();
  const double target = TraceAtLevel(problem, level);
  return r.accepted() && r.objective >= target - 1e-6 * std::max(1.0, target);
}

std::string LevelStatus(const ProblemData& problem, double level,
                        const SynthesisResult& r, bool fill) {
  if (!r.accepted() || ReachesLevel(problem, level, r, fill)) return ToString(r.status);
  return fmt::format("short (tr(P) {:.6g} of {:.6g})", r.objective,
                     TraceAtLevel(problem, level));
}

}  // namespace

RegionScan MaxFeasibleRegion(const ProblemData& problem, double lo, double hi,
                             double step, const SynthesisOptions& options,
                             std::optional<double> gamma, bool fill) {
  if (!(lo > 0.0) || !(step > 0.0) || hi < lo) {
    throw ValidationError("scan needs 0 < lo <= hi and step > 0");
  }
  RegionScan scan;
  const int count = static_cast<int>(std::floor((hi - lo) / step + 1e-9)) + 1;
  for (int k = 0; k < count; ++k) {
    const double level = std::round((lo + k * step) * 1e12) / 1e12;
    SynthesisResult r = SynthesizeAt(problem, level, options, gamma);
    scan.log.emplace_back(level, LevelStatus(problem, level, r, fill));
    if (ReachesLevel(problem, level, r, fill) && (!scan.best || level > *scan.best)) {
      scan.best = level;
      scan.best_result = std::move(r);
    }
  }
  return scan;
}

RegionScan MaxFeasibleLevel(const ProblemData& problem, double lo, double hi,
                            double tol, const SynthesisOptions& options,
                            std::optional<double> gamma, bool fill) {
  if (!(lo > 0.0) || hi < lo || !(tol > 0.0)) {
    throw ValidationError("bisection needs 0 < lo <= hi and tol > 0");
  }
  RegionScan scan;
  auto probe = [&](double level) {
    SynthesisResult r = SynthesizeAt(problem, level, options, gamma);
    scan.log.emplace_back(level, LevelStatus(problem, level, r, fill));
    if (ReachesLevel(problem, level, r, fill)) {
      if (!scan.best || level > *scan.best) {
        scan.best = level;
        scan.best_result = r;
      }
      return true;
    }
    return false;
  };
  if (!probe(lo)) return scan;
  if (probe(hi)) return scan;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return scan;
}

}  // namespace bilsyn
