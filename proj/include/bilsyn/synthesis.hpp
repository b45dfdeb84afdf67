#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bilsyn/model.hpp"
#include "bilsyn/sdp.hpp"

namespace bilsyn {

enum class Mode { kLinear, kGainScheduled };
enum class Multiplier { kFull, kScaledIdentity };

std::string ToString(Mode mode);
std::string ToString(Multiplier multiplier);
/// Accepts "linear", "gs" or "gain_scheduled".
Mode ParseMode(const std::string& text);
/// Accepts "full", "scaled" or "scaled_identity".
Multiplier ParseMultiplier(const std::string& text);

/// Raised when no feasible design exists within a search bracket.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

struct DecisionVars {
  Matrix P;            // N×N
  Matrix L;            // m×N
  Matrix Lw;           // m×(N·m), zero in linear mode
  Matrix LambdaTilde;  // m×m
  double nu = 0.0;
  std::optional<double> lambda_tilde;  // performance designs only
};

/// Decision variables as affine expressions. Numeric values are embedded as
/// constant expressions, so the same assembly code serves the solver and
/// the verifier.
struct SymbolicVars {
  sdp::AffineExpr P, L, Lw, LambdaTilde, nu, lambda_tilde;

  static SymbolicVars FromValues(const DecisionVars& vars);
};

/// Theorem-1 matrix with block sizes (N, m, N, N·m).
sdp::AffineExpr BuildQ(const SymbolicVars& v, const BilinearSystem& system,
                       const RegionSpec& region);
/// Q plus the gain-scheduling terms in Lw.
sdp::AffineExpr BuildQGS(const SymbolicVars& v, const BilinearSystem& system,
                         const RegionSpec& region);
/// [νQ̃z + P, −νS̃z; −νS̃zᵀ, νR̃z − 1], required ⪯ 0.
sdp::AffineExpr BuildInvariance(const SymbolicVars& v,
                                const RegionSpec& region);
/// Five-block performance matrix with Q_GS in the leading 4×4 blocks.
sdp::AffineExpr BuildPerformance(const SymbolicVars& v,
                                 const BilinearSystem& system,
                                 const RegionSpec& region,
                                 const PerformanceProblem& perf);

Matrix BuildQ(const DecisionVars& v, const BilinearSystem& system,
              const RegionSpec& region);
Matrix BuildQGS(const DecisionVars& v, const BilinearSystem& system,
                const RegionSpec& region);
Matrix BuildInvariance(const DecisionVars& v, const RegionSpec& region);
Matrix BuildPerformance(const DecisionVars& v, const BilinearSystem& system,
                        const RegionSpec& region,
                        const PerformanceProblem& perf);

/// Largest absolute entry among the dynamics, region and performance data
/// (at least 1). Tolerances are expressed relative to this.
double ProblemScale(const ProblemData& problem);

struct SynthesisOptions {
  Mode mode = Mode::kGainScheduled;
  Multiplier multiplier = Multiplier::kFull;
  sdp::Settings settings;
  /// Strict inequalities X ≻ 0 are imposed as X ⪰ strict_factor·scale·I.
  double strict_factor = 1e-8;
  /// Euclidean bound on the stacked decision vector, relative to scale.
  double variable_bound = 1e4;
  /// Defaults to InteriorPointSolver with `settings`.
  std::shared_ptr<const sdp::Solver> solver;
};

enum class SynthesisStatus { kFeasible, kInfeasible, kUnbounded, kNumericalError };
std::string ToString(SynthesisStatus status);

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::kNumericalError;
  std::string message;
  DecisionVars vars;
  Mode mode = Mode::kGainScheduled;
  Multiplier multiplier = Multiplier::kFull;
  /// tr(P) at the returned point.
  double objective = 0.0;
  std::optional<double> gamma;
  /// Largest uniform margin found by the feasibility phase.
  double feasibility_margin = 0.0;
  double strict_epsilon = 0.0;
  /// Minimum eigenvalue of each strict constraint; "invariance" holds the
  /// maximum eigenvalue of the ⪯ 0 constraint instead.
  std::map<std::string, double> margins;
  int iterations = 0;

  bool accepted() const { return status == SynthesisStatus::kFeasible; }
  bool has_performance() const { return vars.lambda_tilde.has_value(); }
};

/// Maximizes tr(P) subject to Q ≻ 0 (linear) or Q_GS ≻ 0 (gain-scheduled),
/// the invariance LMI and positivity of P, Λ̃, ν.
SynthesisResult SynthesizeStability(const ProblemData& problem,
                                    const SynthesisOptions& options = {});

/// Maximizes tr(P) subject to the performance LMI for the problem's own
/// performance index. Throws ValidationError without a performance channel.
SynthesisResult SynthesizePerformance(const ProblemData& problem,
                                      const SynthesisOptions& options = {});
/// Same with the index replaced by the L2-gain bound gamma.
SynthesisResult SynthesizePerformance(const ProblemData& problem,
                                      double gamma,
                                      const SynthesisOptions& options = {});

/// Recomputes the constraint margins of `vars` from the LMI expressions.
std::map<std::string, double> EvaluateSynthesisMargins(
    const ProblemData& problem, const DecisionVars& vars, Mode mode);

struct GammaSearch {
  double gamma_lo = 1e-3;
  double gamma_hi_start = 1.0;
  double gamma_hi_max = 1e6;
  double rel_tol = 1e-3;
  /// Allowance in the tr(P) ≥ target_P test.
  double target_tol = 1e-6;
};

struct GammaResult {
  double gamma = 0.0;
  SynthesisResult result;
  /// (γ, feasible) for every evaluation, in order.
  std::vector<std::pair<double, bool>> log;
};

/// Bisection on γ. γ is feasible when the performance design at γ is
/// accepted with tr(P) ≥ target_P − target_tol. Throws InfeasibleError when
/// no γ up to gamma_hi_max is feasible.
GammaResult MinimizeGamma(const ProblemData& problem, double target_P,
                          const SynthesisOptions& options = {},
                          const GammaSearch& search = {});

/// The problem with its region rescaled so that the maximal region of
/// attraction is the region itself at level `level`: Rz is set to `level`
/// (Sz must be zero). The matching tr(P) is level·tr(−Qz⁻¹).
ProblemData RegionAtLevel(const ProblemData& problem, double level);
double TraceAtLevel(const ProblemData& problem, double level);

struct SweepPoint {
  double P = 0.0;
  std::optional<double> gamma;
  std::string status;
};

/// For each grid level r, minimizes γ on RegionAtLevel(problem, r) with the
/// target tr(P) = TraceAtLevel(problem, r), i.e. Z_RoA = Z. Failures are
/// recorded per point.
std::vector<SweepPoint> SweepGammaVsP(const ProblemData& problem,
                                      const std::vector<double>& grid,
                                      const SynthesisOptions& options = {},
                                      const GammaSearch& search = {});

}  // namespace bilsyn
