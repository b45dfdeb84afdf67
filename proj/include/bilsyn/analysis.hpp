#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bilsyn/controller.hpp"
#include "bilsyn/model.hpp"
#include "bilsyn/synthesis.hpp"

namespace bilsyn {

/// Raised when a returned design fails independent verification.
class CertificateError : public Error {
 public:
  using Error::Error;
};

/// Dual analysis inequality in the variables (z, w, wp): Ξ = Fᵀ M F with
/// M = diag(−P̃, P̃, Π_Δ(Λ), λΠp) and F stacking (z, z₊, w, u, wp, zp).
/// Without a performance channel the wp columns and the Πp block are
/// dropped.
Matrix BuildXi(const BilinearSystem& system, const RegionSpec& region,
               const RationalController& ctrl, const Matrix& Ptilde,
               const Matrix& Lambda,
               const PerformanceProblem* perf = nullptr,
               double lambda = 0.0);

/// Ξ at a synthesis result (performance rows iff the result has λ̃).
Matrix BuildXi(const SynthesisResult& result, const ProblemData& problem);

struct Certificate {
  Matrix Ptilde;  // P⁻¹
  Matrix Lambda;  // Λ̃⁻¹
  std::optional<double> lambda;  // λ̃⁻¹
  Matrix Xi;
  double xi_max_eig = 0.0;
  double rho = 0.0;
  double eps = 0.0;
  /// Disturbance energy bound ‖wp‖² ≤ δ; zero without performance.
  double delta = 0.0;
  /// Linear lower-bound coefficient a with s(wp, zp) ≥ −a‖wp‖².
  double alpha = 0.0;
};

/// Reconstructs Ξ, checks Ξ ≺ 0 and extracts ρ (half the largest feasible
/// shift on the z block), then the largest ε for that ρ, and δ. Throws
/// CertificateError when Ξ is not negative definite.
Certificate VerifyCertificate(const SynthesisResult& result,
                              const ProblemData& problem);

struct RoaReport {
  bool ok = false;
  /// Minimum eigenvalue of [Qz Sz; Szᵀ Rz] − ν[−P̃ 0; 0 1].
  double matrix_margin = 0.0;
  /// Smallest region form value over the boundary samples.
  double min_boundary_value = 0.0;
  int samples = 0;
  std::string message;
};

/// Checks Z_RoA ⊆ Z via the S-procedure matrix at the returned ν and by
/// sampling the boundary zᵀP⁻¹z = 1.
RoaReport VerifyRoaInclusion(const SynthesisResult& result,
                             const RegionSpec& region, int samples = 1000,
                             std::uint64_t seed = 1);

struct LyapunovReport {
  int samples = 0;
  int violations = 0;
  /// Largest observed ΔV(z)/V(z); negative when every sample decreases.
  double worst_ratio = -std::numeric_limits<double>::infinity();
  std::optional<Vector> offending_z;
};

/// ΔV(z) = z₊ᵀP̃z₊ − zᵀP̃z < 0 for samples uniform in Z_RoA \ {0}, wp = 0.
LyapunovReport VerifyLyapunovDecrease(const Matrix& P,
                                      const BilinearSystem& system,
                                      const RationalController& ctrl,
                                      int samples, std::uint64_t seed);

struct InvarianceReport {
  int samples = 0;
  /// V(z₊) > 1 + 1e-9 for z on the boundary of Z_RoA and wp ∈ B_δ.
  int invariance_violations = 0;
  /// ΔV > −(ρ‖z‖² + ε‖wp‖² + λ s(wp, zp)) + tol for z ∈ Z_RoA, wp ∈ B_δ.
  int dissipation_violations = 0;
  double worst_V = 0.0;
  double worst_dissipation_gap = -std::numeric_limits<double>::infinity();
};

InvarianceReport VerifyRobustInvariance(const ProblemData& problem,
                                        const Matrix& P,
                                        const RationalController& ctrl,
                                        const Certificate& cert, int samples,
                                        std::uint64_t seed);

struct Trajectory {
  std::vector<Vector> z;   // z_0 … z_steps
  std::vector<Vector> u;   // u_0 … u_{steps-1}
  std::vector<Vector> zp;  // with a performance channel
  std::vector<double> V;   // zᵀP⁻¹z when P is known
  int inputs = 0;
  int outputs = 0;  // zero without a performance channel
  bool truncated = false;
  std::string error;
};

/// Rolls out the closed loop for `steps` steps. wp is indexed per step and
/// may be empty (zero disturbance). A controller singularity truncates the
/// trajectory and sets `error`.
Trajectory Simulate(const BilinearSystem& system,
                    const RationalController& ctrl, const Vector& z0,
                    const std::vector<Vector>& wp, int steps,
                    const PerformanceChannel* channel = nullptr);

/// Header "k,z1..zN,u1..um[,zp1..zpp],V"; the final row has empty u.
std::string TrajectoryToCsv(const Trajectory& traj);

enum class DisturbanceShape { kIid, kImpulse, kConstant, kSinusoid };
std::string ToString(DisturbanceShape shape);

struct GainEstimate {
  double gamma_lb = 0.0;
  int samples = 0;
  int skipped = 0;
  int horizon = 0;
  std::uint64_t seed = 0;
  DisturbanceShape worst_shape = DisturbanceShape::kIid;
  std::vector<Vector> worst_case_input;
};

/// gamma_lb = max over samples of sqrt(Σ‖zp‖² / Σ‖wp‖²) from z0 = 0 with
/// every ‖wp_k‖² ≤ delta. Sample i draws from an engine seeded with
/// (seed, i) and cycles through the disturbance shapes.
GainEstimate EstimateL2Gain(const BilinearSystem& system,
                            const PerformanceChannel& channel,
                            const RationalController& ctrl, double delta,
                            int samples, int horizon, std::uint64_t seed);

struct RegionScan {
  std::optional<double> best;
  std::optional<SynthesisResult> best_result;
  std::vector<std::pair<double, std::string>> log;
};

/// Largest grid level r (Rz = r, see RegionAtLevel) for which synthesis
/// succeeds. With gamma set, the performance design at that γ is used. With
/// `fill`, a level only counts when Z_RoA = Z, i.e. tr(P) reaches
/// TraceAtLevel(problem, r).
RegionScan MaxFeasibleRegion(const ProblemData& problem, double lo, double hi,
                             double step, const SynthesisOptions& options = {},
                             std::optional<double> gamma = std::nullopt,
                             bool fill = false);

/// Bisection variant assuming feasibility is monotone in the level.
RegionScan MaxFeasibleLevel(const ProblemData& problem, double lo, double hi,
                            double tol, const SynthesisOptions& options = {},
                            std::optional<double> gamma = std::nullopt,
                            bool fill = false);

/// Uniform samples in the unit ball / on the unit sphere of R^n.
Vector SampleBall(int n, std::mt19937_64& rng);
Vector SampleSphere(int n, std::mt19937_64& rng);
/// Engine for sample `index` of a run seeded with `seed`.
std::mt19937_64 SampleEngine(std::uint64_t seed, std::uint64_t index);

}  // namespace bilsyn
