#pragma once

#include <optional>
#include <string>

#include "bilsyn/model.hpp"
#include "bilsyn/synthesis.hpp"

namespace bilsyn {

/// Raised when I − Kw(I_m ⊗ z) is numerically singular at the queried state.
class ControllerSingularityError : public SingularMatrixError {
 public:
  using SingularMatrixError::SingularMatrixError;
};

/// u(z) = (I − Kw(I_m ⊗ z))⁻¹ K z, i.e. u = K z + Kw w with w = (I_m ⊗ z) u.
struct RationalController {
  Mode mode = Mode::kLinear;
  Matrix K;   // m×N
  Matrix Kw;  // m×(N·m), zero in linear mode
  // Certificate data the controller was extracted from.
  Matrix P;
  Matrix LambdaTilde;
  std::optional<RegionSpec> region;

  int N() const { return static_cast<int>(K.cols()); }
  int m() const { return static_cast<int>(K.rows()); }

  /// 1-norm condition number estimate of I − Kw(I_m ⊗ z).
  double Condition(const Vector& z) const;

  /// Throws ControllerSingularityError above kMaxCondition.
  Vector Evaluate(const Vector& z) const;

  static constexpr double kMaxCondition = 1e12;
};

/// K = L P⁻¹ and Kw = Lw(Λ̃⁻¹ ⊗ Q̃z⁻¹).
RationalController ExtractController(const SynthesisResult& result,
                                     const RegionSpec& region);

struct StepResult {
  Vector z_next;
  Vector u;
  std::optional<Vector> zp;
};

/// One step of z₊ = Az + B0u + B̃(u⊗z) + Bp wp with u = ctrl(z); zp is
/// computed when a channel is given.
StepResult ClosedLoopStep(const BilinearSystem& system,
                          const RationalController& ctrl, const Vector& z,
                          const PerformanceChannel* channel = nullptr,
                          const Vector* wp = nullptr);

/// {"mode", "K", "Kw", "P", "LambdaTilde", "region"}.
std::string ControllerToJson(const RationalController& ctrl);
RationalController ControllerFromJson(const std::string& text);
RationalController LoadController(const std::string& path);
void SaveController(const RationalController& ctrl, const std::string& path);

}  // namespace bilsyn
