#pragma once

#include <optional>

#include "bilsyn/model.hpp"

namespace bilsyn {

/// [z₊; u] = [A B0 B̃; 0 I 0] [z; u; w] with w = (I_m ⊗ z) u.
struct OpenLoopLFR {
  int N = 0;
  int m = 0;
  Matrix top;  // (N+m)×(N+m+N·m)

  /// Closes the uncertainty channel at state z and returns z₊.
  Vector Evaluate(const Vector& z, const Vector& u) const;
};

OpenLoopLFR BuildLfr(const BilinearSystem& system);

/// I_m ⊗ z, an (m·N)×m matrix.
Matrix UncertaintyBlock(const Vector& z, int m);

/// Π_Δ = [Λ⊗Qz Λ⊗Sz; Λ⊗Szᵀ Λ⊗Rz].
Matrix PiDelta(const RegionSpec& region, const Matrix& lambda);

/// [Λ̃⊗Q̃z Λ̃⊗S̃z; Λ̃⊗S̃zᵀ Λ̃⊗R̃z], the inverse of PiDelta(region, Λ̃⁻¹).
/// Throws SingularMatrixError when Λ̃ is singular.
Matrix PiDeltaInverse(const RegionSpec& region, const Matrix& lambda_tilde);

/// [Δ; I]ᵀ Π_Δ [Δ; I] for an arbitrary (m·N)×m block Δ.
Matrix MembershipForm(const Matrix& delta, const RegionSpec& region,
                      const Matrix& lambda);

/// MembershipForm at Δ = I_m ⊗ z.
Matrix MembershipForm(const Vector& z, const RegionSpec& region,
                      const Matrix& lambda);

/// The selector T = [I_m ⊗ [I_N 0]; I_m ⊗ [0 1]] with
/// Π_Δ = T (Λ ⊗ [Qz Sz; Szᵀ Rz]) Tᵀ.
Matrix PermutationT(int m, int N);

/// Default violation tolerance for FindViolatingMultiplier.
double MembershipTolerance(const Matrix& delta, const RegionSpec& region);

/// Searches the multiplier class for a Λ ⪰ 0 whose quadratic form at Δ has
/// an eigenvalue below −tol. Tries Λ = e_k e_kᵀ (off-structure blocks),
/// then Λ = (e_i − e_k)(e_i − e_k)ᵀ (unequal repeated vectors), then Λ = I
/// (vector outside the region). Returns nullopt when Δ is a member.
std::optional<Matrix> FindViolatingMultiplier(
    const Matrix& delta, const RegionSpec& region,
    std::optional<double> tol = std::nullopt);

}  // namespace bilsyn
