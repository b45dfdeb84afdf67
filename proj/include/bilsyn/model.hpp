#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bilsyn/matrixcore.hpp"

namespace bilsyn {

/// Raised when problem data violate a structural or definiteness invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// z₊ = A z + B0 u + Σ_j u_j B_j z = A z + B0 u + B̃ (u ⊗ z).
struct BilinearSystem {
  Matrix A;
  Matrix B0;
  std::vector<Matrix> B;  // B_1 … B_m, each N×N

  int N() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B0.cols()); }

  /// [B_1 … B_m], N×(N·m).
  Matrix Btilde() const;

  /// Splits an N×(N·m) matrix into its m column blocks.
  static std::vector<Matrix> SplitBtilde(const Matrix& btilde, int N);

  /// Successor state using the explicit sum over inputs.
  Vector Step(const Vector& z, const Vector& u) const;
};

/// Quadratic region Z = {z : [z;1]ᵀ [Qz Sz; Szᵀ Rz] [z;1] ≥ 0} with the
/// blocks of the inverse matrix cached.
class RegionSpec {
 public:
  /// Validates Qz ≺ 0, Rz ≻ 0 and invertibility, then caches inverse blocks.
  static RegionSpec Create(const Matrix& Qz, const Matrix& Sz,
                           const Matrix& Rz);

  /// zᵀz ≤ radius_sq.
  static RegionSpec Ball(int N, double radius_sq);

  int N() const { return static_cast<int>(qz_.rows()); }
  const Matrix& Qz() const { return qz_; }
  const Matrix& Sz() const { return sz_; }
  const Matrix& Rz() const { return rz_; }
  const Matrix& Qz_tilde() const { return qz_t_; }
  const Matrix& Sz_tilde() const { return sz_t_; }
  const Matrix& Rz_tilde() const { return rz_t_; }
  /// Q̃z⁻¹ S̃z.
  const Matrix& Sz_hat() const { return sz_hat_; }

  /// [Qz Sz; Szᵀ Rz].
  Matrix Full() const;
  /// [Q̃z S̃z; S̃zᵀ R̃z].
  Matrix FullInverse() const;

  /// [z;1]ᵀ [Qz Sz; Szᵀ Rz] [z;1]; non-negative exactly on Z.
  double QuadraticForm(const Vector& z) const;
  bool Contains(const Vector& z, double tol = 0.0) const {
    return QuadraticForm(z) >= -tol;
  }

 private:
  Matrix qz_, sz_, rz_;
  Matrix qz_t_, sz_t_, rz_t_, sz_hat_;
};

/// z_p = Cp z + Dpu u + D̃puz (u ⊗ z) + Dpw w_p, with B_p w_p entering z₊.
struct PerformanceChannel {
  Matrix Bp;    // N×q
  Matrix Cp;    // p×N
  Matrix Dpu;   // p×m
  Matrix Dpuz;  // p×(N·m)
  Matrix Dpw;   // p×q

  int p() const { return static_cast<int>(Cp.rows()); }
  int q() const { return static_cast<int>(Bp.cols()); }
};

/// Performance index Πp = [Qp Sp; Spᵀ Rp] with inverse blocks cached.
class PerformanceSpec {
 public:
  /// Checks Qp ≺ 0, Rp ⪰ 0 and invertibility of Πp.
  static PerformanceSpec Create(const Matrix& Qp, const Matrix& Sp,
                                const Matrix& Rp);
  /// L2-gain bound γ: Qp = −γ²I_q, Sp = 0, Rp = I_p.
  static PerformanceSpec Gain(double gamma, int q, int p);

  const Matrix& Qp() const { return qp_; }
  const Matrix& Sp() const { return sp_; }
  const Matrix& Rp() const { return rp_; }
  const Matrix& Qp_tilde() const { return qp_t_; }
  const Matrix& Sp_tilde() const { return sp_t_; }
  const Matrix& Rp_tilde() const { return rp_t_; }
  std::optional<double> gamma() const { return gamma_; }
  int q() const { return static_cast<int>(qp_.rows()); }
  int p() const { return static_cast<int>(rp_.rows()); }

  Matrix Full() const;
  /// s(w_p, z_p) = [w_p; z_p]ᵀ Πp [w_p; z_p].
  double Supply(const Vector& wp, const Vector& zp) const;

 private:
  Matrix qp_, sp_, rp_;
  Matrix qp_t_, sp_t_, rp_t_;
  std::optional<double> gamma_;
};

struct PerformanceProblem {
  PerformanceChannel channel;
  PerformanceSpec index;
};

/// A complete, validated synthesis problem.
struct ProblemData {
  std::string name;
  BilinearSystem system;
  RegionSpec region;
  std::optional<PerformanceProblem> performance;

  bool has_performance() const { return performance.has_value(); }
  /// Same problem with the performance index replaced by an L2-gain bound.
  ProblemData WithGain(double gamma) const;
  /// Same problem with the region replaced.
  ProblemData WithRegion(const RegionSpec& region) const;
};

/// Checks all dimension and definiteness invariants; throws ValidationError.
void Validate(const BilinearSystem& system);
void Validate(const BilinearSystem& system, const PerformanceChannel& channel);
ProblemData MakeProblem(BilinearSystem system, RegionSpec region,
                        std::optional<PerformanceProblem> perf = std::nullopt,
                        std::string name = {});

/// JSON (de)serialization; see README for the schema.
ProblemData ParseProblem(const std::string& json_text);
ProblemData LoadProblem(const std::string& path);
std::string SerializeProblem(const ProblemData& problem);
void SaveProblem(const ProblemData& problem, const std::string& path);

}  // namespace bilsyn
