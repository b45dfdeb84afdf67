#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "bilsyn/matrixcore.hpp"

/// Semidefinite programming backend.
///
/// Problems are posed over a flat vector x of scalar decision variables.
/// Matrix variables are views into x: a symmetric n×n block occupies
/// n(n+1)/2 entries in scaled upper-triangle (svec) packing, a rectangular
/// block occupies rows·cols entries in column-major order. Constraints are
/// affine matrix expressions in x tagged ⪰ 0 or ⪯ 0; the objective is a
/// linear functional of x that is maximized.
namespace bilsyn::sdp {

/// Length of the svec packing of an n×n symmetric matrix.
int SvecSize(int n);

/// Upper triangle, column by column, with off-diagonal entries scaled by √2
/// so that Svec(a)·Svec(b) == trace(a·b) for symmetric a, b.
Vector Svec(const Matrix& m);

/// Inverse of Svec.
Matrix Smat(const Vector& v, int n);

/// Dimension of the symmetric matrix whose svec packing has length len;
/// throws if len is not a triangular number.
int SmatDimension(Eigen::Index len);

/// A matrix-valued expression c + Σ x_i·T_i, affine in the decision vector.
class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(Eigen::Index rows, Eigen::Index cols);
  explicit AffineExpr(Matrix constant);  // NOLINT

  static AffineExpr Zero(Eigen::Index rows, Eigen::Index cols) {
    return AffineExpr(rows, cols);
  }
  static AffineExpr Identity(Eigen::Index n) {
    return AffineExpr(Matrix::Identity(n, n));
  }

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Matrix& constant() const { return constant_; }
  const std::map<int, Matrix>& terms() const { return terms_; }
  bool is_constant() const { return terms_.empty(); }

  /// Adds coeff·x_index to the expression.
  void AddTerm(int index, const Matrix& coeff);

  Matrix Evaluate(const Vector& x) const;

  AffineExpr transpose() const;
  AffineExpr Trace() const;

  /// The (r, c) entry as a 1×1 expression.
  AffineExpr Entry(Eigen::Index r, Eigen::Index c) const;

  AffineExpr& operator+=(const AffineExpr& other);
  AffineExpr& operator-=(const AffineExpr& other);
  AffineExpr& operator*=(double s);

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) {
    return a += b;
  }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) {
    return a -= b;
  }
  friend AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
  friend AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
  friend AffineExpr operator*(AffineExpr a, double s) { return a *= s; }
  friend AffineExpr operator*(const Matrix& m, const AffineExpr& a);
  friend AffineExpr operator*(const AffineExpr& a, const Matrix& m);

 private:
  Matrix constant_;
  std::map<int, Matrix> terms_;
};

AffineExpr Kron(const AffineExpr& a, const Matrix& b);
AffineExpr Kron(const Matrix& a, const AffineExpr& b);

/// Block matrix assembly. Every row must have consistent heights and every
/// column consistent widths.
AffineExpr Blocks(const std::vector<std::vector<AffineExpr>>& rows);

/// Symmetric part (E + Eᵀ)/2.
AffineExpr Symmetrize(const AffineExpr& e);

enum class VarKind { kSymmetric, kMatrix, kScalar };

struct Variable {
  std::string name;
  VarKind kind;
  int rows = 0;
  int cols = 0;
  int offset = 0;  // first index in x
  int size = 0;    // number of scalars
};

enum class Sense { kPsd, kNsd };

struct Constraint {
  std::string name;
  AffineExpr expr;
  Sense sense = Sense::kPsd;
};

class Problem {
 public:
  /// Declares a symmetric n×n variable; the returned expression is smat(x_block).
  AffineExpr AddSymmetric(const std::string& name, int n);
  AffineExpr AddMatrix(const std::string& name, int rows, int cols);
  AffineExpr AddScalar(const std::string& name);

  /// Adds expr ⪰ 0 (kPsd) or expr ⪯ 0 (kNsd). The expression is symmetrized.
  void AddConstraint(const std::string& name, const AffineExpr& expr,
                     Sense sense = Sense::kPsd);

  /// Sets the 1×1 expression to maximize.
  void SetObjective(const AffineExpr& objective);

  int num_scalars() const { return num_scalars_; }
  const std::vector<Variable>& variables() const { return variables_; }
  const std::vector<Constraint>& constraints() const { return constraints_; }
  const AffineExpr& objective() const { return objective_; }
  const Variable& variable(const std::string& name) const;

  /// Value of a declared variable given the decision vector.
  Matrix ValueOf(const Variable& var, const Vector& x) const;

  /// Throws Error describing the first structural defect.
  void Validate() const;

  /// Text dump: one header line per constraint followed by sparse triplets
  /// "var_index row col value" of each coefficient (index -1 for constants).
  std::string DebugDump() const;

 private:
  int Allocate(const std::string& name, VarKind kind, int rows, int cols,
               int size);

  int num_scalars_ = 0;
  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
  AffineExpr objective_ = AffineExpr::Zero(1, 1);
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kNumericalError };

std::string ToString(Status status);

struct Settings {
  double feasibility_tol = 1e-8;
  double gap_tol = 1e-8;
  /// Relative size of the normalized infeasibility certificate residual.
  double certificate_tol = 1e-8;
  int max_iterations = 200;
  bool verbose = false;
};

struct Solution {
  Status status = Status::kNumericalError;
  Vector x;
  std::map<std::string, Matrix> values;
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  /// Minimum eigenvalue of each constraint (sign-adjusted so that ≥ 0 means
  /// satisfied), keyed by constraint name.
  std::map<std::string, double> margins;
};

/// Adapter boundary for SDP solvers.
class Solver {
 public:
  virtual ~Solver() = default;
  virtual Solution Solve(const Problem& problem) const = 0;
};

/// Infeasible-start primal-dual path-following method (HKM search direction
/// with Mehrotra predictor-corrector) on the block-diagonal standard form.
class InteriorPointSolver final : public Solver {
 public:
  InteriorPointSolver() = default;
  explicit InteriorPointSolver(Settings settings) : settings_(settings) {}

  Solution Solve(const Problem& problem) const override;

  const Settings& settings() const { return settings_; }

 private:
  Settings settings_;
};

/// Constraint margins at x, keyed by constraint name.
std::map<std::string, double> EvaluateMargins(const Problem& problem,
                                              const Vector& x);

}  // namespace bilsyn::sdp
