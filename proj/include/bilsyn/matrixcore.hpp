#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace bilsyn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A matrix that was required to be invertible (or definite) was not.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Default definiteness margin, relative to the largest absolute entry.
inline constexpr double kDefaultDefinitenessMargin = 1e-7;

/// Standard Kronecker product; entry (i*p+k, j*q+l) is a(i,j)*b(k,l).
Matrix Kron(const Matrix& a, const Matrix& b);

/// (M + Mᵀ)/2.
Matrix Symmetrize(const Matrix& m);

/// True if m is square and max|M − Mᵀ| ≤ 1e-12·(1 + max|M|).
bool IsSymmetric(const Matrix& m, double rel_tol = 1e-12);

/// Smallest eigenvalue of the symmetric part of m.
double MinEig(const Matrix& m);

/// Largest eigenvalue of the symmetric part of m.
double MaxEig(const Matrix& m);

/// True iff MinEig(m) > margin.
bool IsPositiveDefinite(const Matrix& m, double margin = 0.0);

/// Margin scaled to the magnitude of m: kDefaultDefinitenessMargin·max|m|.
double RelativeMargin(const Matrix& m,
                      double rel = kDefaultDefinitenessMargin);

/// Schur complement of the trailing block of a symmetric matrix.
///
/// For m = [M N; Nᵀ D] with M of size split×split, returns M − N D⁻¹ Nᵀ.
/// Throws SingularMatrixError when D is not invertible.
Matrix SchurReduce(const Matrix& m, int split);

/// Solves m·x = rhs for symmetric positive definite m (Cholesky).
/// Throws SingularMatrixError when m is not positive definite.
Matrix SolveSpd(const Matrix& m, const Matrix& rhs);

/// Inverse of a symmetric positive definite matrix via SolveSpd.
Matrix InverseSpd(const Matrix& m);

/// Inverse of a general square matrix; throws when numerically singular.
Matrix InverseChecked(const Matrix& m, double rcond_min = 1e-14);

/// Throws Error unless every entry is finite.
void RequireFinite(const Matrix& m, const std::string& what);

/// Builds a dense matrix from nested initializer lists (row-major).
Matrix MakeMatrix(std::initializer_list<std::initializer_list<double>> rows);

}  // namespace bilsyn
