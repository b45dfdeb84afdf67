#include "bilsyn/matrixcore.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace bilsyn {

Matrix Kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

Matrix Symmetrize(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(fmt::format("cannot symmetrize a {}x{} matrix", m.rows(),
                            m.cols()));
  }
  return 0.5 * (m + m.transpose());
}

bool IsSymmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

namespace {

Vector SymmetricEigenvalues(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(fmt::format("eigenvalues requested for non-square {}x{} matrix",
                            m.rows(), m.cols()));
  }
  RequireFinite(m, "eigenvalue input");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Symmetrize(m),
                                            Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw Error("symmetric eigensolver did not converge");
  }
  return eig.eigenvalues();
}

}  // namespace

double MinEig(const Matrix& m) {
  if (m.size() == 0) return std::numeric_limits<double>::infinity();
  return SymmetricEigenvalues(m).minCoeff();
}

double MaxEig(const Matrix& m) {
  if (m.size() == 0) return -std::numeric_limits<double>::infinity();
  return SymmetricEigenvalues(m).maxCoeff();
}

bool IsPositiveDefinite(const Matrix& m, double margin) {
  return MinEig(m) > margin;
}

double RelativeMargin(const Matrix& m, double rel) {
  if (m.size() == 0) return 0.0;
  return rel * m.cwiseAbs().maxCoeff();
}

Matrix SchurReduce(const Matrix& m, int split) {
  const Eigen::Index n = m.rows();
  if (m.cols() != n || split < 0 || split > n) {
    throw Error(fmt::format("invalid Schur split {} for {}x{} matrix", split,
                            m.rows(), m.cols()));
  }
  const Eigen::Index tail = n - split;
  if (tail == 0) return m;
  const Matrix top = m.topLeftCorner(split, split);
  const Matrix off = m.topRightCorner(split, tail);
  const Matrix trailing = m.bottomRightCorner(tail, tail);
  Eigen::FullPivLU<Matrix> lu(trailing);
  if (!lu.isInvertible()) {
    throw SingularMatrixError("Schur complement: trailing block is singular");
  }
  return Symmetrize(top - off * lu.solve(off.transpose()));
}

Matrix SolveSpd(const Matrix& m, const Matrix& rhs) {
  if (m.rows() != m.cols() || m.rows() != rhs.rows()) {
    throw Error(fmt::format("SolveSpd: incompatible sizes {}x{} and {}x{}",
                            m.rows(), m.cols(), rhs.rows(), rhs.cols()));
  }
  Eigen::LLT<Matrix> llt(Symmetrize(m));
  if (llt.info() != Eigen::Success) {
    throw SingularMatrixError("SolveSpd: matrix is not positive definite");
  }
  Matrix x = llt.solve(rhs);
  // One step of iterative refinement keeps the residual near machine level.
  x += llt.solve(rhs - m * x);
  return x;
}

Matrix InverseSpd(const Matrix& m) {
  return Symmetrize(SolveSpd(m, Matrix::Identity(m.rows(), m.cols())));
}

Matrix InverseChecked(const Matrix& m, double rcond_min) {
  if (m.rows() != m.cols()) {
    throw Error("InverseChecked: matrix is not square");
  }
  Eigen::FullPivLU<Matrix> lu(m);
  if (!lu.isInvertible() || lu.rcond() < rcond_min) {
    throw SingularMatrixError(
        fmt::format("matrix is numerically singular (rcond {:.3e})",
                    lu.isInvertible() ? lu.rcond() : 0.0));
  }
  return lu.inverse();
}

void RequireFinite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) {
    throw Error(fmt::format("{} contains non-finite entries", what));
  }
}

Matrix MakeMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c =
      r == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
  Matrix out(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Eigen::Index>(row.size()) != c) {
      throw Error("MakeMatrix: ragged rows");
    }
    Eigen::Index j = 0;
    for (double v : row) out(i, j++) = v;
    ++i;
  }
  return out;
}

}  // namespace bilsyn
