#include "bilsyn/lfr.hpp"

#include <fmt/format.h>

namespace bilsyn {

Vector OpenLoopLFR::Evaluate(const Vector& z, const Vector& u) const {
  Vector stacked(N + m + N * m);
  stacked << z, u, UncertaintyBlock(z, m) * u;
  return (top * stacked).head(N);
}

OpenLoopLFR BuildLfr(const BilinearSystem& system) {
  OpenLoopLFR lfr;
  lfr.N = system.N();
  lfr.m = system.m();
  const int n = lfr.N;
  const int m = lfr.m;
  lfr.top = Matrix::Zero(n + m, n + m + n * m);
  lfr.top.block(0, 0, n, n) = system.A;
  lfr.top.block(0, n, n, m) = system.B0;
  lfr.top.block(0, n + m, n, n * m) = system.Btilde();
  lfr.top.block(n, n, m, m).setIdentity();
  return lfr;
}

Matrix UncertaintyBlock(const Vector& z, int m) {
  return Kron(Matrix::Identity(m, m), Matrix(z));
}

Matrix PiDelta(const RegionSpec& region, const Matrix& lambda) {
  const int n = region.N();
  const Eigen::Index m = lambda.rows();
  Matrix out(m * n + m, m * n + m);
  out << Kron(lambda, region.Qz()), Kron(lambda, region.Sz()),
      Kron(lambda, Matrix(region.Sz().transpose())), Kron(lambda, region.Rz());
  return out;
}

Matrix PiDeltaInverse(const RegionSpec& region, const Matrix& lambda_tilde) {
  Eigen::FullPivLU<Matrix> lu(lambda_tilde);
  if (!lu.isInvertible()) {
    throw SingularMatrixError("PiDeltaInverse: LambdaTilde is singular");
  }
  const int n = region.N();
  const Eigen::Index m = lambda_tilde.rows();
  Matrix out(m * n + m, m * n + m);
  out << Kron(lambda_tilde, region.Qz_tilde()),
      Kron(lambda_tilde, region.Sz_tilde()),
      Kron(lambda_tilde, Matrix(region.Sz_tilde().transpose())),
      Kron(lambda_tilde, region.Rz_tilde());
  return out;
}

Matrix MembershipForm(const Matrix& delta, const RegionSpec& region,
                      const Matrix& lambda) {
  const Eigen::Index m = lambda.rows();
  if (delta.rows() != m * region.N() || delta.cols() != m) {
    throw Error(fmt::format("Delta must be {}x{}, got {}x{}", m * region.N(),
                            m, delta.rows(), delta.cols()));
  }
  Matrix stacked(delta.rows() + m, m);
  stacked << delta, Matrix::Identity(m, m);
  return Symmetrize(stacked.transpose() * PiDelta(region, lambda) * stacked);
}

Matrix MembershipForm(const Vector& z, const RegionSpec& region,
                      const Matrix& lambda) {
  return MembershipForm(UncertaintyBlock(z, static_cast<int>(lambda.rows())),
                        region, lambda);
}

Matrix PermutationT(int m, int N) {
  if (m < 1 || N < 1) throw Error("PermutationT needs m, N >= 1");
  Matrix sel_state = Matrix::Zero(N, N + 1);
  sel_state.leftCols(N).setIdentity();
  Matrix sel_one = Matrix::Zero(1, N + 1);
  sel_one(0, N) = 1.0;
  const Matrix eye = Matrix::Identity(m, m);
  Matrix t(m * N + m, m * (N + 1));
  t << Kron(eye, sel_state), Kron(eye, sel_one);
  return t;
}

double MembershipTolerance(const Matrix& delta, const RegionSpec& region) {
  const double data = region.Full().cwiseAbs().maxCoeff();
  const double d = delta.size() == 0 ? 0.0 : delta.cwiseAbs().maxCoeff();
  return 1e-8 * data * (1.0 + d * d);
}

std::optional<Matrix> FindViolatingMultiplier(const Matrix& delta,
                                              const RegionSpec& region,
                                              std::optional<double> tol) {
  const Eigen::Index m = delta.cols();
  const double threshold = tol.value_or(MembershipTolerance(delta, region));
  auto violates = [&](const Matrix& lambda) {
    return MinEig(MembershipForm(delta, region, lambda)) < -threshold;
  };
  const Matrix eye = Matrix::Identity(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Matrix lambda = eye.col(k) * eye.col(k).transpose();
    if (violates(lambda)) return lambda;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index k = i + 1; k < m; ++k) {
      const Vector d = eye.col(i) - eye.col(k);
      const Matrix lambda = d * d.transpose();
      if (violates(lambda)) return lambda;
    }
  }
  if (violates(eye)) return eye;
  return std::nullopt;
}

}  // namespace bilsyn
