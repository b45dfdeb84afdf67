#include "bilsyn/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace bilsyn::sdp {

namespace {
constexpr double kSqrt2 = 1.4142135623730951;
}  // namespace

int SvecSize(int n) { return n * (n + 1) / 2; }

Vector Svec(const Matrix& m) {
  if (m.rows() != m.cols()) throw Error("Svec: matrix is not square");
  const int n = static_cast<int>(m.rows());
  Vector v(SvecSize(n));
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      v(k++) = i == j ? m(i, i) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
    }
  }
  return v;
}

Matrix Smat(const Vector& v, int n) {
  if (v.size() != SvecSize(n)) {
    throw Error(fmt::format("Smat: length {} does not pack a {}x{} matrix",
                            v.size(), n, n));
  }
  Matrix m(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      if (i == j) {
        m(i, i) = v(k++);
      } else {
        m(i, j) = m(j, i) = v(k++) / kSqrt2;
      }
    }
  }
  return m;
}

int SmatDimension(Eigen::Index len) {
  int n = 0;
  while (SvecSize(n) < len) ++n;
  if (SvecSize(n) != len) {
    throw Error(fmt::format("{} is not a triangular number", len));
  }
  return n;
}

// ---------------------------------------------------------------------------
// AffineExpr

AffineExpr::AffineExpr(Eigen::Index rows, Eigen::Index cols)
    : constant_(Matrix::Zero(rows, cols)) {}

AffineExpr::AffineExpr(Matrix constant) : constant_(std::move(constant)) {}

void AffineExpr::AddTerm(int index, const Matrix& coeff) {
  if (coeff.rows() != rows() || coeff.cols() != cols()) {
    throw Error("AffineExpr::AddTerm: coefficient shape mismatch");
  }
  auto [it, inserted] = terms_.try_emplace(index, coeff);
  if (!inserted) it->second += coeff;
}

Matrix AffineExpr::Evaluate(const Vector& x) const {
  Matrix out = constant_;
  for (const auto& [index, coeff] : terms_) {
    if (index >= x.size()) {
      throw Error("AffineExpr::Evaluate: decision vector too short");
    }
    out += x(index) * coeff;
  }
  return out;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr out(constant_.transpose());
  for (const auto& [index, coeff] : terms_) {
    out.terms_.emplace(index, coeff.transpose());
  }
  return out;
}

AffineExpr AffineExpr::Trace() const {
  if (rows() != cols()) throw Error("AffineExpr::Trace: not square");
  AffineExpr out(Matrix::Constant(1, 1, constant_.trace()));
  for (const auto& [index, coeff] : terms_) {
    out.terms_.emplace(index, Matrix::Constant(1, 1, coeff.trace()));
  }
  return out;
}

AffineExpr AffineExpr::Entry(Eigen::Index r, Eigen::Index c) const {
  AffineExpr out(Matrix::Constant(1, 1, constant_(r, c)));
  for (const auto& [index, coeff] : terms_) {
    out.terms_.emplace(index, Matrix::Constant(1, 1, coeff(r, c)));
  }
  return out;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& other) {
  if (other.rows() != rows() || other.cols() != cols()) {
    throw Error(fmt::format("AffineExpr: adding {}x{} to {}x{}", other.rows(),
                            other.cols(), rows(), cols()));
  }
  constant_ += other.constant_;
  for (const auto& [index, coeff] : other.terms_) AddTerm(index, coeff);
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& other) {
  return *this += -1.0 * other;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant_ *= s;
  for (auto& [index, coeff] : terms_) coeff *= s;
  return *this;
}

AffineExpr operator*(const Matrix& m, const AffineExpr& a) {
  if (m.cols() != a.rows()) {
    throw Error(fmt::format("AffineExpr: {}x{} times {}x{}", m.rows(),
                            m.cols(), a.rows(), a.cols()));
  }
  AffineExpr out(Matrix(m * a.constant_));
  for (const auto& [index, coeff] : a.terms_) {
    out.terms_.emplace(index, m * coeff);
  }
  return out;
}

AffineExpr operator*(const AffineExpr& a, const Matrix& m) {
  if (a.cols() != m.rows()) {
    throw Error(fmt::format("AffineExpr: {}x{} times {}x{}", a.rows(),
                            a.cols(), m.rows(), m.cols()));
  }
  AffineExpr out(Matrix(a.constant_ * m));
  for (const auto& [index, coeff] : a.terms_) {
    out.terms_.emplace(index, coeff * m);
  }
  return out;
}

AffineExpr Kron(const AffineExpr& a, const Matrix& b) {
  AffineExpr out(bilsyn::Kron(a.constant(), b));
  for (const auto& [index, coeff] : a.terms()) {
    out.AddTerm(index, bilsyn::Kron(coeff, b));
  }
  return out;
}

AffineExpr Kron(const Matrix& a, const AffineExpr& b) {
  AffineExpr out(bilsyn::Kron(a, b.constant()));
  for (const auto& [index, coeff] : b.terms()) {
    out.AddTerm(index, bilsyn::Kron(a, coeff));
  }
  return out;
}

AffineExpr Blocks(const std::vector<std::vector<AffineExpr>>& rows) {
  if (rows.empty()) return AffineExpr(0, 0);
  const std::size_t ncols = rows.front().size();
  std::vector<Eigen::Index> heights(rows.size());
  std::vector<Eigen::Index> widths(ncols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != ncols) throw Error("Blocks: ragged block rows");
    heights[i] = rows[i][0].rows();
  }
  for (std::size_t j = 0; j < ncols; ++j) widths[j] = rows[0][j].cols();
  Eigen::Index total_rows = 0;
  Eigen::Index total_cols = 0;
  for (auto h : heights) total_rows += h;
  for (auto w : widths) total_cols += w;

  AffineExpr out(total_rows, total_cols);
  Matrix constant = Matrix::Zero(total_rows, total_cols);
  std::map<int, Matrix> terms;
  Eigen::Index r0 = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index c0 = 0;
    for (std::size_t j = 0; j < ncols; ++j) {
      const AffineExpr& blk = rows[i][j];
      if (blk.rows() != heights[i] || blk.cols() != widths[j]) {
        throw Error(fmt::format(
            "Blocks: block ({},{}) is {}x{}, expected {}x{}", i, j,
            blk.rows(), blk.cols(), heights[i], widths[j]));
      }
      constant.block(r0, c0, heights[i], widths[j]) = blk.constant();
      for (const auto& [index, coeff] : blk.terms()) {
        auto [it, inserted] = terms.try_emplace(index);
        if (inserted) it->second = Matrix::Zero(total_rows, total_cols);
        it->second.block(r0, c0, heights[i], widths[j]) += coeff;
      }
      c0 += widths[j];
    }
    r0 += heights[i];
  }
  out = AffineExpr(std::move(constant));
  for (const auto& [index, coeff] : terms) out.AddTerm(index, coeff);
  return out;
}

AffineExpr Symmetrize(const AffineExpr& e) {
  return 0.5 * (e + e.transpose());
}

// ---------------------------------------------------------------------------
// Problem

int Problem::Allocate(const std::string& name, VarKind kind, int rows,
                      int cols, int size) {
  for (const auto& v : variables_) {
    if (v.name == name) throw Error("duplicate variable name: " + name);
  }
  if (rows <= 0 || cols <= 0) {
    throw Error(fmt::format("variable {} has empty shape {}x{}", name, rows,
                            cols));
  }
  const int offset = num_scalars_;
  variables_.push_back({name, kind, rows, cols, offset, size});
  num_scalars_ += size;
  return offset;
}

AffineExpr Problem::AddSymmetric(const std::string& name, int n) {
  const int offset = Allocate(name, VarKind::kSymmetric, n, n, SvecSize(n));
  AffineExpr out(n, n);
  int k = 0;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i <= j; ++i) {
      Matrix coeff = Matrix::Zero(n, n);
      if (i == j) {
        coeff(i, i) = 1.0;
      } else {
        coeff(i, j) = coeff(j, i) = 1.0 / kSqrt2;
      }
      out.AddTerm(offset + k++, coeff);
    }
  }
  return out;
}

AffineExpr Problem::AddMatrix(const std::string& name, int rows, int cols) {
  const int offset = Allocate(name, VarKind::kMatrix, rows, cols, rows * cols);
  AffineExpr out(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      Matrix coeff = Matrix::Zero(rows, cols);
      coeff(i, j) = 1.0;
      out.AddTerm(offset + j * rows + i, coeff);
    }
  }
  return out;
}

AffineExpr Problem::AddScalar(const std::string& name) {
  const int offset = Allocate(name, VarKind::kScalar, 1, 1, 1);
  AffineExpr out(1, 1);
  out.AddTerm(offset, Matrix::Ones(1, 1));
  return out;
}

void Problem::AddConstraint(const std::string& name, const AffineExpr& expr,
                            Sense sense) {
  if (expr.rows() != expr.cols() || expr.rows() == 0) {
    throw Error(fmt::format("constraint {} must be square and non-empty, got "
                            "{}x{}",
                            name, expr.rows(), expr.cols()));
  }
  constraints_.push_back({name, sdp::Symmetrize(expr), sense});
}

void Problem::SetObjective(const AffineExpr& objective) {
  if (objective.rows() != 1 || objective.cols() != 1) {
    throw Error("objective must be a 1x1 expression");
  }
  objective_ = objective;
}

const Variable& Problem::variable(const std::string& name) const {
  for (const auto& v : variables_) {
    if (v.name == name) return v;
  }
  throw Error("unknown variable: " + name);
}

Matrix Problem::ValueOf(const Variable& var, const Vector& x) const {
  const Vector block = x.segment(var.offset, var.size);
  switch (var.kind) {
    case VarKind::kSymmetric:
      return Smat(block, var.rows);
    case VarKind::kMatrix:
      return Eigen::Map<const Matrix>(block.data(), var.rows, var.cols);
    case VarKind::kScalar:
      return Matrix::Constant(1, 1, block(0));
  }
  return {};
}

void Problem::Validate() const {
  if (constraints_.empty()) throw Error("problem has no constraints");
  auto check_terms = [&](const AffineExpr& e, const std::string& what) {
    for (const auto& [index, coeff] : e.terms()) {
      if (index < 0 || index >= num_scalars_) {
        throw Error(fmt::format("{} references undeclared variable index {}",
                                what, index));
      }
      RequireFinite(coeff, what);
    }
    RequireFinite(e.constant(), what);
  };
  for (const auto& c : constraints_) {
    check_terms(c.expr, "constraint " + c.name);
    if (!IsSymmetric(c.expr.constant(), 1e-9)) {
      throw Error("constraint " + c.name + " is not symmetric");
    }
  }
  check_terms(objective_, "objective");
}

std::string Problem::DebugDump() const {
  std::ostringstream os;
  os << "# variables " << num_scalars_ << "\n";
  for (const auto& v : variables_) {
    os << "var " << v.name << " offset " << v.offset << " size " << v.size
       << " shape " << v.rows << "x" << v.cols << "\n";
  }
  os << "objective";
  for (const auto& [index, coeff] : objective_.terms()) {
    os << " " << index << ":" << fmt::format("{:.17g}", coeff(0, 0));
  }
  os << "\n";
  auto dump = [&os](int index, const Matrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i <= j; ++i) {
        if (m(i, j) != 0.0) {
          os << index << " " << i << " " << j << " "
             << fmt::format("{:.17g}", m(i, j)) << "\n";
        }
      }
    }
  };
  for (const auto& c : constraints_) {
    os << "constraint " << c.name << " dim " << c.expr.rows() << " "
       << (c.sense == Sense::kPsd ? "psd" : "nsd") << "\n";
    dump(-1, c.expr.constant());
    for (const auto& [index, coeff] : c.expr.terms()) dump(index, coeff);
  }
  return os.str();
}

std::string ToString(Status status) {
  switch (status) {
    case Status::kOptimal:
      return "optimal";
    case Status::kInfeasible:
      return "infeasible";
    case Status::kUnbounded:
      return "unbounded";
    case Status::kNumericalError:
      return "numerical_error";
  }
  return "unknown";
}

std::map<std::string, double> EvaluateMargins(const Problem& problem,
                                              const Vector& x) {
  std::map<std::string, double> out;
  for (const auto& c : problem.constraints()) {
    const Matrix value = c.expr.Evaluate(x);
    out[c.name] = c.sense == Sense::kPsd ? MinEig(value) : -MaxEig(value);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interior point method
//
// Each constraint F_k(x) = F_k0 + Σ x_i F_ki ⪰ 0 becomes a block of the dual
// standard form  max bᵀy  s.t.  S = C − Σ y_i A_i ⪰ 0  with C = F_0,
// A_i = −F_i, y = x. The primal is  min ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i, X ⪰ 0.

namespace {

struct BlockData {
  int dim = 0;
  Matrix c;
  std::vector<int> vars;   // global variable indices present in this block
  std::vector<Matrix> a;   // A_i for each entry of vars
};

using BlockMats = std::vector<Matrix>;

double Inner(const BlockMats& x, const BlockMats& s) {
  double acc = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    acc += x[k].cwiseProduct(s[k]).sum();
  }
  return acc;
}

double FrobeniusNorm(const BlockMats& x) {
  double acc = 0.0;
  for (const auto& m : x) acc += m.squaredNorm();
  return std::sqrt(acc);
}

class IpmState {
 public:
  IpmState(const Problem& problem, const Settings& settings)
      : settings_(settings), n_(problem.num_scalars()) {
    b_ = Vector::Zero(n_);
    for (const auto& [index, coeff] : problem.objective().terms()) {
      b_(index) = coeff(0, 0);
    }
    for (const auto& con : problem.constraints()) {
      const double sign = con.sense == Sense::kPsd ? 1.0 : -1.0;
      BlockData blk;
      blk.dim = static_cast<int>(con.expr.rows());
      blk.c = bilsyn::Symmetrize(sign * con.expr.constant());
      for (const auto& [index, coeff] : con.expr.terms()) {
        const Matrix a = bilsyn::Symmetrize(-sign * coeff);
        if (a.cwiseAbs().maxCoeff() == 0.0) continue;
        blk.vars.push_back(index);
        blk.a.push_back(a);
      }
      total_dim_ += blk.dim;
      blocks_.push_back(std::move(blk));
    }
    norm_b_ = b_.norm();
    double c2 = 0.0;
    for (const auto& blk : blocks_) c2 += blk.c.squaredNorm();
    norm_c_ = std::sqrt(c2);
    for (const auto& blk : blocks_) {
      for (const auto& a : blk.a) norm_a_ = std::max(norm_a_, a.norm());
    }
  }

  Solution Run();

 private:
  Vector ApplyA(const BlockMats& x) const {
    Vector out = Vector::Zero(n_);
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& blk = blocks_[k];
      for (std::size_t t = 0; t < blk.vars.size(); ++t) {
        out(blk.vars[t]) += blk.a[t].cwiseProduct(x[k]).sum();
      }
    }
    return out;
  }

  BlockMats ApplyAdjoint(const Vector& y) const {
    BlockMats out(blocks_.size());
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
      const auto& blk = blocks_[k];
      out[k] = Matrix::Zero(blk.dim, blk.dim);
      for (std::size_t t = 0; t < blk.vars.size(); ++t) {
        out[k] += y(blk.vars[t]) * blk.a[t];
      }
    }
    return out;
  }

  // Largest step α with m + α·dm ⪰ 0 (infinity if unbounded).
  static double MaxStep(const BlockMats& m, const BlockMats& dm) {
    double alpha = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m.size(); ++k) {
      Eigen::LLT<Matrix> llt(m[k]);
      if (llt.info() != Eigen::Success) return 0.0;
      const Matrix l_inv =
          llt.matrixL().solve(Matrix::Identity(m[k].rows(), m[k].cols()));
      const Matrix w = bilsyn::Symmetrize(l_inv * dm[k] * l_inv.transpose());
      const double lmin = MinEig(w);
      if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
    }
    return alpha;
  }

  const Settings& settings_;
  int n_;
  int total_dim_ = 0;
  Vector b_;
  std::vector<BlockData> blocks_;
  double norm_b_ = 0.0;
  double norm_c_ = 0.0;
  double norm_a_ = 0.0;
};

Solution IpmState::Run() {
  Solution sol;
  const std::size_t nb = blocks_.size();

  // Initial point, scaled to the data as in standard infeasible-start codes.
  BlockMats x(nb), s(nb);
  Vector y = Vector::Zero(n_);
  for (std::size_t k = 0; k < nb; ++k) {
    const auto& blk = blocks_[k];
    const double sqrt_n = std::sqrt(static_cast<double>(blk.dim));
    double xi = std::max(10.0, sqrt_n);
    double eta = std::max({10.0, sqrt_n, blk.c.norm()});
    for (std::size_t t = 0; t < blk.vars.size(); ++t) {
      const double an = blk.a[t].norm();
      xi = std::max(xi, blk.dim * (1.0 + std::abs(b_(blk.vars[t]))) /
                            (1.0 + an));
      eta = std::max(eta, an);
    }
    x[k] = xi * Matrix::Identity(blk.dim, blk.dim);
    s[k] = eta * Matrix::Identity(blk.dim, blk.dim);
  }

  auto finish = [&](Status status, int iter, double pinf, double dinf,
                    double gap) {
    sol.status = status;
    sol.x = y;
    sol.iterations = iter;
    sol.primal_residual = pinf;
    sol.dual_residual = dinf;
    sol.gap = gap;
    return sol;
  };

  double best_merit = std::numeric_limits<double>::infinity();
  Vector best_y = y;
  int stalls = 0;

  for (int iter = 0; iter <= settings_.max_iterations; ++iter) {
    const Vector ax = ApplyA(x);
    const Vector rp = b_ - ax;
    const BlockMats aty = ApplyAdjoint(y);
    BlockMats rd(nb);
    for (std::size_t k = 0; k < nb; ++k) rd[k] = blocks_[k].c - aty[k] - s[k];

    const double xs = Inner(x, s);
    const double pobj = [&] {
      double acc = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        acc += blocks_[k].c.cwiseProduct(x[k]).sum();
      }
      return acc;
    }();
    const double dobj = b_.dot(y);
    const double pinf = rp.norm() / (1.0 + norm_b_);
    const double dinf = FrobeniusNorm(rd) / (1.0 + norm_c_);
    const double relgap = xs / (1.0 + std::abs(pobj) + std::abs(dobj));

    if (settings_.verbose) {
      fmt::print("{:3d} pobj {: .9e} dobj {: .9e} gap {:.2e} pinf {:.2e} "
                 "dinf {:.2e}\n",
                 iter, pobj, dobj, relgap, pinf, dinf);
    }

    const double merit = std::max({relgap, pinf, dinf});
    if (merit < best_merit) {
      best_merit = merit;
      best_y = y;
    }
    if (pinf < settings_.feasibility_tol && dinf < settings_.feasibility_tol &&
        relgap < settings_.gap_tol) {
      return finish(Status::kOptimal, iter, pinf, dinf, relgap);
    }
    // Infeasibility certificates: X/(−⟨C,X⟩) with 𝒜(X) → 0 proves the
    // constraints infeasible; y/bᵀy with 𝒜*(y) ⪯ 0 proves unboundedness.
    if (pobj < 0.0) {
      const double cert = ax.norm() * (1.0 + norm_c_) /
                          (-pobj * (1.0 + norm_a_));
      if (cert < settings_.certificate_tol) {
        return finish(Status::kInfeasible, iter, pinf, dinf, relgap);
      }
    }
    if (dobj > 0.0) {
      BlockMats c_minus_rd(nb);
      for (std::size_t k = 0; k < nb; ++k) c_minus_rd[k] = aty[k] + s[k];
      const double cert = FrobeniusNorm(c_minus_rd) * (1.0 + norm_b_) /
                          (dobj * (1.0 + norm_a_));
      // aty + s = C − Rd stays bounded while bᵀy diverges.
      if (cert < settings_.certificate_tol && pinf > settings_.feasibility_tol) {
        return finish(Status::kUnbounded, iter, pinf, dinf, relgap);
      }
    }
    if (iter == settings_.max_iterations) break;

    // Schur complement M_ij = Σ_k tr(A_i X A_j S⁻¹).
    BlockMats s_inv(nb);
    bool ok = true;
    for (std::size_t k = 0; k < nb; ++k) {
      Eigen::LLT<Matrix> llt(s[k]);
      if (llt.info() != Eigen::Success) {
        ok = false;
        break;
      }
      s_inv[k] = bilsyn::Symmetrize(
          llt.solve(Matrix::Identity(blocks_[k].dim, blocks_[k].dim)));
    }
    if (!ok) break;

    Matrix schur = Matrix::Zero(n_, n_);
    for (std::size_t k = 0; k < nb; ++k) {
      const auto& blk = blocks_[k];
      for (std::size_t t = 0; t < blk.vars.size(); ++t) {
        const Matrix g = x[k] * blk.a[t] * s_inv[k];
        for (std::size_t u = t; u < blk.vars.size(); ++u) {
          const double v = blk.a[u].cwiseProduct(g).sum();
          schur(blk.vars[t], blk.vars[u]) += v;
          if (u != t) schur(blk.vars[u], blk.vars[t]) += v;
        }
      }
    }
    schur = bilsyn::Symmetrize(schur);
    Eigen::LDLT<Matrix> schur_ldlt(schur);
    if (schur_ldlt.info() != Eigen::Success ||
        (schur_ldlt.vectorD().array() <= 0.0).any()) {
      const double reg =
          1e-13 * std::max(1.0, schur.diagonal().cwiseAbs().maxCoeff());
      schur.diagonal().array() += reg;
      schur_ldlt.compute(schur);
      if (schur_ldlt.info() != Eigen::Success) break;
    }

    const double mu = xs / total_dim_;

    // Direction for target σμ with optional second-order correction.
    auto direction = [&](double sigma_mu, const BlockMats* dx_pred,
                         const BlockMats* ds_pred, BlockMats& dx, Vector& dy,
                         BlockMats& ds) {
      BlockMats rhs_mats(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        Matrix r = -sigma_mu * s_inv[k] + x[k] * rd[k] * s_inv[k];
        if (dx_pred != nullptr) {
          r += (*dx_pred)[k] * (*ds_pred)[k] * s_inv[k];
        }
        rhs_mats[k] = r;
      }
      // 𝒜 of a non-symmetric matrix: ⟨A_i, R⟩ = tr(A_i R) since A_i = A_iᵀ.
      Vector rhs = b_;
      for (std::size_t k = 0; k < nb; ++k) {
        const auto& blk = blocks_[k];
        const Matrix rt = rhs_mats[k].transpose();
        for (std::size_t t = 0; t < blk.vars.size(); ++t) {
          rhs(blk.vars[t]) += blk.a[t].cwiseProduct(rt).sum();
        }
      }
      dy = schur_ldlt.solve(rhs);
      const BlockMats atdy = ApplyAdjoint(dy);
      dx.resize(nb);
      ds.resize(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        ds[k] = rd[k] - atdy[k];
        Matrix d = sigma_mu * s_inv[k] - x[k] - x[k] * ds[k] * s_inv[k];
        if (dx_pred != nullptr) d -= (*dx_pred)[k] * (*ds_pred)[k] * s_inv[k];
        dx[k] = bilsyn::Symmetrize(d);
      }
    };

    BlockMats dx_p, ds_p;
    Vector dy_p;
    direction(0.0, nullptr, nullptr, dx_p, dy_p, ds_p);
    const double ap = std::min(1.0, MaxStep(x, dx_p));
    const double ad = std::min(1.0, MaxStep(s, ds_p));
    BlockMats xt(nb), st(nb);
    for (std::size_t k = 0; k < nb; ++k) {
      xt[k] = x[k] + ap * dx_p[k];
      st[k] = s[k] + ad * ds_p[k];
    }
    const double ratio = std::max(0.0, Inner(xt, st)) / xs;
    const double expon = std::max(1.0, 3.0 * std::min(ap, ad) * std::min(ap, ad));
    const double sigma = std::clamp(std::pow(ratio, expon), 0.0, 1.0);

    BlockMats dx, ds;
    Vector dy;
    direction(sigma * mu, &dx_p, &ds_p, dx, dy, ds);
    const double tau = 0.9 + 0.09 * std::min(ap, ad);
    const double step_p = std::min(1.0, tau * MaxStep(x, dx));
    const double step_d = std::min(1.0, tau * MaxStep(s, ds));
    if (!std::isfinite(step_p) || !std::isfinite(step_d) ||
        !dy.allFinite()) {
      break;
    }
    if (step_p < 1e-10 && step_d < 1e-10) {
      if (++stalls > 3) break;
    } else {
      stalls = 0;
    }
    for (std::size_t k = 0; k < nb; ++k) {
      x[k] = bilsyn::Symmetrize(x[k] + step_p * dx[k]);
      s[k] = bilsyn::Symmetrize(s[k] + step_d * ds[k]);
    }
    y += step_d * dy;
  }

  // Iteration limit or breakdown: report the best iterate found.
  y = best_y;
  return finish(Status::kNumericalError, settings_.max_iterations, best_merit,
                best_merit, best_merit);
}

}  // namespace

Solution InteriorPointSolver::Solve(const Problem& problem) const {
  problem.Validate();
  IpmState state(problem, settings_);
  Solution sol = state.Run();
  sol.objective = problem.objective().Evaluate(sol.x)(0, 0);
  for (const auto& v : problem.variables()) {
    sol.values[v.name] = problem.ValueOf(v, sol.x);
  }
  sol.margins = EvaluateMargins(problem, sol.x);
  return sol;
}

}  // namespace bilsyn::sdp
