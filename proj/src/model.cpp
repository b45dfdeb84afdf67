#include "bilsyn/model.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "json_util.hpp"

namespace bilsyn {

Matrix BilinearSystem::Btilde() const {
  const int n = N();
  Matrix out(n, n * m());
  for (int j = 0; j < m(); ++j) out.block(0, j * n, n, n) = B[j];
  return out;
}

std::vector<Matrix> BilinearSystem::SplitBtilde(const Matrix& btilde, int N) {
  if (N <= 0 || btilde.rows() != N || btilde.cols() % N != 0) {
    throw ValidationError(fmt::format(
        "Btilde must be N x (N*m) with N = {}, got {}x{}", N, btilde.rows(),
        btilde.cols()));
  }
  std::vector<Matrix> out;
  for (Eigen::Index j = 0; j < btilde.cols() / N; ++j) {
    out.push_back(btilde.block(0, j * N, N, N));
  }
  return out;
}

Vector BilinearSystem::Step(const Vector& z, const Vector& u) const {
  Vector next = A * z + B0 * u;
  for (int j = 0; j < m(); ++j) next += u(j) * (B[j] * z);
  return next;
}

// ---------------------------------------------------------------------------

RegionSpec RegionSpec::Create(const Matrix& Qz, const Matrix& Sz,
                              const Matrix& Rz) {
  const Eigen::Index n = Qz.rows();
  if (n == 0 || Qz.cols() != n) {
    throw ValidationError("Qz must be a non-empty square matrix");
  }
  if (Sz.rows() != n || Sz.cols() != 1) {
    throw ValidationError(fmt::format("Sz must be {}x1, got {}x{}", n,
                                      Sz.rows(), Sz.cols()));
  }
  if (Rz.rows() != 1 || Rz.cols() != 1) {
    throw ValidationError("Rz must be a scalar (1x1)");
  }
  RequireFinite(Qz, "Qz");
  RequireFinite(Sz, "Sz");
  RequireFinite(Rz, "Rz");
  if (!IsSymmetric(Qz, 1e-12)) throw ValidationError("Qz must be symmetric");
  if (!(MaxEig(Qz) < 0.0)) {
    throw ValidationError("Qz must be negative definite");
  }
  if (!(Rz(0, 0) > 0.0)) {
    throw ValidationError(
        "region block singular: Rz must be positive definite");
  }
  RegionSpec r;
  r.qz_ = Symmetrize(Qz);
  r.sz_ = Sz;
  r.rz_ = Rz;
  Matrix inv;
  try {
    inv = InverseChecked(r.Full(), 1e-13);
  } catch (const SingularMatrixError&) {
    throw ValidationError("region block singular: [Qz Sz; Sz' Rz] is not "
                          "invertible");
  }
  inv = Symmetrize(inv);
  r.qz_t_ = inv.topLeftCorner(n, n);
  r.sz_t_ = inv.topRightCorner(n, 1);
  r.rz_t_ = inv.bottomRightCorner(1, 1);
  r.sz_hat_ = r.qz_t_.fullPivLu().solve(r.sz_t_);
  return r;
}

RegionSpec RegionSpec::Ball(int N, double radius_sq) {
  if (N <= 0) throw ValidationError("ball region needs N >= 1");
  if (!(radius_sq > 0.0)) {
    throw ValidationError("ball radius_sq must be positive");
  }
  return Create(-Matrix::Identity(N, N), Matrix::Zero(N, 1),
                Matrix::Constant(1, 1, radius_sq));
}

Matrix RegionSpec::Full() const {
  const int n = N();
  Matrix out(n + 1, n + 1);
  out << qz_, sz_, sz_.transpose(), rz_;
  return out;
}

Matrix RegionSpec::FullInverse() const {
  const int n = N();
  Matrix out(n + 1, n + 1);
  out << qz_t_, sz_t_, sz_t_.transpose(), rz_t_;
  return out;
}

double RegionSpec::QuadraticForm(const Vector& z) const {
  return z.dot(qz_ * z) + 2.0 * sz_.col(0).dot(z) + rz_(0, 0);
}

// ---------------------------------------------------------------------------

PerformanceSpec PerformanceSpec::Create(const Matrix& Qp, const Matrix& Sp,
                                        const Matrix& Rp) {
  const Eigen::Index q = Qp.rows();
  const Eigen::Index p = Rp.rows();
  if (q == 0 || Qp.cols() != q) throw ValidationError("Qp must be square");
  if (p == 0 || Rp.cols() != p) throw ValidationError("Rp must be square");
  if (Sp.rows() != q || Sp.cols() != p) {
    throw ValidationError(fmt::format("Sp must be {}x{}, got {}x{}", q, p,
                                      Sp.rows(), Sp.cols()));
  }
  if (!IsSymmetric(Qp, 1e-12) || !IsSymmetric(Rp, 1e-12)) {
    throw ValidationError("Qp and Rp must be symmetric");
  }
  if (!(MaxEig(Qp) < 0.0)) {
    throw ValidationError("Qp must be negative definite");
  }
  if (MinEig(Rp) < -1e-12 * (1.0 + Rp.cwiseAbs().maxCoeff())) {
    throw ValidationError("Rp must be positive semidefinite");
  }
  PerformanceSpec s;
  s.qp_ = Symmetrize(Qp);
  s.sp_ = Sp;
  s.rp_ = Symmetrize(Rp);
  Matrix inv;
  try {
    inv = Symmetrize(InverseChecked(s.Full(), 1e-13));
  } catch (const SingularMatrixError&) {
    throw ValidationError("performance index Pi_p is singular");
  }
  s.qp_t_ = inv.topLeftCorner(q, q);
  s.sp_t_ = inv.topRightCorner(q, p);
  s.rp_t_ = inv.bottomRightCorner(p, p);
  return s;
}

PerformanceSpec PerformanceSpec::Gain(double gamma, int q, int p) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  if (q <= 0 || p <= 0) throw ValidationError("gain index needs q, p >= 1");
  PerformanceSpec s;
  s.qp_ = -gamma * gamma * Matrix::Identity(q, q);
  s.sp_ = Matrix::Zero(q, p);
  s.rp_ = Matrix::Identity(p, p);
  s.qp_t_ = -1.0 / (gamma * gamma) * Matrix::Identity(q, q);
  s.sp_t_ = Matrix::Zero(q, p);
  s.rp_t_ = Matrix::Identity(p, p);
  s.gamma_ = gamma;
  return s;
}

Matrix PerformanceSpec::Full() const {
  Matrix out(q() + p(), q() + p());
  out << qp_, sp_, sp_.transpose(), rp_;
  return out;
}

double PerformanceSpec::Supply(const Vector& wp, const Vector& zp) const {
  return wp.dot(qp_ * wp) + 2.0 * wp.dot(sp_ * zp) + zp.dot(rp_ * zp);
}

ProblemData ProblemData::WithGain(double gamma) const {
  if (!performance) {
    throw ValidationError("problem has no performance channel");
  }
  ProblemData out = *this;
  out.performance->index = PerformanceSpec::Gain(
      gamma, performance->channel.q(), performance->channel.p());
  return out;
}

ProblemData ProblemData::WithRegion(const RegionSpec& region) const {
  if (region.N() != system.N()) {
    throw ValidationError("region dimension does not match the system");
  }
  ProblemData out = *this;
  out.region = region;
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void RequireShape(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                  const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ValidationError(fmt::format("{} must be {}x{}, got {}x{}", name,
                                      rows, cols, m.rows(), m.cols()));
  }
  RequireFinite(m, name);
}

}  // namespace

void Validate(const BilinearSystem& system) {
  const int n = system.N();
  if (n < 1) throw ValidationError("N must be >= 1");
  RequireShape(system.A, n, n, "A");
  if (system.B.empty()) throw ValidationError("m must be >= 1");
  RequireShape(system.B0, n, static_cast<Eigen::Index>(system.B.size()), "B0");
  for (std::size_t j = 0; j < system.B.size(); ++j) {
    RequireShape(system.B[j], n, n, fmt::format("B[{}]", j).c_str());
  }
}

void Validate(const BilinearSystem& system, const PerformanceChannel& ch) {
  const int n = system.N();
  const int m = system.m();
  const int q = ch.q();
  const int p = ch.p();
  if (q < 1 || p < 1) {
    throw ValidationError("performance channel needs p, q >= 1");
  }
  RequireShape(ch.Bp, n, q, "Bp");
  RequireShape(ch.Cp, p, n, "Cp");
  RequireShape(ch.Dpu, p, m, "Dpu");
  RequireShape(ch.Dpuz, p, n * m, "Dpuz");
  RequireShape(ch.Dpw, p, q, "Dpw");
}

ProblemData MakeProblem(BilinearSystem system, RegionSpec region,
                        std::optional<PerformanceProblem> perf,
                        std::string name) {
  Validate(system);
  if (region.N() != system.N()) {
    throw ValidationError(fmt::format(
        "region dimension {} does not match state dimension {}", region.N(),
        system.N()));
  }
  if (perf) {
    Validate(system, perf->channel);
    if (perf->index.q() != perf->channel.q() ||
        perf->index.p() != perf->channel.p()) {
      throw ValidationError("performance index dimensions do not match the "
                            "channel (q, p)");
    }
  }
  return ProblemData{std::move(name), std::move(system), std::move(region),
                     std::move(perf)};
}

// ---------------------------------------------------------------------------
// JSON

namespace internal {

Json MatrixToJson(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix MatrixFromJson(const Json& j, const std::string& field) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) {
    throw ValidationError(field + ": expected a non-empty array of arrays");
  }
  const std::size_t rows = j.size();
  if (!j[0].is_array()) {
    throw ValidationError(field + ": expected an array of row arrays");
  }
  const std::size_t cols = j[0].size();
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw ValidationError(
          fmt::format("{}[{}]: expected a row of length {}", field, r, cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[r][c].is_number()) {
        throw ValidationError(
            fmt::format("{}[{}][{}]: expected a number", field, r, c));
      }
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

const Json& RequireField(const Json& obj, const char* key,
                         const std::string& context) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ValidationError(
        fmt::format("schema: missing field \"{}\" in {}", key, context));
  }
  return obj.at(key);
}

Json RegionToJson(const RegionSpec& region) {
  return {{"Qz", MatrixToJson(region.Qz())},
          {"Sz", MatrixToJson(region.Sz())},
          {"Rz", MatrixToJson(region.Rz())}};
}

RegionSpec RegionFromJson(const Json& jr, int N) {
  if (jr.is_object() && jr.contains("ball")) {
    if (!jr.at("ball").is_number()) {
      throw ValidationError("region.ball: expected a number");
    }
    return RegionSpec::Ball(N, jr.at("ball").get<double>());
  }
  return RegionSpec::Create(
      MatrixFromJson(RequireField(jr, "Qz", "region"), "region.Qz"),
      MatrixFromJson(RequireField(jr, "Sz", "region"), "region.Sz"),
      MatrixFromJson(RequireField(jr, "Rz", "region"), "region.Rz"));
}

Json ProblemToJson(const ProblemData& problem) {
  Json j;
  if (!problem.name.empty()) j["name"] = problem.name;
  Json sys;
  sys["A"] = MatrixToJson(problem.system.A);
  sys["B0"] = MatrixToJson(problem.system.B0);
  Json bl = Json::array();
  for (const auto& b : problem.system.B) bl.push_back(MatrixToJson(b));
  sys["B"] = std::move(bl);
  j["system"] = std::move(sys);
  j["region"] = RegionToJson(problem.region);
  if (problem.performance) {
    const auto& ch = problem.performance->channel;
    const auto& idx = problem.performance->index;
    Json perf;
    perf["Bp"] = MatrixToJson(ch.Bp);
    perf["Cp"] = MatrixToJson(ch.Cp);
    perf["Dpu"] = MatrixToJson(ch.Dpu);
    perf["Dpuz"] = MatrixToJson(ch.Dpuz);
    perf["Dpw"] = MatrixToJson(ch.Dpw);
    if (idx.gamma()) {
      perf["index"] = {{"gamma", *idx.gamma()}};
    } else {
      perf["index"] = {{"Qp", MatrixToJson(idx.Qp())},
                       {"Sp", MatrixToJson(idx.Sp())},
                       {"Rp", MatrixToJson(idx.Rp())}};
    }
    j["performance"] = std::move(perf);
  }
  return j;
}

ProblemData ProblemFromJson(const Json& j) {
  if (!j.is_object()) throw ValidationError("schema: top level must be an object");
  const Json& js = RequireField(j, "system", "problem");
  BilinearSystem sys;
  sys.A = MatrixFromJson(RequireField(js, "A", "system"), "system.A");
  sys.B0 = MatrixFromJson(RequireField(js, "B0", "system"), "system.B0");
  if (js.contains("B")) {
    const Json& bl = js.at("B");
    if (!bl.is_array()) throw ValidationError("system.B: expected an array");
    for (std::size_t k = 0; k < bl.size(); ++k) {
      sys.B.push_back(MatrixFromJson(bl[k], fmt::format("system.B[{}]", k)));
    }
  } else if (js.contains("Btilde")) {
    sys.B = BilinearSystem::SplitBtilde(
        MatrixFromJson(js.at("Btilde"), "system.Btilde"),
        static_cast<int>(sys.A.rows()));
  } else {
    throw ValidationError(
        "schema: missing field \"B\" (or \"Btilde\") in system");
  }
  Validate(sys);
  const int n = sys.N();

  const Json& jr = RequireField(j, "region", "problem");
  RegionSpec region = RegionFromJson(jr, n);

  std::optional<PerformanceProblem> perf;
  if (j.contains("performance") && !j.at("performance").is_null()) {
    const Json& jp = j.at("performance");
    PerformanceChannel ch;
    ch.Bp = MatrixFromJson(RequireField(jp, "Bp", "performance"),
                           "performance.Bp");
    ch.Cp = MatrixFromJson(RequireField(jp, "Cp", "performance"),
                           "performance.Cp");
    const Eigen::Index p = ch.Cp.rows();
    const Eigen::Index q = ch.Bp.cols();
    auto optional_matrix = [&](const char* key, Eigen::Index rows,
                               Eigen::Index cols) {
      return jp.contains(key)
                 ? MatrixFromJson(jp.at(key), std::string("performance.") + key)
                 : Matrix(Matrix::Zero(rows, cols));
    };
    ch.Dpu = optional_matrix("Dpu", p, sys.m());
    ch.Dpuz = optional_matrix("Dpuz", p, n * sys.m());
    ch.Dpw = optional_matrix("Dpw", p, q);
    Validate(sys, ch);
    const Json& ji = RequireField(jp, "index", "performance");
    PerformanceSpec index =
        ji.contains("gamma")
            ? PerformanceSpec::Gain(ji.at("gamma").get<double>(),
                                    static_cast<int>(q), static_cast<int>(p))
            : PerformanceSpec::Create(
                  MatrixFromJson(RequireField(ji, "Qp", "performance.index"),
                                 "performance.index.Qp"),
                  MatrixFromJson(RequireField(ji, "Sp", "performance.index"),
                                 "performance.index.Sp"),
                  MatrixFromJson(RequireField(ji, "Rp", "performance.index"),
                                 "performance.index.Rp"));
    perf = PerformanceProblem{std::move(ch), std::move(index)};
  }
  std::string name = j.contains("name") ? j.at("name").get<std::string>() : "";
  return MakeProblem(std::move(sys), std::move(region), std::move(perf),
                     std::move(name));
}

}  // namespace internal

ProblemData ParseProblem(const std::string& json_text) {
  internal::Json j;
  try {
    j = internal::Json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("JSON parse error: ") + e.what());
  }
  try {
    return internal::ProblemFromJson(j);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("schema: ") + e.what());
  }
}

ProblemData LoadProblem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open problem file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseProblem(buf.str());
}

std::string SerializeProblem(const ProblemData& problem) {
  return internal::ProblemToJson(problem).dump(2) + "\n";
}

void SaveProblem(const ProblemData& problem, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write problem file: " + path);
  out << SerializeProblem(problem);
}

}  // namespace bilsyn
