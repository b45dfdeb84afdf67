#include "bilsyn/controller.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "bilsyn/lfr.hpp"
#include "json_util.hpp"

namespace bilsyn {

namespace {

Matrix ImplicitMatrix(const RationalController& ctrl, const Vector& z) {
  if (z.size() != ctrl.N()) {
    throw Error(fmt::format("controller expects a state of size {}, got {}",
                            ctrl.N(), z.size()));
  }
  return Matrix::Identity(ctrl.m(), ctrl.m()) -
         ctrl.Kw * UncertaintyBlock(z, ctrl.m());
}

double OneNorm(const Matrix& m) {
  return m.cwiseAbs().colwise().sum().maxCoeff();
}

}  // namespace

double RationalController::Condition(const Vector& z) const {
  const Matrix a = ImplicitMatrix(*this, z);
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  return OneNorm(a) * OneNorm(lu.inverse());
}

Vector RationalController::Evaluate(const Vector& z) const {
  const Vector kz = K * z;
  if (mode == Mode::kLinear) return kz;
  const Matrix a = ImplicitMatrix(*this, z);
  Eigen::FullPivLU<Matrix> lu(a);
  const double cond = lu.isInvertible()
                          ? OneNorm(a) * OneNorm(lu.inverse())
                          : std::numeric_limits<double>::infinity();
  if (!(cond <= kMaxCondition)) {
    throw ControllerSingularityError(fmt::format(
        "I - Kw(I_m (x) z) is singular at this state (condition {:.3g})",
        cond));
  }
  return lu.solve(kz);
}

RationalController ExtractController(const SynthesisResult& result,
                                     const RegionSpec& region) {
  if (!result.accepted()) {
    throw Error("ExtractController: synthesis result was not accepted (" +
                ToString(result.status) + ")");
  }
  const DecisionVars& v = result.vars;
  if (v.P.rows() != region.N() || v.P.cols() != v.P.rows() ||
      v.L.cols() != v.P.rows()) {
    throw ValidationError("ExtractController: variable dimensions do not match "
                          "the region");
  }
  RationalController ctrl;
  ctrl.mode = result.mode;
  ctrl.P = v.P;
  ctrl.LambdaTilde = v.LambdaTilde;
  ctrl.region = region;

  // K Pᵀ = L with P symmetric: K = (P⁻¹ Lᵀ)ᵀ.
  ctrl.K = SolveSpd(v.P, v.L.transpose()).transpose();
  const double res_k = (ctrl.K * v.P - v.L).cwiseAbs().maxCoeff();
  if (res_k > 1e-8 * (1.0 + v.L.cwiseAbs().maxCoeff()) *
                  (1.0 + v.P.cwiseAbs().maxCoeff() /
                             std::max(MinEig(v.P), 1e-300))) {
    throw SingularMatrixError("ExtractController: P is numerically singular");
  }

  const int n = v.P.rows();
  const int m = v.L.rows();
  if (result.mode == Mode::kLinear || v.Lw.size() == 0) {
    ctrl.Kw = Matrix::Zero(m, n * m);
    return ctrl;
  }
  // (Λ̃ ⊗ Q̃z)⁻¹ = Λ̃⁻¹ ⊗ Q̃z⁻¹; Λ̃ ≻ 0 and −Q̃z ≻ 0 at accepted results.
  const Matrix lam_inv = InverseSpd(v.LambdaTilde);
  const Matrix qz_inv = -InverseSpd(-region.Qz_tilde());
  ctrl.Kw = v.Lw * Kron(lam_inv, qz_inv);
  return ctrl;
}

StepResult ClosedLoopStep(const BilinearSystem& system,
                          const RationalController& ctrl, const Vector& z,
                          const PerformanceChannel* channel, const Vector* wp) {
  StepResult out;
  out.u = ctrl.Evaluate(z);
  out.z_next = system.Step(z, out.u);
  if (channel != nullptr) {
    Vector uz(channel->Dpuz.cols());
    for (int j = 0; j < ctrl.m(); ++j) {
      uz.segment(j * ctrl.N(), ctrl.N()) = out.u(j) * z;
    }
    Vector zp = channel->Cp * z + channel->Dpu * out.u + channel->Dpuz * uz;
    if (wp != nullptr) {
      out.z_next += channel->Bp * *wp;
      zp += channel->Dpw * *wp;
    }
    out.zp = std::move(zp);
  }
  return out;
}

std::string ControllerToJson(const RationalController& ctrl) {
  using internal::Json;
  using internal::MatrixToJson;
  Json j;
  j["mode"] = ToString(ctrl.mode);
  j["K"] = MatrixToJson(ctrl.K);
  j["Kw"] = MatrixToJson(ctrl.Kw);
  if (ctrl.P.size() > 0) j["P"] = MatrixToJson(ctrl.P);
  if (ctrl.LambdaTilde.size() > 0) {
    j["LambdaTilde"] = MatrixToJson(ctrl.LambdaTilde);
  }
  if (ctrl.region) j["region"] = internal::RegionToJson(*ctrl.region);
  return j.dump(2);
}

RationalController ControllerFromJson(const std::string& text) {
  using internal::Json;
  using internal::MatrixFromJson;
  using internal::RequireField;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("JSON parse error: ") + e.what());
  }
  RationalController ctrl;
  ctrl.mode = ParseMode(RequireField(j, "mode", "controller").get<std::string>());
  ctrl.K = MatrixFromJson(RequireField(j, "K", "controller"), "K");
  ctrl.Kw = MatrixFromJson(RequireField(j, "Kw", "controller"), "Kw");
  const Eigen::Index n = ctrl.K.cols();
  const Eigen::Index m = ctrl.K.rows();
  if (ctrl.Kw.rows() != m || ctrl.Kw.cols() != n * m) {
    throw ValidationError(fmt::format("Kw must be {}x{}, got {}x{}", m, n * m,
                                      ctrl.Kw.rows(), ctrl.Kw.cols()));
  }
  if (j.contains("P")) ctrl.P = MatrixFromJson(j.at("P"), "P");
  if (j.contains("LambdaTilde")) {
    ctrl.LambdaTilde = MatrixFromJson(j.at("LambdaTilde"), "LambdaTilde");
  }
  if (j.contains("region")) {
    ctrl.region = internal::RegionFromJson(j.at("region"), static_cast<int>(n));
  }
  return ctrl;
}

RationalController LoadController(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open {}", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return ControllerFromJson(ss.str());
}

void SaveController(const RationalController& ctrl, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write {}", path));
  out << ControllerToJson(ctrl) << '\n';
}

}  // namespace bilsyn
