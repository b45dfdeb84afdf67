#include "bilsyn/controller.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "bilsyn/analysis.hpp"
#include "bilsyn/lfr.hpp"
#include "test_util.hpp"

namespace bilsyn {
namespace {

RationalController PaperController() {
  RationalController c;
  c.mode = Mode::kGainScheduled;
  c.K = Matrix::Constant(1, 1, -0.5324);
  c.Kw = Matrix::Constant(1, 1, -0.5762);
  return c;
}

std::vector<std::pair<std::string, ProblemData>> Fixtures() {
  std::vector<std::pair<std::string, ProblemData>> out;
  for (const char* name : {"example1_stab.json", "example1_perf.json",
                           "example2_cattle.json", "example3_mimo.json"}) {
    out.emplace_back(name, LoadProblem(test::Fixture(name)));
  }
  return out;
}

SynthesisResult Design(const ProblemData& p) {
  return p.has_performance() ? SynthesizePerformance(p) : SynthesizeStability(p);
}

TEST(RationalControllerTest, PaperScheduledValue) {
  const RationalController c = PaperController();
  const Vector u = c.Evaluate(Vector::Constant(1, 0.5));
  EXPECT_NEAR(u(0), -0.5324 * 0.5 / (1.0 + 0.5762 * 0.5), 1e-12);
  EXPECT_NEAR(u(0), -0.2067, 1e-4);
}

TEST(RationalControllerTest, SingularityIsReported) {
  const RationalController c = PaperController();
  const Vector z = Vector::Constant(1, -1.0 / 0.5762);
  EXPECT_GT(c.Condition(z), RationalController::kMaxCondition);
  EXPECT_THROW(c.Evaluate(z), ControllerSingularityError);
  EXPECT_THROW(c.Evaluate(z), SingularMatrixError);
}

TEST(RationalControllerTest, LinearModeIsStateFeedback) {
  RationalController c;
  c.K = MakeMatrix({{1.0, -2.0}});
  c.Kw = Matrix::Zero(1, 2);
  const Vector z = (Vector(2) << 0.3, 0.1).finished();
  EXPECT_NEAR(c.Evaluate(z)(0), 0.1, 1e-15);
}

TEST(RationalControllerTest, FixedPointIdentityOnAllFixtures) {
  for (const auto& [name, p] : Fixtures()) {
    const SynthesisResult r = Design(p);
    ASSERT_TRUE(r.accepted()) << name;
    const RationalController c = ExtractController(r, p.region);
    const Eigen::LLT<Matrix> chol(InverseSpd(r.vars.P));
    std::mt19937_64 rng(21);
    for (int k = 0; k < 1000; ++k) {
      // Uniform in {zᵀP⁻¹z ≤ 1}.
      const Vector z = chol.matrixU().solve(SampleBall(p.system.N(), rng));
      const Vector u = c.Evaluate(z);
      const Vector w = UncertaintyBlock(z, p.system.m()) * u;
      const Vector residual = u - (c.K * z + c.Kw * w);
      EXPECT_LE(residual.cwiseAbs().maxCoeff(), 1e-10) << name;
    }
  }
}

TEST(ExtractControllerTest, GainsSatisfyDefiningRelations) {
  const ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  const SynthesisResult r = SynthesizePerformance(p);
  ASSERT_TRUE(r.accepted());
  const RationalController c = ExtractController(r, p.region);
  EXPECT_LE((c.K * r.vars.P - r.vars.L).cwiseAbs().maxCoeff(), 1e-8);
  const Matrix lw = c.Kw * Kron(r.vars.LambdaTilde, p.region.Qz_tilde());
  EXPECT_LE((lw - r.vars.Lw).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(c.mode, Mode::kGainScheduled);
}

TEST(ExtractControllerTest, RejectsUnacceptedResult) {
  SynthesisResult r;
  r.status = SynthesisStatus::kInfeasible;
  EXPECT_THROW(ExtractController(r, RegionSpec::Ball(1, 1.0)), Error);
}

TEST(ClosedLoopStepTest, MatchesOpenLoopStepAndOutput) {
  const ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  const SynthesisResult r = SynthesizePerformance(p);
  const RationalController c = ExtractController(r, p.region);
  const Vector z = (Vector(3) << 0.01, -0.02, 0.005).finished();
  const Vector wp = (Vector(3) << 0.1, 0.0, -0.1).finished();
  const auto& ch = p.performance->channel;
  const StepResult s = ClosedLoopStep(p.system, c, z, &ch, &wp);
  const Vector u = c.Evaluate(z);
  EXPECT_LE((s.u - u).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((s.z_next - (p.system.Step(z, u) + ch.Bp * wp)).cwiseAbs().maxCoeff(),
            1e-14);
  ASSERT_TRUE(s.zp);
  const Vector zp = ch.Cp * z + ch.Dpu * u + ch.Dpuz * Kron(u, z) + ch.Dpw * wp;
  EXPECT_LE((*s.zp - zp).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(ControllerJsonTest, RoundTrip) {
  const ProblemData p = LoadProblem(test::Fixture("example2_cattle.json"));
  const SynthesisResult r = SynthesizeStability(p);
  const RationalController c = ExtractController(r, p.region);
  const std::string text = ControllerToJson(c);
  const RationalController d = ControllerFromJson(text);
  EXPECT_EQ(c.K, d.K);
  EXPECT_EQ(c.Kw, d.Kw);
  EXPECT_EQ(c.P, d.P);
  ASSERT_TRUE(d.region);
  EXPECT_EQ(d.region->Full(), p.region.Full());
  EXPECT_EQ(ControllerToJson(d), text);
  EXPECT_THROW(ControllerFromJson("{\"K\": 1}"), ValidationError);
}

}  // namespace
}  // namespace bilsyn
