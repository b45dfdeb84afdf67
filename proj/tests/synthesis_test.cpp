#include "bilsyn/synthesis.hpp"

#include <cmath>

#include <gtest/gtest.h>

#include "bilsyn/analysis.hpp"
#include "bilsyn/lfr.hpp"
#include "test_util.hpp"

namespace bilsyn {
namespace {

ProblemData Example1Stab(double rz = 0.9) {
  return LoadProblem(test::Fixture("example1_stab.json"))
      .WithRegion(RegionSpec::Ball(1, rz));
}

DecisionVars RandomVars(int n, int m, std::mt19937_64& rng, bool perf) {
  DecisionVars v;
  v.P = test::RandomSpd(n, rng);
  v.L = test::RandomMatrix(m, n, rng);
  v.Lw = test::RandomMatrix(m, n * m, rng);
  v.LambdaTilde = test::RandomSpd(m, rng);
  v.nu = 0.7;
  if (perf) v.lambda_tilde = 0.4;
  return v;
}

// Coupled N = 2 problem with an off-centre region and every feedthrough
// nonzero.
ProblemData CoupledProblem(double gamma) {
  BilinearSystem sys;
  sys.A = MakeMatrix({{0.9, 0.2}, {0.0, 1.05}});
  sys.B0 = MakeMatrix({{0.0}, {1.0}});
  sys.B = {MakeMatrix({{0.1, 0.0}, {0.05, 0.2}})};
  const RegionSpec region = RegionSpec::Create(
      MakeMatrix({{-1.0, 0.1}, {0.1, -1.5}}), MakeMatrix({{0.05}, {-0.02}}),
      MakeMatrix({{0.3}}));
  PerformanceChannel ch;
  ch.Bp = MakeMatrix({{0.1}, {0.1}});
  ch.Cp = MakeMatrix({{1.0, 0.0}});
  ch.Dpu = MakeMatrix({{0.2}});
  ch.Dpuz = MakeMatrix({{1.0, -1.0}});
  ch.Dpw = MakeMatrix({{0.1}});
  return MakeProblem(sys, region,
                     PerformanceProblem{ch, PerformanceSpec::Gain(gamma, 1, 1)},
                     "coupled");
}

TEST(ParseTest, ModesAndMultipliers) {
  EXPECT_EQ(ParseMode("gs"), Mode::kGainScheduled);
  EXPECT_EQ(ParseMode("gain_scheduled"), Mode::kGainScheduled);
  EXPECT_EQ(ParseMode("linear"), Mode::kLinear);
  EXPECT_EQ(ParseMultiplier("scaled"), Multiplier::kScaledIdentity);
  EXPECT_EQ(ParseMultiplier("full"), Multiplier::kFull);
  EXPECT_THROW(ParseMode("nonlinear"), ValidationError);
  EXPECT_THROW(ParseMultiplier("diag"), ValidationError);
}

TEST(BuildQTest, ZeroSystemIsBlockDiagonal) {
  BilinearSystem sys;
  sys.A = Matrix::Zero(2, 2);
  sys.B0 = Matrix::Zero(2, 1);
  sys.B = {Matrix::Zero(2, 2)};
  const RegionSpec region = RegionSpec::Ball(2, 0.5);
  std::mt19937_64 rng(1);
  DecisionVars v = RandomVars(2, 1, rng, false);
  v.L.setZero();
  const Matrix q = BuildQ(v, sys, region);
  ASSERT_EQ(q.rows(), 2 + 1 + 2 + 2);
  EXPECT_TRUE(IsPositiveDefinite(q));
  EXPECT_LE((q.block(0, 2, 2, 5)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(q(2, 2), v.LambdaTilde(0, 0) * 2.0, 1e-14);
}

TEST(BuildQTest, SymbolicAndNumericAgreeAndAreSymmetric) {
  const ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  std::mt19937_64 rng(2);
  const DecisionVars v = RandomVars(3, 2, rng, true);
  const SymbolicVars s = SymbolicVars::FromValues(v);
  const Vector none;
  const Matrix q = BuildQ(v, p.system, p.region);
  const Matrix qgs = BuildQGS(v, p.system, p.region);
  const Matrix perf = BuildPerformance(v, p.system, p.region, *p.performance);
  EXPECT_TRUE(IsSymmetric(q));
  EXPECT_TRUE(IsSymmetric(qgs));
  EXPECT_TRUE(IsSymmetric(perf));
  EXPECT_EQ(q, BuildQ(s, p.system, p.region).constant());
  EXPECT_EQ(qgs, BuildQGS(s, p.system, p.region).constant());
  EXPECT_EQ(perf, BuildPerformance(s, p.system, p.region, *p.performance).constant());
  EXPECT_EQ(perf.rows(), 2 * 3 + 2 + 6 + 3);
  EXPECT_LE((perf.topLeftCorner(14, 14) - qgs).cwiseAbs().maxCoeff() -
                0.4 * (p.performance->channel.Bp *
                       p.performance->index.Qp_tilde() *
                       p.performance->channel.Bp.transpose())
                          .cwiseAbs()
                          .maxCoeff(),
            1e-12);
}

TEST(BuildQGSTest, ZeroLwReducesToQ) {
  std::mt19937_64 rng(3);
  const ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  for (int k = 0; k < 20; ++k) {
    DecisionVars v = RandomVars(3, 2, rng, false);
    v.Lw.setZero();
    EXPECT_EQ(BuildQGS(v, p.system, p.region), BuildQ(v, p.system, p.region));
  }
}

TEST(BuildQTest, PaperLinearControllerIsAdmissible) {
  const ProblemData p = Example1Stab();
  DecisionVars v;
  v.P = Matrix::Constant(1, 1, 0.9);
  v.L = Matrix::Constant(1, 1, -0.6178 * 0.9);
  v.Lw = Matrix::Zero(1, 1);
  bool found = false;
  for (double lt = 1e-3; lt < 1e3 && !found; lt *= 1.05) {
    v.LambdaTilde = Matrix::Constant(1, 1, lt);
    found = IsPositiveDefinite(BuildQ(v, p.system, p.region));
  }
  EXPECT_TRUE(found);
}

TEST(BuildQGSTest, PaperScheduledControllerIsAdmissible) {
  // u = −0.5324 z / (1 + 0.5762 z): K = −0.5324, Kw = −0.5762 and, for the
  // ball region, Lw = Kw·(Λ̃ ⊗ Q̃z) = −Kw·Λ̃.
  const ProblemData p = Example1Stab();
  DecisionVars v;
  v.P = Matrix::Constant(1, 1, 0.9);
  v.L = Matrix::Constant(1, 1, -0.5324 * 0.9);
  bool found = false;
  for (double lt = 1e-3; lt < 1e3 && !found; lt *= 1.05) {
    v.LambdaTilde = Matrix::Constant(1, 1, lt);
    v.Lw = Matrix::Constant(1, 1, 0.5762 * lt);
    found = IsPositiveDefinite(BuildQGS(v, p.system, p.region));
  }
  EXPECT_TRUE(found);
}

TEST(BuildInvarianceTest, BallRegionScalarChain) {
  const RegionSpec region = RegionSpec::Ball(1, 0.9);
  DecisionVars v;
  v.P = Matrix::Constant(1, 1, 0.5);
  v.nu = 0.7;
  const Matrix inv = BuildInvariance(v, region);
  EXPECT_NEAR(inv(0, 0), 0.5 - 0.7, 1e-14);
  EXPECT_NEAR(inv(1, 1), 0.7 / 0.9 - 1.0, 1e-14);
  EXPECT_NEAR(inv(0, 1), 0.0, 1e-14);

  v.P(0, 0) = 0.9;
  v.nu = 0.9;
  EXPECT_NEAR(MaxEig(BuildInvariance(v, region)), 0.0, 1e-14);

  v.P(0, 0) = 0.95;
  for (double nu = 0.01; nu < 5.0; nu += 0.01) {
    v.nu = nu;
    EXPECT_GT(MaxEig(BuildInvariance(v, region)), 0.0);
  }
}

TEST(BuildPerformanceTest, GainIndexCornerBlock) {
  const ProblemData p = LoadProblem(test::Fixture("example1_perf.json"));
  std::mt19937_64 rng(4);
  const DecisionVars v = RandomVars(1, 1, rng, true);
  const Matrix perf = BuildPerformance(v, p.system, p.region, *p.performance);
  ASSERT_EQ(perf.rows(), 5);
  EXPECT_NEAR(perf(4, 4), *v.lambda_tilde, 1e-14);
}

TEST(SynthesizeStabilityTest, Example1BothModes) {
  for (Mode mode : {Mode::kLinear, Mode::kGainScheduled}) {
    SynthesisOptions opts;
    opts.mode = mode;
    const SynthesisResult r = SynthesizeStability(Example1Stab(), opts);
    ASSERT_TRUE(r.accepted()) << r.message;
    EXPECT_NEAR(r.vars.P(0, 0), 0.9, 1e-3);
    if (mode == Mode::kLinear) EXPECT_EQ(r.vars.Lw.cwiseAbs().maxCoeff(), 0.0);
    for (const auto& [name, margin] : r.margins) {
      if (name == "invariance") {
        EXPECT_LE(margin, 1e-7);
      } else {
        EXPECT_GT(margin, 0.0) << name;
      }
    }
  }
}

TEST(SynthesizeStabilityTest, MarginsReproduceFromExpressions) {
  const ProblemData p = LoadProblem(test::Fixture("example2_cattle.json"));
  SynthesisOptions opts;
  const SynthesisResult r = SynthesizeStability(p, opts);
  ASSERT_TRUE(r.accepted());
  const auto margins = EvaluateSynthesisMargins(p, r.vars, r.mode);
  for (const auto& [name, margin] : r.margins) {
    ASSERT_TRUE(margins.count(name)) << name;
    EXPECT_NEAR(margins.at(name), margin, 1e-6) << name;
  }
}

TEST(SynthesizeStabilityTest, RegionThroughUncontrollablePointIsInfeasible) {
  for (Mode mode : {Mode::kLinear, Mode::kGainScheduled}) {
    SynthesisOptions opts;
    opts.mode = mode;
    EXPECT_TRUE(SynthesizeStability(Example1Stab(0.99), opts).accepted());
    const SynthesisResult r = SynthesizeStability(Example1Stab(1.0), opts);
    EXPECT_FALSE(r.accepted());
  }
}

TEST(SynthesizeStabilityTest, SchedulingNeverShrinksTheRegion) {
  const ProblemData p = LoadProblem(test::Fixture("example2_cattle.json"));
  for (double level : {0.2, 0.25, 0.28}) {
    const ProblemData q = RegionAtLevel(p, level);
    SynthesisOptions lin, gs;
    lin.mode = Mode::kLinear;
    const SynthesisResult rl = SynthesizeStability(q, lin);
    const SynthesisResult rg = SynthesizeStability(q, gs);
    ASSERT_TRUE(rl.accepted());
    ASSERT_TRUE(rg.accepted());
    EXPECT_GE(rg.objective, rl.objective - 1e-6);
  }
  EXPECT_TRUE(SynthesizeStability(p).accepted());
}

TEST(SynthesizeStabilityTest, ScaledIdentityMultiplierIsDiagonal) {
  SynthesisOptions opts;
  opts.multiplier = Multiplier::kScaledIdentity;
  ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  const SynthesisResult r = SynthesizeStability(p, opts);
  ASSERT_TRUE(r.accepted()) << r.message;
  const Matrix& lt = r.vars.LambdaTilde;
  EXPECT_EQ(lt(0, 1), 0.0);
  EXPECT_EQ(lt(0, 0), lt(1, 1));
}

TEST(SynthesizePerformanceTest, LargeGammaRecoversStabilityRegion) {
  const ProblemData p = LoadProblem(test::Fixture("example1_perf.json"));
  SynthesisOptions opts;
  opts.mode = Mode::kLinear;
  const SynthesisResult r = SynthesizePerformance(p, 1e6, opts);
  ASSERT_TRUE(r.accepted());
  EXPECT_NEAR(r.vars.P(0, 0), 0.9, 1e-3);
  ASSERT_TRUE(r.gamma);
  EXPECT_EQ(*r.gamma, 1e6);
  EXPECT_THROW(SynthesizePerformance(p, -1.0, opts), ValidationError);
  EXPECT_THROW(SynthesizePerformance(Example1Stab(), opts), ValidationError);
}

// The fifth-column block paired with w must carry Λ̃ ⊗ Q̃z for the primal
// LMI to dualize into Ξ ≺ 0. At the minimal γ the LMI is tight, so with
// feedthrough on (u ⊗ z) and a non-spherical region Λ̃ ⊗ I_N in that block
// yields Ξ with a positive eigenvalue.
TEST(SynthesizePerformanceTest, DualCertificateWithFullFeedthrough) {
  const ProblemData p = CoupledProblem(5.0);
  const GammaResult g = MinimizeGamma(p, 0.0);
  const SynthesisResult& r = g.result;
  ASSERT_TRUE(r.accepted()) << r.message;
  EXPECT_LT(g.gamma, 1.0);
  ASSERT_NE(r.vars.Lw.cwiseAbs().maxCoeff(), 0.0);
  const Certificate cert = VerifyCertificate(r, p);
  EXPECT_LT(cert.xi_max_eig, 0.0);
  EXPECT_GT(cert.delta, 0.0);
}

TEST(MinimizeGammaTest, SchedulingBeatsLinear) {
  const ProblemData p = LoadProblem(test::Fixture("example1_perf.json"));
  SynthesisOptions lin, gs;
  lin.mode = Mode::kLinear;
  const GammaResult gl = MinimizeGamma(p, 0.5, lin);
  const GammaResult gg = MinimizeGamma(p, 0.5, gs);
  EXPECT_LE(gg.gamma, gl.gamma * (1.0 + 1e-3));
  EXPECT_GE(gg.result.objective, 0.5 - 1e-6);
  EXPECT_FALSE(gl.log.empty());
}

TEST(MinimizeGammaTest, UnreachableTargetThrows) {
  const ProblemData p = LoadProblem(test::Fixture("example1_perf.json"));
  EXPECT_THROW(MinimizeGamma(p, 0.95), InfeasibleError);
}

TEST(SweepTest, LevelHelpers) {
  const ProblemData p = LoadProblem(test::Fixture("example2_cattle.json"));
  const ProblemData q = RegionAtLevel(p, 0.2);
  EXPECT_NEAR(q.region.Rz()(0, 0), 0.2, 1e-15);
  EXPECT_NEAR(TraceAtLevel(p, 0.2), 0.4, 1e-12);
  EXPECT_TRUE(SweepGammaVsP(LoadProblem(test::Fixture("example1_perf.json")), {})
                  .empty());
}

}  // namespace
}  // namespace bilsyn
