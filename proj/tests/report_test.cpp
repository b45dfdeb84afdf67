#include "bilsyn/report.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace bilsyn {
namespace {

const CheckResult* Find(const VerificationSummary& s, const std::string& name) {
  for (const auto& c : s.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

TEST(VerifyAllTest, PerformanceDesignPassesEveryCheck) {
  const ProblemData p = LoadProblem(test::Fixture("example1_perf.json"));
  const SynthesisResult r = SynthesizePerformance(p);
  const VerificationSummary s = VerifyAll(r, p, {2000, 1});
  EXPECT_TRUE(s.passed());
  EXPECT_TRUE(s.failures().empty());
  for (const char* name : {"lmi_margins", "invariance_lmi", "controller",
                           "xi_negative_definite", "roa_inclusion",
                           "lyapunov_decrease", "robust_invariance",
                           "dissipation"}) {
    const CheckResult* c = Find(s, name);
    ASSERT_NE(c, nullptr) << name;
    EXPECT_EQ(c->outcome, CheckResult::Outcome::kPass) << name << ": " << c->detail;
  }
  ASSERT_TRUE(s.certificate);
}

TEST(VerifyAllTest, StabilityDesignSkipsPerformanceChecks) {
  const ProblemData p = LoadProblem(test::Fixture("example2_cattle.json"));
  const VerificationSummary s = VerifyAll(SynthesizeStability(p), p, {2000, 1});
  EXPECT_TRUE(s.passed());
  ASSERT_NE(Find(s, "robust_invariance"), nullptr);
  EXPECT_EQ(Find(s, "robust_invariance")->outcome, CheckResult::Outcome::kSkipped);
  EXPECT_EQ(Find(s, "dissipation")->outcome, CheckResult::Outcome::kSkipped);
}

TEST(VerifyAllTest, TamperedPFails) {
  const ProblemData p = LoadProblem(test::Fixture("example1_stab.json"));
  SynthesisResult r = SynthesizeStability(p);
  r.vars.P(0, 0) = 1.2;
  const VerificationSummary s = VerifyAll(r, p, {2000, 1});
  EXPECT_FALSE(s.passed());
  EXPECT_FALSE(s.failures().empty());
}

TEST(ReportTest, JsonRoundTripIsByteStable) {
  const ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  const SynthesisResult r = SynthesizePerformance(p);
  const RunReport report = MakeReport(p, r, VerifyAll(r, p, {500, 1}));
  const std::string text = ReportToJson(report);
  const RunReport back = ReportFromJson(text);
  EXPECT_EQ(back.problem_digest, ProblemDigest(p));
  EXPECT_EQ(back.result.status, r.status);
  EXPECT_EQ(back.result.vars.P, r.vars.P);
  EXPECT_EQ(back.result.vars.Lw, r.vars.Lw);
  EXPECT_EQ(back.result.gamma, r.gamma);
  ASSERT_TRUE(back.controller);
  EXPECT_EQ(back.controller->Kw, report.controller->Kw);

  const SynthesisResult again = SynthesizePerformance(p);
  EXPECT_EQ(ReportToJson(MakeReport(p, again, VerifyAll(again, p, {500, 1}))),
            text);
}

TEST(ReportTest, InfeasibleReportHasNoController) {
  const ProblemData p = LoadProblem(test::Fixture("example1_stab.json"))
                            .WithRegion(RegionSpec::Ball(1, 1.0));
  const SynthesisResult r = SynthesizeStability(p);
  ASSERT_FALSE(r.accepted());
  const RunReport report = MakeReport(p, r, std::nullopt);
  EXPECT_FALSE(report.controller);
  const RunReport back = ReportFromJson(ReportToJson(report));
  EXPECT_EQ(back.result.status, SynthesisStatus::kInfeasible);
}

TEST(ReportTest, DigestTracksContent) {
  const ProblemData a = LoadProblem(test::Fixture("example1_stab.json"));
  const ProblemData b = a.WithRegion(RegionSpec::Ball(1, 0.8));
  EXPECT_EQ(ProblemDigest(a), ProblemDigest(a));
  EXPECT_NE(ProblemDigest(a), ProblemDigest(b));
  EXPECT_THROW(ReportFromJson("[]"), ValidationError);
}

}  // namespace
}  // namespace bilsyn
