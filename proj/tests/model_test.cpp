#include "bilsyn/model.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace bilsyn {
namespace {

std::string MessageOf(const std::string& json) {
  try {
    ParseProblem(json);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

TEST(BilinearSystemTest, StepMatchesKroneckerForm) {
  std::mt19937_64 rng(4);
  BilinearSystem sys;
  sys.A = test::RandomMatrix(3, 3, rng);
  sys.B0 = test::RandomMatrix(3, 2, rng);
  sys.B = {test::RandomMatrix(3, 3, rng), test::RandomMatrix(3, 3, rng)};
  const Vector z = test::RandomMatrix(3, 1, rng);
  const Vector u = test::RandomMatrix(2, 1, rng);
  const Vector kron = sys.A * z + sys.B0 * u + sys.Btilde() * Kron(u, z);
  EXPECT_LE((sys.Step(z, u) - kron).cwiseAbs().maxCoeff(), 1e-14);
  const auto split = BilinearSystem::SplitBtilde(sys.Btilde(), 3);
  ASSERT_EQ(split.size(), 2u);
  EXPECT_EQ(split[1], sys.B[1]);
}

TEST(RegionSpecTest, BallAndInverseBlocks) {
  const RegionSpec r = RegionSpec::Ball(2, 0.5);
  EXPECT_TRUE(r.Contains((Vector(2) << 0.5, 0.5).finished()));
  EXPECT_FALSE(r.Contains((Vector(2) << 0.6, 0.5).finished()));
  const Matrix prod = r.Full() * r.FullInverse();
  EXPECT_LE((prod - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(r.Qz_tilde()(0, 0), -1.0, 1e-14);
  EXPECT_NEAR(r.Rz_tilde()(0, 0), 2.0, 1e-14);
}

TEST(RegionSpecTest, OffsetRegionInverse) {
  const RegionSpec r = RegionSpec::Create(MakeMatrix({{-2, 0.3}, {0.3, -1}}),
                                          MakeMatrix({{0.1}, {-0.2}}),
                                          MakeMatrix({{0.4}}));
  const Matrix prod = r.Full() * r.FullInverse();
  EXPECT_LE((prod - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((r.Sz_hat() - r.Qz_tilde().inverse() * r.Sz_tilde())
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

TEST(RegionSpecTest, RejectsBadDefiniteness) {
  try {
    RegionSpec::Create(MakeMatrix({{1}}), MakeMatrix({{0}}), MakeMatrix({{1}}));
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("negative definite"), std::string::npos);
  }
  EXPECT_THROW(RegionSpec::Ball(1, -1.0), ValidationError);
  EXPECT_THROW(RegionSpec::Create(MakeMatrix({{-1}}), MakeMatrix({{0}}),
                                  MakeMatrix({{0}})),
               ValidationError);
}

TEST(PerformanceSpecTest, GainIndexAndSupply) {
  const PerformanceSpec g = PerformanceSpec::Gain(2.0, 1, 1);
  EXPECT_EQ(g.Qp()(0, 0), -4.0);
  ASSERT_TRUE(g.gamma());
  EXPECT_EQ(*g.gamma(), 2.0);
  EXPECT_NEAR(g.Supply(Vector::Ones(1), 3.0 * Vector::Ones(1)), 5.0, 1e-14);
  EXPECT_THROW(PerformanceSpec::Gain(0.0, 1, 1), ValidationError);
  EXPECT_THROW(PerformanceSpec::Create(MakeMatrix({{1}}), MakeMatrix({{0}}),
                                       MakeMatrix({{1}})),
               ValidationError);
}

TEST(ProblemJsonTest, FixturesLoadAndRoundTrip) {
  for (const char* name : {"example1_stab.json", "example1_perf.json",
                           "example2_cattle.json", "example3_mimo.json"}) {
    const ProblemData p = LoadProblem(test::Fixture(name));
    const ProblemData q = ParseProblem(SerializeProblem(p));
    EXPECT_EQ(SerializeProblem(p), SerializeProblem(q)) << name;
    EXPECT_EQ(p.system.A, q.system.A);
    EXPECT_EQ(p.region.Full(), q.region.Full());
  }
}

TEST(ProblemJsonTest, Example3Dimensions) {
  const ProblemData p = LoadProblem(test::Fixture("example3_mimo.json"));
  EXPECT_EQ(p.system.N(), 3);
  EXPECT_EQ(p.system.m(), 2);
  ASSERT_TRUE(p.has_performance());
  EXPECT_EQ(p.performance->channel.q(), 3);
  EXPECT_EQ(p.system.B[1](2, 2), 1.0);
}

TEST(ProblemJsonTest, OptionalFeedthroughsDefaultToZero) {
  const ProblemData p = ParseProblem(R"({
    "system": {"A": [[1]], "B0": [[1]], "B": [[[1]]]},
    "region": {"ball": 0.5},
    "performance": {"Bp": [[1]], "Cp": [[1]], "index": {"gamma": 2}}})");
  ASSERT_TRUE(p.has_performance());
  EXPECT_EQ(p.performance->channel.Dpw(0, 0), 0.0);
  EXPECT_EQ(p.performance->channel.Dpuz.cols(), 1);
}

TEST(ProblemJsonTest, SchemaErrorsNameTheField) {
  EXPECT_NE(MessageOf(R"({"system": {"A": [[1]], "B": [[[1]]]},
                          "region": {"ball": 1}})")
                .find("B0"),
            std::string::npos);
  EXPECT_NE(MessageOf(R"({"system": {"A": [[1]], "B0": [[1]], "B": [[[1]]]},
                          "region": {"Qz": [[1]], "Sz": [[0]], "Rz": [[1]]}})")
                .find("Qz must be negative definite"),
            std::string::npos);
  EXPECT_NE(MessageOf(R"({"system": {"A": [[1, 2]], "B0": [[1]], "B": [[[1]]]},
                          "region": {"ball": 1}})")
                .find("A"),
            std::string::npos);
  EXPECT_NE(MessageOf("{not json").find("JSON parse error"), std::string::npos);
  EXPECT_THROW(LoadProblem("/nonexistent/problem.json"), ValidationError);
}

TEST(ProblemDataTest, WithGainReplacesIndex) {
  const ProblemData p = LoadProblem(test::Fixture("example1_perf.json"));
  const ProblemData g = p.WithGain(3.0);
  EXPECT_EQ(*g.performance->index.gamma(), 3.0);
  const ProblemData s = LoadProblem(test::Fixture("example1_stab.json"));
  EXPECT_THROW(s.WithGain(1.0), ValidationError);
}

}  // namespace
}  // namespace bilsyn
