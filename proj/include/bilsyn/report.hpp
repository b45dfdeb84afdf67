#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bilsyn/analysis.hpp"
#include "bilsyn/controller.hpp"
#include "bilsyn/synthesis.hpp"

namespace bilsyn {

struct CheckResult {
  std::string name;
  enum class Outcome { kPass, kFail, kSkipped } outcome = Outcome::kPass;
  std::string detail;
};
std::string ToString(CheckResult::Outcome outcome);

struct VerificationSummary {
  std::vector<CheckResult> checks;
  std::optional<Certificate> certificate;

  bool passed() const;
  std::vector<std::string> failures() const;
};

struct VerifyOptions {
  int samples = 10000;
  std::uint64_t seed = 1;
};

/// Recomputed LMI margins, Ξ ≺ 0 with ρ/ε/δ, Z_RoA ⊆ Z, sampled Lyapunov
/// decrease and, for performance designs, sampled robust invariance and
/// dissipation. Never throws on a failed check.
VerificationSummary VerifyAll(const SynthesisResult& result,
                              const ProblemData& problem,
                              const VerifyOptions& options = {});

/// FNV-1a digest of the canonical problem JSON.
std::string ProblemDigest(const ProblemData& problem);

struct RunReport {
  std::string problem_name;
  std::string problem_digest;
  SynthesisResult result;
  std::optional<RationalController> controller;
  std::optional<VerificationSummary> verification;
};

RunReport MakeReport(const ProblemData& problem, const SynthesisResult& result,
                     std::optional<VerificationSummary> verification);

std::string ReportToJson(const RunReport& report);
/// Reads back the fields needed to re-verify a design.
RunReport ReportFromJson(const std::string& text);
RunReport LoadReport(const std::string& path);

}  // namespace bilsyn
